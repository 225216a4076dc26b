#pragma once

#include <iosfwd>
#include <string>

#include "tac/model.hpp"

namespace tac {

/// Structured text container holding the architecture descriptor, the slice
/// spec, the embedded codebook, the mode flag, and every parameter blob as
/// hex-encoded little-endian 64-bit floats (base parameters first, then the
/// projection stacks in tap order). Round-trips bit-exactly.
void save_checkpoint(const TacModel& model, std::ostream& out);
void save_checkpoint(const TacModel& model, const std::string& path);

TacModel load_checkpoint(std::istream& in);
TacModel load_checkpoint(const std::string& path);

}  // namespace tac
