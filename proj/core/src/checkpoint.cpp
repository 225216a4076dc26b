#include "tac/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "tac/errors.hpp"
#include "tac/rng.hpp"

namespace tac {

namespace {

constexpr char kMagic[] = "tac-checkpoint v1";

std::string encode_blob(std::span<const double> values) {
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(values.size() * 16);
  for (double v : values) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    for (int byte = 0; byte < 8; ++byte) {  // little-endian byte order
      const unsigned b = static_cast<unsigned>((bits >> (8 * byte)) & 0xFF);
      out.push_back(hex[b >> 4]);
      out.push_back(hex[b & 0xF]);
    }
  }
  return out;
}

int hex_digit(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  throw FormatError("checkpoint: invalid hex digit");
}

std::vector<double> decode_blob(const std::string& text) {
  if (text.size() % 16 != 0)
    throw FormatError("checkpoint: parameter blob length not a multiple of 16");
  std::vector<double> values(text.size() / 16);
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint64_t bits = 0;
    for (int byte = 0; byte < 8; ++byte) {
      const int hi = hex_digit(text[i * 16 + 2 * byte]);
      const int lo = hex_digit(text[i * 16 + 2 * byte + 1]);
      bits |= static_cast<std::uint64_t>((hi << 4) | lo) << (8 * byte);
    }
    std::memcpy(&values[i], &bits, sizeof(double));
  }
  return values;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string expect_line(std::istream& in, const char* what) {
  std::string line;
  if (!std::getline(in, line))
    throw FormatError(std::string("checkpoint: truncated before ") + what);
  return line;
}

std::string expect_field(std::istream& in, const std::string& key) {
  std::istringstream line(expect_line(in, key.c_str()));
  std::string found, rest;
  line >> found;
  if (found != key)
    throw FormatError("checkpoint: expected '" + key + "', found '" + found +
                      "'");
  std::getline(line, rest);
  const std::size_t at = rest.find_first_not_of(' ');
  return at == std::string::npos ? std::string() : rest.substr(at);
}

}  // namespace

void save_checkpoint(const TacModel& model, std::ostream& out) {
  out << kMagic << "\n";
  out << "mode " << (model.mode == TacMode::Scratch ? "scratch" : "addon")
      << "\n";
  out << "arch " << model.base.arch.name << "\n";
  out << "input-shape";
  for (std::size_t d : model.base.arch.input_shape) out << " " << d;
  out << "\n";
  out << "num-classes " << model.base.arch.num_classes << "\n";
  out << "head " << (model.base.arch.has_head ? 1 : 0) << "\n";
  out << "transform " << transform_name(model.transform) << "\n";
  out << "reduce " << (model.reduce_mode == ReduceMode::Sum ? "sum" : "mean")
      << "\n";
  out << "loss " << fmt(model.loss.alpha) << " " << fmt(model.loss.beta) << " "
      << fmt(model.loss.tau) << " " << metric_name(model.loss.metric) << " "
      << transform_name(model.loss.transform) << " "
      << fmt(model.loss.mixup_concentration) << "\n";
  out << "slices " << model.slices.layers.size() << "\n";
  for (const auto& layer : model.slices.layers)
    out << "slice " << layer.layer_id << " " << layer.width << " "
        << layer.n_slices << "\n";
  if (model.mode == TacMode::AddOn) {
    if (model.projections.empty())
      throw SpecError("save_checkpoint: add-on model without projections");
    out << "projection "
        << projection_size_name(model.projections[0].config().size) << "\n";
  }
  out << "codebook-begin\n";
  model.book.save(out);
  out << "codebook-end\n";

  std::vector<std::span<const double>> blobs;
  for (const auto& p : model.base.params) blobs.push_back(p.data());
  for (const auto& stack : model.projections)
    for (const auto& p : stack.params()) blobs.push_back(p.data());
  out << "params " << blobs.size() << "\n";
  for (std::size_t i = 0; i < blobs.size(); ++i)
    out << "param " << i << " " << blobs[i].size() << " "
        << encode_blob(blobs[i]) << "\n";
  out << "end\n";
  if (!out) throw FormatError("checkpoint: write failed");
}

void save_checkpoint(const TacModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("checkpoint: cannot open " + path);
  save_checkpoint(model, out);
}

TacModel load_checkpoint(std::istream& in) {
  if (expect_line(in, "magic") != kMagic)
    throw FormatError("checkpoint: bad magic line");
  const std::string mode_str = expect_field(in, "mode");
  if (mode_str != "scratch" && mode_str != "addon")
    throw FormatError("checkpoint: unknown mode " + mode_str);
  const std::string arch_name = expect_field(in, "arch");
  std::vector<std::size_t> input_shape;
  {
    std::istringstream shape(expect_field(in, "input-shape"));
    std::size_t d;
    while (shape >> d) input_shape.push_back(d);
  }
  const std::size_t num_classes = std::stoul(expect_field(in, "num-classes"));
  const bool head = expect_field(in, "head") == "1";
  const ProfileTransform transform =
      parse_transform(expect_field(in, "transform"));
  const std::string reduce_str = expect_field(in, "reduce");
  const ReduceMode reduce =
      reduce_str == "mean" ? ReduceMode::Mean : ReduceMode::Sum;

  LossConfig loss;
  {
    std::istringstream fields(expect_field(in, "loss"));
    std::string metric_str, transform_str;
    if (!(fields >> loss.alpha >> loss.beta >> loss.tau >> metric_str >>
          transform_str >> loss.mixup_concentration))
      throw FormatError("checkpoint: malformed loss line");
    loss.metric = parse_metric(metric_str);
    loss.transform = parse_transform(transform_str);
  }

  const std::size_t n_layers = std::stoul(expect_field(in, "slices"));
  std::vector<std::size_t> slice_counts;
  std::vector<LayerSlices> slice_layers;
  for (std::size_t i = 0; i < n_layers; ++i) {
    std::istringstream fields(expect_field(in, "slice"));
    LayerSlices layer;
    if (!(fields >> layer.layer_id >> layer.width >> layer.n_slices))
      throw FormatError("checkpoint: malformed slice line");
    slice_layers.push_back(layer);
    slice_counts.push_back(layer.n_slices);
  }

  ProjectionSize projection_size = ProjectionSize::Small;
  std::string line = expect_line(in, "codebook");
  if (line.rfind("projection ", 0) == 0) {
    projection_size = parse_projection_size(line.substr(11));
    line = expect_line(in, "codebook");
  }
  if (line != "codebook-begin")
    throw FormatError("checkpoint: expected codebook-begin");
  std::ostringstream book_text;
  while ((line = expect_line(in, "codebook-end")) != "codebook-end")
    book_text << line << "\n";
  std::istringstream book_in(book_text.str());
  const CodeBook book = CodeBook::load(book_in);

  Architecture arch = make_architecture(arch_name, input_shape, num_classes,
                                        head);
  Rng rng(0);
  BaseClassifier base{std::move(arch), {}};
  base.init(rng);

  TacModel model =
      mode_str == "scratch"
          ? make_scratch_model(base.arch, book, loss, slice_counts, rng)
          : make_addon_model(std::move(base), book, loss, slice_counts,
                             projection_size, rng);
  model.transform = transform;
  model.reduce_mode = reduce;
  if (model.slices.layers.size() != slice_layers.size())
    throw FormatError("checkpoint: slice spec mismatch");
  for (std::size_t i = 0; i < slice_layers.size(); ++i)
    if (model.slices.layers[i].layer_id != slice_layers[i].layer_id ||
        model.slices.layers[i].width != slice_layers[i].width ||
        model.slices.layers[i].n_slices != slice_layers[i].n_slices)
      throw FormatError("checkpoint: slice spec mismatch");

  std::vector<Tensor*> targets;
  for (auto& p : model.base.params) targets.push_back(&p);
  for (auto& stack : model.projections)
    for (auto& p : stack.params()) targets.push_back(&p);

  const std::size_t n_params = std::stoul(expect_field(in, "params"));
  if (n_params != targets.size())
    throw FormatError("checkpoint: expected " +
                      std::to_string(targets.size()) + " parameter blobs, " +
                      "found " + std::to_string(n_params));
  for (std::size_t i = 0; i < n_params; ++i) {
    std::istringstream fields(expect_field(in, "param"));
    std::size_t index = 0, count = 0;
    std::string blob;
    if (!(fields >> index >> count >> blob) || index != i)
      throw FormatError("checkpoint: malformed param line " +
                        std::to_string(i));
    const std::vector<double> values = decode_blob(blob);
    auto data = targets[i]->mutable_data();
    if (values.size() != count || values.size() != data.size())
      throw FormatError("checkpoint: param " + std::to_string(i) +
                        " has wrong size");
    std::memcpy(data.data(), values.data(), values.size() * sizeof(double));
  }
  if (expect_line(in, "end") != "end")
    throw FormatError("checkpoint: missing end marker");
  return model;
}

TacModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("checkpoint: cannot open " + path);
  return load_checkpoint(in);
}

}  // namespace tac
