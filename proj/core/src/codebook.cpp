#include "tac/codebook.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "tac/errors.hpp"
#include "tac/rng.hpp"

namespace tac {

DistanceMetric parse_metric(const std::string& name) {
  if (name == "L0" || name == "l0") return DistanceMetric::L0;
  if (name == "L1" || name == "l1") return DistanceMetric::L1;
  if (name == "L2" || name == "l2") return DistanceMetric::L2;
  if (name == "Linf" || name == "linf") return DistanceMetric::Linf;
  if (name == "cosine") return DistanceMetric::Cosine;
  throw ConfigError("unknown distance metric: " + name);
}

std::string metric_name(DistanceMetric metric) {
  switch (metric) {
    case DistanceMetric::L0: return "L0";
    case DistanceMetric::L1: return "L1";
    case DistanceMetric::L2: return "L2";
    case DistanceMetric::Linf: return "Linf";
    case DistanceMetric::Cosine: return "cosine";
  }
  return "?";
}

bool metric_trainable(DistanceMetric metric) {
  return metric == DistanceMetric::L1 || metric == DistanceMetric::L2 ||
         metric == DistanceMetric::Cosine;
}

CodeBook CodeBook::generate(std::size_t num_classes, std::size_t length,
                            std::uint64_t seed) {
  if (num_classes < 2) throw ConfigError("codebook: need at least 2 classes");
  if (length < 1) throw ConfigError("codebook: code length must be >= 1");
  if (length < 64 && (1ull << length) <= num_classes)
    throw ConfigError("codebook infeasible: 2^" + std::to_string(length) +
                      " <= " + std::to_string(num_classes) + " classes");
  for (std::uint64_t s = seed;; ++s) {
    Rng rng(s);
    std::vector<double> bits(num_classes * length);
    for (double& b : bits) b = rng.bernoulli(0.5) ? 1.0 : 0.0;
    std::set<std::vector<double>> rows;
    bool distinct = true;
    for (std::size_t k = 0; k < num_classes && distinct; ++k)
      distinct = rows
                     .emplace(bits.begin() + k * length,
                              bits.begin() + (k + 1) * length)
                     .second;
    if (distinct) {
      CodeBook book;
      book.k_ = num_classes;
      book.l_ = length;
      book.seed_ = s;
      book.bits_ = std::move(bits);
      return book;
    }
  }
}

std::span<const double> CodeBook::code(std::size_t label) const {
  if (label < 1 || label > k_)
    throw DimensionError("codebook: class label out of range");
  return {bits_.data() + (label - 1) * l_, l_};
}

void CodeBook::save(std::ostream& out) const {
  out << "tac-codebook v1\n";
  out << "K " << k_ << "\n";
  out << "L " << l_ << "\n";
  out << "seed " << seed_ << "\n";
  for (std::size_t k = 0; k < k_; ++k) {
    out << "row ";
    for (std::size_t l = 0; l < l_; ++l)
      out << (bits_[k * l_ + l] > 0.5 ? '1' : '0');
    out << "\n";
  }
}

void CodeBook::save_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open for write: " + path);
  save(out);
}

CodeBook CodeBook::load(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "tac-codebook v1")
    throw FormatError("codebook: bad header");
  CodeBook book;
  auto expect_field = [&](const std::string& key) -> std::string {
    if (!std::getline(in, line))
      throw FormatError("codebook: truncated at field " + key);
    std::istringstream ls(line);
    std::string k, v;
    ls >> k >> v;
    if (k != key) throw FormatError("codebook: expected field " + key);
    return v;
  };
  book.k_ = std::stoull(expect_field("K"));
  book.l_ = std::stoull(expect_field("L"));
  book.seed_ = std::stoull(expect_field("seed"));
  book.bits_.resize(book.k_ * book.l_);
  for (std::size_t k = 0; k < book.k_; ++k) {
    if (!std::getline(in, line))
      throw FormatError("codebook: truncated at row " + std::to_string(k));
    std::istringstream ls(line);
    std::string tag, row;
    ls >> tag >> row;
    if (tag != "row" || row.size() != book.l_)
      throw FormatError("codebook: malformed row " + std::to_string(k));
    for (std::size_t l = 0; l < book.l_; ++l) {
      if (row[l] != '0' && row[l] != '1')
        throw FormatError("codebook: bit must be 0 or 1");
      book.bits_[k * book.l_ + l] = row[l] == '1' ? 1.0 : 0.0;
    }
  }
  return book;
}

CodeBook CodeBook::load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open: " + path);
  return load(in);
}

double distance(std::span<const double> u, std::span<const double> v,
                DistanceMetric metric) {
  if (u.size() != v.size())
    throw DimensionError("distance: vector lengths differ");
  switch (metric) {
    case DistanceMetric::L0: {
      double n = 0.0;
      for (std::size_t i = 0; i < u.size(); ++i)
        if (std::fabs(u[i] - v[i]) > 1e-9) n += 1.0;
      return n;
    }
    case DistanceMetric::L1: {
      double s = 0.0;
      for (std::size_t i = 0; i < u.size(); ++i) s += std::fabs(u[i] - v[i]);
      return s;
    }
    case DistanceMetric::L2: {
      double s = 0.0;
      for (std::size_t i = 0; i < u.size(); ++i) {
        const double d = u[i] - v[i];
        s += d * d;
      }
      return std::sqrt(s);
    }
    case DistanceMetric::Linf: {
      double m = 0.0;
      for (std::size_t i = 0; i < u.size(); ++i)
        m = std::max(m, std::fabs(u[i] - v[i]));
      return m;
    }
    case DistanceMetric::Cosine: {
      double uu = 0.0, vv = 0.0, uv = 0.0;
      for (std::size_t i = 0; i < u.size(); ++i) {
        uu += u[i] * u[i];
        vv += v[i] * v[i];
        uv += u[i] * v[i];
      }
      if (uu == 0.0 || vv == 0.0)
        throw NumericError("cosine distance undefined for zero vector");
      return 1.0 - uv / (std::sqrt(uu) * std::sqrt(vv));
    }
  }
  throw NumericError("distance: unreachable");
}

NearestCode nearest_code(std::span<const double> profile, const CodeBook& book,
                         DistanceMetric metric) {
  if (profile.size() != book.length())
    throw DimensionError("nearest_code: profile length != code length");
  NearestCode best;
  best.dist = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k <= book.num_classes(); ++k) {
    const double d = distance(profile, book.code(k), metric);
    if (d < best.dist) {
      best.dist = d;
      best.label = k;
    }
  }
  return best;
}

PairwiseStats pairwise_stats(const CodeBook& book) {
  if (book.num_classes() < 2)
    throw DimensionError("pairwise_stats: need at least 2 codes");
  PairwiseStats stats;
  stats.min = std::numeric_limits<double>::infinity();
  stats.max = 0.0;
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 1; i <= book.num_classes(); ++i)
    for (std::size_t j = i + 1; j <= book.num_classes(); ++j) {
      double h = 0.0;
      const auto ci = book.code(i);
      const auto cj = book.code(j);
      for (std::size_t l = 0; l < book.length(); ++l)
        if (ci[l] != cj[l]) h += 1.0;
      stats.min = std::min(stats.min, h);
      stats.max = std::max(stats.max, h);
      total += h;
      ++pairs;
    }
  stats.mean = total / static_cast<double>(pairs);
  return stats;
}

}  // namespace tac
