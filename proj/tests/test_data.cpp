#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <vector>

#include <unistd.h>

#include "tac/data.hpp"
#include "tac/errors.hpp"
#include "tac/rng.hpp"

using namespace tac;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("tac-data-test-" + std::to_string(::getpid()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

void put_be32(std::ofstream& out, std::uint32_t v) {
  const unsigned char b[4] = {
      static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
      static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

// Two 4x4 images with bytes 16*i + p, labels 0 and 7.
void write_idx_fixture(const std::string& images, const std::string& labels,
                       std::uint32_t image_magic = 0x00000803,
                       std::uint32_t label_magic = 0x00000801,
                       std::uint32_t label_count = 2) {
  std::ofstream img(images, std::ios::binary);
  put_be32(img, image_magic);
  put_be32(img, 2);
  put_be32(img, 4);
  put_be32(img, 4);
  for (int i = 0; i < 2; ++i)
    for (int p = 0; p < 16; ++p)
      img.put(static_cast<char>(16 * i + p));
  std::ofstream lab(labels, std::ios::binary);
  put_be32(lab, label_magic);
  put_be32(lab, label_count);
  lab.put(0);
  lab.put(7);
}

}  // namespace

TEST_CASE("IDX loader decodes a hand-written byte fixture") {
  TempDir tmp;
  write_idx_fixture(tmp.file("img"), tmp.file("lab"));
  const Dataset ds = load_mnist_idx(tmp.file("img"), tmp.file("lab"));
  REQUIRE(ds.num_samples() == 2);
  CHECK(ds.input_shape == std::vector<std::size_t>{1, 4, 4});
  CHECK(ds.num_classes == 10);
  CHECK(ds.labels[0] == 1);  // byte 0 -> label 1
  CHECK(ds.labels[1] == 8);  // byte 7 -> label 8
  for (int i = 0; i < 2; ++i)
    for (int p = 0; p < 16; ++p)
      CHECK(ds.inputs[i * 16 + p] ==
            doctest::Approx((16 * i + p) / 255.0).epsilon(1e-12));
}

TEST_CASE("IDX loader rejects malformed files") {
  TempDir tmp;
  write_idx_fixture(tmp.file("img"), tmp.file("lab"), 0x00000802);
  CHECK_THROWS_AS(load_mnist_idx(tmp.file("img"), tmp.file("lab")),
                  FormatError);
  write_idx_fixture(tmp.file("img"), tmp.file("lab"), 0x00000803, 0x00000805);
  CHECK_THROWS_AS(load_mnist_idx(tmp.file("img"), tmp.file("lab")),
                  FormatError);
  // image / label count disagreement
  write_idx_fixture(tmp.file("img"), tmp.file("lab"), 0x00000803, 0x00000801,
                    3);
  CHECK_THROWS_AS(load_mnist_idx(tmp.file("img"), tmp.file("lab")),
                  FormatError);
  // truncated pixel payload
  {
    std::ofstream img(tmp.file("short"), std::ios::binary);
    put_be32(img, 0x00000803);
    put_be32(img, 2);
    put_be32(img, 4);
    put_be32(img, 4);
    img.put(1);  // far fewer than 32 pixel bytes
  }
  write_idx_fixture(tmp.file("img"), tmp.file("lab"));
  CHECK_THROWS_AS(load_mnist_idx(tmp.file("short"), tmp.file("lab")),
                  FormatError);
  CHECK_THROWS_AS(load_mnist_idx(tmp.file("missing"), tmp.file("lab")),
                  FormatError);
}

TEST_CASE("zero-count IDX pair loads as an empty dataset") {
  TempDir tmp;
  {
    std::ofstream img(tmp.file("img"), std::ios::binary);
    put_be32(img, 0x00000803);
    put_be32(img, 0);
    put_be32(img, 4);
    put_be32(img, 4);
    std::ofstream lab(tmp.file("lab"), std::ios::binary);
    put_be32(lab, 0x00000801);
    put_be32(lab, 0);
  }
  const Dataset ds = load_mnist_idx(tmp.file("img"), tmp.file("lab"));
  CHECK(ds.num_samples() == 0);
  CHECK(ds.input_shape == std::vector<std::size_t>{1, 4, 4});
}

TEST_CASE("IDX save/load round trip is exact for byte-valued data") {
  TempDir tmp;
  write_idx_fixture(tmp.file("img"), tmp.file("lab"));
  const Dataset ds = load_mnist_idx(tmp.file("img"), tmp.file("lab"));
  save_mnist_idx(ds, tmp.file("img2"), tmp.file("lab2"));
  const Dataset again = load_mnist_idx(tmp.file("img2"), tmp.file("lab2"));
  CHECK(again.inputs == ds.inputs);
  CHECK(again.labels == ds.labels);
  CHECK(again.input_shape == ds.input_shape);
}

TEST_CASE("blobs are deterministic and class-major") {
  BlobSpec spec;
  spec.num_classes = 3;
  spec.dim = 5;
  spec.per_class = 7;
  spec.seed = 42;
  const Dataset a = synth_blobs(spec);
  const Dataset b = synth_blobs(spec);
  CHECK(a.inputs == b.inputs);
  CHECK(a.labels == b.labels);
  REQUIRE(a.num_samples() == 21);
  for (std::size_t i = 0; i < 21; ++i)
    CHECK(a.labels[i] == static_cast<int>(i / 7) + 1);
  spec.seed = 43;
  const Dataset c = synth_blobs(spec);
  CHECK(a.inputs != c.inputs);
}

TEST_CASE("vanishing noise collapses each class onto its center") {
  BlobSpec spec;
  spec.num_classes = 3;
  spec.dim = 4;
  spec.per_class = 5;
  spec.separation = 6.0;
  spec.noise = 1e-9;
  spec.seed = 7;
  const Dataset ds = synth_blobs(spec);
  for (std::size_t k = 0; k < 3; ++k) {
    const double* first = ds.sample(k * 5);
    double norm = 0.0;
    for (std::size_t s = 1; s < 5; ++s) {
      const double* x = ds.sample(k * 5 + s);
      for (std::size_t d = 0; d < 4; ++d)
        CHECK(std::abs(x[d] - first[d]) < 1e-6);
    }
    for (std::size_t d = 0; d < 4; ++d) norm += first[d] * first[d];
    // centers live on the separation sphere
    CHECK(std::sqrt(norm) == doctest::Approx(6.0).epsilon(1e-6));
  }
}

TEST_CASE("nearest-centroid is perfect at high separation-to-noise ratio") {
  BlobSpec spec;
  spec.num_classes = 4;
  spec.dim = 10;
  spec.per_class = 50;
  spec.separation = 10.0;
  spec.noise = 1.0;
  spec.seed = 3;
  const Dataset ds = synth_blobs(spec);
  // centroids estimated from the data itself
  std::vector<std::vector<double>> centroid(4, std::vector<double>(10, 0.0));
  for (std::size_t i = 0; i < ds.num_samples(); ++i)
    for (std::size_t d = 0; d < 10; ++d)
      centroid[ds.labels[i] - 1][d] += ds.sample(i)[d] / 50.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ds.num_samples(); ++i) {
    std::size_t best = 0;
    double best_d = 1e300;
    for (std::size_t k = 0; k < 4; ++k) {
      double d2 = 0.0;
      for (std::size_t d = 0; d < 10; ++d) {
        const double diff = ds.sample(i)[d] - centroid[k][d];
        d2 += diff * diff;
      }
      if (d2 < best_d) {
        best_d = d2;
        best = k;
      }
    }
    hits += (static_cast<int>(best) + 1 == ds.labels[i]) ? 1 : 0;
  }
  CHECK(hits == ds.num_samples());
}

TEST_CASE("blob spec validation") {
  BlobSpec spec;
  spec.num_classes = 1;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = BlobSpec{};
  spec.noise = 0.0;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = BlobSpec{};
  spec.separation = -1.0;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
}

TEST_CASE("holdout split relabels densely and preserves the mapping") {
  BlobSpec spec;
  spec.num_classes = 5;
  spec.dim = 3;
  spec.per_class = 4;
  spec.seed = 9;
  const Dataset ds = synth_blobs(spec);
  const HoldoutResult result = holdout_split(ds, {2, 4});
  CHECK(result.in_dist.num_classes == 3);
  CHECK(result.in_dist.num_samples() == 12);
  CHECK(result.ood.num_samples() == 8);
  CHECK(result.original_labels == std::vector<int>{1, 3, 5});
  // every in-dist sample matches its original feature row
  std::size_t at = 0;
  for (std::size_t i = 0; i < ds.num_samples(); ++i) {
    if (ds.labels[i] == 2 || ds.labels[i] == 4) continue;
    for (std::size_t d = 0; d < 3; ++d)
      CHECK(result.in_dist.sample(at)[d] == ds.sample(i)[d]);
    CHECK(result.original_labels[result.in_dist.labels[at] - 1] ==
          ds.labels[i]);
    ++at;
  }
  for (int y : result.ood.labels) CHECK((y == 2 || y == 4));
}

TEST_CASE("holdout split edge cases") {
  BlobSpec spec;
  spec.num_classes = 2;
  spec.dim = 2;
  spec.per_class = 3;
  const Dataset ds = synth_blobs(spec);
  const HoldoutResult identity = holdout_split(ds, {});
  CHECK(identity.in_dist.inputs == ds.inputs);
  CHECK(identity.in_dist.labels == ds.labels);
  CHECK(identity.ood.num_samples() == 0);
  CHECK_THROWS_AS(holdout_split(ds, {3}), ConfigError);
  CHECK_THROWS_AS(holdout_split(ds, {1, 2}), ConfigError);
}

TEST_CASE("tail validation split keeps order") {
  BlobSpec spec;
  spec.num_classes = 2;
  spec.dim = 2;
  spec.per_class = 5;
  const Dataset ds = synth_blobs(spec);
  const auto [train, val] = split_tail_val(ds, 3);
  CHECK(train.num_samples() == 7);
  CHECK(val.num_samples() == 3);
  for (std::size_t i = 0; i < 7; ++i) CHECK(train.labels[i] == ds.labels[i]);
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(val.labels[i] == ds.labels[7 + i]);
  CHECK_THROWS_AS(split_tail_val(ds, 10), ConfigError);
}

TEST_CASE("batches partition the index range") {
  for (std::size_t n : {10, 17, 64}) {
    const auto bs = batches(n, 5, 99, 3);
    std::set<std::size_t> seen;
    for (const auto& b : bs) {
      CHECK(b.size() <= 5);
      for (std::size_t i : b) {
        CHECK(i < n);
        CHECK(seen.insert(i).second);  // no duplicates
      }
    }
    CHECK(seen.size() == n);
    // only the last batch may be short
    for (std::size_t bi = 0; bi + 1 < bs.size(); ++bi)
      CHECK(bs[bi].size() == 5);
  }
}

TEST_CASE("batches are seeded per epoch") {
  const auto a = batches(20, 4, 7, 0);
  const auto b = batches(20, 4, 7, 0);
  const auto c = batches(20, 4, 7, 1);
  CHECK(a == b);
  CHECK(a != c);
  const auto one = batches(6, 100, 0, 0);
  REQUIRE(one.size() == 1);
  CHECK(one[0].size() == 6);
  CHECK_THROWS_AS(batches(5, 0, 0, 0), ConfigError);
}

TEST_CASE("normalization statistics come from the train split only") {
  BlobSpec spec;
  spec.num_classes = 3;
  spec.dim = 4;
  spec.per_class = 30;
  spec.seed = 17;
  Dataset train = synth_blobs(spec);
  spec.seed = 18;
  Dataset test = synth_blobs(spec);

  const Normalization norm = fit_normalization(train, true);
  const std::vector<double> test_before = test.inputs;
  Dataset train_copy = train;
  norm.apply(train_copy);
  norm.apply(test);

  // train becomes standardized per feature
  const std::size_t n = train_copy.num_samples();
  for (std::size_t d = 0; d < 4; ++d) {
    double mean = 0.0, var = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += train_copy.sample(i)[d];
    mean /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double v = train_copy.sample(i)[d] - mean;
      var += v * v;
    }
    var /= static_cast<double>(n);
    CHECK(mean == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(var == doctest::Approx(1.0).epsilon(1e-10));
  }
  // test uses the train statistics, not its own
  for (std::size_t i = 0; i < test.inputs.size(); ++i)
    CHECK(test.inputs[i] ==
          doctest::Approx((test_before[i] - norm.mean[i % 4]) /
                          norm.scale[i % 4])
              .epsilon(1e-12));
}

TEST_CASE("global normalization uses one mean and scale") {
  BlobSpec spec;
  spec.num_classes = 2;
  spec.dim = 3;
  spec.per_class = 10;
  Dataset ds = synth_blobs(spec);
  const Normalization norm = fit_normalization(ds, false);
  REQUIRE(norm.mean.size() == 1);
  REQUIRE(norm.scale.size() == 1);
  double m = 0.0;
  for (double v : ds.inputs) m += v;
  m /= static_cast<double>(ds.inputs.size());
  CHECK(norm.mean[0] == doctest::Approx(m).epsilon(1e-12));
}

TEST_CASE("blobs CSV round trip") {
  TempDir tmp;
  BlobSpec spec;
  spec.num_classes = 3;
  spec.dim = 4;
  spec.per_class = 6;
  spec.seed = 23;
  const Dataset ds = synth_blobs(spec);
  save_blobs_csv(ds, tmp.file("blobs.csv"));
  const Dataset again = load_blobs_csv(tmp.file("blobs.csv"));
  CHECK(again.labels == ds.labels);
  CHECK(again.num_classes == ds.num_classes);
  CHECK(again.input_shape == ds.input_shape);
  REQUIRE(again.inputs.size() == ds.inputs.size());
  for (std::size_t i = 0; i < ds.inputs.size(); ++i)
    CHECK(again.inputs[i] == doctest::Approx(ds.inputs[i]).epsilon(1e-15));
  CHECK_THROWS_AS(load_blobs_csv(tmp.file("missing.csv")), FormatError);
}

TEST_CASE("dataset subset copies rows in order") {
  BlobSpec spec;
  spec.num_classes = 2;
  spec.dim = 3;
  spec.per_class = 4;
  const Dataset ds = synth_blobs(spec);
  const Dataset sub = ds.subset({5, 0, 2});
  REQUIRE(sub.num_samples() == 3);
  CHECK(sub.labels[0] == ds.labels[5]);
  CHECK(sub.labels[2] == ds.labels[2]);
  for (std::size_t d = 0; d < 3; ++d)
    CHECK(sub.sample(1)[d] == ds.sample(0)[d]);
}
