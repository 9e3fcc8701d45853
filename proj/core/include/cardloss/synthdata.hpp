#pragma once

// Imbalanced synthetic classification data: one Gaussian cluster per class
// centred on a distinct vertex of the hypercube {+-class_sep}^informative,
// plus redundant columns that are a fixed random linear map of the
// informative ones.

#include "cardloss/invariants.hpp"

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <vector>

namespace cardloss {

/// Seeded stream of uniforms and Box-Muller normals. Reproducible across
/// runs of the same build.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  /// Uniform integer in [0, bound). bound must be positive.
  std::uint64_t below(std::uint64_t bound);

  template <class T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

struct DatasetSpec {
  int n_samples = 10000;
  int n_classes = 10;
  int n_informative = 15;
  int n_redundant = 5;
  double majority_fraction = 0.5;
  double class_sep = 1.0;
  std::uint64_t seed = 0;

  /// Throws InvalidSpec when the counts or hypercube cannot be realised.
  void validate() const;
  int n_features() const noexcept { return n_informative + n_redundant; }
};

/// Samples per class: class 0 is the majority with round(fraction * n),
/// the remainder is spread as evenly as possible, lower indices first.
std::vector<int> class_counts(const DatasetSpec& spec);

struct Dataset {
  Matrix features;
  std::vector<int> labels;
  int n_classes = 0;

  Index n_samples() const noexcept { return features.rows(); }
  /// Subset in the given row order.
  Dataset rows(std::span<const Index> indices) const;
};

struct SplitDataset {
  Dataset train;
  Dataset test;
  double split_ratio = 0.7;
  std::vector<Index> train_rows;
  std::vector<Index> test_rows;
};

Dataset generate(const DatasetSpec& spec);

/// Seeded shuffle, first round(ratio * n) rows go to train. Unstratified.
/// Throws InvalidArgument unless both parts are nonempty.
SplitDataset split(const Dataset& data, double ratio, std::uint64_t seed);

/// Header f0,...,f{d-1},label; features written with 17 significant digits.
void save_csv(const Dataset& data, const std::filesystem::path& path);

/// Throws IoError if unreadable, ParseError naming the 1-based line otherwise.
/// n_classes is max(label)+1 unless `n_classes` is given.
Dataset load_csv(const std::filesystem::path& path, int n_classes = 0);

}  // namespace cardloss
