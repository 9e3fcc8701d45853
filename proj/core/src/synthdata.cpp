#include "cardloss/synthdata.hpp"

#include "cardloss/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>
#include <string>

namespace cardloss {

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_normal_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_normal_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

std::uint64_t Rng::below(std::uint64_t bound) {
  if (bound == 0) throw InvalidArgument("Rng::below: bound must be positive");
  // rejection sampling keeps the result unbiased
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x = engine_();
  while (x >= limit) x = engine_();
  return x % bound;
}

void DatasetSpec::validate() const {
  if (n_samples < 1) throw InvalidSpec("n_samples must be positive");
  if (n_classes < 1) throw InvalidSpec("n_classes must be positive");
  if (n_informative < 1) throw InvalidSpec("n_informative must be positive");
  if (n_redundant < 0) throw InvalidSpec("n_redundant must be nonnegative");
  if (!(class_sep > 0.0) || !std::isfinite(class_sep)) throw InvalidSpec("class_sep must be positive");
  if (n_informative < 63 && (std::uint64_t{1} << n_informative) < static_cast<std::uint64_t>(n_classes)) {
    throw InvalidSpec(std::to_string(n_classes) + " classes need more than " +
                      std::to_string(n_informative) + " informative features");
  }
  if (n_classes == 1) return;
  if (!(majority_fraction > 1.0 / n_classes) || !(majority_fraction < 1.0)) {
    throw InvalidSpec("majority_fraction must lie in (1/n_classes, 1)");
  }
  const auto majority = static_cast<int>(std::lround(majority_fraction * n_samples));
  if (n_samples - majority < n_classes - 1) {
    throw InvalidSpec("too few samples to give every minority class at least one row");
  }
}

std::vector<int> class_counts(const DatasetSpec& spec) {
  spec.validate();
  if (spec.n_classes == 1) return {spec.n_samples};
  const auto majority = static_cast<int>(std::lround(spec.majority_fraction * spec.n_samples));
  const int remainder = spec.n_samples - majority;
  const int minorities = spec.n_classes - 1;
  std::vector<int> counts(static_cast<std::size_t>(spec.n_classes), remainder / minorities);
  counts[0] = majority;
  for (int k = 0; k < remainder % minorities; ++k) ++counts[static_cast<std::size_t>(k + 1)];
  return counts;
}

Dataset Dataset::rows(std::span<const Index> indices) const {
  Dataset out;
  out.n_classes = n_classes;
  out.features.resize(static_cast<Index>(indices.size()), features.cols());
  out.labels.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    out.features.row(static_cast<Index>(i)) = features.row(indices[i]);
    out.labels.push_back(labels[static_cast<std::size_t>(indices[i])]);
  }
  return out;
}

Dataset generate(const DatasetSpec& spec) {
  const std::vector<int> counts = class_counts(spec);
  Rng rng(spec.seed);

  const int inf = spec.n_informative;
  Matrix vertices(spec.n_classes, inf);
  std::set<std::vector<bool>> used;
  for (int c = 0; c < spec.n_classes; ++c) {
    std::vector<bool> signs(static_cast<std::size_t>(inf));
    do {
      for (int j = 0; j < inf; ++j) signs[static_cast<std::size_t>(j)] = rng.uniform() < 0.5;
    } while (!used.insert(signs).second);
    for (int j = 0; j < inf; ++j) {
      vertices(c, j) = signs[static_cast<std::size_t>(j)] ? spec.class_sep : -spec.class_sep;
    }
  }

  Matrix mixing(inf, spec.n_redundant);
  for (Index i = 0; i < mixing.rows(); ++i) {
    for (Index j = 0; j < mixing.cols(); ++j) mixing(i, j) = rng.uniform(-1.0, 1.0);
  }

  std::vector<int> labels;
  labels.reserve(static_cast<std::size_t>(spec.n_samples));
  for (int c = 0; c < spec.n_classes; ++c) labels.insert(labels.end(), static_cast<std::size_t>(counts[static_cast<std::size_t>(c)]), c);
  rng.shuffle(labels);

  Dataset out;
  out.n_classes = spec.n_classes;
  out.labels = std::move(labels);
  out.features.resize(spec.n_samples, spec.n_features());
  for (Index i = 0; i < spec.n_samples; ++i) {
    const int c = out.labels[static_cast<std::size_t>(i)];
    for (int j = 0; j < inf; ++j) out.features(i, j) = vertices(c, j) + rng.normal();
  }
  if (spec.n_redundant > 0) {
    out.features.rightCols(spec.n_redundant) = out.features.leftCols(inf) * mixing;
  }
  return out;
}

SplitDataset split(const Dataset& data, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0) || !(ratio < 1.0)) throw InvalidArgument("split ratio must lie in (0, 1)");
  const Index n = data.n_samples();
  const auto n_train = static_cast<Index>(std::llround(ratio * static_cast<double>(n)));
  if (n_train <= 0 || n_train >= n) {
    throw InvalidArgument("split ratio " + std::to_string(ratio) + " leaves an empty partition of " +
                          std::to_string(n) + " rows");
  }
  std::vector<Index> order(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  Rng rng(seed);
  rng.shuffle(order);

  SplitDataset out;
  out.split_ratio = ratio;
  out.train_rows.assign(order.begin(), order.begin() + n_train);
  out.test_rows.assign(order.begin() + n_train, order.end());
  out.train = data.rows(out.train_rows);
  out.test = data.rows(out.test_rows);
  return out;
}

void save_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  for (Index j = 0; j < data.features.cols(); ++j) os << 'f' << j << ',';
  os << "label\n";
  char buf[32];
  for (Index i = 0; i < data.n_samples(); ++i) {
    for (Index j = 0; j < data.features.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", data.features(i, j));
      os << buf << ',';
    }
    os << data.labels[static_cast<std::size_t>(i)] << '\n';
  }
  if (!os) throw IoError("write to " + path.string() + " failed");
}

Dataset load_csv(const std::filesystem::path& path, int n_classes) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());

  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(is, line)) throw ParseError(path.string() + ": empty file", 1);
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();

  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  if (header.size() < 2 || header.back() != "label") {
    throw ParseError(path.string() + ":1: header must be f0,...,label", 1);
  }
  const std::size_t d = header.size() - 1;
  for (std::size_t j = 0; j < d; ++j) {
    if (header[j] != "f" + std::to_string(j)) {
      throw ParseError(path.string() + ":1: unexpected column name '" + header[j] + "'", 1);
    }
  }

  std::vector<double> values;
  std::vector<int> labels;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fail = [&](const std::string& why) {
      return ParseError(path.string() + ":" + std::to_string(line_no) + ": " + why, line_no);
    };
    const char* p = line.data();
    const char* end = line.data() + line.size();
    for (std::size_t j = 0; j <= d; ++j) {
      const char* stop = std::find(p, end, ',');
      if (j < d) {
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(p, stop, v);
        if (ec != std::errc() || ptr != stop || !std::isfinite(v)) {
          throw fail("bad feature value in column " + std::to_string(j));
        }
        values.push_back(v);
        if (stop == end) throw fail("expected " + std::to_string(d + 1) + " columns");
      } else {
        if (stop != end) throw fail("expected " + std::to_string(d + 1) + " columns");
        int label = 0;
        const auto [ptr, ec] = std::from_chars(p, stop, label);
        if (ec != std::errc() || ptr != stop || label < 0) throw fail("bad label");
        labels.push_back(label);
      }
      p = stop + 1;
    }
  }
  if (labels.empty()) throw ParseError(path.string() + ": no data rows", line_no);

  Dataset out;
  out.labels = std::move(labels);
  out.features.resize(static_cast<Index>(out.labels.size()), static_cast<Index>(d));
  for (Index i = 0; i < out.features.rows(); ++i) {
    for (Index j = 0; j < out.features.cols(); ++j) {
      out.features(i, j) = values[static_cast<std::size_t>(i) * d + static_cast<std::size_t>(j)];
    }
  }
  const int max_label = *std::max_element(out.labels.begin(), out.labels.end());
  if (n_classes > 0 && max_label >= n_classes) {
    throw ParseError(path.string() + ": label " + std::to_string(max_label) + " exceeds class count", 0);
  }
  out.n_classes = n_classes > 0 ? n_classes : max_label + 1;
  return out;
}

}  // namespace cardloss
