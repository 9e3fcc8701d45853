#pragma once

#include <stdexcept>
#include <string>

namespace cardloss {

/// Bad argument to an operation (empty grid, out-of-range ratio, shape mismatch).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Scale factor t must be strictly positive.
class InvalidScale : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// Dataset generator parameters that cannot be realised.
class InvalidSpec : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// Every weighting strategy failed: the similarity matrix is numerically singular.
class SingularSimilarity : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A metric that has no meaning for the given input (e.g. PR-AUC without positives).
class UndefinedMetric : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values appeared during training.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, int epoch, int batch)
      : std::runtime_error(what), epoch_(epoch), batch_(batch) {}

  int epoch() const noexcept { return epoch_; }
  int batch() const noexcept { return batch_; }

 private:
  int epoch_;
  int batch_;
};

/// Malformed CSV or JSON input. `line` is 1-based, 0 when unknown.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// File could not be opened, read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cardloss
