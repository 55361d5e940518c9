#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mlsas {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// |r_ii| fell below the rank tolerance during a QR factorization.
class RankDeficient : public Error {
 public:
  explicit RankDeficient(std::ptrdiff_t index)
      : Error("rank-deficient factor at diagonal index " + std::to_string(index)),
        index_(index) {}
  std::ptrdiff_t index() const { return index_; }

 private:
  std::ptrdiff_t index_;
};

class ConvergenceFailure : public Error {
 public:
  using Error::Error;
};
class InvalidSpec : public Error {
 public:
  using Error::Error;
};
class BadDimension : public Error {
 public:
  using Error::Error;
};
class MissingSVD : public Error {
 public:
  using Error::Error;
};
class MissingContext : public Error {
 public:
  using Error::Error;
};
class LevelTooLarge : public Error {
 public:
  using Error::Error;
};
class TooFewSamples : public Error {
 public:
  using Error::Error;
};
class NonPositiveValue : public Error {
 public:
  using Error::Error;
};
class AllocationInfeasible : public Error {
 public:
  using Error::Error;
};
class InsufficientBaseSamples : public Error {
 public:
  using Error::Error;
};
class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace mlsas
