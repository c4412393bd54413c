#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace unb {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A series or iterative method hit its term/iteration cap.
class NonConvergenceError : public Error {
 public:
  NonConvergenceError(const std::string& what, std::size_t terms)
      : Error(what), terms_(terms) {}
  std::size_t terms() const noexcept { return terms_; }

 private:
  std::size_t terms_;
};

/// Argument outside the mathematical domain of a function or law.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Malformed, missing or inadmissible input data.
class DataError : public Error {
 public:
  using Error::Error;
};

/// The estimation problem has no admissible interior solution
/// (under-dispersed sample, all-zero data, ...).
class EstimationError : public Error {
 public:
  using Error::Error;
};

class RankDeficientError : public Error {
 public:
  using Error::Error;
};

/// Two models are observationally identical; a comparison statistic is
/// undefined.
class DegenerateComparisonError : public Error {
 public:
  using Error::Error;
};

}  // namespace unb
