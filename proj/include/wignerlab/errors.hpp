#pragma once

#include <stdexcept>
#include <string>

namespace wignerlab {

/// Failure categories surfaced by the library. The CLI maps each to an exit code.
enum class ErrorKind { Usage, Domain, Size, Accuracy, Numeric };

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Usage: return "usage";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Size: return "size";
    case ErrorKind::Accuracy: return "accuracy";
    case ErrorKind::Numeric: return "numeric";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ErrorKind::Usage, what) {}
};

/// Argument outside the mathematical domain of an operation (bad H, D, r not in B, ...).
class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error(ErrorKind::Domain, what) {}
};

/// A configured size or work budget would be exceeded.
class SizeError : public Error {
 public:
  explicit SizeError(const std::string& what) : Error(ErrorKind::Size, what) {}
};

/// Requested tolerance not reached; carries the bound that was achieved.
class AccuracyError : public Error {
 public:
  AccuracyError(const std::string& what, double achieved)
      : Error(ErrorKind::Accuracy, what), achieved_(achieved) {}
  double achieved() const noexcept { return achieved_; }

 private:
  double achieved_;
};

/// Iterative numerics that failed to converge.
class NumericError : public Error {
 public:
  NumericError(const std::string& what, int iterations = 0)
      : Error(ErrorKind::Numeric, what), iterations_(iterations) {}
  int iterations() const noexcept { return iterations_; }

 private:
  int iterations_;
};

}  // namespace wignerlab
