#pragma once

#include <stdexcept>
#include <string>

namespace ilab {

enum class ErrorKind {
  kIndex,
  kValidation,
  kDimensionMismatch,
  kNotADistribution,
  kSolver,
  kReducibleChain,
  kPeriodicChain,
  kZeroCellMass,
  kTooLarge,
  kExplorationViolation,
  kNonFinite,
  kInvalidPartition,
  kDivisionByZero,
  kIo,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

template <ErrorKind K>
class TypedError : public Error {
 public:
  explicit TypedError(const std::string& what) : Error(K, what) {}
};

using IndexError = TypedError<ErrorKind::kIndex>;
using ValidationError = TypedError<ErrorKind::kValidation>;
using DimensionMismatch = TypedError<ErrorKind::kDimensionMismatch>;
using NotADistribution = TypedError<ErrorKind::kNotADistribution>;
using SolverError = TypedError<ErrorKind::kSolver>;
using ReducibleChain = TypedError<ErrorKind::kReducibleChain>;
using PeriodicChain = TypedError<ErrorKind::kPeriodicChain>;
using ZeroCellMass = TypedError<ErrorKind::kZeroCellMass>;
using TooLarge = TypedError<ErrorKind::kTooLarge>;
using ExplorationViolation = TypedError<ErrorKind::kExplorationViolation>;
using NonFinite = TypedError<ErrorKind::kNonFinite>;
using InvalidPartition = TypedError<ErrorKind::kInvalidPartition>;
using DivisionByZero = TypedError<ErrorKind::kDivisionByZero>;
using IoError = TypedError<ErrorKind::kIo>;

}  // namespace ilab
