#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gte {

// Stable numeric codes; the CLI uses them as process exit statuses.
enum class ErrorCode : int {
  InvalidArgument = 2,
  Io = 3,
  Parse = 4,
  InvalidConfig = 5,
  MissingColumn = 10,
  NonBinaryTreatment = 11,
  DuplicateRankEntry = 12,
  EmptyDataset = 13,
  TooFewObservations = 14,
  DimensionMismatch = 15,
  MissingId = 16,
  BidKindMismatch = 20,
  MissingMatchValue = 21,
  LengthMismatch = 22,
  NoConvergence = 23,
  EmptyMarket = 24,
  SingleArmTrainingSet = 30,
  IllConditioned = 31,
  SingularJacobian = 40,
  NonPositiveBid = 41,
};

std::string_view error_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }
  int exit_status() const noexcept { return static_cast<int>(code_); }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace gte
