#include "gte/error.hpp"

namespace gte {

std::string_view error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "IoError";
    case ErrorCode::Parse: return "ParseError";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::NonBinaryTreatment: return "NonBinaryTreatment";
    case ErrorCode::DuplicateRankEntry: return "DuplicateRankEntry";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::TooFewObservations: return "TooFewObservations";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::MissingId: return "MissingId";
    case ErrorCode::BidKindMismatch: return "BidKindMismatch";
    case ErrorCode::MissingMatchValue: return "MissingMatchValue";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::EmptyMarket: return "EmptyMarket";
    case ErrorCode::SingleArmTrainingSet: return "SingleArmTrainingSet";
    case ErrorCode::IllConditioned: return "IllConditioned";
    case ErrorCode::SingularJacobian: return "SingularJacobian";
    case ErrorCode::NonPositiveBid: return "NonPositiveBid";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(error_name(code)) + ": " + message), code_(code) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace gte
