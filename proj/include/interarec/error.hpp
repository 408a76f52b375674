#ifndef INTERAREC_ERROR_HPP
#define INTERAREC_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace interarec {

enum class Errc {
  DuplicateId,
  InvalidPrice,
  MissingField,
  OutOfOrderTimestamp,
  MalformedLine,
  MissingScreenshotKey,
  InvalidWindow,
  EmptyCategoryList,
  InvalidBatchSize,
  SummaryParseError,
  BackendUnavailable,
  NoScreenshots,
  MissingFixture,
  ItemNotOffered,
  UnknownItem,
  NeverOffered,
  TooLarge,
  DimensionMismatch,
  ProviderUnavailable,
  EmptyTrainingSet,
  UntrainedModel,
  UnsortedScores,
  DuplicateItem,
  MissingSummaries,
  EmptyTestSplit,
  InvalidConfig,
  SessionNotFound,
  ValidationRejected,
  NoModelConfigured,
  IoError,
};

constexpr std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::InvalidPrice: return "InvalidPrice";
    case Errc::MissingField: return "MissingField";
    case Errc::OutOfOrderTimestamp: return "OutOfOrderTimestamp";
    case Errc::MalformedLine: return "MalformedLine";
    case Errc::MissingScreenshotKey: return "MissingScreenshotKey";
    case Errc::InvalidWindow: return "InvalidWindow";
    case Errc::EmptyCategoryList: return "EmptyCategoryList";
    case Errc::InvalidBatchSize: return "InvalidBatchSize";
    case Errc::SummaryParseError: return "SummaryParseError";
    case Errc::BackendUnavailable: return "BackendUnavailable";
    case Errc::NoScreenshots: return "NoScreenshots";
    case Errc::MissingFixture: return "MissingFixture";
    case Errc::ItemNotOffered: return "ItemNotOffered";
    case Errc::UnknownItem: return "UnknownItem";
    case Errc::NeverOffered: return "NeverOffered";
    case Errc::TooLarge: return "TooLarge";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::ProviderUnavailable: return "ProviderUnavailable";
    case Errc::EmptyTrainingSet: return "EmptyTrainingSet";
    case Errc::UntrainedModel: return "UntrainedModel";
    case Errc::UnsortedScores: return "UnsortedScores";
    case Errc::DuplicateItem: return "DuplicateItem";
    case Errc::MissingSummaries: return "MissingSummaries";
    case Errc::EmptyTestSplit: return "EmptyTestSplit";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::SessionNotFound: return "SessionNotFound";
    case Errc::ValidationRejected: return "ValidationRejected";
    case Errc::NoModelConfigured: return "NoModelConfigured";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

/// Exception carrying a stable, machine-readable error code.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace interarec

#endif  // INTERAREC_ERROR_HPP
