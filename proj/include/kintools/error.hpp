#pragma once

#include <stdexcept>
#include <string>

namespace kintools {

enum class Errc {
  ZeroVector,
  DimensionMismatch,
  LengthMismatch,
  InvalidK,
  EmptyDataset,
  UnknownRelationshipType,
  InsufficientCandidates,
  InvalidFoldCount,
  EmptyMatrix,
  EmptyTrack,
  EmptyScores,
  EmptySet,
  DegenerateLabels,
  MissingType,
  UnreachableTarget,
  ZeroReported,
  MissingSubgroup,
  NoRelevant,
  EmptyTemplate,
  EmptyClass,
  NonFinite,
  EmptyNegatives,
  SingletonGallery,
  InvalidHyperparameters,
  IoError,
  ParseError,
};

const char* errc_name(Errc c);

/// Single exception type for the whole library; carries a machine-checkable
/// code so callers (and the CLI) can map failures without string matching.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace kintools
