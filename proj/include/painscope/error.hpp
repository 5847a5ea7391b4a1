#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace painscope {

enum class ErrorKind {
  // ingest
  MissingSection,
  MissingRequiredKey,
  UnsupportedBinaryFormat,
  MalformedMarkerLine,
  TruncatedData,
  OrientationUnsupported,
  CompanionFileMissing,
  NoStimulusMarkers,
  BadCacheFile,
  // preprocess
  SignalTooShort,
  TooFewChannels,
  AllEpochsRejected,
  InsufficientEpochs,
  InvalidArgument,
  // features
  BandAboveNyquist,
  TooFewSegments,
  ManifestMismatch,
  NotFitted,
  // models
  SingleClassData,
  NonFiniteFeature,
  TooFewRows,
  VersionMismatch,
  CorruptPayload,
  UnknownAlgorithm,
  // evaluation
  TooFewSubjects,
  TooFewPredictions,
  // realtime
  ChannelMismatch,
  ModelMissing,
  SourceClosed,
  ProtocolError,
  IoError,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Single exception type for the library; `kind()` identifies the failure.
class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& detail)
      : std::runtime_error(std::string(to_string(kind)) + ": " + detail), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

}  // namespace painscope
