#include "painscope/error.hpp"

namespace painscope {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::MissingSection: return "MissingSection";
    case ErrorKind::MissingRequiredKey: return "MissingRequiredKey";
    case ErrorKind::UnsupportedBinaryFormat: return "UnsupportedBinaryFormat";
    case ErrorKind::MalformedMarkerLine: return "MalformedMarkerLine";
    case ErrorKind::TruncatedData: return "TruncatedData";
    case ErrorKind::OrientationUnsupported: return "OrientationUnsupported";
    case ErrorKind::CompanionFileMissing: return "CompanionFileMissing";
    case ErrorKind::NoStimulusMarkers: return "NoStimulusMarkers";
    case ErrorKind::BadCacheFile: return "BadCacheFile";
    case ErrorKind::SignalTooShort: return "SignalTooShort";
    case ErrorKind::TooFewChannels: return "TooFewChannels";
    case ErrorKind::AllEpochsRejected: return "AllEpochsRejected";
    case ErrorKind::InsufficientEpochs: return "InsufficientEpochs";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::BandAboveNyquist: return "BandAboveNyquist";
    case ErrorKind::TooFewSegments: return "TooFewSegments";
    case ErrorKind::ManifestMismatch: return "ManifestMismatch";
    case ErrorKind::NotFitted: return "NotFitted";
    case ErrorKind::SingleClassData: return "SingleClassData";
    case ErrorKind::NonFiniteFeature: return "NonFiniteFeature";
    case ErrorKind::TooFewRows: return "TooFewRows";
    case ErrorKind::VersionMismatch: return "VersionMismatch";
    case ErrorKind::CorruptPayload: return "CorruptPayload";
    case ErrorKind::UnknownAlgorithm: return "UnknownAlgorithm";
    case ErrorKind::TooFewSubjects: return "TooFewSubjects";
    case ErrorKind::TooFewPredictions: return "TooFewPredictions";
    case ErrorKind::ChannelMismatch: return "ChannelMismatch";
    case ErrorKind::ModelMissing: return "ModelMissing";
    case ErrorKind::SourceClosed: return "SourceClosed";
    case ErrorKind::ProtocolError: return "ProtocolError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace painscope
