#include "cotools/errors.hpp"

namespace cotools {

std::string_view errc_name(Errc c) noexcept {
  switch (c) {
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::NonFinite: return "NonFinite";
    case Errc::NearZeroNorm: return "NearZeroNorm";
    case Errc::ZeroVariance: return "ZeroVariance";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::OutOfRange: return "OutOfRange";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::ContextOverflow: return "ContextOverflow";
    case Errc::CorruptCheckpoint: return "CorruptCheckpoint";
    case Errc::UnscriptedPrefix: return "UnscriptedPrefix";
    case Errc::MarkerAlignment: return "MarkerAlignment";
    case Errc::Divergence: return "Divergence";
    case Errc::FrozenViolation: return "FrozenViolation";
    case Errc::DuplicateTool: return "DuplicateTool";
    case Errc::InvalidSpec: return "InvalidSpec";
    case Errc::UnknownTool: return "UnknownTool";
    case Errc::DimMismatch: return "DimMismatch";
    case Errc::MalformedRecord: return "MalformedRecord";
    case Errc::ArityMismatch: return "ArityMismatch";
    case Errc::CoercionFailure: return "CoercionFailure";
    case Errc::DomainError: return "DomainError";
    case Errc::ParamParseFailure: return "ParamParseFailure";
    case Errc::MissingPlaceholder: return "MissingPlaceholder";
    case Errc::EmptyPool: return "EmptyPool";
    case Errc::EmptyTestSet: return "EmptyTestSet";
    case Errc::ConfigError: return "ConfigError";
    case Errc::ProvenanceMismatch: return "ProvenanceMismatch";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& detail)
    : std::runtime_error(std::string(errc_name(code)) + ": " + detail), code_(code) {}

}  // namespace cotools
