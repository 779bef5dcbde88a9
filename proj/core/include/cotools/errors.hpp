#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cotools {

enum class Errc {
  ShapeMismatch,
  NonFinite,
  NearZeroNorm,
  ZeroVariance,
  InvalidArgument,
  OutOfRange,
  EmptyInput,
  ContextOverflow,
  CorruptCheckpoint,
  UnscriptedPrefix,
  MarkerAlignment,
  Divergence,
  FrozenViolation,
  DuplicateTool,
  InvalidSpec,
  UnknownTool,
  DimMismatch,
  MalformedRecord,
  ArityMismatch,
  CoercionFailure,
  DomainError,
  ParamParseFailure,
  MissingPlaceholder,
  EmptyPool,
  EmptyTestSet,
  ConfigError,
  ProvenanceMismatch,
  IoError,
};

std::string_view errc_name(Errc c) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail);
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace cotools
