#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace voxdiff {

enum class Errc {
  BadMagic,
  TruncatedFile,
  DimOverflow,
  IoFailure,
  InvalidGrid,
  EmptySlice,
  SizeOutOfRange,
  BadRange,
  StepOutOfRange,
  MissingTarget,
  DimMismatch,
  NonFiniteOutput,
  NonFiniteState,
  InvalidArgument,
  EmptySurface,
  OpenMesh,
  EmptyForeground,
  DegenerateMask,
  ExtentExceedsGrid,
  ZeroGroundTruth,
  TooFewSamples,
  MissingGroundTruth,
  SingleClass,
  LengthMismatch,
  BadManifest,
  BadConfig,
};

std::string_view errc_name(Errc code) noexcept;

// All library failures surface as this exception; `code()` identifies the
// failure class so callers and tests can branch on it.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace voxdiff
