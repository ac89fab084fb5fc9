#include "psearch/error.hpp"

namespace psearch {

const char* errc_name(Errc code) {
  switch (code) {
    case Errc::kZeroVector: return "ZeroVector";
    case Errc::kDimensionMismatch: return "DimensionMismatch";
    case Errc::kEmptyInput: return "EmptyInput";
    case Errc::kNonFiniteFunction: return "NonFiniteFunction";
    case Errc::kInvalidLabel: return "InvalidLabel";
    case Errc::kInvalidParams: return "InvalidParams";
    case Errc::kEmptySubgroups: return "EmptySubgroups";
    case Errc::kEmptyPool: return "EmptyPool";
    case Errc::kUninitializedCenter: return "UninitializedCenter";
    case Errc::kDivergenceDetected: return "DivergenceDetected";
    case Errc::kEmptyGallery: return "EmptyGallery";
    case Errc::kNoRelevant: return "NoRelevant";
    case Errc::kSizeTooLarge: return "SizeTooLarge";
    case Errc::kConfigError: return "ConfigError";
    case Errc::kIoError: return "IoError";
    case Errc::kFormatError: return "FormatError";
  }
  return "Unknown";
}

}  // namespace psearch
