#ifndef PSEARCH_ERROR_HPP_
#define PSEARCH_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace psearch {

enum class Errc {
  kZeroVector,
  kDimensionMismatch,
  kEmptyInput,
  kNonFiniteFunction,
  kInvalidLabel,
  kInvalidParams,
  kEmptySubgroups,
  kEmptyPool,
  kUninitializedCenter,
  kDivergenceDetected,
  kEmptyGallery,
  kNoRelevant,
  kSizeTooLarge,
  kConfigError,
  kIoError,
  kFormatError,
};

const char* errc_name(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what),
        code_(code) {}
  Errc code() const { return code_; }

 private:
  Errc code_;
};

}  // namespace psearch

#endif  // PSEARCH_ERROR_HPP_
