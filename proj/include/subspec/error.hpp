#ifndef SUBSPEC_ERROR_HPP_
#define SUBSPEC_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace subspec {

// Base error carrying a stable machine-readable kind tag. The CLI maps
// these to JSON on stderr; tests match on kind().
class Error : public std::runtime_error {
public:
  Error(std::string kind, const std::string& msg)
      : std::runtime_error(msg), kind_(std::move(kind)) {}
  const std::string& kind() const { return kind_; }

private:
  std::string kind_;
};

#define SUBSPEC_DEFINE_ERROR(Name)                       \
  class Name : public Error {                            \
  public:                                                \
    explicit Name(const std::string& msg)                \
        : Error(#Name, msg) {}                           \
  }

SUBSPEC_DEFINE_ERROR(ShapeMismatch);
SUBSPEC_DEFINE_ERROR(IndivisibleFrequency);
SUBSPEC_DEFINE_ERROR(BandOutOfRange);
SUBSPEC_DEFINE_ERROR(ClipTooShort);
SUBSPEC_DEFINE_ERROR(InvalidConfig);
SUBSPEC_DEFINE_ERROR(InvalidSpec);
SUBSPEC_DEFINE_ERROR(DivergedLoss);
SUBSPEC_DEFINE_ERROR(ManifestParse);
SUBSPEC_DEFINE_ERROR(MissingBlob);
SUBSPEC_DEFINE_ERROR(IndexOutOfRange);
SUBSPEC_DEFINE_ERROR(Io);

#undef SUBSPEC_DEFINE_ERROR

}  // namespace subspec

#endif  // SUBSPEC_ERROR_HPP_
