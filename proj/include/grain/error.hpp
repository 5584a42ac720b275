#ifndef GRAIN_ERROR_HPP
#define GRAIN_ERROR_HPP

#include <stdexcept>
#include <string>

namespace grain {

// Every failure raised by the library derives from Error, so callers can
// catch broadly or by kind.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define GRAIN_DEFINE_ERROR(Name)          \
  class Name : public Error {             \
   public:                                \
    using Error::Error;                   \
  };

GRAIN_DEFINE_ERROR(ShapeError)
GRAIN_DEFINE_ERROR(ValueError)
GRAIN_DEFINE_ERROR(RangeError)
GRAIN_DEFINE_ERROR(IndexError)
GRAIN_DEFINE_ERROR(ParseError)
GRAIN_DEFINE_ERROR(DatasetError)
GRAIN_DEFINE_ERROR(NumericError)
GRAIN_DEFINE_ERROR(IoError)
GRAIN_DEFINE_ERROR(FormatError)
GRAIN_DEFINE_ERROR(CorruptionError)
GRAIN_DEFINE_ERROR(ConfigError)

#undef GRAIN_DEFINE_ERROR

}  // namespace grain

#endif  // GRAIN_ERROR_HPP
