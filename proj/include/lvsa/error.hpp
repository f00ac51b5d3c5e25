#pragma once

#include <stdexcept>
#include <string>

namespace lvsa {

/// Base of every error raised by the library. The CLI maps these to exit 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define LVSA_DEFINE_ERROR(Name)          \
  class Name : public Error {            \
   public:                               \
    using Error::Error;                  \
  }

LVSA_DEFINE_ERROR(ParseError);
LVSA_DEFINE_ERROR(VocabError);
LVSA_DEFINE_ERROR(BoundsError);
LVSA_DEFINE_ERROR(StructureError);
LVSA_DEFINE_ERROR(CycleError);
LVSA_DEFINE_ERROR(ArityError);
LVSA_DEFINE_ERROR(DimensionError);
LVSA_DEFINE_ERROR(SamplingError);
LVSA_DEFINE_ERROR(FormatError);
LVSA_DEFINE_ERROR(IntegrityError);
LVSA_DEFINE_ERROR(MetricError);
LVSA_DEFINE_ERROR(DataError);
LVSA_DEFINE_ERROR(ConfigError);
LVSA_DEFINE_ERROR(StageError);

#undef LVSA_DEFINE_ERROR

}  // namespace lvsa
