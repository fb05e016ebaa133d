#pragma once

#include <stdexcept>
#include <string>

namespace sbp {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define SBP_DEFINE_ERROR(Name)            \
  class Name : public Error {             \
   public:                                \
    using Error::Error;                   \
  }

SBP_DEFINE_ERROR(DimensionMismatch);
SBP_DEFINE_ERROR(NonFiniteValue);
SBP_DEFINE_ERROR(SingularUpdate);
SBP_DEFINE_ERROR(EmptySelection);
SBP_DEFINE_ERROR(BadFraction);
SBP_DEFINE_ERROR(DegenerateWeights);
SBP_DEFINE_ERROR(ParseError);
SBP_DEFINE_ERROR(UnknownKey);
SBP_DEFINE_ERROR(MalformedRow);
SBP_DEFINE_ERROR(NonNumericFeature);
SBP_DEFINE_ERROR(LabelOutOfRange);

#undef SBP_DEFINE_ERROR

}  // namespace sbp
