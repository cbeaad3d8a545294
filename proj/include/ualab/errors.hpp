#pragma once

#include <stdexcept>
#include <string>

namespace ualab {

#define UALAB_ERROR(Name, Base)                         \
  struct Name : Base {                                  \
    explicit Name(const std::string& what) : Base(what) {} \
  }

UALAB_ERROR(NonPositiveDuration, std::invalid_argument);
UALAB_ERROR(MissingAnnotation, std::runtime_error);
UALAB_ERROR(VideoTooShort, std::runtime_error);
UALAB_ERROR(HorizonNotMultipleOfStride, std::invalid_argument);
UALAB_ERROR(InvalidConfig, std::invalid_argument);
UALAB_ERROR(ShapeMismatch, std::invalid_argument);
UALAB_ERROR(NonFiniteLoss, std::runtime_error);
UALAB_ERROR(ZeroVector, std::invalid_argument);
UALAB_ERROR(NonPositiveTemperature, std::invalid_argument);
UALAB_ERROR(EmptyNegativeSet, std::invalid_argument);
UALAB_ERROR(DegenerateIndices, std::invalid_argument);
UALAB_ERROR(MissingClass, std::runtime_error);
UALAB_ERROR(NoValidPairs, std::runtime_error);
UALAB_ERROR(IoError, std::runtime_error);
UALAB_ERROR(DatasetNotFound, std::runtime_error);
UALAB_ERROR(CheckpointNotFound, std::runtime_error);
UALAB_ERROR(NoMetricsFound, std::runtime_error);

#undef UALAB_ERROR

}  // namespace ualab
