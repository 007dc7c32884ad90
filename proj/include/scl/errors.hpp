#pragma once

#include <stdexcept>
#include <string>

namespace scl {

// Base of every library error; the CLI maps these to exit code 1.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

#define SCL_DEFINE_ERROR(Name)                                                 \
    struct Name : Error {                                                      \
        explicit Name(const std::string& what) : Error(#Name ": " + what) {}   \
    }

SCL_DEFINE_ERROR(SpanError);
SCL_DEFINE_ERROR(ExactnessError);
SCL_DEFINE_ERROR(ConvergenceError);
SCL_DEFINE_ERROR(DomainError);
SCL_DEFINE_ERROR(ScaleError);
SCL_DEFINE_ERROR(ParameterError);
SCL_DEFINE_ERROR(ToleranceAmbiguity);
SCL_DEFINE_ERROR(FlowDomainError);
SCL_DEFINE_ERROR(IntegralityError);
SCL_DEFINE_ERROR(FitError);
SCL_DEFINE_ERROR(IOError);

#undef SCL_DEFINE_ERROR

} // namespace scl
