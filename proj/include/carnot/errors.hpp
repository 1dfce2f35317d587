#pragma once

#include <stdexcept>
#include <string>

namespace carnot {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define CARNOT_ERROR(Name)                                          \
    class Name : public Error {                                     \
    public:                                                         \
        explicit Name(const std::string& what) : Error(#Name ": " + what) {} \
    };

CARNOT_ERROR(SingularFrame)
CARNOT_ERROR(NumericalJacobianUnstable)
CARNOT_ERROR(GradingViolation)
CARNOT_ERROR(JacobiViolation)
CARNOT_ERROR(ExtractionResidual)
CARNOT_ERROR(LeftDomain)
CARNOT_ERROR(NoConvergence)
CARNOT_ERROR(NoContraction)
CARNOT_ERROR(GridTooCoarse)
CARNOT_ERROR(ExtensionObstruction)
CARNOT_ERROR(HorizontalMismatch)
CARNOT_ERROR(DegenerateDifferential)
CARNOT_ERROR(CharacteristicNearby)
CARNOT_ERROR(GuardNotVanishing)
CARNOT_ERROR(ConfigError)

#undef CARNOT_ERROR

} // namespace carnot
