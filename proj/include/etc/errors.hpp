#pragma once

#include <stdexcept>
#include <string>

namespace etc {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionMismatch : Error {
    using Error::Error;
};

// model
struct SingularA : Error {
    using Error::Error;
};
struct NotControllable : Error {
    using Error::Error;
};
struct MultiInputUnsupported : Error {
    using Error::Error;
};
struct NotNilpotent : Error {
    using Error::Error;
};
struct UnstableArgument : Error {
    using Error::Error;
};

// gaussian
struct ToleranceNotMet : Error {
    ToleranceNotMet(const std::string& what, double estimate, double achieved_error)
        : Error(what), estimate(estimate), achieved_error(achieved_error) {}
    double estimate;
    double achieved_error;
};
struct VanishingMass : Error {
    using Error::Error;
};
struct NegativeMassDifference : Error {
    using Error::Error;
};

// performance / cli
struct UnstableConfiguration : Error {
    using Error::Error;
};
struct ConfigInvalid : Error {
    using Error::Error;
};

} // namespace etc
