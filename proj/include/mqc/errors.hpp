#pragma once

#include <stdexcept>

namespace mqc {

// File missing, unreadable, or unwritable.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// File exists but its contents are not what the format promises.
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Grid or vector extents disagree.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Operation needs a non-empty mask.
struct EmptyMaskError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Argument outside its contract (bad enum, negative tolerance, ...).
struct ValueError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Selection asked for more than the balanced pool can provide.
struct CapacityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Gradient check requested at a point too close to a hinge kink.
struct KinkError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace mqc
