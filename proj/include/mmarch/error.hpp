#pragma once

#include <stdexcept>
#include <string>

namespace mmarch {

struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A value that breaks a chunk or symbol invariant.
struct invalid_argument : error {
    using error::error;
};

// A shadow system tried to write a buffer it does not own.
struct ownership_violation : error {
    ownership_violation(const std::string& writer, const std::string& buffer)
        : error("ownership violation: '" + writer + "' may not write buffer '" + buffer + "'"),
          writer(writer), buffer(buffer) {}

    std::string writer;
    std::string buffer;
};

struct temporal_order_error : error {
    using error::error;
};

// Broken production definition discovered while firing (e.g. unbound reference).
struct model_error : error {
    using error::error;
};

struct trace_error : error {
    using error::error;
};

} // namespace mmarch
