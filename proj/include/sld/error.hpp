#pragma once

#include <stdexcept>
#include <string>

namespace sld {

// Invalid parameters or run configuration.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Index outside the stored range of a path or trajectory.
class RangeError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

// A state went NaN/Inf during time stepping.
class IntegrationFault : public std::runtime_error {
public:
    IntegrationFault(const std::string& what, long node)
        : std::runtime_error(what + " at node " + std::to_string(node)), node_(node) {}

    long node() const noexcept { return node_; }

private:
    long node_;
};

// Malformed or truncated binary file.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace sld
