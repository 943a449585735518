#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace spinhj {

/// A precondition or config-schema violation. `where` is a JSON-pointer style
/// location of the offending field when the error comes from a config.
class ValidationError : public std::invalid_argument {
public:
    explicit ValidationError(const std::string& what, std::string where = {})
        : std::invalid_argument(what), where_(std::move(where)) {}

    const std::string& where() const noexcept { return where_; }

private:
    std::string where_;
};

/// A numerical guard tripped: overflow, enumeration limits, CFL violations.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace spinhj
