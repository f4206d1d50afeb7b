#pragma once

#include <stdexcept>
#include <string>

namespace claga {

struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct FoldError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DiagnosticError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

}  // namespace claga
