#pragma once

#include <stdexcept>
#include <string>

namespace dalsh {

/// Raised on contract violations and malformed input throughout the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace dalsh
