#pragma once

#include <stdexcept>
#include <string>

namespace profgen {

// Error categories map 1:1 onto CLI exit codes (usage=1, input=2, internal=3).
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class UsageError : public Error {
public:
    explicit UsageError(const std::string& msg) : Error(msg) {}
};

// Anything wrong with data handed to us: malformed files, bad magic,
// unknown identifiers, out-of-range parameters.
class InputError : public Error {
public:
    explicit InputError(const std::string& msg) : Error(msg) {}
};

class InternalError : public Error {
public:
    explicit InternalError(const std::string& msg) : Error(msg) {}
};

}  // namespace profgen
