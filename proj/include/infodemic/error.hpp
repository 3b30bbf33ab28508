#pragma once

#include <stdexcept>
#include <string>

namespace infodemic {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Unreadable input or unwritable output.
class IoError : public Error {
public:
    using Error::Error;
};

/// Malformed input file content. Carries the 1-based line number when known.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line = 0)
        : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Precondition violated by the caller.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

class OutOfRange : public Error {
public:
    using Error::Error;
};

/// Optimistic-concurrency failure: the caller acted on a stale revision.
class ConflictError : public Error {
public:
    using Error::Error;
};

} // namespace infodemic
