#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace codeine {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed textual input. `position()` is a 0-based byte offset into the
/// parsed text; line/column are 1-based and filled in where the parser
/// tracks them (0 otherwise).
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t position, std::size_t line = 0, std::size_t column = 0)
        : Error(format(what, position, line, column)), position_(position), line_(line), column_(column) {}

    std::size_t position() const noexcept { return position_; }
    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    static std::string format(const std::string& what, std::size_t position, std::size_t line, std::size_t column) {
        if (line != 0) {
            return what + " at line " + std::to_string(line) + ", column " + std::to_string(column);
        }
        return what + " at position " + std::to_string(position);
    }

    std::size_t position_;
    std::size_t line_;
    std::size_t column_;
};

/// Statically ill-typed pattern condition (e.g. `port < 3`).
class TypeError : public Error {
public:
    using Error::Error;
};

/// Violation of the driver/mediator protocol. `code()` is the short token
/// used in `<error code="..."/>` replies.
class ProtocolError : public Error {
public:
    ProtocolError(std::string code, const std::string& msg) : Error(msg), code_(std::move(code)) {}
    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

/// Socket or file level failure.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace codeine
