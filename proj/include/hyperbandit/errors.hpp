// Exception types shared across the library.
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace hyperbandit {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define HYPERBANDIT_DEFINE_ERROR(Name)        \
    class Name : public Error {               \
    public:                                   \
        using Error::Error;                   \
    }

HYPERBANDIT_DEFINE_ERROR(NotSpd);
HYPERBANDIT_DEFINE_ERROR(DimMismatch);
HYPERBANDIT_DEFINE_ERROR(OutOfRange);
HYPERBANDIT_DEFINE_ERROR(BadConfig);
HYPERBANDIT_DEFINE_ERROR(UnknownId);
HYPERBANDIT_DEFINE_ERROR(EmptyBuffer);
HYPERBANDIT_DEFINE_ERROR(EmptyCandidates);
HYPERBANDIT_DEFINE_ERROR(MissingBinding);
HYPERBANDIT_DEFINE_ERROR(TransportError);
HYPERBANDIT_DEFINE_ERROR(RetryExhausted);
HYPERBANDIT_DEFINE_ERROR(ReplayNotSupported);
HYPERBANDIT_DEFINE_ERROR(LengthMismatch);
HYPERBANDIT_DEFINE_ERROR(IoError);
HYPERBANDIT_DEFINE_ERROR(ConfigError);

#undef HYPERBANDIT_DEFINE_ERROR

/// Malformed input file; carries the 1-based line number.
class ParseError : public Error {
public:
    ParseError(const std::string& source, std::size_t line, const std::string& what)
        : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Provider answered, but without a usable `SELECTED:` stanza.
class MalformedResponse : public Error {
public:
    explicit MalformedResponse(std::string raw)
        : Error("malformed provider response: " + raw), raw_(std::move(raw)) {}

    const std::string& raw() const noexcept { return raw_; }

private:
    std::string raw_;
};

}  // namespace hyperbandit
