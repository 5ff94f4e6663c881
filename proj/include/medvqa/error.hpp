#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace medvqa {

enum class ErrorKind {
    Dimension,   // mismatched or empty raster dimensions
    Contract,    // caller violated a precondition
    Parse,       // malformed text / token stream / file line
    Range,       // numeric value outside its legal range
    Config,      // missing or invalid configuration (non-retryable)
    Transport,   // network failure after retries were exhausted
    Protocol,    // server answered with a payload that breaks the wire contract
    Content,     // service answered but produced nothing usable
    Io,          // filesystem read/write failure
    Integrity,   // hash / manifest mismatch
    Generation,  // model backend failure
};

std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
    throw Error(kind, what);
}

}  // namespace medvqa
