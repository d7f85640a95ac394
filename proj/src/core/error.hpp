#pragma once

#include <stdexcept>
#include <string>

namespace sph {

// Error taxonomy mirrors the CLI exit codes: 2 config, 3 data, 4 numerical.
enum class ErrorCode : int {
    internal = 1,
    config = 2,
    data = 3,
    numeric = 4,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(ErrorCode::config, msg) {}
};

struct DataError : Error {
    explicit DataError(const std::string& msg) : Error(ErrorCode::data, msg) {}
};

struct NumericError : Error {
    explicit NumericError(const std::string& msg) : Error(ErrorCode::numeric, msg) {}
};

} // namespace sph
