#pragma once

#include <stdexcept>
#include <string>

namespace difface {

// Process exit codes used by the command-line front end.
enum class ExitCode : int {
    kOk = 0,
    kConfig = 2,
    kData = 3,
    kNumeric = 4,
};

// Base of every error the library raises; carries the exit code the CLI maps it to.
class Error : public std::runtime_error {
public:
    Error(ExitCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}
    ExitCode code() const noexcept { return code_; }

private:
    ExitCode code_;
};

// Invalid configuration, unknown key, bad preset, impossible split policy.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ExitCode::kConfig, what) {}
};

// Shape or kind mismatch between arguments of an operation.
class ContractError : public Error {
public:
    explicit ContractError(const std::string& what) : Error(ExitCode::kConfig, what) {}
};

// Missing file, malformed container, ragged CSV, misaligned audio.
class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error(ExitCode::kData, what) {}
};

class AlignmentError : public DataError {
public:
    explicit AlignmentError(const std::string& what) : DataError(what) {}
};

// Non-finite activations, losses or sampler outputs.
class NumericError : public Error {
public:
    explicit NumericError(const std::string& what) : Error(ExitCode::kNumeric, what) {}
};

}  // namespace difface
