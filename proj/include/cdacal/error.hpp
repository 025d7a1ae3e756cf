#pragma once

#include <stdexcept>
#include <string>

namespace cdacal {

enum class ErrorKind {
    InvalidInput,
    InvalidTemperature,
    Shape,
    UndefinedMetric,
    InfeasibleSpec,
    InvalidSpec,
    EmptyDataset,
    FitFailure,
    InvalidSmoothing,
    WrongBinning,
    TrainingDiverged,
    Parse,
    Usage,
};

const char* to_string(ErrorKind kind) noexcept;

/// Every failure raised by the library carries a kind so the CLI can map it
/// onto an exit code without string matching.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Process exit code for a failure of the given kind: 1 usage, 2 data, 3 numerical.
int exit_code_for(ErrorKind kind) noexcept;

}  // namespace cdacal
