#pragma once

#include <stdexcept>
#include <string>

namespace embedlab {

enum class ErrorKind {
    InvalidArgument,
    DimensionMismatch,
    ConfigError,
    EmbeddedNotFound,
    WindowNotIsolated,
    ThresholdEnergy,
    SolveFailure,
    ExtrapolationDiverged,
    ProbeDeficient,
    RankCollapse,
    RankDeficient,
    NoConvergence,
    LeftWindow,
    SupportViolation,
    ZeroDivisor,
    NotOrthogonal,
};

const char* to_string(ErrorKind kind);

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

}  // namespace embedlab
