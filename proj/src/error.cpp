#include "embedlab/error.hpp"

namespace embedlab {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidArgument: return "InvalidArgument";
        case ErrorKind::DimensionMismatch: return "DimensionMismatch";
        case ErrorKind::ConfigError: return "ConfigError";
        case ErrorKind::EmbeddedNotFound: return "EmbeddedNotFound";
        case ErrorKind::WindowNotIsolated: return "WindowNotIsolated";
        case ErrorKind::ThresholdEnergy: return "ThresholdEnergy";
        case ErrorKind::SolveFailure: return "SolveFailure";
        case ErrorKind::ExtrapolationDiverged: return "ExtrapolationDiverged";
        case ErrorKind::ProbeDeficient: return "ProbeDeficient";
        case ErrorKind::RankCollapse: return "RankCollapse";
        case ErrorKind::RankDeficient: return "RankDeficient";
        case ErrorKind::NoConvergence: return "NoConvergence";
        case ErrorKind::LeftWindow: return "LeftWindow";
        case ErrorKind::SupportViolation: return "SupportViolation";
        case ErrorKind::ZeroDivisor: return "ZeroDivisor";
        case ErrorKind::NotOrthogonal: return "NotOrthogonal";
    }
    return "Unknown";
}

}  // namespace embedlab
