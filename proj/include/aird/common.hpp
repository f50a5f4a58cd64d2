#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace aird {

// Error taxonomy. The CLI maps these onto its exit-code contract:
// invalid_argument-family -> 2, infeasibility -> 3, divergence -> 4.
struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct AssumptionViolation : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct GenerationInfeasible : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct InfeasibleSchedule : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DegenerateGeometry : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct LoadError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct Diverged : std::runtime_error {
    long step;
    Diverged(long step_, const std::string& what_)
        : std::runtime_error(what_), step(step_) {}
};

// Sign convention used throughout: sign(0) := +1.
inline double sign_pm1(double x) { return x >= 0.0 ? 1.0 : -1.0; }

inline bool is_finite(double x) { return std::isfinite(x); }

}  // namespace aird
