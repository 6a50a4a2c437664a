#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "finn/ad.hpp"

namespace finn::integrator {

enum class Scheme { Euler, RK4, DormandPrince45 };

struct IntegratorConfig {
    Scheme scheme = Scheme::DormandPrince45;
    double atol = 1e-6;
    double rtol = 1e-4;
    double initial_step = 0.0;  // 0 picks interval / 10
    int max_steps_per_interval = 100000;
    int fixed_steps_per_interval = 1;  // Euler and RK4
    std::vector<double> times;         // strictly increasing output grid

    void validate() const;
};

struct AbortInfo {
    enum class Reason { None, NonFinite, StepUnderflow, MaxSteps };
    Reason reason = Reason::None;
    double time = 0.0;
    std::string message;
};

/// Output states per grid time; on abort `states` holds the completed prefix
/// and `abort` carries the diagnostic.
struct Trajectory {
    std::vector<std::vector<double>> states;
    bool complete = true;
    AbortInfo abort;
    std::size_t steps_accepted = 0;
    std::size_t steps_rejected = 0;
};

struct RecordedTrajectory {
    std::vector<ad::Var> states;
    bool complete = true;
    AbortInfo abort;
    std::size_t steps_accepted = 0;
    std::size_t steps_rejected = 0;
};

using PlainRhs =
    std::function<void(double t, std::span<const double> u, std::span<double> dudt)>;
using RecordedRhs = std::function<ad::Var(ad::Tape& tape, double t, ad::Var u)>;

/// Explicit time integration of du/dt = rhs(t, u) over cfg.times. The adaptive
/// scheme is Dormand-Prince 4(5) with FSAL and a PI step controller (safety
/// 0.9, growth clamped to [0.2, 5]).
Trajectory integrate(const PlainRhs& rhs, std::span<const double> u0,
                     const IntegratorConfig& cfg);

/// Identical step sequence and bit-identical state values to integrate();
/// states live on `tape` so a loss over them backpropagates through every
/// accepted step (rejected trial steps are rewound off the tape).
RecordedTrajectory integrate_recorded(const RecordedRhs& rhs, ad::Tape& tape,
                                      ad::Var u0, const IntegratorConfig& cfg);

}  // namespace finn::integrator
