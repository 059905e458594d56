#pragma once

// Checks GS, AG and GAS conclusions against simulated trajectories. Suprema
// are taken over step-grid points; lim sup is a trailing-window supremum
// carried with a settling diagnostic.

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "smallgain/dde_sim.hpp"
#include "smallgain/gain_algebra.hpp"
#include "smallgain/gain_graph.hpp"
#include "smallgain/gain_reduction.hpp"

namespace smallgain {

enum class PropertyKind { gs, ag, gas };
std::string_view to_string(PropertyKind k) noexcept;

// Whole state when subsystem == 0, else the Euclidean norm of block i.
double sup_norm(const Trajectory& traj, double t0, double t1, int subsystem = 0);

// Per-subsystem sup of the history segment [-theta, 0].
std::vector<double> history_norms(const Trajectory& traj);

struct LimsupEstimate {
    double value = 0.0;               // tail sup over the full horizon
    std::array<double, 3> tail_sups{};  // horizons T/4, T/2, T
    bool settled = true;              // tail sups non-increasing
};

// Sup over the final `tail_fraction` of the horizon. Throws
// std::invalid_argument on a blown-up trajectory or a fraction outside (0, 1).
LimsupEstimate limsup_estimate(const Trajectory& traj, double tail_fraction, int subsystem = 0);

struct BoundWitness {
    double t;
    double norm;
    double bound;
    int subsystem;  // 0: whole state
};

struct MarginPoint {
    double t;
    double margin;  // bound - |x|, signed
};

struct BoundReport {
    PropertyKind kind = PropertyKind::gs;
    bool holds = true;
    double worst_margin = 0.0;
    double t_worst = 0.0;
    std::optional<BoundWitness> witness;  // first violation in time
    std::vector<MarginPoint> margins;     // one per grid time t >= 0
    std::vector<double> bounds;           // per subsystem
    std::vector<LimsupEstimate> limsup;   // per subsystem (AG, GAS)
    bool settled = true;
    double horizon = 0.0;
    double tail_fraction = 0.0;
    std::string note;
};

// |x_i(t)| <= max{ tilde sigma_i(c), tilde gamma_i^u(|u|) } at every grid
// time t >= 0, c from combined_initial_constant. `hist_norms` and
// `input_norms` are per subsystem; |u| is their maximum.
BoundReport check_gs(const Trajectory& traj, const GainDigraph& g, const ClosedLoopGains& closed,
                     std::span<const double> hist_norms, std::span<const double> input_norms);
BoundReport check_gs(const Trajectory& traj, const GainDigraph& g, const ClosedLoopGains& closed,
                     const DelaySystemSpec& sys, const InputSignal& u);

// lim sup |x_i| <= hat gamma_i^u(|u|) + tolerance (an absent gain bounds by 0).
BoundReport check_ag(const Trajectory& traj, const ClosedLoopGains& closed, std::span<const double> input_norms,
                     double tail_fraction = 0.2, double tolerance = 1e-3);

// |x(t)| <= sigma(hist_norm) for t >= 0 and the final tail sup below eps.
BoundReport check_gas(const Trajectory& traj, const KFunction& sigma, double hist_norm, double eps,
                      double tail_fraction = 0.2);

// Gains of x' = -lambda x + w read off |x(t)| <= |x0| e^{-lambda t} + |w|/lambda
// after a + b < max{(1 + 1/eps) a, (1 + eps) b}.
struct GainProfile {
    double lambda;
    double epsilon;
    KFunction sigma;  // (1 + 1/eps) s
    KFunction gamma;  // ((1 + eps) / lambda) s
};

GainProfile linear_subsystem_profile(double lambda, double epsilon = 1.0 / 6.0);

}  // namespace smallgain
