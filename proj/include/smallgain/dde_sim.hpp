#pragma once

// Interconnected retarded delay equations with discrete delays, integrated
// by the method of steps: fixed-step classical RK4, step commensurate with
// every delay, cubic Hermite dense output for mid-step delayed arguments.

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "smallgain/gain_algebra.hpp"

namespace smallgain {

namespace detail {
struct StageContext;
}

// Read access to the interconnection at one RK stage. Subsystem indices are
// 1-based; delay indices are 0-based positions in DelaySystemSpec::delays().
class DelayView {
public:
    double time() const noexcept;
    int subsystem() const noexcept { return self_; }

    // x_j at the stage time.
    std::span<const double> state(int j) const;
    // x_j(t - theta_l).
    std::span<const double> delayed(int j, std::size_t l) const;
    // |x_t| on [t - theta, t]: max over step-grid points of the state norm.
    double history_norm() const;

private:
    friend struct detail::StageContext;
    DelayView(const detail::StageContext* ctx, int self) : ctx_(ctx), self_(self) {}
    void check_access(int j) const;
    const detail::StageContext* ctx_;
    int self_;
};

using SubsystemRhs =
    std::function<void(const DelayView& view, std::span<const double> input, std::span<double> dx)>;

struct SubsystemSpec {
    std::size_t dim = 1;
    std::size_t input_dim = 0;
    // Other subsystems this right-hand side reads (v_j = x_j), 1-based.
    std::vector<int> references;
    SubsystemRhs rhs;
};

class SimulationError : public std::runtime_error {
public:
    SimulationError(const std::string& what, double t, std::vector<double> state);
    double time() const noexcept { return t_; }
    const std::vector<double>& state() const noexcept { return state_; }

private:
    double t_;
    std::vector<double> state_;
};

class DelaySystemSpec {
public:
    std::size_t size() const noexcept { return subsystems_.size(); }
    const std::vector<SubsystemSpec>& subsystems() const noexcept { return subsystems_; }
    const SubsystemSpec& subsystem(int i) const;
    const std::vector<double>& delays() const noexcept { return delays_; }
    double max_delay() const noexcept { return max_delay_; }

    std::size_t total_dim() const noexcept { return total_dim_; }
    std::size_t total_input_dim() const noexcept { return total_input_dim_; }
    std::size_t offset(int i) const;
    std::size_t input_offset(int i) const;
    std::vector<std::size_t> dims() const;

    bool may_read(int i, int j) const;

    // max over subsystems of the Euclidean norm of each block.
    double state_norm(std::span<const double> x) const;

private:
    friend DelaySystemSpec build_interconnection(std::vector<SubsystemSpec>, std::vector<double>);
    std::vector<SubsystemSpec> subsystems_;
    std::vector<double> delays_;
    double max_delay_ = 0.0;
    std::size_t total_dim_ = 0;
    std::size_t total_input_dim_ = 0;
    std::vector<std::size_t> offsets_;
    std::vector<std::size_t> input_offsets_;
    std::vector<std::vector<bool>> readable_;
};

// Closes the loop v_i = x_i. Throws std::invalid_argument on dangling
// references, zero dimensions, missing right-hand sides or negative delays.
DelaySystemSpec build_interconnection(std::vector<SubsystemSpec> subsystems, std::vector<double> delays);

// Initial segment xi on [-theta, 0], over the full concatenated state.
class HistoryFunction {
public:
    using Fn = std::function<void(double t, std::span<double> out)>;

    // One value vector per subsystem.
    static HistoryFunction constant(const std::vector<std::vector<double>>& per_subsystem);
    // coeffs[c][p]: coefficient of t^p for state component c.
    static HistoryFunction polynomial(std::vector<std::vector<double>> coeffs);
    // Linear interpolation of full-state rows at increasing times.
    static HistoryFunction table(std::vector<double> times, std::vector<std::vector<double>> rows);
    static HistoryFunction from_function(std::size_t dim, Fn fn);

    std::size_t dim() const noexcept { return dim_; }
    // Domain of definition; the simulator requires it to cover [-theta, 0].
    double earliest() const noexcept { return earliest_; }
    double latest() const noexcept { return latest_; }

    void operator()(double t, std::span<double> out) const;

private:
    HistoryFunction(std::size_t dim, Fn fn, double earliest, double latest)
        : dim_(dim), fn_(std::move(fn)), earliest_(earliest), latest_(latest) {}
    std::size_t dim_;
    Fn fn_;
    double earliest_;
    double latest_;
};

// External input u(t) over the concatenated input vector.
class InputSignal {
public:
    using Fn = std::function<void(double t, std::span<double> out)>;

    static InputSignal zero(std::size_t dim = 0);
    // One value vector per subsystem with inputs (empty vectors allowed).
    static InputSignal constant(const std::vector<std::vector<double>>& per_subsystem);
    // rows[k] holds on [times[k], times[k+1]); the last row holds afterwards.
    static InputSignal piecewise_constant(std::vector<double> times, std::vector<std::vector<double>> rows);
    static InputSignal from_function(std::size_t dim, Fn fn);

    std::size_t dim() const noexcept { return dim_; }
    void operator()(double t, std::span<double> out) const;

    // Largest |component| ever taken, when the representation makes it exact.
    std::optional<double> exact_sup_abs() const noexcept { return sup_abs_; }

    // Per-subsystem |u_i| sup over [0, horizon]; exact for tabulated kinds,
    // sampled at multiples of step/2 for closed forms.
    std::vector<double> subsystem_norms(const DelaySystemSpec& sys, double horizon, double step) const;

private:
    InputSignal(std::size_t dim, Fn fn, std::optional<double> sup_abs, std::vector<double> times,
                std::vector<std::vector<double>> rows)
        : dim_(dim), fn_(std::move(fn)), sup_abs_(sup_abs), times_(std::move(times)), rows_(std::move(rows)) {}
    std::size_t dim_;
    Fn fn_;
    std::optional<double> sup_abs_;
    // Tabulated values, when known; rows_[k] holds from times_[k] on.
    std::vector<double> times_;
    std::vector<std::vector<double>> rows_;
};

struct SimulationOptions {
    double horizon = 1.0;
    double step = 1e-2;
    double divergence_threshold = 1e12;
};

// Dense solution record on [-theta, T]. Grid rows are indexed by integers
// i in [first_index(), last_index()], t_i = i * step.
class Trajectory {
public:
    double step() const noexcept { return step_; }
    long first_index() const noexcept { return first_; }
    long last_index() const noexcept { return last_; }
    std::size_t rows() const noexcept { return static_cast<std::size_t>(last_ - first_ + 1); }
    double time(long i) const noexcept { return static_cast<double>(i) * step_; }
    double final_time() const noexcept { return time(last_); }
    double requested_horizon() const noexcept { return horizon_; }
    double max_delay() const noexcept { return max_delay_; }
    const std::vector<double>& delays() const noexcept { return delays_; }

    std::size_t dim() const noexcept { return dim_; }
    const std::vector<std::size_t>& dims() const noexcept { return dims_; }

    std::span<const double> row(long i) const;
    std::span<const double> derivative(long i) const;  // i >= 0

    // Dense output: history on [-theta, 0], Hermite interpolant after.
    std::vector<double> at(double t) const;
    void at(double t, std::span<double> out) const;

    double state_norm(std::span<const double> x) const;
    double norm_at(long i) const { return state_norm(row(i)); }
    // Euclidean norm of subsystem block i (1-based) in a full state vector.
    double block_norm(std::span<const double> x, int i) const;

    bool blow_up() const noexcept { return escape_time_.has_value(); }
    std::optional<double> escape_time() const noexcept { return escape_time_; }
    double divergence_threshold() const noexcept { return threshold_; }

private:
    friend Trajectory simulate(const DelaySystemSpec&, const HistoryFunction&, const InputSignal&,
                               const SimulationOptions&);
    friend struct detail::StageContext;
    Trajectory(const HistoryFunction& history) : history_(history) {}

    double step_ = 0.0;
    double horizon_ = 0.0;
    double max_delay_ = 0.0;
    double threshold_ = 0.0;
    long first_ = 0;
    long last_ = 0;
    std::size_t dim_ = 0;
    std::vector<std::size_t> dims_;
    std::vector<double> delays_;
    std::vector<double> states_;  // row-major, rows first_..last_
    std::vector<double> derivs_;  // row-major, rows 0..last_
    HistoryFunction history_;
    std::optional<double> escape_time_;
};

// Throws std::invalid_argument when the step does not divide every delay
// (to 1e-12 relative) or a delay is shorter than the step, and
// SimulationError when the right-hand side produces NaN or infinity from a
// finite state. Divergence past the threshold ends the run with blow_up().
Trajectory simulate(const DelaySystemSpec& sys, const HistoryFunction& history, const InputSignal& input,
                    const SimulationOptions& options);

// Sigma_phi: replaces each subsystem input by rho(|x_t|) * d(t), with d
// clamped to [-1, 1] componentwise (a warning is logged when clamping
// happens). The returned system takes no external input.
DelaySystemSpec build_auxiliary_system(const DelaySystemSpec& sys, const KFunction& rho, const InputSignal& d);

// Three scalar subsystems coupled through delay `delta`:
//   x1' = -3 x1 + v2(t-delta)^2 / (1 + v2(t-delta)^2)
//   x2' = -1.5 x2 + v3(t-delta)^3
//   x3' = -2 x3 + v1(t-delta)^2
DelaySystemSpec paper_example(double delta);

// "t,x_1,...,x_n" then one row per grid point, history segment included.
void write_csv(const Trajectory& traj, std::ostream& out);

}  // namespace smallgain
