#include "smallgain/dde_sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include "smallgain/format.hpp"
#include "smallgain/kernels.hpp"
#include "smallgain/log.hpp"

namespace smallgain {

namespace {

double blocks_norm(const std::vector<std::size_t>& dims, std::span<const double> x) {
    double best = 0.0;
    std::size_t off = 0;
    for (std::size_t d : dims) {
        double n;
        if (d == 1) {
            n = std::fabs(x[off]);
        } else {
            double acc = 0.0;
            for (std::size_t c = 0; c < d; ++c) acc += x[off + c] * x[off + c];
            n = std::sqrt(acc);
        }
        if (!(n <= best)) best = n;  // NaN propagates
        off += d;
    }
    return best;
}

bool all_finite(std::span<const double> x) {
    return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

// Cubic Hermite on [0, h] at fraction `theta`.
inline double hermite(double x0, double d0, double x1, double d1, double h, double theta) {
    double t2 = theta * theta;
    double t3 = t2 * theta;
    double h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    double h10 = t3 - 2.0 * t2 + theta;
    double h01 = -2.0 * t3 + 3.0 * t2;
    double h11 = t3 - t2;
    return h00 * x0 + h10 * h * d0 + h01 * x1 + h11 * h * d1;
}

}  // namespace

namespace detail {

struct StageContext {
    const DelaySystemSpec* sys = nullptr;
    const Trajectory* traj = nullptr;
    const std::vector<double>* row_norms = nullptr;  // indexed from traj->first_
    long max_steps = 0;
    long base = 0;
    int half_steps = 0;  // stage offset from t_base in units of h/2
    double tau = 0.0;
    const double* current = nullptr;
    const double* delayed = nullptr;  // delay-major, total_dim each
    mutable std::optional<double> hist_norm;

    DelayView view(int i) const { return DelayView(this, i); }

    double window_norm() const {
        double best = sys->state_norm(std::span<const double>(current, sys->total_dim()));
        if (max_steps == 0) return best;
        long lo = base - max_steps + (half_steps > 0 ? 1 : 0);
        lo = std::max(lo, traj->first_);
        for (long r = lo; r <= base; ++r) {
            double v = (*row_norms)[static_cast<std::size_t>(r - traj->first_)];
            if (v > best) best = v;
        }
        return best;
    }
};

}  // namespace detail

double DelayView::time() const noexcept { return ctx_->tau; }

void DelayView::check_access(int j) const {
    if (j < 1 || static_cast<std::size_t>(j) > ctx_->sys->size()) {
        throw std::out_of_range("subsystem index " + std::to_string(j) + " out of range");
    }
    if (j != self_ && !ctx_->sys->may_read(self_, j)) {
        throw std::logic_error("subsystem " + std::to_string(self_) + " reads undeclared subsystem " +
                               std::to_string(j));
    }
}

std::span<const double> DelayView::state(int j) const {
    check_access(j);
    const auto& sys = *ctx_->sys;
    return {ctx_->current + sys.offset(j), sys.subsystem(j).dim};
}

std::span<const double> DelayView::delayed(int j, std::size_t l) const {
    check_access(j);
    const auto& sys = *ctx_->sys;
    if (l >= sys.delays().size()) throw std::out_of_range("delay index out of range");
    return {ctx_->delayed + l * sys.total_dim() + sys.offset(j), sys.subsystem(j).dim};
}

double DelayView::history_norm() const {
    if (!ctx_->hist_norm) ctx_->hist_norm = ctx_->window_norm();
    return *ctx_->hist_norm;
}

SimulationError::SimulationError(const std::string& what, double t, std::vector<double> state)
    : std::runtime_error(what), t_(t), state_(std::move(state)) {}

const SubsystemSpec& DelaySystemSpec::subsystem(int i) const {
    if (i < 1 || static_cast<std::size_t>(i) > subsystems_.size()) {
        throw std::out_of_range("subsystem index " + std::to_string(i) + " out of range");
    }
    return subsystems_[static_cast<std::size_t>(i - 1)];
}

std::size_t DelaySystemSpec::offset(int i) const {
    subsystem(i);
    return offsets_[static_cast<std::size_t>(i - 1)];
}

std::size_t DelaySystemSpec::input_offset(int i) const {
    subsystem(i);
    return input_offsets_[static_cast<std::size_t>(i - 1)];
}

std::vector<std::size_t> DelaySystemSpec::dims() const {
    std::vector<std::size_t> out;
    out.reserve(subsystems_.size());
    for (const auto& s : subsystems_) out.push_back(s.dim);
    return out;
}

bool DelaySystemSpec::may_read(int i, int j) const {
    if (i < 1 || j < 1 || static_cast<std::size_t>(i) > size() || static_cast<std::size_t>(j) > size()) {
        return false;
    }
    return i == j || readable_[static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(j - 1)];
}

double DelaySystemSpec::state_norm(std::span<const double> x) const {
    if (x.size() != total_dim_) throw std::invalid_argument("state vector has wrong dimension");
    std::vector<std::size_t> d = dims();
    return blocks_norm(d, x);
}

DelaySystemSpec build_interconnection(std::vector<SubsystemSpec> subsystems, std::vector<double> delays) {
    if (subsystems.empty()) throw std::invalid_argument("interconnection needs at least one subsystem");
    DelaySystemSpec sys;
    const std::size_t k = subsystems.size();
    for (double d : delays) {
        if (!std::isfinite(d) || d < 0.0) {
            throw std::invalid_argument("delays must be finite and nonnegative");
        }
        sys.max_delay_ = std::max(sys.max_delay_, d);
    }
    sys.readable_.assign(k, std::vector<bool>(k, false));
    for (std::size_t i = 0; i < k; ++i) {
        const auto& s = subsystems[i];
        if (s.dim == 0) {
            throw std::invalid_argument("subsystem " + std::to_string(i + 1) + " has zero state dimension");
        }
        if (!s.rhs) throw std::invalid_argument("subsystem " + std::to_string(i + 1) + " has no right-hand side");
        for (int j : s.references) {
            if (j < 1 || static_cast<std::size_t>(j) > k) {
                throw std::invalid_argument("subsystem " + std::to_string(i + 1) +
                                            " references undeclared subsystem " + std::to_string(j));
            }
            sys.readable_[i][static_cast<std::size_t>(j - 1)] = true;
        }
        sys.offsets_.push_back(sys.total_dim_);
        sys.input_offsets_.push_back(sys.total_input_dim_);
        sys.total_dim_ += s.dim;
        sys.total_input_dim_ += s.input_dim;
    }
    sys.subsystems_ = std::move(subsystems);
    sys.delays_ = std::move(delays);
    return sys;
}

// ---- history -------------------------------------------------------------

HistoryFunction HistoryFunction::constant(const std::vector<std::vector<double>>& per_subsystem) {
    std::vector<double> flat;
    for (const auto& v : per_subsystem) flat.insert(flat.end(), v.begin(), v.end());
    if (!all_finite(flat)) throw std::invalid_argument("history values must be finite");
    const double inf = std::numeric_limits<double>::infinity();
    std::size_t n = flat.size();
    return HistoryFunction(
        n, [flat = std::move(flat)](double, std::span<double> out) { std::copy(flat.begin(), flat.end(), out.begin()); },
        -inf, inf);
}

HistoryFunction HistoryFunction::polynomial(std::vector<std::vector<double>> coeffs) {
    for (const auto& c : coeffs) {
        if (!all_finite(c)) throw std::invalid_argument("history coefficients must be finite");
    }
    const double inf = std::numeric_limits<double>::infinity();
    std::size_t n = coeffs.size();
    return HistoryFunction(
        n,
        [coeffs = std::move(coeffs)](double t, std::span<double> out) {
            for (std::size_t c = 0; c < coeffs.size(); ++c) {
                double acc = 0.0;
                for (auto it = coeffs[c].rbegin(); it != coeffs[c].rend(); ++it) acc = acc * t + *it;
                out[c] = acc;
            }
        },
        -inf, inf);
}

HistoryFunction HistoryFunction::table(std::vector<double> times, std::vector<std::vector<double>> rows) {
    if (times.empty() || times.size() != rows.size()) {
        throw std::invalid_argument("history table needs matching, nonempty times and rows");
    }
    std::size_t n = rows.front().size();
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != n) throw std::invalid_argument("history table rows differ in length");
        if (!all_finite(rows[r]) || !std::isfinite(times[r])) {
            throw std::invalid_argument("history table entries must be finite");
        }
        if (r > 0 && !(times[r] > times[r - 1])) {
            throw std::invalid_argument("history table times must be strictly increasing");
        }
    }
    double lo = times.front();
    double hi = times.back();
    return HistoryFunction(
        n,
        [times = std::move(times), rows = std::move(rows)](double t, std::span<double> out) {
            if (t <= times.front()) {
                std::copy(rows.front().begin(), rows.front().end(), out.begin());
                return;
            }
            if (t >= times.back()) {
                std::copy(rows.back().begin(), rows.back().end(), out.begin());
                return;
            }
            auto it = std::upper_bound(times.begin(), times.end(), t);
            std::size_t b = static_cast<std::size_t>(it - times.begin());
            std::size_t a = b - 1;
            double w = (t - times[a]) / (times[b] - times[a]);
            for (std::size_t c = 0; c < out.size(); ++c) {
                out[c] = rows[a][c] + w * (rows[b][c] - rows[a][c]);
            }
        },
        lo, hi);
}

HistoryFunction HistoryFunction::from_function(std::size_t dim, Fn fn) {
    const double inf = std::numeric_limits<double>::infinity();
    return HistoryFunction(dim, std::move(fn), -inf, inf);
}

void HistoryFunction::operator()(double t, std::span<double> out) const {
    if (out.size() != dim_) throw std::invalid_argument("history evaluated into a buffer of the wrong size");
    fn_(t, out);
}

// ---- input ---------------------------------------------------------------

InputSignal InputSignal::zero(std::size_t dim) {
    return InputSignal(
        dim, [](double, std::span<double> out) { std::fill(out.begin(), out.end(), 0.0); }, 0.0, {}, {});
}

InputSignal InputSignal::constant(const std::vector<std::vector<double>>& per_subsystem) {
    std::vector<double> flat;
    for (const auto& v : per_subsystem) flat.insert(flat.end(), v.begin(), v.end());
    if (!all_finite(flat)) throw std::invalid_argument("input values must be finite");
    double sup = 0.0;
    for (double v : flat) sup = std::max(sup, std::fabs(v));
    std::size_t n = flat.size();
    std::vector<std::vector<double>> rows{flat};
    return InputSignal(
        n, [flat = std::move(flat)](double, std::span<double> out) { std::copy(flat.begin(), flat.end(), out.begin()); },
        sup, std::vector<double>{0.0}, std::move(rows));
}

InputSignal InputSignal::piecewise_constant(std::vector<double> times, std::vector<std::vector<double>> rows) {
    if (times.empty() || times.size() != rows.size()) {
        throw std::invalid_argument("input table needs matching, nonempty times and rows");
    }
    std::size_t n = rows.front().size();
    double sup = 0.0;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != n) throw std::invalid_argument("input table rows differ in length");
        if (!all_finite(rows[r]) || !std::isfinite(times[r])) {
            throw std::invalid_argument("input table entries must be finite");
        }
        if (r > 0 && !(times[r] > times[r - 1])) {
            throw std::invalid_argument("input table times must be strictly increasing");
        }
        for (double v : rows[r]) sup = std::max(sup, std::fabs(v));
    }
    auto shared_rows = rows;
    auto shared_times = times;
    return InputSignal(
        n,
        [times = std::move(shared_times), rows = std::move(shared_rows)](double t, std::span<double> out) {
            auto it = std::upper_bound(times.begin(), times.end(), t);
            std::size_t k = it == times.begin() ? 0 : static_cast<std::size_t>(it - times.begin()) - 1;
            std::copy(rows[k].begin(), rows[k].end(), out.begin());
        },
        sup, std::move(times), std::move(rows));
}

InputSignal InputSignal::from_function(std::size_t dim, Fn fn) {
    return InputSignal(dim, std::move(fn), std::nullopt, {}, {});
}

void InputSignal::operator()(double t, std::span<double> out) const {
    if (dim_ != 0 && out.size() != dim_) {
        throw std::invalid_argument("input evaluated into a buffer of the wrong size");
    }
    if (dim_ == 0 && !out.empty()) {
        std::fill(out.begin(), out.end(), 0.0);
        return;
    }
    fn_(t, out);
}

std::vector<double> InputSignal::subsystem_norms(const DelaySystemSpec& sys, double horizon, double step) const {
    std::vector<double> norms(sys.size(), 0.0);
    const std::size_t m = sys.total_input_dim();
    if (m == 0 || dim_ == 0) return norms;
    auto accumulate = [&](std::span<const double> u) {
        for (std::size_t i = 1; i <= sys.size(); ++i) {
            const auto& s = sys.subsystem(static_cast<int>(i));
            if (s.input_dim == 0) continue;
            std::size_t off = sys.input_offset(static_cast<int>(i));
            double acc = 0.0;
            for (std::size_t c = 0; c < s.input_dim; ++c) acc += u[off + c] * u[off + c];
            norms[i - 1] = std::max(norms[i - 1], std::sqrt(acc));
        }
    };
    if (!rows_.empty()) {
        // Row k is active on [times_k, times_{k+1}); the first row also before times_0.
        for (std::size_t k = 0; k < rows_.size(); ++k) {
            bool starts_in_time = k == 0 || times_[k] <= horizon;
            bool ends_after_zero = k + 1 == rows_.size() || times_[k + 1] > 0.0;
            if (starts_in_time && ends_after_zero) accumulate(rows_[k]);
        }
        return norms;
    }
    std::vector<double> u(m);
    const double dt = step / 2.0;
    const long count = static_cast<long>(std::ceil(horizon / dt - 1e-9));
    for (long j = 0; j <= count; ++j) {
        double t = std::min(static_cast<double>(j) * dt, horizon);
        (*this)(t, u);
        accumulate(u);
    }
    return norms;
}

// ---- trajectory ----------------------------------------------------------

std::span<const double> Trajectory::row(long i) const {
    if (i < first_ || i > last_) throw std::out_of_range("trajectory row " + std::to_string(i) + " out of range");
    return {states_.data() + static_cast<std::size_t>(i - first_) * dim_, dim_};
}

std::span<const double> Trajectory::derivative(long i) const {
    if (i < 0 || i > last_) throw std::out_of_range("trajectory derivative " + std::to_string(i) + " out of range");
    return {derivs_.data() + static_cast<std::size_t>(i) * dim_, dim_};
}

std::vector<double> Trajectory::at(double t) const {
    std::vector<double> out(dim_);
    at(t, out);
    return out;
}

void Trajectory::at(double t, std::span<double> out) const {
    if (out.size() != dim_) throw std::invalid_argument("trajectory evaluated into a buffer of the wrong size");
    const double slack = 1e-9 * step_;
    if (!(t >= time(first_) - slack && t <= final_time() + slack)) {
        throw std::out_of_range("time " + format_double(t) + " outside the trajectory domain");
    }
    double r = t / step_;
    double nearest = std::nearbyint(r);
    if (std::fabs(r - nearest) <= 1e-9) {
        auto x = row(std::clamp(static_cast<long>(nearest), first_, last_));
        std::copy(x.begin(), x.end(), out.begin());
        return;
    }
    if (t < 0.0) {
        history_(t, out);
        return;
    }
    long i = static_cast<long>(std::floor(r));
    double theta = r - static_cast<double>(i);
    auto x0 = row(i);
    auto x1 = row(i + 1);
    auto d0 = derivative(i);
    auto d1 = derivative(i + 1);
    for (std::size_t c = 0; c < dim_; ++c) out[c] = hermite(x0[c], d0[c], x1[c], d1[c], step_, theta);
}

double Trajectory::state_norm(std::span<const double> x) const { return blocks_norm(dims_, x); }

double Trajectory::block_norm(std::span<const double> x, int i) const {
    if (i < 1 || static_cast<std::size_t>(i) > dims_.size()) throw std::out_of_range("block index out of range");
    std::size_t off = 0;
    for (int b = 1; b < i; ++b) off += dims_[static_cast<std::size_t>(b - 1)];
    std::size_t d = dims_[static_cast<std::size_t>(i - 1)];
    if (d == 1) return std::fabs(x[off]);
    double acc = 0.0;
    for (std::size_t c = 0; c < d; ++c) acc += x[off + c] * x[off + c];
    return std::sqrt(acc);
}

// ---- integration ---------------------------------------------------------

Trajectory simulate(const DelaySystemSpec& sys, const HistoryFunction& history, const InputSignal& input,
                    const SimulationOptions& options) {
    const double h = options.step;
    const double T = options.horizon;
    if (!(h > 0.0) || !std::isfinite(h)) throw std::invalid_argument("step must be finite and positive");
    if (!(T >= 0.0) || !std::isfinite(T)) throw std::invalid_argument("horizon must be finite and nonnegative");
    if (!(options.divergence_threshold > 0.0)) throw std::invalid_argument("divergence threshold must be positive");
    const std::size_t n = sys.total_dim();
    if (history.dim() != n) {
        throw std::invalid_argument("history has dimension " + std::to_string(history.dim()) + ", system has " +
                                    std::to_string(n));
    }
    if (input.dim() != 0 && input.dim() != sys.total_input_dim()) {
        throw std::invalid_argument("input has dimension " + std::to_string(input.dim()) + ", system expects " +
                                    std::to_string(sys.total_input_dim()));
    }

    std::vector<long> delay_steps;
    long M = 0;
    for (double theta : sys.delays()) {
        double ratio = theta / h;
        double d = std::nearbyint(ratio);
        if (theta > 0.0 && d < 1.0) {
            throw std::invalid_argument("delay " + format_double(theta) + " is shorter than the step " +
                                        format_double(h));
        }
        if (std::fabs(theta - d * h) > 1e-12 * theta) {
            throw std::invalid_argument("step " + format_double(h) + " does not divide delay " + format_double(theta));
        }
        delay_steps.push_back(static_cast<long>(d));
        M = std::max(M, static_cast<long>(d));
    }
    if (M > 0 && (history.earliest() > -sys.max_delay() || history.latest() < 0.0)) {
        throw std::invalid_argument("history does not cover the initial interval");
    }

    const long N = T == 0.0 ? 0 : static_cast<long>(std::ceil(T / h - 1e-9));
    const std::size_t L = delay_steps.size();
    const auto& kt = kernels::active();

    Trajectory traj(history);
    traj.step_ = h;
    traj.horizon_ = T;
    traj.max_delay_ = sys.max_delay();
    traj.threshold_ = options.divergence_threshold;
    traj.first_ = -M;
    traj.last_ = 0;
    traj.dim_ = n;
    traj.dims_ = sys.dims();
    traj.delays_ = sys.delays();
    traj.states_.resize(static_cast<std::size_t>(M + N + 1) * n);
    traj.derivs_.resize(static_cast<std::size_t>(N + 1) * n);

    std::vector<double> row_norms;
    row_norms.reserve(static_cast<std::size_t>(M + N + 1));
    for (long r = -M; r <= 0; ++r) {
        std::span<double> x(traj.states_.data() + static_cast<std::size_t>(r + M) * n, n);
        history(static_cast<double>(r) * h, x);
        if (!all_finite(x)) {
            throw SimulationError("history is not finite at t=" + format_double(static_cast<double>(r) * h),
                                  static_cast<double>(r) * h, std::vector<double>(x.begin(), x.end()));
        }
        row_norms.push_back(traj.state_norm(x));
    }

    auto row_ptr = [&](long r) { return traj.states_.data() + static_cast<std::size_t>(r + M) * n; };
    auto deriv_ptr = [&](long r) { return traj.derivs_.data() + static_cast<std::size_t>(r) * n; };

    std::vector<double> delayed(std::max<std::size_t>(L, 1) * n);
    std::vector<double> u(sys.total_input_dim());
    std::vector<double> tmp(n);

    detail::StageContext ctx;
    ctx.sys = &sys;
    ctx.traj = &traj;
    ctx.row_norms = &row_norms;
    ctx.max_steps = M;

    auto eval_stage = [&](long base, int half_steps, const double* state, double* out) {
        const double tau = (static_cast<double>(base) + 0.5 * half_steps) * h;
        for (std::size_t l = 0; l < L; ++l) {
            double* dst = delayed.data() + l * n;
            const long d = delay_steps[l];
            if (d == 0) {
                std::copy(state, state + n, dst);
            } else if (half_steps == 0) {
                std::copy(row_ptr(base - d), row_ptr(base - d) + n, dst);
            } else if (half_steps == 2) {
                std::copy(row_ptr(base - d + 1), row_ptr(base - d + 1) + n, dst);
            } else {
                const long a = base - d;
                if (a + 1 <= 0) {
                    history((static_cast<double>(a) + 0.5) * h, std::span<double>(dst, n));
                } else {
                    const double* x0 = row_ptr(a);
                    const double* x1 = row_ptr(a + 1);
                    const double* d0 = deriv_ptr(a);
                    const double* d1 = deriv_ptr(a + 1);
                    for (std::size_t c = 0; c < n; ++c) dst[c] = hermite(x0[c], d0[c], x1[c], d1[c], h, 0.5);
                }
            }
        }
        if (!u.empty()) input(tau, u);
        ctx.base = base;
        ctx.half_steps = half_steps;
        ctx.tau = tau;
        ctx.current = state;
        ctx.delayed = delayed.data();
        ctx.hist_norm.reset();
        std::fill(out, out + n, 0.0);
        for (std::size_t i = 1; i <= sys.size(); ++i) {
            const int idx = static_cast<int>(i);
            const auto& s = sys.subsystem(idx);
            std::span<const double> ui(u.data() + sys.input_offset(idx), s.input_dim);
            std::span<double> dx(out + sys.offset(idx), s.dim);
            s.rhs(ctx.view(idx), ui, dx);
            if (!all_finite(dx)) {
                throw SimulationError("right-hand side of subsystem " + std::to_string(i) +
                                          " is not finite at t=" + format_double(tau),
                                      tau, std::vector<double>(state, state + n));
            }
        }
    };

    auto diverged = [&](std::span<const double> y) {
        double nv = traj.state_norm(y);
        return !(nv <= options.divergence_threshold);
    };

    std::vector<double> k2(n), k3(n), k4(n), y(n);
    bool have_last_deriv = false;
    for (long s = 0; s < N; ++s) {
        const double* x = row_ptr(s);
        double* k1 = deriv_ptr(s);
        eval_stage(s, 0, x, k1);
        kt.axpy(0.5 * h, k1, x, y.data(), n);
        if (diverged(y)) {
            traj.escape_time_ = (static_cast<double>(s) + 0.5) * h;
            traj.last_ = s;
            have_last_deriv = true;
            break;
        }
        eval_stage(s, 1, y.data(), k2.data());
        kt.axpy(0.5 * h, k2.data(), x, y.data(), n);
        if (diverged(y)) {
            traj.escape_time_ = (static_cast<double>(s) + 0.5) * h;
            traj.last_ = s;
            have_last_deriv = true;
            break;
        }
        eval_stage(s, 1, y.data(), k3.data());
        kt.axpy(h, k3.data(), x, y.data(), n);
        if (diverged(y)) {
            traj.escape_time_ = static_cast<double>(s + 1) * h;
            traj.last_ = s;
            have_last_deriv = true;
            break;
        }
        eval_stage(s, 2, y.data(), k4.data());
        double* next = row_ptr(s + 1);
        kt.rk4_combine(h, x, k1, k2.data(), k3.data(), k4.data(), next, n);
        std::span<const double> nx(next, n);
        if (diverged(nx)) {
            traj.escape_time_ = static_cast<double>(s + 1) * h;
            traj.last_ = s;
            have_last_deriv = true;
            break;
        }
        row_norms.push_back(traj.state_norm(nx));
        traj.last_ = s + 1;
    }
    if (!have_last_deriv) {
        const long last = traj.last_;
        eval_stage(last, 0, row_ptr(last), deriv_ptr(last));
    }
    traj.states_.resize(static_cast<std::size_t>(traj.last_ + M + 1) * n);
    traj.derivs_.resize(static_cast<std::size_t>(traj.last_ + 1) * n);
    if (traj.escape_time_) {
        logger()->info("trajectory exceeded {} at t={}", options.divergence_threshold, *traj.escape_time_);
    }
    return traj;
}

// ---- auxiliary system ----------------------------------------------------

DelaySystemSpec build_auxiliary_system(const DelaySystemSpec& sys, const KFunction& rho, const InputSignal& d) {
    const std::size_t m = sys.total_input_dim();
    if (d.dim() != 0 && d.dim() != m) {
        throw std::invalid_argument("disturbance has dimension " + std::to_string(d.dim()) + ", system expects " +
                                    std::to_string(m));
    }
    auto warned = std::make_shared<std::atomic<bool>>(false);
    if (auto sup = d.exact_sup_abs(); sup && *sup > 1.0) {
        logger()->warn("disturbance reaches |d| = {}; values are clamped to [-1, 1]", *sup);
        warned->store(true);
    }
    std::vector<SubsystemSpec> out;
    for (std::size_t i = 1; i <= sys.size(); ++i) {
        const auto& orig = sys.subsystem(static_cast<int>(i));
        SubsystemSpec s;
        s.dim = orig.dim;
        s.input_dim = 0;
        s.references = orig.references;
        const std::size_t off = sys.input_offset(static_cast<int>(i));
        const std::size_t mi = orig.input_dim;
        s.rhs = [rhs = orig.rhs, rho, d, off, mi, m, warned](const DelayView& view, std::span<const double>,
                                                            std::span<double> dx) {
            std::vector<double> full(m);
            if (m > 0) d(view.time(), full);
            std::vector<double> ui(full.begin() + static_cast<std::ptrdiff_t>(off),
                                   full.begin() + static_cast<std::ptrdiff_t>(off + mi));
            const double scale = mi > 0 ? rho(view.history_norm()) : 0.0;
            for (double& v : ui) {
                if (v > 1.0 || v < -1.0) {
                    if (!warned->exchange(true)) {
                        logger()->warn("disturbance value {} at t={} clamped to [-1, 1]", v, view.time());
                    }
                    v = std::clamp(v, -1.0, 1.0);
                }
                v *= scale;
            }
            rhs(view, ui, dx);
        };
        out.push_back(std::move(s));
    }
    return build_interconnection(std::move(out), sys.delays());
}

DelaySystemSpec paper_example(double delta) {
    if (!(delta > 0.0) || !std::isfinite(delta)) throw std::invalid_argument("delta must be finite and positive");
    std::vector<SubsystemSpec> subs(3);
    subs[0].references = {2};
    subs[0].rhs = [](const DelayView& v, std::span<const double>, std::span<double> dx) {
        double w = v.delayed(2, 0)[0];
        double w2 = w * w;
        dx[0] = -3.0 * v.state(1)[0] + w2 / (1.0 + w2);
    };
    subs[1].references = {3};
    subs[1].rhs = [](const DelayView& v, std::span<const double>, std::span<double> dx) {
        double w = v.delayed(3, 0)[0];
        dx[0] = -1.5 * v.state(2)[0] + w * w * w;
    };
    subs[2].references = {1};
    subs[2].rhs = [](const DelayView& v, std::span<const double>, std::span<double> dx) {
        double w = v.delayed(1, 0)[0];
        dx[0] = -2.0 * v.state(3)[0] + w * w;
    };
    return build_interconnection(std::move(subs), {delta});
}

void write_csv(const Trajectory& traj, std::ostream& out) {
    out << 't';
    for (std::size_t c = 1; c <= traj.dim(); ++c) out << ",x_" << c;
    out << '\n';
    for (long i = traj.first_index(); i <= traj.last_index(); ++i) {
        out << format_double(traj.time(i));
        for (double v : traj.row(i)) out << ',' << format_double(v);
        out << '\n';
    }
}

}  // namespace smallgain
