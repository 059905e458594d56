#include "smallgain/bound_checker.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "smallgain/format.hpp"

namespace smallgain {

namespace {

double norm_of(const Trajectory& traj, std::span<const double> x, int subsystem) {
    return subsystem == 0 ? traj.state_norm(x) : traj.block_norm(x, subsystem);
}

long first_row_at_or_after(const Trajectory& traj, double t) {
    long i = static_cast<long>(std::ceil(t / traj.step() - 1e-9));
    return std::clamp(i, traj.first_index(), traj.last_index());
}

long last_row_at_or_before(const Trajectory& traj, double t) {
    long i = static_cast<long>(std::floor(t / traj.step() + 1e-9));
    return std::clamp(i, traj.first_index(), traj.last_index());
}

void note_violation(BoundReport& r, double t, double norm, double bound, int subsystem) {
    if (!r.witness) r.witness = BoundWitness{t, norm, bound, subsystem};
    r.holds = false;
}

}  // namespace

std::string_view to_string(PropertyKind k) noexcept {
    switch (k) {
        case PropertyKind::gs: return "GS";
        case PropertyKind::ag: return "AG";
        case PropertyKind::gas: return "GAS";
    }
    return "?";
}

double sup_norm(const Trajectory& traj, double t0, double t1, int subsystem) {
    const double slack = 1e-9 * traj.step();
    if (!(t0 <= t1) || t0 < traj.time(traj.first_index()) - slack || t1 > traj.final_time() + slack) {
        throw std::out_of_range("interval [" + format_double(t0) + ", " + format_double(t1) +
                                "] outside the trajectory domain");
    }
    double best = std::max(norm_of(traj, traj.at(t0), subsystem), norm_of(traj, traj.at(t1), subsystem));
    long lo = first_row_at_or_after(traj, t0);
    long hi = last_row_at_or_before(traj, t1);
    for (long i = lo; i <= hi; ++i) best = std::max(best, norm_of(traj, traj.row(i), subsystem));
    return best;
}

std::vector<double> history_norms(const Trajectory& traj) {
    std::vector<double> out(traj.dims().size(), 0.0);
    for (long i = traj.first_index(); i <= std::min(0L, traj.last_index()); ++i) {
        auto x = traj.row(i);
        for (std::size_t b = 0; b < out.size(); ++b) {
            out[b] = std::max(out[b], traj.block_norm(x, static_cast<int>(b + 1)));
        }
    }
    return out;
}

LimsupEstimate limsup_estimate(const Trajectory& traj, double tail_fraction, int subsystem) {
    if (traj.blow_up()) throw std::invalid_argument("lim sup of a blown-up trajectory");
    if (!(tail_fraction > 0.0 && tail_fraction < 1.0)) {
        throw std::invalid_argument("tail fraction must lie in (0, 1)");
    }
    const double T = traj.final_time();
    LimsupEstimate est;
    const std::array<double, 3> horizons{T / 4.0, T / 2.0, T};
    for (std::size_t k = 0; k < horizons.size(); ++k) {
        double H = horizons[k];
        est.tail_sups[k] = sup_norm(traj, H * (1.0 - tail_fraction), H, subsystem);
    }
    est.value = est.tail_sups[2];
    const double slack = 1e-9;
    for (std::size_t k = 1; k < est.tail_sups.size(); ++k) {
        double prev = est.tail_sups[k - 1];
        if (est.tail_sups[k] > prev + slack * std::max(1.0, prev)) est.settled = false;
    }
    return est;
}

BoundReport check_gs(const Trajectory& traj, const GainDigraph& g, const ClosedLoopGains& closed,
                     std::span<const double> hist_norms, std::span<const double> input_norms) {
    const std::size_t k = static_cast<std::size_t>(g.size());
    if (hist_norms.size() != k || input_norms.size() != k || closed.size() != k) {
        throw std::invalid_argument("check_gs: per-subsystem data does not match the digraph size");
    }
    BoundReport r;
    r.kind = PropertyKind::gs;
    r.horizon = traj.final_time();
    const double c = combined_initial_constant(g, hist_norms);
    double u_norm = 0.0;
    for (double v : input_norms) u_norm = std::max(u_norm, v);
    r.bounds.resize(k);
    for (std::size_t i = 0; i < k; ++i) {
        r.bounds[i] = std::max(eval_or_zero(closed.gs_sigma[i], c), eval_or_zero(closed.gs_input[i], u_norm));
    }
    r.worst_margin = std::numeric_limits<double>::infinity();
    for (long n = 0; n <= traj.last_index(); ++n) {
        auto x = traj.row(n);
        const double t = traj.time(n);
        double m = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < k; ++i) {
            double xn = traj.block_norm(x, static_cast<int>(i + 1));
            double mi = r.bounds[i] - xn;
            if (mi < 0.0) note_violation(r, t, xn, r.bounds[i], static_cast<int>(i + 1));
            m = std::min(m, mi);
        }
        r.margins.push_back({t, m});
        if (m < r.worst_margin) {
            r.worst_margin = m;
            r.t_worst = t;
        }
    }
    if (traj.blow_up()) {
        double t = *traj.escape_time();
        double bound = *std::max_element(r.bounds.begin(), r.bounds.end());
        note_violation(r, t, traj.divergence_threshold(), bound, 0);
        r.note = "trajectory diverged at t=" + format_double(t);
    }
    return r;
}

BoundReport check_gs(const Trajectory& traj, const GainDigraph& g, const ClosedLoopGains& closed,
                     const DelaySystemSpec& sys, const InputSignal& u) {
    auto hist = history_norms(traj);
    auto un = u.subsystem_norms(sys, traj.final_time(), traj.step());
    return check_gs(traj, g, closed, hist, un);
}

BoundReport check_ag(const Trajectory& traj, const ClosedLoopGains& closed, std::span<const double> input_norms,
                     double tail_fraction, double tolerance) {
    const std::size_t k = closed.size();
    if (input_norms.size() != k || traj.dims().size() != k) {
        throw std::invalid_argument("check_ag: per-subsystem data does not match the closed-loop gains");
    }
    BoundReport r;
    r.kind = PropertyKind::ag;
    r.horizon = traj.final_time();
    r.tail_fraction = tail_fraction;
    if (traj.blow_up()) {
        r.holds = false;
        r.witness = BoundWitness{*traj.escape_time(), traj.divergence_threshold(), 0.0, 0};
        r.worst_margin = -std::numeric_limits<double>::infinity();
        r.t_worst = *traj.escape_time();
        r.note = "trajectory diverged; no lim sup estimate";
        return r;
    }
    double u_norm = 0.0;
    for (double v : input_norms) u_norm = std::max(u_norm, v);
    r.worst_margin = std::numeric_limits<double>::infinity();
    const double T = traj.final_time();
    const long tail_start = first_row_at_or_after(traj, T * (1.0 - tail_fraction));
    for (std::size_t i = 0; i < k; ++i) {
        const int sub = static_cast<int>(i + 1);
        auto est = limsup_estimate(traj, tail_fraction, sub);
        const double bound = eval_or_zero(closed.ag_input[i], u_norm);
        r.bounds.push_back(bound);
        r.limsup.push_back(est);
        r.settled = r.settled && est.settled;
        const double m = bound + tolerance - est.value;
        if (m < r.worst_margin) {
            r.worst_margin = m;
            r.t_worst = T;
        }
        if (m < 0.0) {
            // Witness: first tail point above the tolerated bound.
            for (long n = tail_start; n <= traj.last_index(); ++n) {
                double xn = traj.block_norm(traj.row(n), sub);
                if (xn > bound + tolerance) {
                    note_violation(r, traj.time(n), xn, bound + tolerance, sub);
                    break;
                }
            }
            if (!r.witness) note_violation(r, T, est.value, bound + tolerance, sub);
        }
    }
    for (long n = tail_start; n <= traj.last_index(); ++n) {
        auto x = traj.row(n);
        double m = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < k; ++i) {
            m = std::min(m, r.bounds[i] + tolerance - traj.block_norm(x, static_cast<int>(i + 1)));
        }
        r.margins.push_back({traj.time(n), m});
    }
    if (!r.settled) r.note = "tail suprema not settled";
    return r;
}

BoundReport check_gas(const Trajectory& traj, const KFunction& sigma, double hist_norm, double eps,
                      double tail_fraction) {
    if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
    BoundReport r;
    r.kind = PropertyKind::gas;
    r.horizon = traj.final_time();
    r.tail_fraction = tail_fraction;
    const double bound = sigma(hist_norm);
    r.bounds.assign(traj.dims().size(), bound);
    r.worst_margin = std::numeric_limits<double>::infinity();
    for (long n = 0; n <= traj.last_index(); ++n) {
        const double t = traj.time(n);
        const double xn = traj.norm_at(n);
        const double m = bound - xn;
        if (m < 0.0) note_violation(r, t, xn, bound, 0);
        r.margins.push_back({t, m});
        if (m < r.worst_margin) {
            r.worst_margin = m;
            r.t_worst = t;
        }
    }
    if (traj.blow_up()) {
        note_violation(r, *traj.escape_time(), traj.divergence_threshold(), bound, 0);
        r.note = "trajectory diverged at t=" + format_double(*traj.escape_time());
        return r;
    }
    auto est = limsup_estimate(traj, tail_fraction, 0);
    r.limsup.push_back(est);
    r.settled = est.settled;
    if (!(est.value < eps)) {
        const double T = traj.final_time();
        long n = first_row_at_or_after(traj, T * (1.0 - tail_fraction));
        for (; n <= traj.last_index(); ++n) {
            if (!(traj.norm_at(n) < eps)) break;
        }
        n = std::min(n, traj.last_index());
        note_violation(r, traj.time(n), traj.norm_at(n), eps, 0);
        r.note = "tail sup " + format_double(est.value) + " not below " + format_double(eps);
    }
    return r;
}

GainProfile linear_subsystem_profile(double lambda, double epsilon) {
    if (!(lambda > 0.0) || !(epsilon > 0.0)) {
        throw std::invalid_argument("lambda and epsilon must be positive");
    }
    return GainProfile{lambda, epsilon, KFunction::linear(1.0 + 1.0 / epsilon),
                       KFunction::linear((1.0 + epsilon) / lambda)};
}

}  // namespace smallgain
