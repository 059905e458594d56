#include "smallgain/gain_reduction.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace smallgain {

std::string_view to_string(Channel ch) noexcept {
    return ch == Channel::input ? "input" : "constant";
}

std::optional<KFunction> ReducedSystem::edge(int i, int j) const {
    auto it = edges.find({i, j});
    if (it == edges.end()) return std::nullopt;
    return it->second;
}

std::optional<KFunction> ReducedSystem::channel(Channel ch, int i) const {
    const auto& gains = channels[static_cast<std::size_t>(ch)];
    auto it = gains.find(i);
    if (it == gains.end()) return std::nullopt;
    return it->second;
}

ReducedSystem initial_reduction(const GainDigraph& g) {
    ReducedSystem sys;
    sys.surviving.resize(static_cast<std::size_t>(g.size()));
    std::iota(sys.surviving.begin(), sys.surviving.end(), 1);
    sys.edges = g.edges();
    sys.channels[static_cast<std::size_t>(Channel::input)] = g.input_gains();
    const KFunction id = KFunction::identity();
    for (int i = 1; i <= g.size(); ++i) {
        sys.channels[static_cast<std::size_t>(Channel::constant)].emplace(i, id);
    }
    return sys;
}

EliminationRefused::EliminationRefused(int i, int m, KFunction loop, ViolatedAt witness)
    : std::runtime_error("cannot eliminate node " + std::to_string(m) + ": loop through " +
                         std::to_string(i) + " and " + std::to_string(m) + " reaches " +
                         std::to_string(witness.value) + " >= s at s = " + std::to_string(witness.s)),
      i_(i), m_(m), loop_(std::move(loop)), witness_(witness) {}

ReducedSystem eliminate_node(const ReducedSystem& sys, int m, const GridSpec& grid) {
    if (std::find(sys.surviving.begin(), sys.surviving.end(), m) == sys.surviving.end()) {
        throw std::invalid_argument("node " + std::to_string(m) + " is not in the reduced system");
    }
    ReducedSystem out;
    out.trace = sys.trace;
    for (int v : sys.surviving) {
        if (v != m) out.surviving.push_back(v);
    }

    EliminationStep step;
    step.node = m;
    for (const auto& [key, gain] : sys.edges) {
        if (key.first == m) step.row.emplace(key, gain);
    }
    for (std::size_t ch = 0; ch < kChannelCount; ++ch) {
        auto it = sys.channels[ch].find(m);
        if (it != sys.channels[ch].end()) step.row_channels[ch] = it->second;
    }

    // Edges not touching m carry over unchanged.
    for (const auto& [key, gain] : sys.edges) {
        if (key.first != m && key.second != m) out.edges.emplace(key, gain);
    }
    for (std::size_t ch = 0; ch < kChannelCount; ++ch) {
        for (const auto& [i, gain] : sys.channels[ch]) {
            if (i != m) out.channels[ch].emplace(i, gain);
        }
    }

    for (int i : out.surviving) {
        const auto to_m = sys.edge(i, m);
        if (!to_m) continue;
        for (const auto& [key, from_m] : step.row) {
            const int j = key.second;
            KFunction term = compose(*to_m, from_m);
            if (j == i) {
                Verdict verdict = less_than_identity(term, grid);
                if (const auto* bad = std::get_if<ViolatedAt>(&verdict)) {
                    throw EliminationRefused(i, m, term, *bad);
                }
                step.dropped.push_back({i, std::move(term), verdict});
                continue;
            }
            auto merged = max_of(out.edge(i, j), term);
            out.edges.insert_or_assign({i, j}, *merged);
            step.introduced.push_back({i, j, std::nullopt, std::move(term)});
        }
        for (std::size_t ch = 0; ch < kChannelCount; ++ch) {
            if (!step.row_channels[ch]) continue;
            KFunction term = compose(*to_m, *step.row_channels[ch]);
            auto& gains = out.channels[ch];
            auto it = gains.find(i);
            std::optional<KFunction> current;
            if (it != gains.end()) current = it->second;
            gains.insert_or_assign(i, *max_of(current, term));
            step.introduced.push_back({i, 0, static_cast<Channel>(ch), std::move(term)});
        }
    }
    out.trace.push_back(std::move(step));
    return out;
}

SmallGainViolation::SmallGainViolation(CycleReport report)
    : std::runtime_error("cyclic small-gain condition violated"), report_(std::move(report)) {}

namespace {

std::optional<KFunction> compose_opt(const std::optional<KFunction>& outer,
                                      const std::optional<KFunction>& inner) {
    if (!outer || !inner) return std::nullopt;
    return compose(*outer, *inner);
}

std::vector<int> default_order(int k) {
    std::vector<int> order;
    for (int v = k; v >= 3; --v) order.push_back(v);
    return order;
}

}  // namespace

ClosedLoopGains closed_loop_input_gains(const GainDigraph& g, const GridSpec& grid, std::vector<int> order) {
    ClosedLoopGains result;
    result.precheck = check_cyclic_small_gain(g, grid);
    if (const CycleReport* bad = result.precheck.first_violation()) throw SmallGainViolation(*bad);
    result.certified = result.precheck.overall == VerdictKind::verified;

    const int k = g.size();
    if (order.empty()) order = default_order(k);
    {
        std::vector<int> seen = order;
        std::sort(seen.begin(), seen.end());
        if (std::adjacent_find(seen.begin(), seen.end()) != seen.end()) {
            throw std::invalid_argument("elimination order repeats a node");
        }
        for (int v : seen) {
            if (v < 1 || v > k) throw std::invalid_argument("elimination order names an unknown node");
        }
        if (k - static_cast<int>(order.size()) > 2 || k - static_cast<int>(order.size()) < 1) {
            throw std::invalid_argument("elimination order must leave one or two nodes");
        }
    }

    ReducedSystem sys = initial_reduction(g);
    for (int m : order) sys = eliminate_node(sys, m, grid);
    result.elimination_order = order;
    result.terminal = sys.surviving;
    result.trace = sys.trace;

    const auto n = static_cast<std::size_t>(k);
    std::array<std::vector<std::optional<KFunction>>, kChannelCount> hat;
    for (auto& v : hat) v.assign(n, std::nullopt);
    auto slot = [](int node) { return static_cast<std::size_t>(node - 1); };

    if (sys.surviving.size() == 1) {
        const int a = sys.surviving[0];
        for (std::size_t ch = 0; ch < kChannelCount; ++ch) {
            hat[ch][slot(a)] = sys.channel(static_cast<Channel>(ch), a);
        }
    } else {
        const int a = sys.surviving[0];
        const int b = sys.surviving[1];
        const auto ab = sys.edge(a, b);
        const auto ba = sys.edge(b, a);
        if (ab && ba) {
            const KFunction loop = compose(*ab, *ba);
            const Verdict verdict = less_than_identity(loop, grid);
            if (const auto* bad = std::get_if<ViolatedAt>(&verdict)) throw EliminationRefused(a, b, loop, *bad);
        }
        for (std::size_t ch = 0; ch < kChannelCount; ++ch) {
            const auto c = static_cast<Channel>(ch);
            const auto ga = sys.channel(c, a);
            const auto gb = sys.channel(c, b);
            hat[ch][slot(a)] = max_of(compose_opt(ab, gb), ga);
            hat[ch][slot(b)] = max_of(compose_opt(ba, ga), gb);
        }
    }

    for (auto it = sys.trace.rbegin(); it != sys.trace.rend(); ++it) {
        const EliminationStep& step = *it;
        for (std::size_t ch = 0; ch < kChannelCount; ++ch) {
            std::optional<KFunction> bound;
            for (const auto& [key, gain] : step.row) {
                bound = max_of(bound, compose_opt(gain, hat[ch][slot(key.second)]));
            }
            hat[ch][slot(step.node)] = max_of(bound, step.row_channels[ch]);
        }
    }

    result.ag_input = hat[static_cast<std::size_t>(Channel::input)];
    result.gs_input = hat[static_cast<std::size_t>(Channel::input)];
    result.gs_sigma = hat[static_cast<std::size_t>(Channel::constant)];
    return result;
}

double combined_initial_constant(const GainDigraph& g, std::span<const double> history_norms) {
    if (history_norms.size() != static_cast<std::size_t>(g.size())) {
        throw std::invalid_argument("combined_initial_constant: one history norm per subsystem required");
    }
    for (double v : history_norms) {
        if (!(v >= 0.0)) throw std::invalid_argument("history norms must be nonnegative");
    }
    double c = 0.0;
    for (const auto& [i, sigma] : g.gs_gains()) c = std::max(c, sigma(history_norms[static_cast<std::size_t>(i - 1)]));
    for (const auto& [key, gamma] : g.edges()) {
        c = std::max(c, gamma(history_norms[static_cast<std::size_t>(key.second - 1)]));
    }
    return c;
}

std::optional<KFunction> combined_initial_gain(const GainDigraph& g) {
    std::optional<KFunction> c;
    for (const auto& [i, sigma] : g.gs_gains()) c = max_of(c, sigma);
    for (const auto& [key, gamma] : g.edges()) c = max_of(c, gamma);
    return c;
}

std::optional<KFunction> state_gs_gain(const GainDigraph& g, const ClosedLoopGains& closed) {
    const auto c = combined_initial_gain(g);
    if (!c) return std::nullopt;
    std::optional<KFunction> sigma;
    for (const auto& s : closed.gs_sigma) sigma = max_of(sigma, compose_opt(s, c));
    return sigma;
}

std::optional<KFunction> state_input_gain(const ClosedLoopGains& closed) {
    std::optional<KFunction> gamma;
    for (const auto& gi : closed.gs_input) gamma = max_of(gamma, gi);
    return gamma;
}

}  // namespace smallgain
