#include "smallgain/gain_graph.hpp"

#include <algorithm>
#include <future>
#include <string>
#include <thread>

namespace smallgain {

namespace {

void check_index(int i, int k, const char* what) {
    if (i < 1 || i > k) {
        throw std::invalid_argument(std::string(what) + " index " + std::to_string(i) +
                                    " out of range 1.." + std::to_string(k));
    }
}

}  // namespace

GainDigraph::GainDigraph(int k, EdgeGains edges, NodeGains input_gains, NodeGains gs_gains)
    : k_(k), edges_(std::move(edges)), input_gains_(std::move(input_gains)), gs_gains_(std::move(gs_gains)) {
    if (k < 1) throw std::invalid_argument("gain digraph needs at least one subsystem");
    deps_.assign(static_cast<std::size_t>(k), {});
    for (const auto& [key, gain] : edges_) {
        const auto [i, j] = key;
        check_index(i, k, "edge");
        check_index(j, k, "edge");
        if (i == j) {
            throw std::invalid_argument("self-loop gain (" + std::to_string(i) + "," + std::to_string(j) +
                                        ") is not allowed");
        }
        deps_[static_cast<std::size_t>(i - 1)].push_back(j);
    }
    for (const auto& [i, gain] : input_gains_) check_index(i, k, "input gain");
    for (const auto& [i, gain] : gs_gains_) check_index(i, k, "GS gain");
}

std::optional<KFunction> GainDigraph::gain(int i, int j) const {
    auto it = edges_.find({i, j});
    if (it == edges_.end()) return std::nullopt;
    return it->second;
}

std::optional<KFunction> GainDigraph::input_gain(int i) const {
    auto it = input_gains_.find(i);
    if (it == input_gains_.end()) return std::nullopt;
    return it->second;
}

std::optional<KFunction> GainDigraph::gs_gain(int i) const {
    auto it = gs_gains_.find(i);
    if (it == gs_gains_.end()) return std::nullopt;
    return it->second;
}

const std::vector<int>& GainDigraph::dependencies(int i) const {
    check_index(i, k_, "node");
    return deps_[static_cast<std::size_t>(i - 1)];
}

GainDigraph build_gain_digraph(int k, EdgeGains edges, NodeGains input_gains, NodeGains gs_gains) {
    return GainDigraph(k, std::move(edges), std::move(input_gains), std::move(gs_gains));
}

CycleLimitExceeded::CycleLimitExceeded(std::size_t limit, int k)
    : std::runtime_error("cycle enumeration exceeded the cap of " + std::to_string(limit) +
                         " cycles on a " + std::to_string(k) +
                         "-node digraph; raise the cap or sparsify the gain graph"),
      limit_(limit) {}

namespace {

// Johnson's circuit search for circuits through `start` using only nodes > start.
class CircuitSearch {
public:
    CircuitSearch(const GainDigraph& g, std::size_t cap, std::vector<Cycle>& out)
        : g_(g), cap_(cap), out_(out), blocked_(static_cast<std::size_t>(g.size()) + 1),
          blocked_by_(static_cast<std::size_t>(g.size()) + 1) {}

    void run(int start) {
        start_ = start;
        for (int v = start; v <= g_.size(); ++v) {
            blocked_[static_cast<std::size_t>(v)] = false;
            blocked_by_[static_cast<std::size_t>(v)].clear();
        }
        path_.clear();
        circuit(start);
    }

private:
    bool circuit(int v) {
        bool found = false;
        path_.push_back(v);
        blocked_[static_cast<std::size_t>(v)] = true;
        for (int w : g_.dependencies(v)) {
            if (w < start_) continue;
            if (w == start_) {
                if (path_.size() >= 2) {
                    if (out_.size() >= cap_) throw CycleLimitExceeded(cap_, g_.size());
                    out_.push_back(Cycle{path_});
                }
                found = true;
            } else if (!blocked_[static_cast<std::size_t>(w)]) {
                if (circuit(w)) found = true;
            }
        }
        if (found) {
            unblock(v);
        } else {
            for (int w : g_.dependencies(v)) {
                if (w < start_) continue;
                auto& list = blocked_by_[static_cast<std::size_t>(w)];
                if (std::find(list.begin(), list.end(), v) == list.end()) list.push_back(v);
            }
        }
        path_.pop_back();
        return found;
    }

    void unblock(int u) {
        blocked_[static_cast<std::size_t>(u)] = false;
        auto pending = std::move(blocked_by_[static_cast<std::size_t>(u)]);
        blocked_by_[static_cast<std::size_t>(u)].clear();
        for (int w : pending) {
            if (blocked_[static_cast<std::size_t>(w)]) unblock(w);
        }
    }

    const GainDigraph& g_;
    std::size_t cap_;
    std::vector<Cycle>& out_;
    int start_ = 1;
    std::vector<int> path_;
    std::vector<bool> blocked_;
    std::vector<std::vector<int>> blocked_by_;
};

}  // namespace

std::vector<Cycle> enumerate_simple_cycles(const GainDigraph& g, std::size_t cap) {
    std::vector<Cycle> cycles;
    CircuitSearch search(g, cap, cycles);
    for (int start = 1; start <= g.size(); ++start) search.run(start);
    std::sort(cycles.begin(), cycles.end());
    return cycles;
}

KFunction cycle_gain(const GainDigraph& g, const Cycle& c) {
    const auto& nodes = c.nodes;
    if (nodes.size() < 2) throw std::invalid_argument("a cycle needs at least two nodes");
    auto edge = [&](int i, int j) {
        auto gain = g.gain(i, j);
        if (!gain) {
            throw std::invalid_argument("cycle uses absent edge (" + std::to_string(i) + "," +
                                        std::to_string(j) + ")");
        }
        return *gain;
    };
    const std::size_t r = nodes.size();
    KFunction acc = edge(nodes[r - 1], nodes[0]);
    for (std::size_t idx = r - 1; idx-- > 0;) acc = compose(edge(nodes[idx], nodes[idx + 1]), acc);
    return acc;
}

std::optional<double> CycleReport::witness() const {
    if (const auto* bad = std::get_if<ViolatedAt>(&verdict)) return bad->s;
    return std::nullopt;
}

const CycleReport* SmallGainReport::first_violation() const {
    for (const auto& r : cycles) {
        if (kind_of(r.verdict) == VerdictKind::violated) return &r;
    }
    return nullptr;
}

SmallGainReport check_cyclic_small_gain(const GainDigraph& g, const GridSpec& grid, std::size_t cap) {
    grid.validate();
    const std::vector<Cycle> cycles = enumerate_simple_cycles(g, cap);

    // Cycles are independent; each worker fills a contiguous slice so the
    // report order never depends on scheduling.
    std::vector<std::optional<CycleReport>> slots(cycles.size());
    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t idx = begin; idx < end; ++idx) {
            KFunction composed = cycle_gain(g, cycles[idx]);
            Verdict verdict = less_than_identity(composed, grid);
            slots[idx].emplace(CycleReport{cycles[idx], std::move(composed), verdict});
        }
    };
    const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
    const std::size_t workers = std::min(hw, cycles.size() / 8 + 1);
    if (workers <= 1) {
        work(0, cycles.size());
    } else {
        std::vector<std::future<void>> pending;
        const std::size_t chunk = (cycles.size() + workers - 1) / workers;
        for (std::size_t begin = 0; begin < cycles.size(); begin += chunk) {
            pending.push_back(std::async(std::launch::async, work, begin, std::min(begin + chunk, cycles.size())));
        }
        for (auto& f : pending) f.get();
    }

    SmallGainReport report;
    report.cycles.reserve(cycles.size());
    bool any_inconclusive = false;
    bool any_violated = false;
    for (auto& slot : slots) {
        report.cycles.push_back(std::move(*slot));
        const VerdictKind k = kind_of(report.cycles.back().verdict);
        any_violated |= k == VerdictKind::violated;
        any_inconclusive |= k == VerdictKind::inconclusive;
    }
    report.overall = any_violated       ? VerdictKind::violated
                     : any_inconclusive ? VerdictKind::inconclusive
                                        : VerdictKind::verified;
    return report;
}

}  // namespace smallgain
