#pragma once

// Gain digraph of an interconnection and the cyclic small-gain check.
// Subsystem indices are 1-based throughout the public interface.

#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "smallgain/gain_algebra.hpp"

namespace smallgain {

// (i, j): gain of subsystem i with respect to the output v_j of subsystem j.
using EdgeKey = std::pair<int, int>;
using EdgeGains = std::map<EdgeKey, KFunction>;
using NodeGains = std::map<int, KFunction>;

class GainDigraph {
public:
    // Throws std::invalid_argument on self-loops or out-of-range indices.
    GainDigraph(int k, EdgeGains edges, NodeGains input_gains = {}, NodeGains gs_gains = {});

    int size() const noexcept { return k_; }

    std::optional<KFunction> gain(int i, int j) const;
    std::optional<KFunction> input_gain(int i) const;
    std::optional<KFunction> gs_gain(int i) const;

    const EdgeGains& edges() const noexcept { return edges_; }
    const NodeGains& input_gains() const noexcept { return input_gains_; }
    const NodeGains& gs_gains() const noexcept { return gs_gains_; }

    // j such that gamma_ij is present, ascending.
    const std::vector<int>& dependencies(int i) const;

private:
    int k_;
    EdgeGains edges_;
    NodeGains input_gains_;
    NodeGains gs_gains_;
    std::vector<std::vector<int>> deps_;
};

GainDigraph build_gain_digraph(int k, EdgeGains edges, NodeGains input_gains = {},
                               NodeGains gs_gains = {});

// A simple cycle i1 -> i2 -> ... -> ir -> i1 in the "depends on" direction,
// i.e. gamma_{i1 i2}, gamma_{i2 i3}, ..., gamma_{ir i1} are all present.
// Canonical rotation: i1 is the smallest index.
struct Cycle {
    std::vector<int> nodes;

    std::size_t length() const noexcept { return nodes.size(); }
    friend bool operator==(const Cycle&, const Cycle&) = default;
    // Shorter cycles first, then lexicographic.
    friend bool operator<(const Cycle& a, const Cycle& b) {
        if (a.nodes.size() != b.nodes.size()) return a.nodes.size() < b.nodes.size();
        return a.nodes < b.nodes;
    }
};

class CycleLimitExceeded : public std::runtime_error {
public:
    CycleLimitExceeded(std::size_t limit, int k);
    std::size_t limit() const noexcept { return limit_; }

private:
    std::size_t limit_;
};

inline constexpr std::size_t kDefaultCycleCap = 1'000'000;

// Johnson-style circuit enumeration restricted to nodes >= the start node.
// Output is sorted by (length, lexicographic node order).
std::vector<Cycle> enumerate_simple_cycles(const GainDigraph& g, std::size_t cap = kDefaultCycleCap);

// gamma_{i1 i2} o gamma_{i2 i3} o ... o gamma_{ir i1}, innermost gamma_{ir i1}.
KFunction cycle_gain(const GainDigraph& g, const Cycle& c);

struct CycleReport {
    Cycle cycle;
    KFunction composed;
    Verdict verdict;

    double worst_margin() const noexcept { return smallgain::worst_margin(verdict); }
    // The violation point, when there is one.
    std::optional<double> witness() const;
};

struct SmallGainReport {
    std::vector<CycleReport> cycles;
    VerdictKind overall = VerdictKind::verified;

    // First violated report, if any.
    const CycleReport* first_violation() const;
};

SmallGainReport check_cyclic_small_gain(const GainDigraph& g, const GridSpec& grid = {},
                                        std::size_t cap = kDefaultCycleCap);

}  // namespace smallgain
