#pragma once

// Closed-loop gain construction by eliminating one subsystem at a time from
// the max-form gain inequalities
//     b_i <= max{ gamma_ij(b_j), gamma_i^ch(w_ch) }
// and back-substituting. Two channels are carried: the external input u and
// the initial-condition constant c (identity gain into every subsystem).

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "smallgain/gain_algebra.hpp"
#include "smallgain/gain_graph.hpp"

namespace smallgain {

enum class Channel : std::size_t { input = 0, constant = 1 };
inline constexpr std::size_t kChannelCount = 2;
std::string_view to_string(Channel ch) noexcept;

struct IntroducedTerm {
    int i;
    // Target: edge (i, j) when `channel` is empty, else the channel gain of i.
    int j;
    std::optional<Channel> channel;
    KFunction term;  // gamma_im o gamma_mj (or gamma_im o gamma_m^ch)
};

struct DroppedSelfTerm {
    int i;
    KFunction loop;  // gamma_im o gamma_mi
    Verdict verdict;
};

struct EliminationStep {
    int node;
    // gamma_mj and gamma_m^ch as they stood when m was eliminated; used for
    // back-substitution.
    EdgeGains row;
    std::array<std::optional<KFunction>, kChannelCount> row_channels;
    std::vector<IntroducedTerm> introduced;
    std::vector<DroppedSelfTerm> dropped;
};

struct ReducedSystem {
    std::vector<int> surviving;  // ascending
    EdgeGains edges;
    std::array<NodeGains, kChannelCount> channels;
    std::vector<EliminationStep> trace;

    std::optional<KFunction> edge(int i, int j) const;
    std::optional<KFunction> channel(Channel ch, int i) const;
};

// Starting point: original edges, input gains on the input channel and the
// identity on the constant channel for every subsystem.
ReducedSystem initial_reduction(const GainDigraph& g);

// Raised when a loop that elimination would discard is not below the identity.
class EliminationRefused : public std::runtime_error {
public:
    EliminationRefused(int i, int m, KFunction loop, ViolatedAt witness);
    int node() const noexcept { return i_; }
    int eliminated() const noexcept { return m_; }
    const KFunction& loop() const noexcept { return loop_; }
    const ViolatedAt& witness() const noexcept { return witness_; }

private:
    int i_;
    int m_;
    KFunction loop_;
    ViolatedAt witness_;
};

// gamma~_ij = max{gamma_ij, gamma_im o gamma_mj}, gamma~_i^ch = max{gamma_i^ch, gamma_im o gamma_m^ch};
// loops gamma_im o gamma_mi are verified against id on `grid` and dropped.
ReducedSystem eliminate_node(const ReducedSystem& sys, int m, const GridSpec& grid = {});

struct ClosedLoopGains {
    // Indexed by subsystem - 1. An empty entry is a zero bound.
    std::vector<std::optional<KFunction>> ag_input;  // hat gamma_i^u
    std::vector<std::optional<KFunction>> gs_sigma;  // tilde sigma_i (constant channel)
    std::vector<std::optional<KFunction>> gs_input;  // tilde gamma_i^u
    std::vector<int> elimination_order;              // eliminated nodes, in order
    std::vector<int> terminal;                       // one or two nodes solved directly
    std::vector<EliminationStep> trace;
    SmallGainReport precheck;
    // False when some cycle was only Inconclusive on the grid.
    bool certified = true;

    std::size_t size() const noexcept { return ag_input.size(); }
};

class SmallGainViolation : public std::runtime_error {
public:
    explicit SmallGainViolation(CycleReport report);
    const CycleReport& report() const noexcept { return report_; }

private:
    CycleReport report_;
};

// Eliminates `order` (default k, k-1, ..., 3), solves the remaining pair
// directly, then back-substitutes in reverse order. `order`, when given,
// lists the nodes to eliminate and must leave one or two survivors.
ClosedLoopGains closed_loop_input_gains(const GainDigraph& g, const GridSpec& grid = {},
                                        std::vector<int> order = {});

// c = max{ sigma_i(|xi_i|), gamma_ij(|xi_j|) } over present gains.
double combined_initial_constant(const GainDigraph& g, std::span<const double> history_norms);

// s -> max{ sigma_i(s), gamma_ij(s) }: c as a function of a common history bound.
std::optional<KFunction> combined_initial_gain(const GainDigraph& g);

// Whole-state GS gain: s -> max_i tilde sigma_i(c(s)).
std::optional<KFunction> state_gs_gain(const GainDigraph& g, const ClosedLoopGains& closed);

// Whole-state input gain: max_i tilde gamma_i^u.
std::optional<KFunction> state_input_gain(const ClosedLoopGains& closed);

}  // namespace smallgain
