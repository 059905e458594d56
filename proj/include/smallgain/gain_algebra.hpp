#pragma once

// Class-K gain functions as immutable expression trees over a closed set of
// primitive families. Trees evaluate exactly (composition is literal
// nesting of primitive evaluations) and are checked against the identity on
// a logarithmic grid.

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

namespace smallgain {

class KFunction {
public:
    enum class Kind { identity, linear, power, saturating, compose, max };

    static KFunction identity();
    // a*s, a > 0
    static KFunction linear(double a);
    // s^p, p > 0
    static KFunction power(double p);
    // c*s^q/(1+s^q), c > 0, q > 0. Bounded by c, so class K but not K-infinity.
    static KFunction saturating(double c, double q);

    friend KFunction compose(KFunction outer, KFunction inner);
    friend KFunction pointwise_max(KFunction a, KFunction b);

    // Throws std::domain_error for s < 0 or NaN.
    double operator()(double s) const;
    double eval(double s) const { return (*this)(s); }

    // out[i] = g(s[i]); bit-identical to the scalar path for every kernel table.
    void eval(std::span<const double> s, std::span<double> out) const;

    Kind kind() const noexcept;
    // linear: a; power: p; saturating: c
    double first_param() const;
    // saturating: q
    double second_param() const;
    // compose: outer / inner; max: left / right
    const KFunction& left() const;
    const KFunction& right() const;

    std::size_t node_count() const noexcept;
    std::size_t depth() const noexcept;

    // True when both handles share the same tree node.
    bool same_node(const KFunction& other) const noexcept { return node_ == other.node_; }

    // Structural equality with exact parameter comparison.
    friend bool operator==(const KFunction& a, const KFunction& b);

private:
    struct Node;
    explicit KFunction(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
    static void eval_into(const Node& node, std::span<const double> s, std::span<double> out);
    std::shared_ptr<const Node> node_;
};

KFunction compose(KFunction outer, KFunction inner);
KFunction pointwise_max(KFunction a, KFunction b);

// Zero for an absent gain (no influence), g(s) otherwise.
double eval_or_zero(const std::optional<KFunction>& g, double s);

// max of two optional gains; absent operands are dropped.
std::optional<KFunction> max_of(std::optional<KFunction> a, std::optional<KFunction> b);

struct GridSpec {
    double s_min = 1e-8;
    double s_max = 1e8;
    std::size_t n_points = 4096;
    std::size_t refinement_depth = 8;
    double margin = 1e-12;

    // Throws std::invalid_argument.
    void validate() const;
    // Log-spaced points plus s = 1 when it lies inside [s_min, s_max], sorted.
    std::vector<double> points() const;
};

struct VerifiedOnGrid {
    double min_margin;
    double s_at_min;
};

struct ViolatedAt {
    double s;
    double value;
};

struct Inconclusive {
    double worst_margin;
    double s_worst;
};

using Verdict = std::variant<VerifiedOnGrid, ViolatedAt, Inconclusive>;

enum class VerdictKind { verified, violated, inconclusive };

VerdictKind kind_of(const Verdict& v) noexcept;
std::string_view to_string(VerdictKind k) noexcept;
// Smallest relative margin 1 - g(s)/s found (negative for a violation).
double worst_margin(const Verdict& v) noexcept;
double witness_point(const Verdict& v) noexcept;

struct MarginSample {
    double s;
    double margin;  // (s - g(s)) / s
};

// Relative margin of g against the identity at every point of the grid.
std::vector<MarginSample> margin_profile(const KFunction& g, const GridSpec& grid);

// g < id check: sampled grid plus bisection refinement around the worst point.
//   VerifiedOnGrid  g(s) < s(1 - margin) at every sample
//   ViolatedAt      some sample has g(s) >= s; the witness is the worst one,
//                   ties broken towards s = 1
//   Inconclusive    g(s) < s everywhere but the margin drops below `margin`
Verdict less_than_identity(const KFunction& g, const GridSpec& grid = {});

}  // namespace smallgain
