#include "smallgain/gain_algebra.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "smallgain/kernels.hpp"

namespace smallgain {

struct KFunction::Node {
    explicit Node(Kind k, double a_ = 0.0, double b_ = 0.0) : kind(k), a(a_), b(b_) {}
    Kind kind;
    double a = 0.0;
    double b = 0.0;
    std::optional<KFunction> lhs;
    std::optional<KFunction> rhs;
    std::size_t count = 1;
    std::size_t height = 1;
};

namespace {

void require_positive(double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v)) {
        throw std::invalid_argument(std::string(what) + " must be a finite positive number, got " +
                                    std::to_string(v));
    }
}

inline double saturate_scalar(double c, double x) {
    return x > 1.0 ? c / (1.0 + 1.0 / x) : (c * x) / (1.0 + x);
}

inline double select_max(double a, double b) { return a > b ? a : b; }

double eval_node(const KFunction& f, double s) {
    switch (f.kind()) {
        case KFunction::Kind::identity: return s;
        case KFunction::Kind::linear: return f.first_param() * s;
        case KFunction::Kind::power: return std::pow(s, f.first_param());
        case KFunction::Kind::saturating:
            return saturate_scalar(f.first_param(), std::pow(s, f.second_param()));
        case KFunction::Kind::compose: return eval_node(f.left(), eval_node(f.right(), s));
        case KFunction::Kind::max: return select_max(eval_node(f.left(), s), eval_node(f.right(), s));
    }
    return s;
}

void check_domain(double s) {
    if (!(s >= 0.0)) throw std::domain_error("gain evaluated at negative or NaN argument");
}

}  // namespace

KFunction KFunction::identity() {
    return KFunction(std::make_shared<const Node>(Node(Kind::identity)));
}

KFunction KFunction::linear(double a) {
    require_positive(a, "linear gain coefficient");
    return KFunction(std::make_shared<const Node>(Node(Kind::linear, a)));
}

KFunction KFunction::power(double p) {
    require_positive(p, "power exponent");
    return KFunction(std::make_shared<const Node>(Node(Kind::power, p)));
}

KFunction KFunction::saturating(double c, double q) {
    require_positive(c, "saturation level c");
    require_positive(q, "saturation exponent q");
    return KFunction(std::make_shared<const Node>(Node(Kind::saturating, c, q)));
}

KFunction compose(KFunction outer, KFunction inner) {
    KFunction::Node node(KFunction::Kind::compose);
    node.count = 1 + outer.node_count() + inner.node_count();
    node.height = 1 + std::max(outer.depth(), inner.depth());
    node.lhs = std::move(outer);
    node.rhs = std::move(inner);
    return KFunction(std::make_shared<const KFunction::Node>(std::move(node)));
}

KFunction pointwise_max(KFunction a, KFunction b) {
    KFunction::Node node(KFunction::Kind::max);
    node.count = 1 + a.node_count() + b.node_count();
    node.height = 1 + std::max(a.depth(), b.depth());
    node.lhs = std::move(a);
    node.rhs = std::move(b);
    return KFunction(std::make_shared<const KFunction::Node>(std::move(node)));
}

KFunction::Kind KFunction::kind() const noexcept { return node_->kind; }

double KFunction::first_param() const {
    if (node_->kind != Kind::linear && node_->kind != Kind::power && node_->kind != Kind::saturating) {
        throw std::logic_error("gain node has no parameters");
    }
    return node_->a;
}

double KFunction::second_param() const {
    if (node_->kind != Kind::saturating) throw std::logic_error("gain node has no second parameter");
    return node_->b;
}

const KFunction& KFunction::left() const {
    if (!node_->lhs) throw std::logic_error("gain node has no children");
    return *node_->lhs;
}

const KFunction& KFunction::right() const {
    if (!node_->rhs) throw std::logic_error("gain node has no children");
    return *node_->rhs;
}

std::size_t KFunction::node_count() const noexcept { return node_->count; }
std::size_t KFunction::depth() const noexcept { return node_->height; }

bool operator==(const KFunction& x, const KFunction& y) {
    if (x.node_ == y.node_) return true;
    const auto& a = *x.node_;
    const auto& b = *y.node_;
    if (a.kind != b.kind || a.a != b.a || a.b != b.b || a.count != b.count) return false;
    if (a.lhs) return *a.lhs == *b.lhs && *a.rhs == *b.rhs;
    return true;
}

double KFunction::operator()(double s) const {
    check_domain(s);
    return eval_node(*this, s);
}

void KFunction::eval_into(const Node& node, std::span<const double> s, std::span<double> out) {
    const auto& k = kernels::active();
    const std::size_t n = s.size();
    switch (node.kind) {
        case Kind::identity:
            std::copy(s.begin(), s.end(), out.begin());
            return;
        case Kind::linear:
            k.scale(node.a, s.data(), out.data(), n);
            return;
        case Kind::power:
            for (std::size_t i = 0; i < n; ++i) out[i] = std::pow(s[i], node.a);
            return;
        case Kind::saturating:
            for (std::size_t i = 0; i < n; ++i) out[i] = std::pow(s[i], node.b);
            k.saturate(node.a, out.data(), out.data(), n);
            return;
        case Kind::compose: {
            std::vector<double> inner(n);
            eval_into(*node.rhs->node_, s, inner);
            eval_into(*node.lhs->node_, inner, out);
            return;
        }
        case Kind::max: {
            std::vector<double> other(n);
            eval_into(*node.lhs->node_, s, out);
            eval_into(*node.rhs->node_, s, other);
            k.maximum(out.data(), other.data(), out.data(), n);
            return;
        }
    }
}

void KFunction::eval(std::span<const double> s, std::span<double> out) const {
    if (out.size() != s.size()) throw std::invalid_argument("gain batch evaluation: size mismatch");
    for (double v : s) check_domain(v);
    eval_into(*node_, s, out);
}

double eval_or_zero(const std::optional<KFunction>& g, double s) { return g ? (*g)(s) : 0.0; }

std::optional<KFunction> max_of(std::optional<KFunction> a, std::optional<KFunction> b) {
    if (!a) return b;
    if (!b) return a;
    return pointwise_max(std::move(*a), std::move(*b));
}

void GridSpec::validate() const {
    if (!(s_min > 0.0) || !std::isfinite(s_min)) throw std::invalid_argument("grid s_min must be positive");
    if (!(s_max > s_min) || !std::isfinite(s_max)) throw std::invalid_argument("grid requires s_min < s_max");
    if (n_points < 2) throw std::invalid_argument("grid requires at least two points");
    if (!(margin >= 0.0 && margin < 1.0)) throw std::invalid_argument("grid margin must lie in [0, 1)");
}

std::vector<double> GridSpec::points() const {
    validate();
    std::vector<double> pts(n_points);
    const double lo = std::log(s_min);
    const double step = (std::log(s_max) - lo) / static_cast<double>(n_points - 1);
    for (std::size_t i = 0; i < n_points; ++i) pts[i] = std::exp(lo + step * static_cast<double>(i));
    pts.front() = s_min;
    pts.back() = s_max;
    if (s_min < 1.0 && 1.0 < s_max) {
        auto it = std::lower_bound(pts.begin(), pts.end(), 1.0);
        if (*it != 1.0) pts.insert(it, 1.0);
    }
    return pts;
}

VerdictKind kind_of(const Verdict& v) noexcept {
    switch (v.index()) {
        case 0: return VerdictKind::verified;
        case 1: return VerdictKind::violated;
        default: return VerdictKind::inconclusive;
    }
}

std::string_view to_string(VerdictKind k) noexcept {
    switch (k) {
        case VerdictKind::verified: return "VerifiedOnGrid";
        case VerdictKind::violated: return "ViolatedAt";
        case VerdictKind::inconclusive: return "Inconclusive";
    }
    return "?";
}

double worst_margin(const Verdict& v) noexcept {
    if (const auto* ok = std::get_if<VerifiedOnGrid>(&v)) return ok->min_margin;
    if (const auto* bad = std::get_if<ViolatedAt>(&v)) return (bad->s - bad->value) / bad->s;
    return std::get<Inconclusive>(v).worst_margin;
}

double witness_point(const Verdict& v) noexcept {
    if (const auto* ok = std::get_if<VerifiedOnGrid>(&v)) return ok->s_at_min;
    if (const auto* bad = std::get_if<ViolatedAt>(&v)) return bad->s;
    return std::get<Inconclusive>(v).s_worst;
}

std::vector<MarginSample> margin_profile(const KFunction& g, const GridSpec& grid) {
    const std::vector<double> pts = grid.points();
    std::vector<double> values(pts.size());
    g.eval(pts, values);
    kernels::active().relative_margin(pts.data(), values.data(), values.data(), pts.size());
    std::vector<MarginSample> out(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) out[i] = {pts[i], values[i]};
    return out;
}

namespace {

double relative_margin(const KFunction& g, double s) { return (s - g(s)) / s; }

// Index of the smallest margin. Margins within rounding of the minimum
// count as ties (4s gives -3 only up to an ulp); ties go to the point
// closest to s = 1.
std::size_t worst_index(const std::vector<double>& pts, const std::vector<double>& margins, double min) {
    const double tie = 1e-12 * std::fabs(min);
    std::size_t best = pts.size();
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (!(margins[i] - min <= tie)) continue;
        if (best == pts.size() || std::fabs(std::log(pts[i])) < std::fabs(std::log(pts[best]))) best = i;
    }
    return best;
}

}  // namespace

Verdict less_than_identity(const KFunction& g, const GridSpec& grid) {
    const std::vector<double> pts = grid.points();
    std::vector<double> values(pts.size());
    g.eval(pts, values);
    std::vector<double> margins(pts.size());
    const auto& k = kernels::active();
    k.relative_margin(pts.data(), values.data(), margins.data(), pts.size());
    const double min = k.min_value(margins.data(), margins.size());

    std::size_t i = worst_index(pts, margins, min);
    if (i == pts.size()) {
        // NaN margins only arise from non-finite gain values; report the first.
        i = static_cast<std::size_t>(
            std::find_if(margins.begin(), margins.end(), [](double m) { return std::isnan(m); }) -
            margins.begin());
        return ViolatedAt{pts[i], values[i]};
    }
    if (min <= 0.0) return ViolatedAt{pts[i], values[i]};

    double lo = pts[i == 0 ? 0 : i - 1];
    double hi = pts[std::min(i + 1, pts.size() - 1)];
    double best_s = pts[i];
    double best_m = margins[i];
    for (std::size_t round = 0; round < grid.refinement_depth; ++round) {
        const double left = std::sqrt(lo * best_s);
        const double right = std::sqrt(best_s * hi);
        const double m_left = relative_margin(g, left);
        const double m_right = relative_margin(g, right);
        if (m_left < best_m && m_left <= m_right) {
            hi = best_s;
            best_s = left;
            best_m = m_left;
        } else if (m_right < best_m) {
            lo = best_s;
            best_s = right;
            best_m = m_right;
        } else {
            lo = left;
            hi = right;
        }
        if (best_m <= 0.0) return ViolatedAt{best_s, g(best_s)};
    }
    if (best_m <= grid.margin) return Inconclusive{best_m, best_s};
    return VerifiedOnGrid{best_m, best_s};
}

}  // namespace smallgain
