#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <stdexcept>

#include "smallgain/gain_algebra.hpp"
#include "smallgain/kernels.hpp"
#include "support.hpp"

using namespace smallgain;

TEST_CASE("factories reject non-positive or non-finite parameters") {
    CHECK_THROWS_AS(KFunction::linear(0.0), std::invalid_argument);
    CHECK_THROWS_AS(KFunction::linear(-1.0), std::invalid_argument);
    CHECK_THROWS_AS(KFunction::power(std::nan("")), std::invalid_argument);
    CHECK_THROWS_AS(KFunction::saturating(1.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(KFunction::saturating(INFINITY, 1.0), std::invalid_argument);
}

TEST_CASE("evaluation outside the domain is an error") {
    auto g = KFunction::linear(2.0);
    CHECK_THROWS_AS(g(-1.0), std::domain_error);
    CHECK_THROWS_AS(g(std::nan("")), std::domain_error);
    CHECK(g(0.0) == 0.0);
}

TEST_CASE("primitives evaluate to their closed forms") {
    CHECK(KFunction::identity()(3.5) == 3.5);
    CHECK(KFunction::linear(0.5)(3.0) == 1.5);
    CHECK(KFunction::power(3.0)(2.0) == 8.0);
    auto sat = KFunction::saturating(0.5, 2.0);
    for (double s : testing::log_points(1e-6, 1e6, 40)) {
        CHECK(testing::close_rel(sat(s), s * s / (2.0 * (1.0 + s * s)), 1e-14));
    }
    CHECK(sat(1e300) == 0.5);
}

TEST_CASE("composition nests right to left and max is pointwise") {
    auto g = compose(KFunction::power(2.0), KFunction::linear(3.0));  // (3s)^2
    CHECK(g(2.0) == 36.0);
    auto m = pointwise_max(KFunction::linear(2.0), KFunction::power(2.0));
    CHECK(m(1.0) == 2.0);
    CHECK(m(3.0) == 9.0);
    CHECK(g.node_count() == 3);
    CHECK(g.depth() == 2);
}

TEST_CASE("composed ring gain equals the hand-simplified form") {
    auto g12 = KFunction::saturating(0.5, 2.0);
    auto g23 = KFunction::power(3.0);
    auto g31 = KFunction::power(2.0);
    auto cyc = compose(g12, compose(g23, g31));
    for (double s : testing::log_points(1e-6, 1e6, 50)) {
        double s12 = std::pow(s, 12.0);
        CHECK(testing::close_rel(cyc(s), s12 / (2.0 * (1.0 + s12)), 1e-12));
    }
    auto v = less_than_identity(cyc);
    REQUIRE(kind_of(v) == VerdictKind::verified);
    CHECK(worst_margin(v) > 0.0);
}

TEST_CASE("structural equality compares trees and exact parameters") {
    auto a = compose(KFunction::linear(2.0), KFunction::power(2.0));
    auto b = compose(KFunction::linear(2.0), KFunction::power(2.0));
    auto c = compose(KFunction::linear(2.0), KFunction::power(2.0000000001));
    CHECK(a == b);
    CHECK_FALSE(a == c);
    CHECK_FALSE(KFunction::identity() == KFunction::linear(1.0));
}

TEST_CASE("random trees are class-K on the grid and batch evaluation matches scalar") {
    testing::Rng rng(2024);
    GridSpec grid;
    grid.n_points = 512;
    const auto pts = grid.points();
    for (int trial = 0; trial < 200; ++trial) {
        auto g = testing::random_gain(rng, 3);
        CHECK(g(0.0) == 0.0);
        std::vector<double> batch(pts.size());
        g.eval(pts, batch);
        double prev = 0.0;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            double v = g(pts[i]);
            CHECK(v == batch[i]);
            CHECK(v >= prev);  // non-decreasing (strict increase can round away)
            prev = v;
        }
    }
}

TEST_CASE("batch evaluation agrees across kernel tables") {
    testing::Rng rng(7);
    auto pts = testing::log_points(1e-8, 1e8, 1000);
    for (int trial = 0; trial < 50; ++trial) {
        auto g = testing::random_gain(rng, 3);
        std::vector<double> expect(pts.size());
        for (std::size_t i = 0; i < pts.size(); ++i) expect[i] = g(pts[i]);
        std::vector<double> got(pts.size());
        g.eval(pts, got);
        CHECK(got == expect);
    }
}

TEST_CASE("less_than_identity verdicts") {
    SECTION("contraction is verified") {
        auto v = less_than_identity(KFunction::linear(0.5));
        REQUIRE(kind_of(v) == VerdictKind::verified);
        CHECK(worst_margin(v) == Catch::Approx(0.5));
    }
    SECTION("expansion is violated with the witness at s = 1") {
        auto v = less_than_identity(KFunction::linear(2.0));
        REQUIRE(kind_of(v) == VerdictKind::violated);
        const auto& w = std::get<ViolatedAt>(v);
        CHECK(w.s == 1.0);
        CHECK(w.value == 2.0);
    }
    SECTION("identity itself is not strictly below identity") {
        CHECK(kind_of(less_than_identity(KFunction::identity())) == VerdictKind::violated);
    }
    SECTION("power 2 is violated above 1") {
        auto v = less_than_identity(KFunction::power(2.0));
        REQUIRE(kind_of(v) == VerdictKind::violated);
        CHECK(std::get<ViolatedAt>(v).s > 1.0);
    }
    SECTION("margins below the threshold are inconclusive") {
        auto v = less_than_identity(KFunction::linear(1.0 - 1e-13));
        CHECK(kind_of(v) == VerdictKind::inconclusive);
    }
    SECTION("bounded gains vanish relative to s") {
        auto v = less_than_identity(KFunction::saturating(1.0, 1.0));
        CHECK(kind_of(v) == VerdictKind::verified);
    }
}

TEST_CASE("refinement finds a violation hidden between grid points") {
    // Above the identity only on roughly (1.001, 1.3); the coarse grid jumps from 1 to 3.4.
    auto g = pointwise_max(KFunction::linear(0.5), KFunction::saturating(1.3, 400.0));
    GridSpec grid;
    grid.n_points = 16;
    grid.refinement_depth = 0;
    CHECK(kind_of(less_than_identity(g, grid)) != VerdictKind::violated);
    grid.refinement_depth = 40;
    auto v = less_than_identity(g, grid);
    REQUIRE(kind_of(v) == VerdictKind::violated);
    CHECK(std::get<ViolatedAt>(v).value >= std::get<ViolatedAt>(v).s);
}

TEST_CASE("grid points are sorted, bounded and contain s = 1") {
    GridSpec grid;
    grid.n_points = 100;
    auto pts = grid.points();
    CHECK(pts.front() == grid.s_min);
    CHECK(pts.back() == grid.s_max);
    CHECK(std::is_sorted(pts.begin(), pts.end()));
    CHECK(std::find(pts.begin(), pts.end(), 1.0) != pts.end());
    GridSpec bad;
    bad.s_min = 2.0;
    bad.s_max = 1.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("margin profile reports one sample per grid point") {
    GridSpec grid;
    grid.n_points = 64;
    auto prof = margin_profile(KFunction::linear(0.25), grid);
    CHECK(prof.size() == grid.points().size());
    for (const auto& m : prof) CHECK(m.margin == Catch::Approx(0.75));
}

TEST_CASE("max_of and eval_or_zero treat absence as the zero bound") {
    std::optional<KFunction> none;
    CHECK(eval_or_zero(none, 5.0) == 0.0);
    CHECK(!max_of(none, none));
    auto one = max_of(none, KFunction::linear(2.0));
    REQUIRE(one);
    CHECK((*one)(1.0) == 2.0);
}
