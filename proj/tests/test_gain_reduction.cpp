#include <catch2/catch_amalgamated.hpp>

#include "smallgain/gain_reduction.hpp"
#include "support.hpp"

using namespace smallgain;

namespace {

// Gains bounded by 0.9 s, so every cycle composition contracts.
KFunction contracting_gain(testing::Rng& rng) {
    double a = testing::uniform(rng, 0.05, 0.9);
    double c = testing::uniform(rng, 0.05, 0.9);
    double q = testing::uniform(rng, 1.0, 4.0);
    switch (testing::uniform_int(rng, 0, 2)) {
        case 0: return KFunction::linear(a);
        case 1: return KFunction::saturating(c, q);
        default: return pointwise_max(KFunction::linear(a), KFunction::saturating(c, q));
    }
}

struct LinearCase {
    int k;
    std::vector<std::vector<double>> a;  // a[i][j], 0 = absent
    std::vector<double> c;               // input gain slopes, 0 = absent
};

LinearCase random_linear_case(testing::Rng& rng) {
    LinearCase lc;
    lc.k = testing::uniform_int(rng, 1, 5);
    const auto k = static_cast<std::size_t>(lc.k);
    lc.a.assign(k, std::vector<double>(k, 0.0));
    lc.c.assign(k, 0.0);
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            if (i != j && testing::uniform(rng, 0.0, 1.0) < 0.6) lc.a[i][j] = testing::uniform(rng, 0.01, 0.89);
        }
        if (testing::uniform(rng, 0.0, 1.0) < 0.7) lc.c[i] = testing::uniform(rng, 0.1, 5.0);
    }
    return lc;
}

GainDigraph to_digraph(const LinearCase& lc) {
    EdgeGains edges;
    NodeGains inputs;
    for (int i = 1; i <= lc.k; ++i) {
        for (int j = 1; j <= lc.k; ++j) {
            double a = lc.a[static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(j - 1)];
            if (a > 0.0) edges.emplace(EdgeKey{i, j}, KFunction::linear(a));
        }
        double c = lc.c[static_cast<std::size_t>(i - 1)];
        if (c > 0.0) inputs.emplace(i, KFunction::linear(c));
    }
    return build_gain_digraph(lc.k, edges, inputs);
}

}  // namespace

TEST_CASE("three-node elimination matches the hand-derived formulas") {
    testing::Rng rng(31);
    const auto points = testing::log_points(1e-3, 1e3, 20);
    for (int trial = 0; trial < 25; ++trial) {
        std::map<std::pair<int, int>, KFunction> g;
        for (int i = 1; i <= 3; ++i) {
            for (int j = 1; j <= 3; ++j) {
                if (i != j) g.emplace(std::pair{i, j}, contracting_gain(rng));
            }
        }
        std::map<int, KFunction> u;
        for (int i = 1; i <= 3; ++i) u.emplace(i, testing::random_gain(rng, 2));
        EdgeGains edges(g.begin(), g.end());
        NodeGains inputs(u.begin(), u.end());
        auto closed = closed_loop_input_gains(build_gain_digraph(3, edges, inputs));

        auto G = [&](int i, int j) { return g.at({i, j}); };
        auto U = [&](int i) { return u.at(i); };
        for (double s : points) {
            auto tg12 = [&](double x) { return std::max(G(1, 2)(x), G(1, 3)(G(3, 2)(x))); };
            auto tg21 = [&](double x) { return std::max(G(2, 1)(x), G(2, 3)(G(3, 1)(x))); };
            double tu1 = std::max(U(1)(s), G(1, 3)(U(3)(s)));
            double tu2 = std::max(U(2)(s), G(2, 3)(U(3)(s)));
            double h1 = std::max(tg12(tu2), tu1);
            double h2 = std::max(tg21(tu1), tu2);
            double h3 = std::max({G(3, 1)(h1), G(3, 2)(h2), U(3)(s)});
            CHECK(testing::close_rel((*closed.ag_input[0])(s), h1, 1e-12));
            CHECK(testing::close_rel((*closed.ag_input[1])(s), h2, 1e-12));
            CHECK(testing::close_rel((*closed.ag_input[2])(s), h3, 1e-12));
        }
    }
}

TEST_CASE("linear systems: closed-loop gains equal the max-linear fixed point") {
    testing::Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        auto lc = random_linear_case(rng);
        auto closed = closed_loop_input_gains(to_digraph(lc));
        for (double s : {0.1, 1.0, 10.0}) {
            std::vector<double> c(lc.c.size());
            for (std::size_t i = 0; i < c.size(); ++i) c[i] = lc.c[i] * s;
            auto b = testing::max_linear_fixed_point(lc.a, c);
            for (std::size_t i = 0; i < b.size(); ++i) {
                double got = eval_or_zero(closed.ag_input[i], s);
                CHECK(got >= b[i] * (1.0 - 1e-12));
                CHECK(testing::close_rel(got, b[i], 1e-12));
            }
        }
    }
}

TEST_CASE("initial-condition channel solves the same inequalities with identity injections") {
    testing::Rng rng(8);
    for (int trial = 0; trial < 100; ++trial) {
        auto lc = random_linear_case(rng);
        auto closed = closed_loop_input_gains(to_digraph(lc));
        for (double s : {0.5, 3.0}) {
            std::vector<double> c(lc.c.size(), s);
            auto b = testing::max_linear_fixed_point(lc.a, c);
            for (std::size_t i = 0; i < b.size(); ++i) {
                CHECK(testing::close_rel(eval_or_zero(closed.gs_sigma[i], s), b[i], 1e-12));
            }
        }
    }
}

TEST_CASE("elimination order does not change linear closed-loop gains") {
    testing::Rng rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        auto lc = random_linear_case(rng);
        if (lc.k < 3) continue;
        auto g = to_digraph(lc);
        auto base = closed_loop_input_gains(g);
        std::vector<int> order;
        for (int v = 1; v <= lc.k - 2; ++v) order.push_back(v);
        auto other = closed_loop_input_gains(g, {}, order);
        CHECK(other.terminal == std::vector<int>{lc.k - 1, lc.k});
        for (std::size_t i = 0; i < base.size(); ++i) {
            CHECK(testing::close_rel(eval_or_zero(base.ag_input[i], 2.0), eval_or_zero(other.ag_input[i], 2.0), 1e-12));
        }
    }
}

TEST_CASE("violated small-gain condition refuses closed-loop construction") {
    EdgeGains edges;
    edges.emplace(EdgeKey{1, 2}, KFunction::linear(2.0));
    edges.emplace(EdgeKey{2, 1}, KFunction::linear(2.0));
    auto g = build_gain_digraph(2, edges);
    try {
        closed_loop_input_gains(g);
        FAIL("expected SmallGainViolation");
    } catch (const SmallGainViolation& e) {
        CHECK(e.report().cycle.nodes == std::vector<int>{1, 2});
        CHECK(std::get<ViolatedAt>(e.report().verdict).value == 4.0);
    }
}

TEST_CASE("eliminate_node refuses to drop a loop above the identity") {
    EdgeGains edges;
    edges.emplace(EdgeKey{1, 3}, KFunction::linear(2.0));
    edges.emplace(EdgeKey{3, 1}, KFunction::linear(2.0));
    auto g = build_gain_digraph(3, edges);
    auto sys = initial_reduction(g);
    CHECK_THROWS_AS(eliminate_node(sys, 3), EliminationRefused);
}

TEST_CASE("elimination records a trace with dropped self-loops") {
    EdgeGains edges;
    edges.emplace(EdgeKey{1, 3}, KFunction::linear(0.5));
    edges.emplace(EdgeKey{3, 1}, KFunction::linear(0.5));
    edges.emplace(EdgeKey{3, 2}, KFunction::linear(0.5));
    auto sys = eliminate_node(initial_reduction(build_gain_digraph(3, edges)), 3);
    REQUIRE(sys.trace.size() == 1);
    CHECK(sys.trace[0].node == 3);
    CHECK(sys.trace[0].dropped.size() == 1);
    CHECK(sys.surviving == std::vector<int>{1, 2});
    auto e12 = sys.edge(1, 2);
    REQUIRE(e12);
    CHECK((*e12)(1.0) == 0.25);
    auto c1 = sys.channel(Channel::constant, 1);
    REQUIRE(c1);
    CHECK((*c1)(1.0) == 1.0);
}

TEST_CASE("order validation") {
    EdgeGains edges;
    edges.emplace(EdgeKey{1, 2}, KFunction::linear(0.5));
    auto g = build_gain_digraph(4, edges);
    CHECK_THROWS_AS(closed_loop_input_gains(g, {}, {3}), std::invalid_argument);
    CHECK_THROWS_AS(closed_loop_input_gains(g, {}, {3, 3}), std::invalid_argument);
    CHECK_THROWS_AS(closed_loop_input_gains(g, {}, {5, 4}), std::invalid_argument);
    CHECK_NOTHROW(closed_loop_input_gains(g, {}, {4, 3, 2}));
}

TEST_CASE("single subsystem and pair cases") {
    NodeGains in;
    in.emplace(1, KFunction::linear(0.5));
    auto one = closed_loop_input_gains(build_gain_digraph(1, {}, in));
    CHECK((*one.ag_input[0])(0.3) == 0.15);
    CHECK((*one.gs_sigma[0])(2.0) == 2.0);

    EdgeGains edges;
    edges.emplace(EdgeKey{1, 2}, KFunction::linear(0.5));
    NodeGains in2;
    in2.emplace(2, KFunction::linear(1.0));
    auto pair = closed_loop_input_gains(build_gain_digraph(2, edges, in2));
    CHECK((*pair.ag_input[0])(4.0) == 2.0);
    CHECK((*pair.ag_input[1])(4.0) == 4.0);
}

TEST_CASE("combined initial constant and state gain for the ring") {
    EdgeGains edges;
    edges.emplace(EdgeKey{1, 2}, KFunction::saturating(0.5, 2.0));
    edges.emplace(EdgeKey{2, 3}, KFunction::power(3.0));
    edges.emplace(EdgeKey{3, 1}, KFunction::power(2.0));
    NodeGains gs;
    gs.emplace(1, KFunction::linear(7.0));
    gs.emplace(2, KFunction::linear(4.0));
    gs.emplace(3, KFunction::linear(3.0));
    auto g = build_gain_digraph(3, edges, {}, gs);
    std::vector<double> hist{1.0, 1.0, 1.0};
    CHECK(combined_initial_constant(g, hist) == 7.0);
    auto closed = closed_loop_input_gains(g);
    auto sigma = state_gs_gain(g, closed);
    REQUIRE(sigma);
    double expect = 0.0;
    for (const auto& s : closed.gs_sigma) expect = std::max(expect, eval_or_zero(s, 7.0));
    CHECK((*sigma)(1.0) == expect);
    CHECK(!state_input_gain(closed));
}
