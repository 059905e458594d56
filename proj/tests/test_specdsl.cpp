#include <catch2/catch_amalgamated.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <string>

#include "smallgain/dde_sim.hpp"
#include "smallgain/specdsl.hpp"
#include "support.hpp"

using namespace smallgain;
using namespace smallgain::specdsl;

namespace {

bool same_values(const KFunction& a, const std::function<double(double)>& f) {
    for (double s : testing::log_points(1e-4, 1e4, 61)) {
        if (!testing::close_rel(a(s), f(s), 1e-13)) return false;
    }
    return true;
}

ParseError gain_error(const std::string& text) {
    try {
        parse_gain(text);
    } catch (const ParseError& e) {
        return e;
    }
    FAIL("expected a parse error for " << text);
    return ParseError({}, "");
}

// ---- independent infix evaluator (shunting yard) ----------------------------

struct Tok {
    enum Kind { num, var, op, lparen, rparen } kind;
    double value = 0.0;
    char c = 0;
};

std::vector<Tok> tokenize(const std::string& s) {
    std::vector<Tok> out;
    for (std::size_t i = 0; i < s.size();) {
        char c = s[i];
        if (c == ' ') {
            ++i;
        } else if (std::isdigit(static_cast<unsigned char>(c))) {
            double v = 0.0;
            auto [p, ec] = std::from_chars(s.data() + i, s.data() + s.size(), v);
            out.push_back({Tok::num, v, 0});
            i = static_cast<std::size_t>(p - s.data());
        } else if (c == 'x' || c == 'y') {
            out.push_back({Tok::var, 0.0, c});
            ++i;
        } else if (c == '(') {
            out.push_back({Tok::lparen, 0.0, c});
            ++i;
        } else if (c == ')') {
            out.push_back({Tok::rparen, 0.0, c});
            ++i;
        } else {
            out.push_back({Tok::op, 0.0, c});
            ++i;
        }
    }
    return out;
}

double oracle_eval(const std::string& text, double x, double y) {
    // 'n' marks unary minus.
    auto prec = [](char op) {
        switch (op) {
            case '+': case '-': return 1;
            case '*': case '/': return 2;
            case 'n': return 3;
            default: return 4;
        }
    };
    auto right_assoc = [](char op) { return op == '^' || op == 'n'; };
    std::vector<double> vals;
    std::vector<char> ops;
    auto apply = [&](char op) {
        if (op == 'n') {
            vals.back() = -vals.back();
            return;
        }
        double b = vals.back();
        vals.pop_back();
        double a = vals.back();
        switch (op) {
            case '+': a = a + b; break;
            case '-': a = a - b; break;
            case '*': a = a * b; break;
            case '/': a = a / b; break;
            default: a = std::pow(a, b); break;
        }
        vals.back() = a;
    };
    bool expect_operand = true;
    for (const Tok& t : tokenize(text)) {
        switch (t.kind) {
            case Tok::num: vals.push_back(t.value); expect_operand = false; break;
            case Tok::var: vals.push_back(t.c == 'x' ? x : y); expect_operand = false; break;
            case Tok::lparen: ops.push_back('('); expect_operand = true; break;
            case Tok::rparen:
                while (ops.back() != '(') {
                    apply(ops.back());
                    ops.pop_back();
                }
                ops.pop_back();
                expect_operand = false;
                break;
            case Tok::op: {
                char op = (t.c == '-' && expect_operand) ? 'n' : t.c;
                if (op != 'n') {
                    while (!ops.empty() && ops.back() != '(' &&
                           (prec(ops.back()) > prec(op) || (prec(ops.back()) == prec(op) && !right_assoc(op)))) {
                        apply(ops.back());
                        ops.pop_back();
                    }
                }
                ops.push_back(op);
                expect_operand = true;
                break;
            }
        }
    }
    while (!ops.empty()) {
        apply(ops.back());
        ops.pop_back();
    }
    return vals.back();
}

std::string random_number(testing::Rng& rng) {
    char buf[32];
    auto v = testing::uniform(rng, 0.1, 9.0);
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

// Random infix text; parentheses are sprinkled independently of structure,
// so precedence decides the meaning and both evaluators must agree on it.
std::string random_expr(testing::Rng& rng, int depth) {
    int pick = testing::uniform_int(rng, 0, depth > 0 ? 6 : 1);
    std::string s;
    switch (pick) {
        case 0: s = random_number(rng); break;
        case 1: s = testing::uniform_int(rng, 0, 1) ? "x" : "y"; break;
        case 2: s = "-" + random_expr(rng, depth - 1); break;
        case 3: {
            // Integer exponents keep negative bases real.
            std::string e = std::to_string(testing::uniform_int(rng, 1, 3));
            if (testing::uniform_int(rng, 0, 3) == 0) e = "-" + e;
            s = random_expr(rng, depth - 1) + "^" + e;
            break;
        }
        default: {
            const char ops[] = {'+', '-', '*', '/'};
            s = random_expr(rng, depth - 1) + " " + ops[testing::uniform_int(rng, 0, 3)] + " " + random_expr(rng, depth - 1);
        }
    }
    if (testing::uniform_int(rng, 0, 2) == 0) s = "(" + s + ")";
    return s;
}

}  // namespace

TEST_CASE("gain syntax covers each family") {
    CHECK(parse_gain("s") == KFunction::identity());
    CHECK(parse_gain("2*s") == KFunction::linear(2.0));
    CHECK(parse_gain("s*2") == KFunction::linear(2.0));
    CHECK(parse_gain("s / 4") == KFunction::linear(0.25));
    CHECK(parse_gain("s^3") == KFunction::power(3.0));
    CHECK(parse_gain("s^2/(1+s^2)") == KFunction::saturating(1.0, 2.0));
    CHECK(parse_gain("3*s^2/(1+s^2)") == KFunction::saturating(3.0, 2.0));
    CHECK(parse_gain("max(s, 2*s^2)") == pointwise_max(KFunction::identity(), compose(KFunction::linear(2.0), KFunction::power(2.0))));
    CHECK(parse_gain("compose(s^2, 0.5*s)") == compose(KFunction::power(2.0), KFunction::linear(0.5)));
    CHECK(parse_gain("s^2 . 0.5*s") == compose(KFunction::power(2.0), KFunction::linear(0.5)));
}

TEST_CASE("the three ring gains evaluate as written") {
    auto g12 = parse_gain("s^2/(2*(1+s^2))");
    CHECK(same_values(g12, [](double s) { return s * s / (2.0 * (1.0 + s * s)); }));
    CHECK(same_values(parse_gain("s^3"), [](double s) { return s * s * s; }));
    CHECK(same_values(parse_gain("s^2"), [](double s) { return s * s; }));
    CHECK(same_values(parse_gain("7*s"), [](double s) { return 7.0 * s; }));
    CHECK(same_values(parse_gain("(s/2)^2"), [](double s) { return s * s / 4.0; }));
}

TEST_CASE("gains outside the families are rejected with positions") {
    auto e = gain_error("s^2+1");
    CHECK(e.position().line == 1);
    CHECK(e.position().column == 4);
    CHECK(std::string(e.what()).starts_with("1:4:"));

    CHECK(gain_error("s - s^2").position().column == 3);
    CHECK(gain_error("3").message().find("constant") != std::string::npos);
    CHECK(gain_error("-s").position().column == 1);
    CHECK(gain_error("1/s").message().find("decreasing") != std::string::npos);
    CHECK(gain_error("s^s").message().find("exponents") != std::string::npos);
    CHECK(gain_error("s^2/(1+s^3)").message().find("differs") != std::string::npos);
    CHECK(gain_error("sin(s)").message().find("unknown gain function") != std::string::npos);
    CHECK(gain_error("max(s)").message().find("two arguments") != std::string::npos);
    CHECK(gain_error("z").message().find("unknown variable") != std::string::npos);
    CHECK(gain_error("0*s").message().find("positive") != std::string::npos);
    auto multi = gain_error("max(s,\n   s +)");
    CHECK(multi.position().line == 2);
    CHECK_THROWS_AS(parse_gain("(s"), ParseError);
    CHECK_THROWS_AS(parse_gain(""), ParseError);
    CHECK_THROWS_AS(parse_gain("s s"), ParseError);
}

TEST_CASE("printing then parsing returns the same gain") {
    testing::Rng rng(77);
    for (int n = 0; n < 500; ++n) {
        KFunction g = testing::random_gain(rng, 4);
        std::string text = print_gain(g);
        KFunction back = parse_gain(text);
        INFO(text);
        CHECK(back == g);
        CHECK(print_gain(back) == text);
    }
    CHECK(print_gain(KFunction::saturating(1.0, 2.0)) == "s^2/(1+s^2)");
    CHECK(print_gain(KFunction::saturating(0.5, 2.0)) == "0.5*s^2/(1+s^2)");
    CHECK(print_gain(KFunction::linear(7.0)) == "7*s");
}

TEST_CASE("compiled right-hand sides agree with an independent infix evaluator") {
    testing::Rng rng(5150);
    auto resolve = [](const AstNode& n) -> std::size_t { return n.name == "x" ? 0 : 1; };
    int compared = 0;
    for (int n = 0; n < 1000; ++n) {
        std::string text = random_expr(rng, 4);
        double x = testing::uniform(rng, -2.0, 2.0);
        double y = testing::uniform(rng, -2.0, 2.0);
        Program prog = compile_program(parse_ast(text), resolve);
        const double slots[2] = {x, y};
        double got = prog.run(slots);
        double want = oracle_eval(text, x, y);
        INFO(text << " at x=" << x << " y=" << y);
        if (std::isnan(want)) {
            CHECK(std::isnan(got));
            continue;
        }
        if (std::isinf(want)) {
            CHECK(got == want);
            continue;
        }
        CHECK(std::fabs(got - want) <= 1e-12 * std::max(1.0, std::fabs(want)));
        ++compared;
    }
    CHECK(compared > 900);
}

TEST_CASE("expression syntax details") {
    auto resolve = [](const AstNode&) -> std::size_t { return 0; };
    const double one[1] = {3.0};
    CHECK(compile_program(parse_ast("-x^2"), resolve).run(one) == -9.0);
    CHECK(compile_program(parse_ast("2^-1"), resolve).run(one) == 0.5);
    CHECK(compile_program(parse_ast("2^3^2"), resolve).run(one) == 512.0);
    CHECK(compile_program(parse_ast("1.5e1 - x"), resolve).run(one) == 12.0);
    CHECK(compile_program(parse_ast("abs(-x) + sqrt(4) + exp(0) + sin(0) + cos(0)"), resolve).run(one) == 7.0);
    auto delayed = parse_ast("v_2[-theta_1] + v_3[-0.5] + x_1[0]");
    int delays = 0;
    for (const auto& node : delayed.nodes) delays += node.delay.has_value();
    CHECK(delays == 3);
    CHECK_THROWS_AS(compile_program(parse_ast("foo(x)"), resolve), ParseError);
    CHECK_THROWS_AS(compile_program(parse_ast("sin(x, x)"), resolve), ParseError);
    CHECK_THROWS_AS(compile_program(parse_ast("x . x"), resolve), ParseError);
    CHECK_THROWS_AS(parse_ast("x[1]"), ParseError);
    CHECK_THROWS_AS(parse_ast("2 +"), ParseError);
}

TEST_CASE("bundled configuration reproduces the built-in ring example") {
    auto bundle = load_system(SMALLGAIN_EXAMPLE_JSON);
    CHECK(bundle.system.size() == 3);
    CHECK(bundle.gains.size() == 3);
    CHECK(bundle.system.delays() == std::vector<double>{1.0});
    auto hist = HistoryFunction::constant({{1}, {1}, {1}});
    SimulationOptions opt{20.0, 1e-2};
    auto from_config = simulate(bundle.system, bundle.history, bundle.input, opt);
    auto builtin = simulate(paper_example(1.0), hist, InputSignal::zero(), opt);
    REQUIRE(from_config.rows() == builtin.rows());
    for (long i = builtin.first_index(); i <= builtin.last_index(); ++i) {
        auto a = from_config.row(i);
        auto b = builtin.row(i);
        for (std::size_t c = 0; c < 3; ++c) CHECK(std::fabs(a[c] - b[c]) <= 1e-12 * std::max(1.0, std::fabs(b[c])));
    }
    auto g12 = bundle.gains.gain(1, 2);
    REQUIRE(g12);
    CHECK((*g12)(1.0) == Catch::Approx(0.25));
    CHECK(bundle.checks.eps == 1e-3);
}

TEST_CASE("overrides rescale gains and replace the delay") {
    Overrides o;
    o.delay = 0.5;
    o.gain_scale = 2.0;
    auto bundle = load_system(SMALLGAIN_EXAMPLE_JSON, o);
    CHECK(bundle.system.delays() == std::vector<double>{0.5});
    CHECK((*bundle.gains.gain(2, 3))(1.0) == Catch::Approx(2.0));
}

namespace {

std::string config_error_path(const std::string& text) {
    try {
        parse_system_text(text);
    } catch (const ConfigError& e) {
        return e.path();
    }
    return "<no error>";
}

const char* kTwoSubsystems = R"({
  "k": 2, "delays": [1.0],
  "subsystems": [ {"rhs": "-x_1 + v_2[-1.0]"}, {"rhs": "-x_2"} ],
  "gains": {"edges": [ {"i": 1, "j": 2, "gain": "0.5*s"} ]}
})";

}  // namespace

TEST_CASE("configuration errors name the offending path") {
    CHECK(parse_system_text(kTwoSubsystems).system.size() == 2);
    CHECK(config_error_path(R"({"subsystems": []})") == "$.subsystems");
    CHECK(config_error_path(R"({"subsystems": [{"rhs": "-x_1"}], "bogus": 1})") == "$.bogus");
    CHECK(config_error_path(R"({"delays": [1.0], "subsystems": [{"rhs": "-x_1 + v_2[-2.0]"}, {"rhs": "-x_2"}]})") ==
          "$.subsystems[0].rhs");
    CHECK(config_error_path(R"({"subsystems": [{"rhs": "-x_1 + v_3"}, {"rhs": "-x_2"}]})") == "$.subsystems[0].rhs");
    CHECK(config_error_path(R"({"subsystems": [{"rhs": "-x_1"}], "gains": {"edges": [{"i": 1, "j": 1, "gain": "s"}]}})")
              .starts_with("$.gains.edges[0]"));
    CHECK(config_error_path(R"({"subsystems": [{"rhs": "-x_1"}, {"rhs": "-x_2"}], "gains": {"edges": [{"i": 1, "j": 2, "gain": "s+1"}]}})")
              .starts_with("$.gains.edges[0]"));
    CHECK(config_error_path(R"({"subsystems": [{"rhs": "-x_1"}], "simulation": {"step": -1}})") == "$.simulation.step");
    CHECK(config_error_path("{not json") == "$");
    try {
        parse_system_text(R"({"delays": [1.0], "subsystems": [{"rhs": "-x_1 + v_2[-2.0]"}, {"rhs": "-x_2"}]})");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("not declared") != std::string::npos);
    }
    CHECK_THROWS_AS(load_system("/nonexistent/system.json"), ConfigError);
}

TEST_CASE("inputs, histories and auxiliary blocks from configuration") {
    auto bundle = parse_system_text(R"json({
      "delays": [0.5],
      "subsystems": [ {"input_dim": 1, "rhs": "-x_1 + u_1"} ],
      "gains": {"input": [ {"i": 1, "gain": "2*s"} ], "gs": [ {"i": 1, "gain": "7*s"} ]},
      "history": {"kind": "polynomial", "coefficients": [[1.0, 2.0]]},
      "input": {"kind": "piecewise", "times": [0, 1], "rows": [[1.0], [0.0]]},
      "auxiliary": {"rho": "0.5*s", "disturbance": {"kind": "expression", "components": ["sin(t)"]}}
    })json");
    CHECK(bundle.auxiliary.has_value());
    std::vector<double> u(1);
    bundle.input(0.5, u);
    CHECK(u[0] == 1.0);
    bundle.input(1.5, u);
    CHECK(u[0] == 0.0);
    std::vector<double> h(1);
    bundle.history(-0.25, h);
    CHECK(h[0] == 0.5);
    CHECK((*bundle.gains.input_gain(1))(1.0) == 2.0);
}
