#pragma once

// Text formats: the gain surface syntax, right-hand-side expressions and
// the JSON system configuration.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "smallgain/dde_sim.hpp"
#include "smallgain/gain_algebra.hpp"
#include "smallgain/gain_graph.hpp"

namespace smallgain::specdsl {

struct Position {
    int line = 1;
    int column = 1;
};

class ParseError : public std::runtime_error {
public:
    ParseError(Position pos, const std::string& message);
    Position position() const noexcept { return pos_; }
    const std::string& message() const noexcept { return message_; }

private:
    Position pos_;
    std::string message_;
};

// ---- expression syntax tree ------------------------------------------------

// [-1.5] or [-theta_2]; [0] also accepted.
struct DelayRef {
    std::optional<double> literal;
    std::string name;
    Position pos;
};

struct AstNode {
    enum class Kind { number, variable, negate, binary, call };
    Kind kind = Kind::number;
    double value = 0.0;          // number
    std::string name;            // variable / call
    char op = 0;                 // binary: + - * / ^ .
    std::vector<int> args;       // negate: 1, binary: 2, call: n
    std::optional<DelayRef> delay;
    Position pos;
};

struct Ast {
    std::vector<AstNode> nodes;
    int root = -1;

    const AstNode& at(int i) const { return nodes.at(static_cast<std::size_t>(i)); }
};

// Precedence, loosest first: '.', '+ -', '* /', unary '-', '^' (right
// associative, so -x^2 is -(x^2) and 2^-1 is allowed).
Ast parse_ast(std::string_view text);

// ---- compiled right-hand sides ---------------------------------------------

class Program {
public:
    enum class Code : std::uint8_t {
        push_const, push_slot, add, sub, mul, div, pow, neg, exp, sin, cos, sqrt, abs
    };
    struct Instr {
        Code code;
        double value = 0.0;
        std::size_t slot = 0;
    };

    double run(std::span<const double> slots) const;

    const std::vector<Instr>& code() const noexcept { return code_; }
    std::size_t slot_count() const noexcept { return slots_; }

private:
    friend Program compile_program(const Ast&, const std::function<std::size_t(const AstNode&)>&);
    std::vector<Instr> code_;
    std::size_t slots_ = 0;
    std::size_t max_stack_ = 0;
};

// `resolve` maps each variable node to a slot index. Functions: exp, sin,
// cos, sqrt, abs. Throws ParseError on '.', unknown functions or arity.
Program compile_program(const Ast& ast, const std::function<std::size_t(const AstNode&)>& resolve);

// ---- gains -----------------------------------------------------------------

// Compiles into the KFunction families; rejects anything outside them with a
// positioned explanation (constants, sums outside c*s^q/(1+s^q), minus).
KFunction parse_gain(std::string_view text);

// Canonical text; parse_gain(print_gain(g)) == g.
std::string print_gain(const KFunction& g);

// ---- configuration ---------------------------------------------------------

class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string path, const std::string& message);
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

struct SimulationParams {
    double horizon = 20.0;
    double step = 1e-2;
    double divergence_threshold = 1e12;
};

struct CheckParams {
    bool gs = true;
    bool ag = true;
    bool gas = true;
    GridSpec grid;
    double eps = 1e-3;
    double tail_fraction = 0.2;
    double ag_tolerance = 1e-3;
};

struct Auxiliary {
    KFunction rho;
    InputSignal disturbance;
};

struct SystemBundle {
    std::string name;
    DelaySystemSpec system;
    GainDigraph gains;
    HistoryFunction history;
    InputSignal input;
    SimulationParams simulation;
    CheckParams checks;
    std::optional<Auxiliary> auxiliary;
    std::vector<int> elimination_order;
    std::vector<std::vector<std::string>> rhs_text;  // per subsystem, per component
};

struct Overrides {
    std::optional<double> delay;  // replaces the single declared delay
    double gain_scale = 1.0;      // edges become (scale*s) o gamma_ij
};

SystemBundle parse_system(const nlohmann::json& doc, const Overrides& overrides = {});
SystemBundle parse_system_text(std::string_view text, const Overrides& overrides = {});
SystemBundle load_system(const std::filesystem::path& path, const Overrides& overrides = {});

}  // namespace smallgain::specdsl
