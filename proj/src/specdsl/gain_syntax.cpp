#include <cmath>
#include <optional>
#include <string>

#include "smallgain/format.hpp"
#include "smallgain/specdsl.hpp"

namespace smallgain::specdsl {

namespace {

// Intermediate value while folding a gain expression:
//   constant  a number
//   gain      coef * base(s)
//   denom     coef * (1 + s^q), legal only as a divisor
struct Value {
    enum class Kind { constant, gain, denom } kind = Kind::constant;
    double coef = 1.0;
    bool scaled = false;
    std::optional<KFunction> base;
    double q = 1.0;
};

std::optional<double> exponent_of(const KFunction& g) {
    if (g.kind() == KFunction::Kind::identity) return 1.0;
    if (g.kind() == KFunction::Kind::power) return g.first_param();
    return std::nullopt;
}

void require_coefficient(double c, Position pos) {
    if (!(c > 0.0) || !std::isfinite(c)) {
        throw ParseError(pos, "coefficient " + format_double(c) + " must be finite and positive");
    }
}

class GainCompiler {
public:
    explicit GainCompiler(const Ast& ast) : ast_(ast) {}

    KFunction run() { return finalize(eval(ast_.root), ast_.at(ast_.root).pos); }

private:
    KFunction finalize(const Value& v, Position pos) {
        switch (v.kind) {
            case Value::Kind::constant:
                throw ParseError(pos, "a constant is not a class-K gain (it must vanish at s = 0)");
            case Value::Kind::denom:
                throw ParseError(pos, "sum with a constant term violates g(0) = 0");
            case Value::Kind::gain: break;
        }
        require_coefficient(v.coef, pos);
        const KFunction& b = *v.base;
        switch (b.kind()) {
            case KFunction::Kind::identity:
                return v.scaled ? KFunction::linear(v.coef) : b;
            case KFunction::Kind::saturating:
                return v.scaled ? KFunction::saturating(v.coef * b.first_param(), b.second_param()) : b;
            default:
                return v.scaled ? compose(KFunction::linear(v.coef), b) : b;
        }
    }

    static Value gain(KFunction base) {
        Value v;
        v.kind = Value::Kind::gain;
        v.base = std::move(base);
        return v;
    }

    static Value constant(double c) {
        Value v;
        v.coef = c;
        return v;
    }

    Value eval(int idx) {
        const AstNode& n = ast_.at(idx);
        switch (n.kind) {
            case AstNode::Kind::number: return constant(n.value);
            case AstNode::Kind::variable:
                if (n.name != "s") {
                    throw ParseError(n.pos, "unknown variable '" + n.name + "'; gains are functions of s");
                }
                if (n.delay) throw ParseError(n.delay->pos, "gains take no delay argument");
                return gain(KFunction::identity());
            case AstNode::Kind::negate:
                throw ParseError(n.pos, "negative terms are not allowed in a class-K gain");
            case AstNode::Kind::call: {
                if (n.name != "max" && n.name != "compose") {
                    throw ParseError(n.pos, "unknown gain function '" + n.name + "' (use max or compose)");
                }
                if (n.args.size() != 2) throw ParseError(n.pos, n.name + " takes exactly two arguments");
                KFunction a = finalize(eval(n.args[0]), ast_.at(n.args[0]).pos);
                KFunction b = finalize(eval(n.args[1]), ast_.at(n.args[1]).pos);
                return gain(n.name == "max" ? pointwise_max(std::move(a), std::move(b))
                                            : compose(std::move(a), std::move(b)));
            }
            case AstNode::Kind::binary: break;
        }
        if (n.op == '.') {
            KFunction a = finalize(eval(n.args[0]), ast_.at(n.args[0]).pos);
            KFunction b = finalize(eval(n.args[1]), ast_.at(n.args[1]).pos);
            return gain(compose(std::move(a), std::move(b)));
        }
        Value l = eval(n.args[0]);
        Value r = eval(n.args[1]);
        switch (n.op) {
            case '+': return sum(l, r, n.pos);
            case '-': throw ParseError(n.pos, "subtraction is not allowed in a class-K gain");
            case '*': return product(l, r, n.pos);
            case '/': return quotient(l, r, n.pos);
            case '^': return raise(l, r, n.pos);
        }
        throw ParseError(n.pos, std::string("unsupported operator '") + n.op + "'");
    }

    Value sum(const Value& l, const Value& r, Position pos) {
        const Value* c = l.kind == Value::Kind::constant ? &l : &r;
        const Value* g = l.kind == Value::Kind::constant ? &r : &l;
        if (c->kind == Value::Kind::constant && g->kind == Value::Kind::gain) {
            auto q = exponent_of(*g->base);
            if (q && c->coef > 0.0 && c->coef == g->coef) {
                Value d;
                d.kind = Value::Kind::denom;
                d.coef = c->coef;
                d.q = *q;
                return d;
            }
            if (q && c->coef > 0.0) {
                throw ParseError(pos, "denominator must read k*(1+s^q): constant and coefficient differ");
            }
        }
        throw ParseError(pos, "'+' is only allowed in the denominator of c*s^q/(1+s^q)");
    }

    Value product(Value l, Value r, Position pos) {
        using K = Value::Kind;
        if (l.kind == K::constant && r.kind == K::constant) return constant(l.coef * r.coef);
        if (l.kind == K::constant) std::swap(l, r);
        if (r.kind == K::constant) {
            l.coef *= r.coef;
            l.scaled = true;
            return l;
        }
        if (l.kind == K::gain && r.kind == K::gain) {
            auto p = exponent_of(*l.base);
            auto q = exponent_of(*r.base);
            if (p && q) {
                Value v = gain(KFunction::power(*p + *q));
                v.coef = l.coef * r.coef;
                v.scaled = l.scaled || r.scaled;
                return v;
            }
        }
        throw ParseError(pos, "product of two gains is outside the supported families");
    }

    Value quotient(Value l, const Value& r, Position pos) {
        using K = Value::Kind;
        if (r.kind == K::constant) {
            if (!(r.coef > 0.0)) throw ParseError(pos, "division by a non-positive constant");
            if (l.kind == K::constant) return constant(l.coef / r.coef);
            l.coef /= r.coef;
            l.scaled = true;
            return l;
        }
        if (l.kind == K::gain && r.kind == K::denom) {
            auto p = exponent_of(*l.base);
            if (!p) throw ParseError(pos, "numerator of c*s^q/(1+s^q) must be a power of s");
            if (*p != r.q) {
                throw ParseError(pos, "numerator exponent " + format_double(*p) + " differs from denominator exponent " +
                                          format_double(r.q));
            }
            require_coefficient(l.coef / r.coef, pos);
            return gain(KFunction::saturating(l.coef / r.coef, r.q));
        }
        if (l.kind == K::constant && r.kind == K::gain) {
            throw ParseError(pos, "a constant over a gain is decreasing, not class-K");
        }
        throw ParseError(pos, "quotient is outside the supported families");
    }

    Value raise(Value l, const Value& r, Position pos) {
        using K = Value::Kind;
        if (r.kind != K::constant) throw ParseError(pos, "exponents must be numbers");
        if (!(r.coef > 0.0)) throw ParseError(pos, "exponent " + format_double(r.coef) + " must be positive");
        if (l.kind == K::constant) return constant(std::pow(l.coef, r.coef));
        if (l.kind == K::denom) throw ParseError(pos, "powers of 1+s^q are outside the supported families");
        Value v;
        if (auto p = exponent_of(*l.base)) {
            v = gain(KFunction::power(*p * r.coef));
        } else {
            v = gain(compose(KFunction::power(r.coef), *l.base));
        }
        v.coef = std::pow(l.coef, r.coef);
        v.scaled = l.scaled;
        return v;
    }

    const Ast& ast_;
};

}  // namespace

KFunction parse_gain(std::string_view text) {
    Ast ast = parse_ast(text);
    return GainCompiler(ast).run();
}

std::string print_gain(const KFunction& g) {
    switch (g.kind()) {
        case KFunction::Kind::identity: return "s";
        case KFunction::Kind::linear: return format_double(g.first_param()) + "*s";
        case KFunction::Kind::power: return "s^" + format_double(g.first_param());
        case KFunction::Kind::saturating: {
            std::string q = format_double(g.second_param());
            std::string frac = "s^" + q + "/(1+s^" + q + ")";
            return g.first_param() == 1.0 ? frac : format_double(g.first_param()) + "*" + frac;
        }
        case KFunction::Kind::compose: return "compose(" + print_gain(g.left()) + ", " + print_gain(g.right()) + ")";
        case KFunction::Kind::max: return "max(" + print_gain(g.left()) + ", " + print_gain(g.right()) + ")";
    }
    return "s";
}

}  // namespace smallgain::specdsl
