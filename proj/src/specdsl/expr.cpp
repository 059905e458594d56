#include <algorithm>
#include <charconv>
#include <cmath>
#include <string>

#include "smallgain/specdsl.hpp"

namespace smallgain::specdsl {

ParseError::ParseError(Position pos, const std::string& message)
    : std::runtime_error(std::to_string(pos.line) + ":" + std::to_string(pos.column) + ": " + message),
      pos_(pos),
      message_(message) {}

namespace {

enum class Tok { number, ident, lparen, rparen, lbracket, rbracket, comma, plus, minus, star, slash, caret, dot, end };

struct Token {
    Tok kind;
    std::string_view text;
    double value = 0.0;
    Position pos;
};

bool is_ident_start(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    Token next() {
        skip_space();
        Token t;
        t.pos = pos_;
        if (i_ >= src_.size()) {
            t.kind = Tok::end;
            return t;
        }
        const char c = src_[i_];
        if (is_digit(c) || (c == '.' && i_ + 1 < src_.size() && is_digit(src_[i_ + 1]))) return number(t);
        if (is_ident_start(c)) {
            std::size_t start = i_;
            while (i_ < src_.size() && (is_ident_start(src_[i_]) || is_digit(src_[i_]))) advance();
            t.kind = Tok::ident;
            t.text = src_.substr(start, i_ - start);
            return t;
        }
        t.text = src_.substr(i_, 1);
        switch (c) {
            case '(': t.kind = Tok::lparen; break;
            case ')': t.kind = Tok::rparen; break;
            case '[': t.kind = Tok::lbracket; break;
            case ']': t.kind = Tok::rbracket; break;
            case ',': t.kind = Tok::comma; break;
            case '+': t.kind = Tok::plus; break;
            case '-': t.kind = Tok::minus; break;
            case '*': t.kind = Tok::star; break;
            case '/': t.kind = Tok::slash; break;
            case '^': t.kind = Tok::caret; break;
            case '.': t.kind = Tok::dot; break;
            default: throw ParseError(pos_, std::string("unexpected character '") + c + "'");
        }
        advance();
        return t;
    }

private:
    void advance() {
        if (src_[i_] == '\n') {
            ++pos_.line;
            pos_.column = 1;
        } else {
            ++pos_.column;
        }
        ++i_;
    }

    void skip_space() {
        while (i_ < src_.size() && (src_[i_] == ' ' || src_[i_] == '\t' || src_[i_] == '\n' || src_[i_] == '\r')) {
            advance();
        }
    }

    Token number(Token t) {
        std::size_t start = i_;
        while (i_ < src_.size() && is_digit(src_[i_])) advance();
        if (i_ < src_.size() && src_[i_] == '.' && i_ + 1 < src_.size() && is_digit(src_[i_ + 1])) {
            advance();
            while (i_ < src_.size() && is_digit(src_[i_])) advance();
        }
        if (i_ < src_.size() && (src_[i_] == 'e' || src_[i_] == 'E')) {
            std::size_t j = i_ + 1;
            if (j < src_.size() && (src_[j] == '+' || src_[j] == '-')) ++j;
            if (j < src_.size() && is_digit(src_[j])) {
                while (i_ < j) advance();
                while (i_ < src_.size() && is_digit(src_[i_])) advance();
            }
        }
        t.kind = Tok::number;
        t.text = src_.substr(start, i_ - start);
        auto res = std::from_chars(t.text.data(), t.text.data() + t.text.size(), t.value);
        if (res.ec != std::errc() || !std::isfinite(t.value)) {
            throw ParseError(t.pos, "number '" + std::string(t.text) + "' is out of range");
        }
        return t;
    }

    std::string_view src_;
    std::size_t i_ = 0;
    Position pos_;
};

const char* describe(Tok k) {
    switch (k) {
        case Tok::number: return "number";
        case Tok::ident: return "name";
        case Tok::lparen: return "'('";
        case Tok::rparen: return "')'";
        case Tok::lbracket: return "'['";
        case Tok::rbracket: return "']'";
        case Tok::comma: return "','";
        case Tok::plus: return "'+'";
        case Tok::minus: return "'-'";
        case Tok::star: return "'*'";
        case Tok::slash: return "'/'";
        case Tok::caret: return "'^'";
        case Tok::dot: return "'.'";
        case Tok::end: return "end of input";
    }
    return "token";
}

class Parser {
public:
    explicit Parser(std::string_view src) : lex_(src) { tok_ = lex_.next(); }

    Ast run() {
        if (tok_.kind == Tok::end) throw ParseError(tok_.pos, "empty expression");
        ast_.root = compose_level();
        if (tok_.kind != Tok::end) {
            throw ParseError(tok_.pos, std::string("unexpected ") + describe(tok_.kind));
        }
        return std::move(ast_);
    }

private:
    void shift() { tok_ = lex_.next(); }

    void expect(Tok k) {
        if (tok_.kind != k) {
            throw ParseError(tok_.pos, std::string("expected ") + describe(k) + ", found " + describe(tok_.kind));
        }
        shift();
    }

    int add(AstNode n) {
        ast_.nodes.push_back(std::move(n));
        return static_cast<int>(ast_.nodes.size() - 1);
    }

    int binary(char op, int l, int r, Position pos) {
        AstNode n;
        n.kind = AstNode::Kind::binary;
        n.op = op;
        n.args = {l, r};
        n.pos = pos;
        return add(std::move(n));
    }

    int compose_level() {
        int lhs = sum();
        if (tok_.kind == Tok::dot) {
            Position pos = tok_.pos;
            shift();
            int rhs = compose_level();
            return binary('.', lhs, rhs, pos);
        }
        return lhs;
    }

    int sum() {
        int lhs = product();
        while (tok_.kind == Tok::plus || tok_.kind == Tok::minus) {
            char op = tok_.kind == Tok::plus ? '+' : '-';
            Position pos = tok_.pos;
            shift();
            lhs = binary(op, lhs, product(), pos);
        }
        return lhs;
    }

    int product() {
        int lhs = unary();
        while (tok_.kind == Tok::star || tok_.kind == Tok::slash) {
            char op = tok_.kind == Tok::star ? '*' : '/';
            Position pos = tok_.pos;
            shift();
            lhs = binary(op, lhs, unary(), pos);
        }
        return lhs;
    }

    int unary() {
        if (tok_.kind == Tok::minus) {
            Position pos = tok_.pos;
            shift();
            AstNode n;
            n.kind = AstNode::Kind::negate;
            n.args = {unary()};
            n.pos = pos;
            return add(std::move(n));
        }
        if (tok_.kind == Tok::plus) {
            shift();
            return unary();
        }
        return power();
    }

    int power() {
        int base = primary();
        if (tok_.kind == Tok::caret) {
            Position pos = tok_.pos;
            shift();
            return binary('^', base, unary(), pos);
        }
        return base;
    }

    int primary() {
        Token t = tok_;
        switch (t.kind) {
            case Tok::number: {
                shift();
                AstNode n;
                n.kind = AstNode::Kind::number;
                n.value = t.value;
                n.pos = t.pos;
                return add(std::move(n));
            }
            case Tok::lparen: {
                shift();
                int inner = compose_level();
                expect(Tok::rparen);
                return inner;
            }
            case Tok::ident: {
                shift();
                AstNode n;
                n.name = std::string(t.text);
                n.pos = t.pos;
                if (tok_.kind == Tok::lparen) {
                    shift();
                    n.kind = AstNode::Kind::call;
                    if (tok_.kind != Tok::rparen) {
                        n.args.push_back(compose_level());
                        while (tok_.kind == Tok::comma) {
                            shift();
                            n.args.push_back(compose_level());
                        }
                    }
                    expect(Tok::rparen);
                    return add(std::move(n));
                }
                n.kind = AstNode::Kind::variable;
                if (tok_.kind == Tok::lbracket) n.delay = delay();
                return add(std::move(n));
            }
            default:
                throw ParseError(t.pos, std::string("unexpected ") + describe(t.kind));
        }
    }

    DelayRef delay() {
        DelayRef d;
        d.pos = tok_.pos;
        shift();
        bool negative = false;
        if (tok_.kind == Tok::minus) {
            negative = true;
            shift();
        }
        if (tok_.kind == Tok::number) {
            if (!negative && tok_.value != 0.0) throw ParseError(d.pos, "delays are written as [-theta]");
            d.literal = tok_.value;
            shift();
        } else if (tok_.kind == Tok::ident) {
            if (!negative) throw ParseError(d.pos, "delays are written as [-theta]");
            d.name = std::string(tok_.text);
            shift();
        } else {
            throw ParseError(tok_.pos, std::string("expected delay, found ") + describe(tok_.kind));
        }
        expect(Tok::rbracket);
        return d;
    }

    Lexer lex_;
    Token tok_;
    Ast ast_;
};

}  // namespace

Ast parse_ast(std::string_view text) { return Parser(text).run(); }

namespace {

struct Emitter {
    const Ast& ast;
    const std::function<std::size_t(const AstNode&)>& resolve;
    std::vector<Program::Instr>& out;
    std::size_t depth = 0;
    std::size_t max_depth = 0;
    std::size_t slots = 0;

    void push() { max_depth = std::max(max_depth, ++depth); }

    void emit(int idx) {
        const AstNode& n = ast.at(idx);
        using C = Program::Code;
        switch (n.kind) {
            case AstNode::Kind::number:
                out.push_back({C::push_const, n.value, 0});
                push();
                return;
            case AstNode::Kind::variable: {
                std::size_t slot = resolve(n);
                slots = std::max(slots, slot + 1);
                out.push_back({C::push_slot, 0.0, slot});
                push();
                return;
            }
            case AstNode::Kind::negate:
                emit(n.args[0]);
                out.push_back({C::neg, 0.0, 0});
                return;
            case AstNode::Kind::binary: {
                if (n.op == '.') throw ParseError(n.pos, "composition is only meaningful for gains");
                emit(n.args[0]);
                emit(n.args[1]);
                C code = n.op == '+' ? C::add : n.op == '-' ? C::sub : n.op == '*' ? C::mul : n.op == '/' ? C::div : C::pow;
                out.push_back({code, 0.0, 0});
                --depth;
                return;
            }
            case AstNode::Kind::call: {
                C code;
                if (n.name == "exp") code = C::exp;
                else if (n.name == "sin") code = C::sin;
                else if (n.name == "cos") code = C::cos;
                else if (n.name == "sqrt") code = C::sqrt;
                else if (n.name == "abs") code = C::abs;
                else throw ParseError(n.pos, "unknown function '" + n.name + "'");
                if (n.args.size() != 1) throw ParseError(n.pos, n.name + " takes exactly one argument");
                emit(n.args[0]);
                out.push_back({code, 0.0, 0});
                return;
            }
        }
    }
};

}  // namespace

Program compile_program(const Ast& ast, const std::function<std::size_t(const AstNode&)>& resolve) {
    Program p;
    Emitter e{ast, resolve, p.code_};
    e.emit(ast.root);
    p.slots_ = e.slots;
    p.max_stack_ = e.max_depth;
    return p;
}

double Program::run(std::span<const double> slots) const {
    double small[32] = {};
    std::vector<double> big;
    double* stack = small;
    if (max_stack_ > 32) {
        big.resize(max_stack_);
        stack = big.data();
    }
    std::size_t sp = 0;
    for (const Instr& in : code_) {
        switch (in.code) {
            case Code::push_const: stack[sp++] = in.value; break;
            case Code::push_slot: stack[sp++] = slots[in.slot]; break;
            case Code::add: --sp; stack[sp - 1] = stack[sp - 1] + stack[sp]; break;
            case Code::sub: --sp; stack[sp - 1] = stack[sp - 1] - stack[sp]; break;
            case Code::mul: --sp; stack[sp - 1] = stack[sp - 1] * stack[sp]; break;
            case Code::div: --sp; stack[sp - 1] = stack[sp - 1] / stack[sp]; break;
            case Code::pow: --sp; stack[sp - 1] = std::pow(stack[sp - 1], stack[sp]); break;
            case Code::neg: stack[sp - 1] = -stack[sp - 1]; break;
            case Code::exp: stack[sp - 1] = std::exp(stack[sp - 1]); break;
            case Code::sin: stack[sp - 1] = std::sin(stack[sp - 1]); break;
            case Code::cos: stack[sp - 1] = std::cos(stack[sp - 1]); break;
            case Code::sqrt: stack[sp - 1] = std::sqrt(stack[sp - 1]); break;
            case Code::abs: stack[sp - 1] = std::fabs(stack[sp - 1]); break;
        }
    }
    return stack[0];
}

}  // namespace smallgain::specdsl
