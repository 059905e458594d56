#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>

#include "smallgain/format.hpp"
#include "smallgain/specdsl.hpp"

namespace smallgain::specdsl {

using nlohmann::json;

ConfigError::ConfigError(std::string path, const std::string& message)
    : std::runtime_error(path + ": " + message), path_(std::move(path)) {}

namespace {

std::string at_key(const std::string& path, std::string_view key) { return path + "." + std::string(key); }
std::string at_index(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

void allow_keys(const json& obj, const std::string& path, std::initializer_list<std::string_view> keys) {
    for (const auto& [key, _] : obj.items()) {
        if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
            throw ConfigError(at_key(path, key), "unknown key");
        }
    }
}

const json& require_object(const json& j, const std::string& path) {
    if (!j.is_object()) throw ConfigError(path, "expected an object");
    return j;
}

const json& require_array(const json& j, const std::string& path) {
    if (!j.is_array()) throw ConfigError(path, "expected an array");
    return j;
}

const json& member(const json& obj, std::string_view key, const std::string& path) {
    auto it = obj.find(key);
    if (it == obj.end()) throw ConfigError(at_key(path, key), "missing required key");
    return *it;
}

double number(const json& j, const std::string& path) {
    if (!j.is_number()) throw ConfigError(path, "expected a number");
    double v = j.get<double>();
    if (!std::isfinite(v)) throw ConfigError(path, "expected a finite number");
    return v;
}

double positive(const json& j, const std::string& path) {
    double v = number(j, path);
    if (!(v > 0.0)) throw ConfigError(path, "expected a positive number");
    return v;
}

double nonnegative(const json& j, const std::string& path) {
    double v = number(j, path);
    if (!(v >= 0.0)) throw ConfigError(path, "expected a nonnegative number");
    return v;
}

long long integer(const json& j, const std::string& path) {
    if (!j.is_number_integer() && !j.is_number_unsigned()) throw ConfigError(path, "expected an integer");
    return j.get<long long>();
}

std::string text(const json& j, const std::string& path) {
    if (!j.is_string()) throw ConfigError(path, "expected a string");
    return j.get<std::string>();
}

std::vector<double> number_list(const json& j, const std::string& path) {
    std::vector<double> out;
    if (j.is_number()) {
        out.push_back(number(j, path));
        return out;
    }
    require_array(j, path);
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], at_index(path, i)));
    return out;
}

KFunction gain_at(const json& j, const std::string& path) {
    std::string src = text(j, path);
    try {
        return parse_gain(src);
    } catch (const ParseError& e) {
        throw ConfigError(path, "gain '" + src + "' at " + e.what());
    }
}

int subsystem_index(const json& j, const std::string& path, std::size_t k) {
    long long i = integer(j, path);
    if (i < 1 || static_cast<std::size_t>(i) > k) {
        throw ConfigError(path, "subsystem " + std::to_string(i) + " is not declared (k = " + std::to_string(k) + ")");
    }
    return static_cast<int>(i);
}

// ---- right-hand sides ------------------------------------------------------

struct Source {
    enum class Kind { state, delayed, input, time } kind = Kind::time;
    int j = 0;
    std::size_t component = 0;
    std::size_t delay = 0;
    friend bool operator==(const Source&, const Source&) = default;
};

struct ParsedName {
    char prefix = 0;  // 'x', 'v', 'u' or 't'
    int index = 0;
    int component = 0;  // 0 when absent
};

std::optional<ParsedName> split_name(const std::string& name) {
    if (name == "t") return ParsedName{'t', 0, 0};
    if (name.size() < 3 || name[1] != '_' || (name[0] != 'x' && name[0] != 'v' && name[0] != 'u')) return std::nullopt;
    ParsedName p;
    p.prefix = name[0];
    std::size_t pos = 2;
    auto read_int = [&](int& out) {
        std::size_t start = pos;
        while (pos < name.size() && std::isdigit(static_cast<unsigned char>(name[pos]))) ++pos;
        if (pos == start || pos - start > 6) return false;
        out = std::stoi(name.substr(start, pos - start));
        return true;
    };
    if (!read_int(p.index)) return std::nullopt;
    if (pos < name.size()) {
        if (name[pos] != '_') return std::nullopt;
        ++pos;
        if (!read_int(p.component)) return std::nullopt;
        if (pos != name.size()) return std::nullopt;
    }
    return p;
}

struct RhsContext {
    int self;
    std::vector<std::size_t> dims;
    std::vector<std::size_t> input_dims;
    std::vector<double> declared_delays;
};

class RhsResolver {
public:
    RhsResolver(const RhsContext& ctx, std::vector<Source>& sources, std::set<int>& refs)
        : ctx_(ctx), sources_(sources), refs_(refs) {}

    std::size_t operator()(const AstNode& n) {
        auto p = split_name(n.name);
        if (!p) throw ParseError(n.pos, "unknown variable '" + n.name + "' (expected x_i, v_j, u_i or t)");
        const std::size_t k = ctx_.dims.size();
        Source s;
        if (p->prefix == 't') {
            if (n.delay) throw ParseError(n.delay->pos, "t takes no delay");
            return slot(s);
        }
        if (p->index < 1 || static_cast<std::size_t>(p->index) > k) {
            throw ParseError(n.pos, "'" + n.name + "' refers to undeclared subsystem " + std::to_string(p->index));
        }
        s.j = p->index;
        if (p->prefix == 'u') {
            if (p->index != ctx_.self) {
                throw ParseError(n.pos, "subsystem " + std::to_string(ctx_.self) + " can only read its own input u_" +
                                            std::to_string(ctx_.self));
            }
            if (n.delay) throw ParseError(n.delay->pos, "inputs take no delay");
            s.kind = Source::Kind::input;
            s.component = component(n, *p, ctx_.input_dims[static_cast<std::size_t>(p->index - 1)], "input");
            return slot(s);
        }
        if (p->prefix == 'x' && p->index != ctx_.self) {
            throw ParseError(n.pos, "'" + n.name + "': other subsystems are read as v_" + std::to_string(p->index));
        }
        if (p->prefix == 'v') {
            if (p->index == ctx_.self) {
                throw ParseError(n.pos, "'" + n.name + "': a subsystem reads its own state as x_" +
                                            std::to_string(ctx_.self));
            }
            refs_.insert(p->index);
        }
        s.component = component(n, *p, ctx_.dims[static_cast<std::size_t>(p->index - 1)], "state");
        s.kind = Source::Kind::state;
        if (n.delay) {
            if (auto l = delay_index(*n.delay)) {
                s.kind = Source::Kind::delayed;
                s.delay = *l;
            }
        }
        return slot(s);
    }

private:
    std::size_t component(const AstNode& n, const ParsedName& p, std::size_t dim, const char* what) {
        if (dim == 0) throw ParseError(n.pos, "subsystem " + std::to_string(p.index) + " has no " + what);
        if (p.component == 0) {
            if (dim != 1) {
                throw ParseError(n.pos, "'" + n.name + "' has " + std::to_string(dim) + " components; write " +
                                            n.name + "_1 ... " + n.name + "_" + std::to_string(dim));
            }
            return 0;
        }
        if (static_cast<std::size_t>(p.component) > dim) {
            throw ParseError(n.pos, "'" + n.name + "': component " + std::to_string(p.component) + " exceeds " +
                                        what + " dimension " + std::to_string(dim));
        }
        return static_cast<std::size_t>(p.component - 1);
    }

    // nullopt: zero delay (current value).
    std::optional<std::size_t> delay_index(const DelayRef& d) {
        const auto& delays = ctx_.declared_delays;
        if (d.literal) {
            double v = *d.literal;
            if (v == 0.0) return std::nullopt;
            for (std::size_t l = 0; l < delays.size(); ++l) {
                if (std::fabs(delays[l] - v) <= 1e-12 * std::max(1.0, delays[l])) return l;
            }
            std::string declared;
            for (double x : delays) declared += (declared.empty() ? "" : ", ") + format_double(x);
            throw ParseError(d.pos, "delay " + format_double(v) + " is not declared (declared: " +
                                        (declared.empty() ? "none" : declared) + ")");
        }
        if (d.name == "theta") {
            if (delays.empty()) throw ParseError(d.pos, "no delays are declared");
            return static_cast<std::size_t>(std::max_element(delays.begin(), delays.end()) - delays.begin());
        }
        if (d.name.rfind("theta_", 0) == 0) {
            std::string digits = d.name.substr(6);
            bool ok = !digits.empty() && digits.size() < 7 &&
                      std::all_of(digits.begin(), digits.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
            if (ok) {
                std::size_t l = static_cast<std::size_t>(std::stoi(digits));
                if (l >= 1 && l <= delays.size()) return l - 1;
                throw ParseError(d.pos, d.name + " is not declared (" + std::to_string(delays.size()) + " delays)");
            }
        }
        throw ParseError(d.pos, "unknown delay '" + d.name + "' (expected a number or theta_l)");
    }

    std::size_t slot(const Source& s) {
        auto it = std::find(sources_.begin(), sources_.end(), s);
        if (it != sources_.end()) return static_cast<std::size_t>(it - sources_.begin());
        sources_.push_back(s);
        return sources_.size() - 1;
    }

    const RhsContext& ctx_;
    std::vector<Source>& sources_;
    std::set<int>& refs_;
};

SubsystemRhs make_rhs(std::vector<Program> programs, std::vector<Source> sources) {
    auto progs = std::make_shared<const std::vector<Program>>(std::move(programs));
    auto srcs = std::make_shared<const std::vector<Source>>(std::move(sources));
    return [progs, srcs](const DelayView& view, std::span<const double> u, std::span<double> dx) {
        double small[32];
        std::vector<double> big;
        double* slots = small;
        if (srcs->size() > 32) {
            big.resize(srcs->size());
            slots = big.data();
        }
        for (std::size_t s = 0; s < srcs->size(); ++s) {
            const Source& src = (*srcs)[s];
            switch (src.kind) {
                case Source::Kind::time: slots[s] = view.time(); break;
                case Source::Kind::state: slots[s] = view.state(src.j)[src.component]; break;
                case Source::Kind::delayed: slots[s] = view.delayed(src.j, src.delay)[src.component]; break;
                case Source::Kind::input: slots[s] = u[src.component]; break;
            }
        }
        std::span<const double> view_slots(slots, srcs->size());
        for (std::size_t c = 0; c < progs->size(); ++c) dx[c] = (*progs)[c].run(view_slots);
    };
}

// ---- time-only expressions (closed-form inputs) ----------------------------

InputSignal::Fn time_function(const std::vector<std::string>& texts, const std::string& path) {
    std::vector<Program> programs;
    for (std::size_t c = 0; c < texts.size(); ++c) {
        const std::string p = at_index(path, c);
        try {
            Ast ast = parse_ast(texts[c]);
            programs.push_back(compile_program(ast, [](const AstNode& n) -> std::size_t {
                if (n.name != "t" || n.delay) throw ParseError(n.pos, "closed-form signals may only use t");
                return 0;
            }));
        } catch (const ParseError& e) {
            throw ConfigError(p, e.what());
        }
    }
    auto progs = std::make_shared<const std::vector<Program>>(std::move(programs));
    return [progs](double t, std::span<double> out) {
        const double slot[1] = {t};
        for (std::size_t c = 0; c < progs->size(); ++c) out[c] = (*progs)[c].run(slot);
    };
}

std::vector<std::vector<double>> per_subsystem_values(const json& j, const std::string& path,
                                                      const std::vector<std::size_t>& dims, bool skip_empty) {
    require_array(j, path);
    std::vector<std::vector<double>> out;
    std::size_t expected = 0;
    for (std::size_t d : dims) expected += (skip_empty && d == 0) ? 0 : 1;
    if (j.size() != dims.size() && j.size() != expected) {
        throw ConfigError(path, "expected " + std::to_string(dims.size()) + " entries, one per subsystem");
    }
    std::size_t e = 0;
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (j.size() != dims.size() && dims[i] == 0) {
            out.emplace_back();
            continue;
        }
        const std::string p = at_index(path, e);
        auto v = number_list(j[e], p);
        ++e;
        if (v.size() != dims[i]) {
            throw ConfigError(p, "expected " + std::to_string(dims[i]) + " values for subsystem " + std::to_string(i + 1));
        }
        out.push_back(std::move(v));
    }
    return out;
}

std::vector<std::vector<double>> table_rows(const json& j, const std::string& path, std::size_t width) {
    require_array(j, path);
    std::vector<std::vector<double>> rows;
    for (std::size_t r = 0; r < j.size(); ++r) {
        auto row = number_list(j[r], at_index(path, r));
        if (row.size() != width) {
            throw ConfigError(at_index(path, r), "expected " + std::to_string(width) + " values");
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

HistoryFunction parse_history(const json* j, const std::string& path, const std::vector<std::size_t>& dims) {
    std::size_t n = 0;
    for (std::size_t d : dims) n += d;
    if (!j) {
        std::vector<std::vector<double>> zeros;
        for (std::size_t d : dims) zeros.emplace_back(d, 0.0);
        return HistoryFunction::constant(zeros);
    }
    require_object(*j, path);
    const std::string kind = text(member(*j, "kind", path), at_key(path, "kind"));
    try {
        if (kind == "constant") {
            allow_keys(*j, path, {"kind", "values"});
            return HistoryFunction::constant(per_subsystem_values(member(*j, "values", path), at_key(path, "values"), dims, false));
        }
        if (kind == "polynomial") {
            allow_keys(*j, path, {"kind", "coefficients"});
            const std::string p = at_key(path, "coefficients");
            const json& c = require_array(member(*j, "coefficients", path), p);
            if (c.size() != n) throw ConfigError(p, "expected one coefficient list per state component (" + std::to_string(n) + ")");
            std::vector<std::vector<double>> coeffs;
            for (std::size_t i = 0; i < c.size(); ++i) coeffs.push_back(number_list(c[i], at_index(p, i)));
            return HistoryFunction::polynomial(std::move(coeffs));
        }
        if (kind == "table") {
            allow_keys(*j, path, {"kind", "times", "rows"});
            auto times = number_list(member(*j, "times", path), at_key(path, "times"));
            auto rows = table_rows(member(*j, "rows", path), at_key(path, "rows"), n);
            return HistoryFunction::table(std::move(times), std::move(rows));
        }
    } catch (const std::invalid_argument& e) {
        throw ConfigError(path, e.what());
    }
    throw ConfigError(at_key(path, "kind"), "unknown history kind '" + kind + "' (constant, polynomial, table)");
}

InputSignal parse_input(const json* j, const std::string& path, const std::vector<std::size_t>& input_dims) {
    std::size_t m = 0;
    for (std::size_t d : input_dims) m += d;
    if (!j) return InputSignal::zero(m);
    require_object(*j, path);
    const std::string kind = text(member(*j, "kind", path), at_key(path, "kind"));
    try {
        if (kind == "zero") {
            allow_keys(*j, path, {"kind"});
            return InputSignal::zero(m);
        }
        if (kind == "constant") {
            allow_keys(*j, path, {"kind", "values"});
            return InputSignal::constant(per_subsystem_values(member(*j, "values", path), at_key(path, "values"), input_dims, true));
        }
        if (kind == "piecewise") {
            allow_keys(*j, path, {"kind", "times", "rows"});
            auto times = number_list(member(*j, "times", path), at_key(path, "times"));
            auto rows = table_rows(member(*j, "rows", path), at_key(path, "rows"), m);
            return InputSignal::piecewise_constant(std::move(times), std::move(rows));
        }
        if (kind == "expression") {
            allow_keys(*j, path, {"kind", "components"});
            const std::string p = at_key(path, "components");
            const json& c = require_array(member(*j, "components", path), p);
            if (c.size() != m) throw ConfigError(p, "expected " + std::to_string(m) + " component expressions");
            std::vector<std::string> texts;
            for (std::size_t i = 0; i < c.size(); ++i) texts.push_back(text(c[i], at_index(p, i)));
            return InputSignal::from_function(m, time_function(texts, p));
        }
    } catch (const std::invalid_argument& e) {
        throw ConfigError(path, e.what());
    }
    throw ConfigError(at_key(path, "kind"), "unknown input kind '" + kind + "' (zero, constant, piecewise, expression)");
}

GridSpec parse_grid(const json& j, const std::string& path) {
    require_object(j, path);
    allow_keys(j, path, {"s_min", "s_max", "points", "refinement_depth", "margin"});
    GridSpec g;
    if (j.contains("s_min")) g.s_min = positive(j["s_min"], at_key(path, "s_min"));
    if (j.contains("s_max")) g.s_max = positive(j["s_max"], at_key(path, "s_max"));
    if (j.contains("points")) {
        long long n = integer(j["points"], at_key(path, "points"));
        if (n < 2) throw ConfigError(at_key(path, "points"), "at least two grid points are required");
        g.n_points = static_cast<std::size_t>(n);
    }
    if (j.contains("refinement_depth")) {
        long long d = integer(j["refinement_depth"], at_key(path, "refinement_depth"));
        if (d < 0) throw ConfigError(at_key(path, "refinement_depth"), "expected a nonnegative integer");
        g.refinement_depth = static_cast<std::size_t>(d);
    }
    if (j.contains("margin")) g.margin = nonnegative(j["margin"], at_key(path, "margin"));
    try {
        g.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(path, e.what());
    }
    return g;
}

CheckParams parse_checks(const json* j, const std::string& path) {
    CheckParams c;
    if (!j) return c;
    require_object(*j, path);
    allow_keys(*j, path, {"properties", "eps", "tail_fraction", "ag_tolerance", "grid"});
    if (j->contains("properties")) {
        const std::string p = at_key(path, "properties");
        const json& props = require_array((*j)["properties"], p);
        c.gs = c.ag = c.gas = false;
        for (std::size_t i = 0; i < props.size(); ++i) {
            std::string name = text(props[i], at_index(p, i));
            if (name == "gs") c.gs = true;
            else if (name == "ag") c.ag = true;
            else if (name == "gas") c.gas = true;
            else throw ConfigError(at_index(p, i), "unknown property '" + name + "' (gs, ag, gas)");
        }
    }
    if (j->contains("eps")) c.eps = positive((*j)["eps"], at_key(path, "eps"));
    if (j->contains("tail_fraction")) {
        c.tail_fraction = number((*j)["tail_fraction"], at_key(path, "tail_fraction"));
        if (!(c.tail_fraction > 0.0 && c.tail_fraction < 1.0)) {
            throw ConfigError(at_key(path, "tail_fraction"), "expected a number in (0, 1)");
        }
    }
    if (j->contains("ag_tolerance")) c.ag_tolerance = nonnegative((*j)["ag_tolerance"], at_key(path, "ag_tolerance"));
    if (j->contains("grid")) c.grid = parse_grid((*j)["grid"], at_key(path, "grid"));
    return c;
}

const json* optional_member(const json& obj, std::string_view key) {
    auto it = obj.find(key);
    return it == obj.end() || it->is_null() ? nullptr : &*it;
}

}  // namespace

SystemBundle parse_system(const json& doc, const Overrides& overrides) {
    const std::string root = "$";
    require_object(doc, root);
    allow_keys(doc, root, {"name", "k", "delays", "subsystems", "gains", "history", "input", "simulation", "checks",
                           "auxiliary", "elimination_order", "description"});

    std::string name;
    if (auto* n = optional_member(doc, "name")) name = text(*n, at_key(root, "name"));

    const std::string sub_path = at_key(root, "subsystems");
    const json& subs = require_array(member(doc, "subsystems", root), sub_path);
    if (subs.empty()) throw ConfigError(sub_path, "at least one subsystem is required");
    const std::size_t k = subs.size();
    if (auto* kj = optional_member(doc, "k")) {
        if (integer(*kj, at_key(root, "k")) != static_cast<long long>(k)) {
            throw ConfigError(at_key(root, "k"), "k does not match the number of subsystems (" + std::to_string(k) + ")");
        }
    }

    std::vector<double> delays;
    if (auto* dj = optional_member(doc, "delays")) {
        const std::string p = at_key(root, "delays");
        require_array(*dj, p);
        for (std::size_t i = 0; i < dj->size(); ++i) delays.push_back(nonnegative((*dj)[i], at_index(p, i)));
    }
    std::vector<double> effective = delays;
    if (overrides.delay) {
        if (delays.size() != 1) {
            throw ConfigError(at_key(root, "delays"), "a delay override needs exactly one declared delay");
        }
        effective = {*overrides.delay};
    }

    RhsContext ctx;
    ctx.declared_delays = delays;
    std::vector<const json*> rhs_json(k);
    for (std::size_t i = 0; i < k; ++i) {
        const std::string p = at_index(sub_path, i);
        const json& s = require_object(subs[i], p);
        allow_keys(s, p, {"dim", "input_dim", "rhs", "name"});
        std::size_t dim = 1;
        if (s.contains("dim")) {
            long long d = integer(s["dim"], at_key(p, "dim"));
            if (d < 1) throw ConfigError(at_key(p, "dim"), "state dimension must be at least 1");
            dim = static_cast<std::size_t>(d);
        }
        std::size_t input_dim = 0;
        if (s.contains("input_dim")) {
            long long d = integer(s["input_dim"], at_key(p, "input_dim"));
            if (d < 0) throw ConfigError(at_key(p, "input_dim"), "input dimension must be nonnegative");
            input_dim = static_cast<std::size_t>(d);
        }
        ctx.dims.push_back(dim);
        ctx.input_dims.push_back(input_dim);
        rhs_json[i] = &member(s, "rhs", p);
    }

    std::vector<SubsystemSpec> specs;
    std::vector<std::vector<std::string>> rhs_text;
    for (std::size_t i = 0; i < k; ++i) {
        const std::string p = at_key(at_index(sub_path, i), "rhs");
        std::vector<std::string> texts;
        if (rhs_json[i]->is_string()) {
            texts.push_back(rhs_json[i]->get<std::string>());
        } else {
            require_array(*rhs_json[i], p);
            for (std::size_t c = 0; c < rhs_json[i]->size(); ++c) texts.push_back(text((*rhs_json[i])[c], at_index(p, c)));
        }
        if (texts.size() != ctx.dims[i]) {
            throw ConfigError(p, "expected " + std::to_string(ctx.dims[i]) + " right-hand side expressions");
        }
        ctx.self = static_cast<int>(i + 1);
        std::vector<Source> sources;
        std::set<int> refs;
        std::vector<Program> programs;
        for (std::size_t c = 0; c < texts.size(); ++c) {
            const std::string cp = rhs_json[i]->is_string() ? p : at_index(p, c);
            try {
                Ast ast = parse_ast(texts[c]);
                RhsResolver resolver(ctx, sources, refs);
                programs.push_back(compile_program(ast, std::ref(resolver)));
            } catch (const ParseError& e) {
                throw ConfigError(cp, e.what());
            }
        }
        SubsystemSpec spec;
        spec.dim = ctx.dims[i];
        spec.input_dim = ctx.input_dims[i];
        spec.references.assign(refs.begin(), refs.end());
        spec.rhs = make_rhs(std::move(programs), std::move(sources));
        specs.push_back(std::move(spec));
        rhs_text.push_back(std::move(texts));
    }
    DelaySystemSpec system = [&] {
        try {
            return build_interconnection(std::move(specs), effective);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(sub_path, e.what());
        }
    }();

    const std::string gains_path = at_key(root, "gains");
    EdgeGains edges;
    NodeGains input_gains;
    NodeGains gs_gains;
    if (auto* gj = optional_member(doc, "gains")) {
        require_object(*gj, gains_path);
        allow_keys(*gj, gains_path, {"edges", "input", "gs"});
        if (auto* ej = optional_member(*gj, "edges")) {
            const std::string p = at_key(gains_path, "edges");
            require_array(*ej, p);
            for (std::size_t e = 0; e < ej->size(); ++e) {
                const std::string ep = at_index(p, e);
                const json& item = require_object((*ej)[e], ep);
                allow_keys(item, ep, {"i", "j", "gain"});
                int i = subsystem_index(member(item, "i", ep), at_key(ep, "i"), k);
                int jj = subsystem_index(member(item, "j", ep), at_key(ep, "j"), k);
                if (i == jj) throw ConfigError(ep, "self-gain gamma_" + std::to_string(i) + std::to_string(i) + " is not allowed");
                KFunction g = gain_at(member(item, "gain", ep), at_key(ep, "gain"));
                if (overrides.gain_scale != 1.0) g = compose(KFunction::linear(overrides.gain_scale), std::move(g));
                if (!edges.emplace(EdgeKey{i, jj}, std::move(g)).second) {
                    throw ConfigError(ep, "duplicate gain for edge (" + std::to_string(i) + ", " + std::to_string(jj) + ")");
                }
            }
        }
        auto node_gains = [&](std::string_view key, NodeGains& out) {
            auto* nj = optional_member(*gj, key);
            if (!nj) return;
            const std::string p = at_key(gains_path, key);
            require_array(*nj, p);
            for (std::size_t e = 0; e < nj->size(); ++e) {
                const std::string ep = at_index(p, e);
                const json& item = require_object((*nj)[e], ep);
                allow_keys(item, ep, {"i", "gain"});
                int i = subsystem_index(member(item, "i", ep), at_key(ep, "i"), k);
                if (!out.emplace(i, gain_at(member(item, "gain", ep), at_key(ep, "gain"))).second) {
                    throw ConfigError(ep, "duplicate gain for subsystem " + std::to_string(i));
                }
            }
        };
        node_gains("input", input_gains);
        node_gains("gs", gs_gains);
    }
    GainDigraph gains = [&] {
        try {
            return build_gain_digraph(static_cast<int>(k), std::move(edges), std::move(input_gains), std::move(gs_gains));
        } catch (const std::invalid_argument& e) {
            throw ConfigError(gains_path, e.what());
        }
    }();

    HistoryFunction history = parse_history(optional_member(doc, "history"), at_key(root, "history"), ctx.dims);
    InputSignal input = parse_input(optional_member(doc, "input"), at_key(root, "input"), ctx.input_dims);

    SimulationParams sim;
    if (auto* sj = optional_member(doc, "simulation")) {
        const std::string p = at_key(root, "simulation");
        require_object(*sj, p);
        allow_keys(*sj, p, {"horizon", "step", "divergence_threshold"});
        if (sj->contains("horizon")) sim.horizon = nonnegative((*sj)["horizon"], at_key(p, "horizon"));
        if (sj->contains("step")) sim.step = positive((*sj)["step"], at_key(p, "step"));
        if (sj->contains("divergence_threshold")) {
            sim.divergence_threshold = positive((*sj)["divergence_threshold"], at_key(p, "divergence_threshold"));
        }
    }

    CheckParams checks = parse_checks(optional_member(doc, "checks"), at_key(root, "checks"));

    std::optional<Auxiliary> aux;
    if (auto* aj = optional_member(doc, "auxiliary")) {
        const std::string p = at_key(root, "auxiliary");
        require_object(*aj, p);
        allow_keys(*aj, p, {"rho", "disturbance"});
        KFunction rho = gain_at(member(*aj, "rho", p), at_key(p, "rho"));
        InputSignal d = parse_input(optional_member(*aj, "disturbance"), at_key(p, "disturbance"), ctx.input_dims);
        aux = Auxiliary{std::move(rho), std::move(d)};
    }

    std::vector<int> order;
    if (auto* oj = optional_member(doc, "elimination_order")) {
        const std::string p = at_key(root, "elimination_order");
        require_array(*oj, p);
        for (std::size_t i = 0; i < oj->size(); ++i) order.push_back(subsystem_index((*oj)[i], at_index(p, i), k));
    }

    return SystemBundle{std::move(name), std::move(system), std::move(gains), std::move(history), std::move(input),
                        sim, std::move(checks), std::move(aux), std::move(order), std::move(rhs_text)};
}

SystemBundle parse_system_text(std::string_view text, const Overrides& overrides) {
    json doc;
    try {
        doc = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw ConfigError("$", std::string("invalid JSON: ") + e.what());
    }
    return parse_system(doc, overrides);
}

SystemBundle load_system(const std::filesystem::path& path, const Overrides& overrides) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("$", "cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_system_text(buf.str(), overrides);
}

}  // namespace smallgain::specdsl
