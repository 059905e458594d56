#include "smallgain/cli.hpp"

#include <spdlog/fmt/fmt.h>

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "bundled_example.hpp"
#include "smallgain/bound_checker.hpp"
#include "smallgain/format.hpp"
#include "smallgain/gain_reduction.hpp"
#include "smallgain/json_io.hpp"
#include "smallgain/log.hpp"
#include "smallgain/specdsl.hpp"

namespace smallgain::cli {

namespace fs = std::filesystem;
using nlohmann::json;

const char* bundled_example() { return kBundledExample; }

namespace {

enum class Command { analyze, simulate, verify, example };

const char* command_name(Command c) {
    switch (c) {
        case Command::analyze: return "analyze";
        case Command::simulate: return "simulate";
        case Command::verify: return "verify";
        case Command::example: return "example";
    }
    return "?";
}

struct Options {
    std::string config;
    std::string out = "smallgain-out";
    std::optional<std::size_t> grid_points;
    std::optional<double> horizon;
    std::optional<double> step;
    std::optional<double> tail_fraction;
    bool force_simulate = false;
    std::string sweep;
    std::uint64_t seed = 0;
};

struct Sweep {
    std::string key;  // "delta" or "gain-scale"
    std::vector<double> values;
};

struct RunOutcome {
    int code = ok;
    std::string summary;
    std::string errors;
};

class UsageError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

Sweep parse_sweep(const std::string& text) {
    auto eq = text.find('=');
    if (eq == std::string::npos) throw UsageError("--sweep expects key=v1,v2,... (key: delta or gain-scale)");
    Sweep s;
    s.key = text.substr(0, eq);
    if (s.key != "delta" && s.key != "gain-scale") {
        throw UsageError("unknown sweep parameter '" + s.key + "' (delta or gain-scale)");
    }
    std::string rest = text.substr(eq + 1);
    std::size_t pos = 0;
    while (pos <= rest.size()) {
        std::size_t comma = rest.find(',', pos);
        std::string item = rest.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        double v = 0.0;
        auto res = std::from_chars(item.data(), item.data() + item.size(), v);
        if (item.empty() || res.ec != std::errc() || res.ptr != item.data() + item.size() || !(v > 0.0)) {
            throw UsageError("--sweep value '" + item + "' is not a positive number");
        }
        s.values.push_back(v);
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return s;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

void write_json(const fs::path& path, const json& doc) { write_text(path, doc.dump(2) + "\n"); }

std::string cycle_label(const Cycle& c) {
    std::string s;
    for (int v : c.nodes) s += std::to_string(v) + "->";
    return s + std::to_string(c.nodes.front());
}

class Run {
public:
    Run(Command cmd, const Options& opts, fs::path dir, specdsl::Overrides overrides)
        : cmd_(cmd), opts_(opts), dir_(std::move(dir)), overrides_(overrides) {}

    RunOutcome execute() {
        RunOutcome outcome;
        try {
            fs::create_directories(dir_);
            outcome.code = dispatch();
        } catch (const specdsl::ConfigError& e) {
            err_ << "config error: " << e.what() << '\n';
            outcome.code = config_error;
        } catch (const CycleLimitExceeded& e) {
            err_ << "error: " << e.what() << '\n';
            outcome.code = config_error;
        } catch (const SimulationError& e) {
            err_ << "simulation error: " << e.what() << '\n';
            outcome.code = config_error;
        } catch (const std::exception& e) {
            err_ << "error: " << e.what() << '\n';
            outcome.code = config_error;
        }
        try {
            write_manifest(outcome.code);
        } catch (const std::exception& e) {
            err_ << "error: " << e.what() << '\n';
            outcome.code = std::max(outcome.code, static_cast<int>(config_error));
        }
        outcome.summary = out_.str();
        outcome.errors = err_.str();
        return outcome;
    }

private:
    int dispatch() {
        bundle_.emplace(specdsl::load_system(opts_.config, overrides_));
        apply_overrides();
        switch (cmd_) {
            case Command::analyze: return analyze().code;
            case Command::simulate: return simulate_only();
            case Command::verify: return verify();
            case Command::example: break;
        }
        return ok;
    }

    void apply_overrides() {
        auto& b = *bundle_;
        if (opts_.grid_points) b.checks.grid.n_points = *opts_.grid_points;
        if (opts_.horizon) b.simulation.horizon = *opts_.horizon;
        if (opts_.step) b.simulation.step = *opts_.step;
        if (opts_.tail_fraction) b.checks.tail_fraction = *opts_.tail_fraction;
        b.checks.grid.validate();
    }

    void emit(const std::string& name, const std::string& text) {
        write_text(dir_ / name, text);
        artifacts_.push_back(name);
    }

    void emit_json(const std::string& name, const json& doc) { emit(name, doc.dump(2) + "\n"); }

    struct Analysis {
        int code = ok;
        std::optional<ClosedLoopGains> closed;
    };

    Analysis analyze() {
        const auto& b = *bundle_;
        Analysis a;
        SmallGainReport report = check_cyclic_small_gain(b.gains, b.checks.grid);
        emit_json("cycles.json", json_io::to_json(report));

        out_ << fmt::format("{:<24} {:<13} {:>14} {:>14}\n", "cycle", "verdict", "worst margin", "witness s");
        for (const auto& c : report.cycles) {
            auto w = c.witness();
            out_ << fmt::format("{:<24} {:<13} {:>14.6g} {:>14}\n", cycle_label(c.cycle),
                                to_string(kind_of(c.verdict)), c.worst_margin(),
                                w ? fmt::format("{:.6g}", *w) : std::string("-"));
        }
        if (report.cycles.empty()) out_ << "no cycles: the small-gain condition holds vacuously\n";

        if (const CycleReport* bad = report.first_violation()) {
            const auto& v = std::get<ViolatedAt>(bad->verdict);
            out_ << fmt::format("small-gain condition violated on cycle {}: gain({}) = {} >= {}\n",
                                cycle_label(bad->cycle), format_double(v.s), format_double(v.value),
                                format_double(v.s));
            a.code = small_gain_violated;
            return a;
        }
        try {
            ClosedLoopGains closed = closed_loop_input_gains(b.gains, b.checks.grid, b.elimination_order);
            emit_json("closed_loop.json", json_io::to_json(closed, json_io::default_table_points()));
            std::string text;
            for (std::size_t i = 0; i < closed.size(); ++i) {
                auto show = [](const std::optional<KFunction>& g) { return g ? specdsl::print_gain(*g) : std::string("0"); };
                text += fmt::format("ag_input[{}] = {}\n", i + 1, show(closed.ag_input[i]));
                text += fmt::format("gs_sigma[{}] = {}\n", i + 1, show(closed.gs_sigma[i]));
                text += fmt::format("gs_input[{}] = {}\n", i + 1, show(closed.gs_input[i]));
            }
            if (auto sigma = state_gs_gain(b.gains, closed)) text += "state_gs = " + specdsl::print_gain(*sigma) + "\n";
            emit("gains.txt", text);
            a.closed = std::move(closed);
        } catch (const EliminationRefused& e) {
            out_ << fmt::format("elimination of {} refused: loop through {} not below identity at s={}\n",
                                e.eliminated(), e.node(), format_double(e.witness().s));
            a.code = small_gain_violated;
            return a;
        }
        if (report.overall == VerdictKind::inconclusive) {
            out_ << "small-gain condition inconclusive on the grid\n";
            a.code = inconclusive;
        } else {
            out_ << "small-gain condition verified on the grid\n";
        }
        return a;
    }

    Trajectory run_simulation(const DelaySystemSpec& sys, const InputSignal& input, const std::string& stem) {
        const auto& b = *bundle_;
        SimulationOptions so{b.simulation.horizon, b.simulation.step, b.simulation.divergence_threshold};
        Trajectory traj = simulate(sys, b.history, input, so);
        std::ostringstream csv;
        write_csv(traj, csv);
        emit(stem + ".csv", csv.str());
        emit_json(stem + ".json", json_io::trajectory_metadata(traj));
        if (traj.blow_up()) {
            out_ << fmt::format("{}: norm exceeded {} at t={}\n", stem, format_double(traj.divergence_threshold()),
                                format_double(*traj.escape_time()));
        } else {
            out_ << fmt::format("{}: {} rows, |x(T)| = {:.6g}\n", stem, traj.rows(), traj.norm_at(traj.last_index()));
        }
        return traj;
    }

    int simulate_only() {
        const auto& b = *bundle_;
        Trajectory traj = run_simulation(b.system, b.input, "trajectory");
        return traj.blow_up() ? blow_up : ok;
    }

    int verify() {
        const auto& b = *bundle_;
        Analysis a = analyze();
        if (a.code != ok) {
            if (opts_.force_simulate) {
                out_ << "precondition failed; simulating without verification claims\n";
                run_simulation(b.system, b.input, "trajectory");
            } else {
                out_ << "verification refused: small-gain precondition not established\n";
            }
            return a.code;
        }
        const ClosedLoopGains& closed = *a.closed;
        Trajectory traj = run_simulation(b.system, b.input, "trajectory");

        std::vector<BoundReport> reports;
        std::vector<std::string> notes;
        if (b.checks.gs) reports.push_back(check_gs(traj, b.gains, closed, b.system, b.input));
        if (b.checks.ag) {
            if (traj.blow_up()) {
                notes.push_back("AG skipped: trajectory diverged");
            } else {
                auto un = b.input.subsystem_norms(b.system, traj.final_time(), traj.step());
                reports.push_back(check_ag(traj, closed, un, b.checks.tail_fraction, b.checks.ag_tolerance));
            }
        }
        if (b.checks.gas) {
            auto sigma = state_gs_gain(b.gains, closed);
            if (!sigma) {
                notes.push_back("GAS skipped: no initial-condition gains declared");
            } else if (b.auxiliary) {
                DelaySystemSpec aux = build_auxiliary_system(b.system, b.auxiliary->rho, b.auxiliary->disturbance);
                Trajectory at = run_simulation(aux, InputSignal::zero(), "auxiliary");
                auto hn = history_norms(at);
                double hist = *std::max_element(hn.begin(), hn.end());
                reports.push_back(check_gas(at, *sigma, hist, b.checks.eps, b.checks.tail_fraction));
            } else if (b.input.exact_sup_abs() && *b.input.exact_sup_abs() == 0.0) {
                auto hn = history_norms(traj);
                double hist = *std::max_element(hn.begin(), hn.end());
                reports.push_back(check_gas(traj, *sigma, hist, b.checks.eps, b.checks.tail_fraction));
            } else {
                notes.push_back("GAS skipped: the input is not identically zero and no auxiliary system is configured");
            }
        }

        json doc;
        doc["reports"] = json::array();
        for (const auto& r : reports) doc["reports"].push_back(json_io::to_json(r));
        doc["notes"] = notes;
        emit_json("bounds.json", doc);

        out_ << fmt::format("{:<9} {:<6} {:>14} {:>12} {:>9}\n", "property", "holds", "worst margin", "witness t",
                            "settled");
        bool all = true;
        for (const auto& r : reports) {
            all = all && r.holds;
            out_ << fmt::format("{:<9} {:<6} {:>14.6g} {:>12} {:>9}\n", to_string(r.kind), r.holds ? "yes" : "no",
                                r.worst_margin, r.witness ? fmt::format("{:.6g}", r.witness->t) : std::string("-"),
                                r.settled ? "yes" : "no");
        }
        for (const auto& n : notes) out_ << n << '\n';
        if (traj.blow_up()) return blow_up;
        return all ? ok : bound_violated;
    }

    void write_manifest(int code) {
        json m;
        m["tool"] = "smallgain";
        m["subcommand"] = command_name(cmd_);
        m["config"] = opts_.config;
        m["seed"] = opts_.seed;
        json o;
        o["grid_points"] = opts_.grid_points ? json(*opts_.grid_points) : json(nullptr);
        o["horizon"] = opts_.horizon ? json(*opts_.horizon) : json(nullptr);
        o["step"] = opts_.step ? json(*opts_.step) : json(nullptr);
        o["tail_fraction"] = opts_.tail_fraction ? json(*opts_.tail_fraction) : json(nullptr);
        o["force_simulate"] = opts_.force_simulate;
        m["options"] = o;
        m["overrides"] = {{"delta", overrides_.delay ? json(*overrides_.delay) : json(nullptr)},
                          {"gain_scale", overrides_.gain_scale}};
        m["artifacts"] = artifacts_;
        m["exit_code"] = code;
        write_json(dir_ / "manifest.json", m);
    }

    Command cmd_;
    const Options& opts_;
    fs::path dir_;
    specdsl::Overrides overrides_;
    std::optional<specdsl::SystemBundle> bundle_;
    std::vector<std::string> artifacts_;
    std::ostringstream out_;
    std::ostringstream err_;
};

int run_example(const Options& opts, bool out_given, std::ostream& out) {
    if (!out_given) {
        out << kBundledExample;
        return ok;
    }
    fs::create_directories(opts.out);
    write_text(fs::path(opts.out) / "example_paper.json", kBundledExample);
    out << "wrote " << (fs::path(opts.out) / "example_paper.json").generic_string() << '\n';
    return ok;
}

int run_command(Command cmd, const Options& opts, std::ostream& out, std::ostream& err) {
    if (opts.config.empty()) {
        err << "error: no configuration given (positional argument or --config)\n";
        return config_error;
    }
    if (opts.sweep.empty()) {
        RunOutcome r = Run(cmd, opts, opts.out, {}).execute();
        out << r.summary;
        err << r.errors;
        return r.code;
    }
    Sweep sweep = parse_sweep(opts.sweep);
    std::vector<std::future<RunOutcome>> futures;
    std::vector<std::string> names;
    for (std::size_t i = 0; i < sweep.values.size(); ++i) {
        specdsl::Overrides ov;
        if (sweep.key == "delta") ov.delay = sweep.values[i];
        else ov.gain_scale = sweep.values[i];
        std::string name = fmt::format("run_{:03}_{}={}", i, sweep.key, format_double(sweep.values[i]));
        names.push_back(name);
        fs::path dir = fs::path(opts.out) / name;
        futures.push_back(std::async(std::launch::async, [cmd, &opts, dir, ov] { return Run(cmd, opts, dir, ov).execute(); }));
    }
    int worst = ok;
    json runs = json::array();
    for (std::size_t i = 0; i < futures.size(); ++i) {
        RunOutcome r = futures[i].get();
        out << "== " << names[i] << " (exit " << r.code << ")\n" << r.summary;
        err << r.errors;
        worst = std::max(worst, r.code);
        runs.push_back({{"dir", names[i]}, {"value", sweep.values[i]}, {"exit_code", r.code}});
    }
    json m;
    m["tool"] = "smallgain";
    m["subcommand"] = command_name(cmd);
    m["config"] = opts.config;
    m["output_dir"] = fs::path(opts.out).generic_string();
    m["seed"] = opts.seed;
    m["sweep"] = {{"parameter", sweep.key}, {"values", sweep.values}};
    m["runs"] = runs;
    m["exit_code"] = worst;
    fs::create_directories(opts.out);
    write_json(fs::path(opts.out) / "manifest.json", m);
    return worst;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Small-gain analysis and simulation of interconnected delay systems", "smallgain"};
    app.require_subcommand(1);

    Options opts;
    std::string positional;
    auto add_common = [&](CLI::App* sub, bool simulation) {
        sub->add_option("file", positional, "Configuration file (JSON)");
        sub->add_option("--config", opts.config, "Configuration file (JSON)");
        sub->add_option("--out", opts.out, "Output directory")->capture_default_str();
        sub->add_option("--grid-points", opts.grid_points, "Grid points for the identity comparison")
            ->check(CLI::Range(std::size_t{2}, std::size_t{100'000'000}));
        sub->add_option("--sweep", opts.sweep, "Parameter sweep: delta=v1,v2,... or gain-scale=v1,v2,...");
        sub->add_option("--seed", opts.seed, "Seed recorded in the manifest for randomized sweeps");
        if (simulation) {
            sub->add_option("--horizon", opts.horizon, "Simulation horizon T")->check(CLI::NonNegativeNumber);
            sub->add_option("--step", opts.step, "Integration step h")->check(CLI::PositiveNumber);
            sub->add_option("--tail-fraction", opts.tail_fraction, "Trailing window for lim sup estimates")
                ->check(CLI::Range(0.0, 1.0));
            sub->add_flag("--force-simulate", opts.force_simulate, "Simulate even when the small-gain check fails");
        }
    };
    CLI::App* analyze = app.add_subcommand("analyze", "Check cyclic small-gain conditions and build closed-loop gains");
    add_common(analyze, false);
    CLI::App* simulate_cmd = app.add_subcommand("simulate", "Integrate the interconnection and write the trajectory");
    add_common(simulate_cmd, true);
    CLI::App* verify = app.add_subcommand("verify", "Analyze, simulate and check the GS/AG/GAS bounds");
    add_common(verify, true);
    CLI::App* example = app.add_subcommand("example", "Print or write the bundled example configuration");
    example->add_option("--out", opts.out, "Output directory (prints to stdout when omitted)");

    std::vector<std::string> argv_store{"smallgain"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& a : argv_store) argv.push_back(a.data());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e, out, err);
        return code == 0 ? ok : config_error;
    }

    if (!positional.empty()) {
        if (!opts.config.empty() && opts.config != positional) {
            err << "error: configuration given twice\n";
            return config_error;
        }
        opts.config = positional;
    }

    try {
        if (example->parsed()) return run_example(opts, example->count("--out") > 0, out);
        Command cmd = analyze->parsed() ? Command::analyze : simulate_cmd->parsed() ? Command::simulate : Command::verify;
        return run_command(cmd, opts, out, err);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return config_error;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return config_error;
    }
}

int run(int argc, char** argv) {
    logger();
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args, std::cout, std::cerr);
}

}  // namespace smallgain::cli
