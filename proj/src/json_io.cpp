#include "smallgain/json_io.hpp"

#include <cmath>

#include "smallgain/specdsl.hpp"

namespace smallgain::json_io {

namespace {

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json gain_text(const std::optional<KFunction>& g) {
    return g ? json(specdsl::print_gain(*g)) : json(nullptr);
}

json gain_list(const std::vector<std::optional<KFunction>>& gains) {
    json out = json::array();
    for (const auto& g : gains) out.push_back(gain_text(g));
    return out;
}

json channel_name(const std::optional<Channel>& ch) {
    return ch ? json(std::string(to_string(*ch))) : json(nullptr);
}

}  // namespace

json to_json(const Verdict& v) {
    json out;
    out["kind"] = std::string(to_string(kind_of(v)));
    if (const auto* ok = std::get_if<VerifiedOnGrid>(&v)) {
        out["min_margin"] = number_or_null(ok->min_margin);
        out["s_at_min"] = ok->s_at_min;
    } else if (const auto* bad = std::get_if<ViolatedAt>(&v)) {
        out["s"] = bad->s;
        out["value"] = number_or_null(bad->value);
    } else if (const auto* unk = std::get_if<Inconclusive>(&v)) {
        out["worst_margin"] = number_or_null(unk->worst_margin);
        out["s_worst"] = unk->s_worst;
    }
    return out;
}

json to_json(const CycleReport& r) {
    json out;
    out["cycle"] = r.cycle.nodes;
    out["composed"] = specdsl::print_gain(r.composed);
    out["verdict"] = to_json(r.verdict);
    return out;
}

json to_json(const SmallGainReport& r) {
    json out;
    out["overall"] = std::string(to_string(r.overall));
    out["cycles"] = json::array();
    for (const auto& c : r.cycles) out["cycles"].push_back(to_json(c));
    return out;
}

json to_json(const EliminationStep& step) {
    json out;
    out["node"] = step.node;
    json row = json::array();
    for (const auto& [key, g] : step.row) row.push_back({{"i", key.first}, {"j", key.second}, {"gain", specdsl::print_gain(g)}});
    out["row"] = row;
    json channels = json::object();
    for (std::size_t ch = 0; ch < kChannelCount; ++ch) {
        channels[std::string(to_string(static_cast<Channel>(ch)))] = gain_text(step.row_channels[ch]);
    }
    out["row_channels"] = channels;
    json intro = json::array();
    for (const auto& t : step.introduced) {
        json item{{"i", t.i}, {"term", specdsl::print_gain(t.term)}};
        if (t.channel) {
            item["channel"] = channel_name(t.channel);
        } else {
            item["j"] = t.j;
        }
        intro.push_back(item);
    }
    out["introduced"] = intro;
    json dropped = json::array();
    for (const auto& d : step.dropped) {
        dropped.push_back({{"i", d.i}, {"loop", specdsl::print_gain(d.loop)}, {"verdict", to_json(d.verdict)}});
    }
    out["dropped"] = dropped;
    return out;
}

json to_json(const ClosedLoopGains& c, std::span<const double> points) {
    json out;
    out["certified"] = c.certified;
    out["elimination_order"] = c.elimination_order;
    out["terminal"] = c.terminal;
    out["ag_input"] = gain_list(c.ag_input);
    out["gs_sigma"] = gain_list(c.gs_sigma);
    out["gs_input"] = gain_list(c.gs_input);
    json table = json::array();
    for (double s : points) {
        json row;
        row["s"] = s;
        json ag = json::array();
        json sigma = json::array();
        for (std::size_t i = 0; i < c.size(); ++i) {
            ag.push_back(number_or_null(eval_or_zero(c.ag_input[i], s)));
            sigma.push_back(number_or_null(eval_or_zero(c.gs_sigma[i], s)));
        }
        row["ag_input"] = ag;
        row["gs_sigma"] = sigma;
        table.push_back(row);
    }
    out["table"] = table;
    json trace = json::array();
    for (const auto& step : c.trace) trace.push_back(to_json(step));
    out["trace"] = trace;
    return out;
}

json to_json(const BoundReport& r, bool with_margins) {
    json out;
    out["property"] = std::string(to_string(r.kind));
    out["holds"] = r.holds;
    out["worst_margin"] = number_or_null(r.worst_margin);
    out["t_worst"] = r.t_worst;
    if (r.witness) {
        out["witness"] = {{"t", r.witness->t},
                          {"norm", number_or_null(r.witness->norm)},
                          {"bound", number_or_null(r.witness->bound)},
                          {"subsystem", r.witness->subsystem}};
    } else {
        out["witness"] = nullptr;
    }
    json bounds = json::array();
    for (double b : r.bounds) bounds.push_back(number_or_null(b));
    out["bounds"] = bounds;
    json limsup = json::array();
    for (const auto& e : r.limsup) {
        json tails = json::array();
        for (double v : e.tail_sups) tails.push_back(number_or_null(v));
        limsup.push_back({{"value", number_or_null(e.value)}, {"tail_sups", tails}, {"settled", e.settled}});
    }
    out["limsup"] = limsup;
    out["settled"] = r.settled;
    out["horizon"] = r.horizon;
    out["tail_fraction"] = r.tail_fraction;
    if (!r.note.empty()) out["note"] = r.note;
    if (with_margins) {
        json margins = json::array();
        for (const auto& m : r.margins) margins.push_back(json::array({m.t, number_or_null(m.margin)}));
        out["margins"] = margins;
    }
    return out;
}

json trajectory_metadata(const Trajectory& traj) {
    json out;
    out["h"] = traj.step();
    out["T"] = traj.requested_horizon();
    out["t_final"] = traj.final_time();
    out["delays"] = traj.delays();
    out["theta"] = traj.max_delay();
    out["dims"] = traj.dims();
    out["rows"] = traj.rows();
    out["blow_up"] = traj.blow_up();
    out["escape_time"] = traj.escape_time() ? json(*traj.escape_time()) : json(nullptr);
    out["divergence_threshold"] = traj.divergence_threshold();
    return out;
}

std::vector<double> default_table_points() { return {1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0, 1000.0}; }

}  // namespace smallgain::json_io
