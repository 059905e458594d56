#pragma once

// JSON records for reports and trajectory metadata. Gains are written as
// gain-syntax text so that they read back through parse_gain.

#include <span>

#include "json.hpp"
#include "smallgain/bound_checker.hpp"
#include "smallgain/dde_sim.hpp"
#include "smallgain/gain_graph.hpp"
#include "smallgain/gain_reduction.hpp"

namespace smallgain::json_io {

using nlohmann::json;

json to_json(const Verdict& v);
json to_json(const CycleReport& r);
json to_json(const SmallGainReport& r);

// Expressions, an evaluation table at `points` and the elimination trace.
json to_json(const ClosedLoopGains& c, std::span<const double> points);
json to_json(const EliminationStep& step);

json to_json(const BoundReport& r, bool with_margins = true);

json trajectory_metadata(const Trajectory& traj);

// Default evaluation points for closed-loop tables: 10^-3 .. 10^3.
std::vector<double> default_table_points();

}  // namespace smallgain::json_io
