#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "smallgain/cli.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
    fs::path p = fs::path(SMALLGAIN_TEST_TMP) / "cli" / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

int run_exe(const std::string& args, const fs::path& log) {
    std::string cmd = std::string("\"") + SMALLGAIN_EXE + "\" " + args + " > \"" + log.string() + "\" 2>&1";
    int status = std::system(cmd.c_str());
    REQUIRE(WIFEXITED(status));
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t line_count(const fs::path& p) {
    std::ifstream in(p);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) ++n;
    return n;
}

fs::path write_config(const fs::path& dir, const std::string& name, const std::string& text) {
    fs::path p = dir / name;
    std::ofstream(p) << text;
    return p;
}

const char* kViolating = R"({
  "name": "strong coupling",
  "subsystems": [ {"rhs": "-x_1 + 1.5*v_2"}, {"rhs": "-x_2 + 1.5*v_1"} ],
  "gains": {"edges": [ {"i": 1, "j": 2, "gain": "1.5*s"}, {"i": 2, "j": 1, "gain": "1.5*s"} ]}
})";

const char* kBorderline = R"({
  "subsystems": [ {"rhs": "-x_1"}, {"rhs": "-x_2"} ],
  "gains": {"edges": [ {"i": 1, "j": 2, "gain": "0.9999999999999*s"}, {"i": 2, "j": 1, "gain": "s"} ]}
})";

const char* kBlowUp = R"({
  "subsystems": [ {"rhs": "x_1^2"} ],
  "history": {"kind": "constant", "values": [[2.0]]},
  "simulation": {"horizon": 2.0, "step": 0.001}
})";

// Scalar fixture x' = -3x + u with sigma below the identity: the GS bound
// max{0.5 |x0|, |u|} is already exceeded at t = 0.
const char* kUndersizedSigma = R"({
  "subsystems": [ {"input_dim": 1, "rhs": "-3*x_1 + u_1"} ],
  "gains": {"input": [ {"i": 1, "gain": "0.5*s"} ], "gs": [ {"i": 1, "gain": "0.5*s"} ]},
  "history": {"kind": "constant", "values": [[1.0]]},
  "input": {"kind": "constant", "values": [[0.3]]},
  "simulation": {"horizon": 5, "step": 0.01}
})";

}  // namespace

TEST_CASE("analyze exit codes") {
    auto dir = scratch("analyze");
    CHECK(run_exe("analyze \"" SMALLGAIN_EXAMPLE_JSON "\" --out \"" + (dir / "ok").string() + "\"", dir / "ok.log") == 0);
    CHECK(fs::exists(dir / "ok" / "cycles.json"));
    CHECK(fs::exists(dir / "ok" / "closed_loop.json"));
    auto cycles = json::parse(slurp(dir / "ok" / "cycles.json"));
    CHECK(cycles["overall"] == "VerifiedOnGrid");
    CHECK(cycles["cycles"].size() == 1);

    auto bad = write_config(dir, "bad.json", kViolating);
    CHECK(run_exe("analyze --config \"" + bad.string() + "\" --out \"" + (dir / "bad").string() + "\"", dir / "bad.log") == 2);
    auto report = json::parse(slurp(dir / "bad" / "cycles.json"));
    CHECK(report["overall"] == "ViolatedAt");

    CHECK(run_exe("analyze /nonexistent.json --out \"" + (dir / "missing").string() + "\"", dir / "missing.log") == 1);
    CHECK(slurp(dir / "missing.log").find("cannot read") != std::string::npos);
    CHECK(run_exe("frobnicate", dir / "usage.log") == 1);

    auto borderline = write_config(dir, "borderline.json", kBorderline);
    CHECK(run_exe("analyze \"" + borderline.string() + "\" --out \"" + (dir / "inc").string() + "\"", dir / "inc.log") == 3);
}

TEST_CASE("simulate writes the trajectory and reports blow-up") {
    auto dir = scratch("simulate");
    CHECK(run_exe("simulate \"" SMALLGAIN_EXAMPLE_JSON "\" --out \"" + (dir / "full").string() + "\"", dir / "full.log") == 0);
    CHECK(line_count(dir / "full" / "trajectory.csv") >= 2001);
    auto meta = json::parse(slurp(dir / "full" / "trajectory.json"));
    CHECK(meta["blow_up"] == false);

    CHECK(run_exe("simulate \"" SMALLGAIN_EXAMPLE_JSON "\" --horizon 0 --out \"" + (dir / "zero").string() + "\"",
                  dir / "zero.log") == 0);
    CHECK(line_count(dir / "zero" / "trajectory.csv") == 102);

    auto cfg = write_config(dir, "blow.json", kBlowUp);
    CHECK(run_exe("simulate \"" + cfg.string() + "\" --out \"" + (dir / "blow").string() + "\"", dir / "blow.log") == 4);
    auto blow = json::parse(slurp(dir / "blow" / "trajectory.json"));
    CHECK(blow["blow_up"] == true);
    CHECK(blow["escape_time"].get<double>() > 0.45);
    CHECK(blow["escape_time"].get<double>() < 1.0);

    CHECK(run_exe("simulate \"" SMALLGAIN_EXAMPLE_JSON "\" --step 0.3 --out \"" + (dir / "step").string() + "\"",
                  dir / "step.log") == 1);
}

TEST_CASE("verify: success, bound violation and refusal") {
    auto dir = scratch("verify");
    CHECK(run_exe("verify \"" SMALLGAIN_EXAMPLE_JSON "\" --out \"" + (dir / "ok").string() + "\"", dir / "ok.log") == 0);
    auto bounds = json::parse(slurp(dir / "ok" / "bounds.json"));
    CHECK(bounds["reports"].size() == 3);

    auto halved = write_config(dir, "halved.json", kUndersizedSigma);
    CHECK(run_exe("verify \"" + halved.string() + "\" --out \"" + (dir / "halved").string() + "\"", dir / "halved.log") == 5);
    auto failed = json::parse(slurp(dir / "halved" / "bounds.json"));
    bool gs_witness = false;
    for (const auto& r : failed["reports"]) {
        if (r["property"] == "GS" && r["holds"] == false && !r["witness"].is_null()) gs_witness = true;
    }
    CHECK(gs_witness);

    auto bad = write_config(dir, "bad.json", kViolating);
    CHECK(run_exe("verify \"" + bad.string() + "\" --out \"" + (dir / "bad").string() + "\"", dir / "bad.log") == 2);
    CHECK_FALSE(fs::exists(dir / "bad" / "trajectory.csv"));
    CHECK(run_exe("verify \"" + bad.string() + "\" --force-simulate --out \"" + (dir / "forced").string() + "\"",
                  dir / "forced.log") == 2);
    CHECK(fs::exists(dir / "forced" / "trajectory.csv"));
    auto manifest = json::parse(slurp(dir / "bad" / "manifest.json"));
    CHECK(manifest["exit_code"] == 2);
}

TEST_CASE("identical runs produce identical files") {
    auto dir = scratch("determinism");
    auto a = dir / "a";
    auto b = dir / "b";
    REQUIRE(run_exe("verify \"" SMALLGAIN_EXAMPLE_JSON "\" --seed 7 --out \"" + a.string() + "\"", dir / "a.log") == 0);
    REQUIRE(run_exe("verify \"" SMALLGAIN_EXAMPLE_JSON "\" --seed 7 --out \"" + b.string() + "\"", dir / "b.log") == 0);
    std::size_t files = 0;
    for (const auto& entry : fs::directory_iterator(a)) {
        INFO(entry.path().filename().string());
        CHECK(slurp(entry.path()) == slurp(b / entry.path().filename()));
        ++files;
    }
    CHECK(files >= 6);
}

TEST_CASE("sweeps fan out into per-run directories") {
    auto dir = scratch("sweep");
    auto out = dir / "delta";
    CHECK(run_exe("verify \"" SMALLGAIN_EXAMPLE_JSON "\" --sweep delta=0.5,1,2 --out \"" + out.string() + "\"",
                  dir / "delta.log") == 0);
    auto manifest = json::parse(slurp(out / "manifest.json"));
    REQUIRE(manifest["runs"].size() == 3);
    for (const auto& r : manifest["runs"]) {
        CHECK(r["exit_code"] == 0);
        CHECK(fs::exists(out / r["dir"].get<std::string>() / "trajectory.csv"));
    }
    // Scaling every coupling gain by 3 breaks the cycle condition.
    auto scaled = dir / "scale";
    CHECK(run_exe("analyze \"" SMALLGAIN_EXAMPLE_JSON "\" --sweep gain-scale=1,3 --out \"" + scaled.string() + "\"",
                  dir / "scale.log") == 2);
    auto m2 = json::parse(slurp(scaled / "manifest.json"));
    CHECK(m2["runs"][0]["exit_code"] == 0);
    CHECK(m2["runs"][1]["exit_code"] == 2);
    CHECK(run_exe("analyze \"" SMALLGAIN_EXAMPLE_JSON "\" --sweep bogus=1 --out \"" + (dir / "bogus").string() + "\"",
                  dir / "bogus.log") == 1);
}

TEST_CASE("example subcommand emits the bundled configuration") {
    auto dir = scratch("example");
    CHECK(run_exe("example", dir / "stdout.json") == 0);
    CHECK(json::parse(slurp(dir / "stdout.json")) == json::parse(slurp(SMALLGAIN_EXAMPLE_JSON)));
    CHECK(run_exe("example --out \"" + (dir / "w").string() + "\"", dir / "w.log") == 0);
    CHECK(run_exe("verify \"" + (dir / "w" / "example_paper.json").string() + "\" --out \"" + (dir / "v").string() + "\"",
                  dir / "v.log") == 0);
}

TEST_CASE("in-process entry point matches the executable") {
    std::ostringstream out, err;
    auto dir = scratch("inproc");
    int code = smallgain::cli::run({"analyze", SMALLGAIN_EXAMPLE_JSON, "--out", dir.string()}, out, err);
    CHECK(code == 0);
    CHECK(out.str().find("VerifiedOnGrid") != std::string::npos);
    std::ostringstream out2, err2;
    CHECK(smallgain::cli::run({"analyze", "--grid-points", "1", SMALLGAIN_EXAMPLE_JSON, "--out", dir.string()}, out2, err2) == 1);
}
