// End-to-end checks of the command-line tool (binary path via MLPROP_BIN).
#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mlprop/antiderivative.hpp"
#include "mlprop/io.hpp"
#include "mlprop/phantom.hpp"

using namespace mlprop;
namespace fs = std::filesystem;

namespace {

std::string binary() {
    const char* env = std::getenv("MLPROP_BIN");
    REQUIRE(env != nullptr);
    return env;
}

int run_cmd(const std::string& args) {
    const std::string cmd = binary() + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return WEXITSTATUS(status);
}

fs::path work_dir() {
    const fs::path d = fs::temp_directory_path() / "mlprop_cli_test";
    fs::create_directories(d);
    return d;
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const char* kDeltaSpec = R"({"kind":"point_delta","point":[0.0,0.0],"sigma":0.09})";

} // namespace

TEST_CASE("usage errors exit with code 2 and help with 0") {
    REQUIRE(run_cmd("--help") == 0);
    REQUIRE(run_cmd("frobnicate") == 2);
    REQUIRE(run_cmd("antideriv --no-such-flag") == 2);
    REQUIRE(run_cmd("") == 2); // a subcommand is required
}

TEST_CASE("phantom subcommand is a transparent wrapper over rasterization") {
    const fs::path d = work_dir();
    write_file(d / "delta.json", kDeltaSpec);
    REQUIRE(run_cmd("phantom --spec " + (d / "delta.json").string() +
                    " --extent -2 2 -2 2 --resolution 96 96 --out " +
                    (d / "delta.mlf1").string()) == 0);

    const auto [p, m] = parse_phantom_json(nlohmann::json::parse(kDeltaSpec));
    const GridSpec grid = make_grid({{-2.0, 2.0}, {-2.0, 2.0}}, {96, 96});
    const SampledField expect = rasterize(p, grid, m);
    REQUIRE(slurp(d / "delta.mlf1") == encode_field(expect));
}

TEST_CASE("antideriv subcommand matches the library operator bit-exactly") {
    const fs::path d = work_dir();
    write_file(d / "delta.json", kDeltaSpec);
    REQUIRE(run_cmd("phantom --spec " + (d / "delta.json").string() +
                    " --extent -2 2 -2 2 --resolution 96 96 --out " +
                    (d / "in.mlf1").string()) == 0);
    REQUIRE(run_cmd("antideriv --in " + (d / "in.mlf1").string() +
                    " --v 1 0 --method cumulative --out " + (d / "anti.mlf1").string()) ==
            0);
    const SampledField in = read_field((d / "in.mlf1").string());
    const SampledField expect =
        cumulative_antiderivative(in, Direction::normalized({1.0, 0.0}), in.grid);
    REQUIRE(slurp(d / "anti.mlf1") == encode_field(expect));
}

TEST_CASE("xray subcommand produces a 1-D profile") {
    const fs::path d = work_dir();
    write_file(d / "disk.json",
               R"({"kind":"disk_indicator","center":[0.0,0.0],"radius":0.8})");
    REQUIRE(run_cmd("phantom --spec " + (d / "disk.json").string() +
                    " --extent -2 2 -2 2 --resolution 96 96 --out " +
                    (d / "disk.mlf1").string()) == 0);
    REQUIRE(run_cmd("xray --in " + (d / "disk.mlf1").string() + " --v 0 1 --out " +
                    (d / "profile.mlf1").string()) == 0);
    const SampledField prof = read_field((d / "profile.mlf1").string());
    REQUIRE(prof.grid.dim() == 1);
    REQUIRE(prof.max_abs() == Catch::Approx(1.6).epsilon(0.05)); // max chord of r=0.8
}

TEST_CASE("estimate, predict, check chain accepts its own estimate") {
    const fs::path d = work_dir();
    write_file(d / "delta.json", kDeltaSpec);
    REQUIRE(run_cmd("phantom --spec " + (d / "delta.json").string() +
                    " --extent -2 2 -2 2 --resolution 96 96 --out " +
                    (d / "spot.mlf1").string()) == 0);
    REQUIRE(run_cmd("wf-estimate --in " + (d / "spot.mlf1").string() +
                    " --window-radius-cells 16 --dirs 16 --stride-cells 8 --out " +
                    (d / "wf.csv").string()) == 0);
    REQUIRE(run_cmd("wf-predict --wf " + (d / "wf.csv").string() +
                    " --v 1 0 --horizon 2.0 --dirs 16 --out " +
                    (d / "pred.json").string()) == 0);
    // the estimate itself sits inside the prediction's base set
    REQUIRE(run_cmd("wf-check --wf " + (d / "wf.csv").string() + " --predicted " +
                    (d / "pred.json").string() +
                    " --tol-space 0.1 --tol-angle 0.1 --report " +
                    (d / "report.json").string()) == 0);
    REQUIRE(fs::exists(d / "report.json"));
}

TEST_CASE("missing and malformed inputs exit with code 3") {
    const fs::path d = work_dir();
    REQUIRE(run_cmd("antideriv --in " + (d / "nope.mlf1").string() +
                    " --v 1 0 --out " + (d / "x.mlf1").string()) == 3);
    write_file(d / "garbage.mlf1", "not a field file");
    REQUIRE(run_cmd("antideriv --in " + (d / "garbage.mlf1").string() +
                    " --v 1 0 --out " + (d / "x.mlf1").string()) == 3);
    write_file(d / "bad.json", "{");
    REQUIRE(run_cmd("phantom --spec " + (d / "bad.json").string() +
                    " --extent -2 2 -2 2 --resolution 96 96 --out " +
                    (d / "x.mlf1").string()) == 3);
}

TEST_CASE("pipeline run on a zero-amplitude phantom passes trivially") {
    const fs::path d = work_dir() / "run_zero";
    fs::remove_all(d);
    write_file(work_dir() / "zero.json", R"({
      "grid": {"extent": [[-2.0, 2.0], [-2.0, 2.0]], "resolution": [96, 96]},
      "phantom": {"kind": "disk_indicator", "center": [0.0, 0.0], "radius": 0.8,
                   "amplitude": 0.0},
      "operator": {"kind": "antideriv", "v": [1.0, 0.0], "method": "cumulative"},
      "estimator": {"window_radius_cells": 16, "dirs": 16, "stride_cells": 8}
    })");
    REQUIRE(run_cmd("run --config " + (work_dir() / "zero.json").string() +
                    " --output-dir " + d.string()) == 0);
    for (const char* name : {"input.mlf1", "output.mlf1", "wf_input.csv", "wf_output.csv",
                             "predicted.json", "containment.json", "microlocal.json",
                             "scanline.csv", "summary.json", "config_resolved.json"}) {
        REQUIRE(fs::exists(d / name));
    }
    REQUIRE_FALSE(fs::exists(d / "FAILED"));
}

TEST_CASE("pipeline run refuses a closed curve without an explicit horizon") {
    const fs::path d = work_dir() / "run_closed";
    write_file(work_dir() / "closed.json", R"({
      "grid": {"extent": [[-2.0, 2.0], [-2.0, 2.0]], "resolution": [96, 96]},
      "phantom": {"kind": "disk_indicator", "center": [0.0, 0.0], "radius": 0.5},
      "operator": {"kind": "convolve", "method": "quadrature",
                    "curve": {"kind": "arc", "radius": 1.0, "rate": 1.0}},
      "estimator": {"window_radius_cells": 16, "dirs": 16, "stride_cells": 8}
    })");
    REQUIRE(run_cmd("run --config " + (work_dir() / "closed.json").string() +
                    " --output-dir " + d.string()) == 3);
}
