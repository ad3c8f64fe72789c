#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "kinforge/config.hpp"
#include "kinforge/csv.hpp"

using namespace kinforge;
namespace fs = std::filesystem;

namespace {

const char* kTool = KINFORGE_TOOL_PATH;

struct RunResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

fs::path scratch_root() {
    static const fs::path root = [] {
        fs::path p = fs::temp_directory_path() / "kinforge_cli_tests";
        fs::remove_all(p);
        fs::create_directories(p);
        return p;
    }();
    return root;
}

RunResult run_tool(const std::string& args) {
    static int counter = 0;
    const fs::path out = scratch_root() / ("stdout_" + std::to_string(counter) + ".txt");
    const fs::path err = scratch_root() / ("stderr_" + std::to_string(counter) + ".txt");
    ++counter;
    const std::string cmd = std::string(kTool) + " " + args + " > " + out.string() + " 2> " +
                            err.string();
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

/// Unit-test-sized budgets layered over the canonical defaults.
fs::path tiny_config_file() {
    static const fs::path path = [] {
        const fs::path p = scratch_root() / "tiny.cfg";
        std::ofstream out(p);
        out << "sr.population_count = 4\n"
               "sr.population_size = 25\n"
               "sr.max_iterations = 60\n"
               "sr.convergence_window = 50\n"
               "campaign.validation_points = 6\n"
               "design.global_samples = 14\n"
               "design.local_evals = 12\n"
               "campaign.max_iterations = 1\n";
        return p;
    }();
    return path;
}

}  // namespace

TEST_CASE("print-default-config emits a parseable canonical file") {
    const RunResult r = run_tool("--print-default-config");
    CHECK(r.exit_code == 0);
    const AppConfig cfg = parse_config_text(r.out);
    CHECK(cfg.plant.kinetics.t_phase == 45.0);
    CHECK(cfg.campaign.goal.psi_target == 7.0);

    // the checked-in canonical file is exactly this output
    const std::string repo_copy = slurp(fs::path(KINFORGE_SOURCE_DIR) / "configs/default.cfg");
    CHECK(repo_copy == r.out);
}

TEST_CASE("simulate writes trajectory files") {
    const fs::path dir = scratch_root() / "sim";
    const RunResult r = run_tool("--out " + dir.string() + " simulate");
    CHECK(r.exit_code == 0);
    REQUIRE(fs::exists(dir / "measurements.csv"));
    REQUIRE(fs::exists(dir / "kpi_profile.csv"));
    const auto lines = csv::read_lines((dir / "measurements.csv").string());
    CHECK(lines.size() == 101);  // header + one row per minute
    CHECK(lines[0] ==
          "t,X_W_r,X_A_r,X_L_r,X_V_r,X_Ls_r,X_W_s,X_A_s,X_L_s,X_V_s,X_Ls_s,T_s,N,Q_s,psi");

    SUBCASE("a non-empty output directory needs --overwrite") {
        const RunResult again = run_tool("--out " + dir.string() + " simulate");
        CHECK(again.exit_code == 2);
        const RunResult forced = run_tool("--out " + dir.string() + " --overwrite simulate");
        CHECK(forced.exit_code == 0);
    }
}

TEST_CASE("simulate rejects an out-of-bounds design naming the bound") {
    const fs::path dir = scratch_root() / "sim_oob";
    const RunResult r =
        run_tool("--out " + dir.string() + " simulate --theta 130,35,20,25,275,275");
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("T0") != std::string::npos);
}

TEST_CASE("simulate --corners emits the four-profile initial design") {
    const fs::path dir = scratch_root() / "corners";
    const RunResult r = run_tool("--out " + dir.string() + " simulate --corners");
    CHECK(r.exit_code == 0);
    for (int i = 1; i <= 4; ++i) {
        CHECK(fs::exists(dir / ("kpi_profile_" + std::to_string(i) + ".csv")));
        CHECK(fs::exists(dir / ("measurements_" + std::to_string(i) + ".csv")));
    }
}

TEST_CASE("campaign runs, is byte-reproducible, and resumes") {
    const fs::path dir_a = scratch_root() / "camp_a";
    const std::string base =
        "--config " + tiny_config_file().string() + " --seed 7 campaign --mode 1b";
    const RunResult a =
        run_tool("--out " + dir_a.string() + " " + base + " --iterations 2");
    CHECK(a.exit_code == 0);
    REQUIRE(fs::exists(dir_a / "state.json"));
    REQUIRE(fs::exists(dir_a / "metrics.csv"));
    REQUIRE(fs::exists(dir_a / "fronts.csv"));

    SUBCASE("identical seed and config give byte-identical metrics") {
        const fs::path dir_b = scratch_root() / "camp_b";
        const RunResult b =
            run_tool("--out " + dir_b.string() + " " + base + " --iterations 2");
        CHECK(b.exit_code == 0);
        CHECK(slurp(dir_a / "metrics.csv") == slurp(dir_b / "metrics.csv"));
        CHECK(slurp(dir_a / "fronts.csv") == slurp(dir_b / "fronts.csv"));
    }

    SUBCASE("kill-and-resume reproduces the straight run") {
        const fs::path dir_c = scratch_root() / "camp_c";
        const RunResult c1 =
            run_tool("--out " + dir_c.string() + " " + base + " --iterations 1");
        CHECK(c1.exit_code == 0);
        const RunResult c2 = run_tool("--out " + dir_c.string() +
                                      " campaign --resume --iterations 2");
        CHECK(c2.exit_code == 0);
        CHECK(slurp(dir_a / "metrics.csv") == slurp(dir_c / "metrics.csv"));
        CHECK(slurp(dir_a / "fronts.csv") == slurp(dir_c / "fronts.csv"));
    }

    SUBCASE("validate reports MAPE and writes per-point predictions") {
        const fs::path vdir = scratch_root() / "validate";
        const RunResult v = run_tool("--out " + vdir.string() + " validate --state " +
                                     (dir_a / "state.json").string());
        CHECK(v.exit_code == 0);
        CHECK(v.out.find("MAPE") != std::string::npos);
        const auto lines = csv::read_lines((vdir / "validation.csv").string());
        CHECK(lines.size() == 7);  // header + validation_points rows
        CHECK(lines[0] == "T0,tau2,tau3,tau4,N2,N4,psi_actual,psi_predicted");
    }

    SUBCASE("design emits a report and an objective slice") {
        const fs::path ddir = scratch_root() / "design";
        const RunResult d = run_tool("--out " + ddir.string() + " design --state " +
                                     (dir_a / "state.json").string() +
                                     " --alpha 0 --grid-dims tau2,tau3 --grid-res 5");
        CHECK(d.exit_code == 0);
        REQUIRE(fs::exists(ddir / "design_report.json"));
        const std::string report = slurp(ddir / "design_report.json");
        CHECK(report.find("\"alpha\": 0.0") != std::string::npos);
        CHECK(report.find("member_psi_hats") != std::string::npos);
        const auto grid = csv::read_lines((ddir / "j_grid_tau2_tau3.csv").string());
        CHECK(grid.size() == 26);  // header + 5x5 points

        const RunResult d1 = run_tool("--out " + ddir.string() + " --overwrite design --state " +
                                      (dir_a / "state.json").string() + " --alpha 1");
        CHECK(d1.exit_code == 0);
        CHECK(slurp(ddir / "design_report.json").find("\"alpha\": 1.0") != std::string::npos);
    }

    SUBCASE("discover consumes a state file and writes front tables") {
        const fs::path fdir = scratch_root() / "discover";
        const RunResult f = run_tool("--config " + tiny_config_file().string() + " --out " +
                                     fdir.string() + " discover --state " +
                                     (dir_a / "state.json").string());
        CHECK(f.exit_code == 0);
        for (int rr = 1; rr <= 3; ++rr)
            CHECK(fs::exists(fdir / ("front_r" + std::to_string(rr) + ".csv")));
        CHECK(fs::exists(fdir / "fronts.txt"));
        CHECK(fs::exists(fdir / "samples.csv"));
    }
}

TEST_CASE("discover consumes standalone measurement CSVs") {
    const fs::path sim_dir = scratch_root() / "sim_for_discover";
    REQUIRE(run_tool("--out " + sim_dir.string() + " simulate --corners").exit_code == 0);
    const fs::path out = scratch_root() / "discover_csv";
    std::string files;
    for (int i = 1; i <= 4; ++i)
        files += (i > 1 ? "," : "") +
                 (sim_dir / ("measurements_" + std::to_string(i) + ".csv")).string();
    const RunResult r = run_tool("--config " + tiny_config_file().string() + " --out " +
                                 out.string() + " discover --measurements " + files);
    CHECK(r.exit_code == 0);
    CHECK(fs::exists(out / "front_r2.csv"));
}

TEST_CASE("bad config key is a schema error with a diagnostic") {
    const fs::path bad = scratch_root() / "bad.cfg";
    {
        std::ofstream out(bad);
        out << "plant.k1 = 1e-6\nnonsense.key = 5\n";
    }
    const fs::path dir = scratch_root() / "bad_out";
    const RunResult r =
        run_tool("--config " + bad.string() + " --out " + dir.string() + " simulate");
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("nonsense.key") != std::string::npos);
}
