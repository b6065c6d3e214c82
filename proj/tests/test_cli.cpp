#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "cotds/io.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kCli = COTDS_CLI;
const fs::path kData = COTDS_DATA_DIR;
const fs::path kWork = fs::path(COTDS_WORK_DIR) / "cli";

int run(const std::string& args) {
    const std::string cmd = kCli.string() + " " + args + " > " + (kWork / "stdout.txt").string() + " 2> " +
                            (kWork / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Workspace {
    Workspace() {
        fs::remove_all(kWork);
        fs::create_directories(kWork);
    }
};

}  // namespace

TEST_CASE_FIXTURE(Workspace, "linlab simulate") {
    const auto out = (kWork / "sim.csv").string();
    REQUIRE(run("linlab simulate --lambda-a -1 --lambda-b -10 --ka 2 --kb 2 --h 0.1 --scheme series --out " + out) == 0);
    const auto log = cotds::io::read_csv(fs::path(out));
    CHECK(log.columns == std::vector<std::string>{"x_a", "x_b", "analytic_a", "analytic_b"});
    CHECK(log.times.size() > 10);

    REQUIRE(run("linlab simulate --t-end 0 --out " + out) == 0);
    CHECK(cotds::io::read_csv(fs::path(out)).times.size() == 1);

    REQUIRE(run("linlab simulate --lambda-a -1 --lambda-b -2 --ka 2 --kb 2 --h 0.75 --t-end 30 --scheme parallel --out " +
                out) == 0);
    const auto xa = cotds::io::read_csv(fs::path(out)).column("x_a");
    int flips = 0;
    for (std::size_t i = 2; i < xa.size(); ++i) flips += (xa[i] - xa[i - 1]) * (xa[i - 1] - xa[i - 2]) < 0.0;
    CHECK(flips > 10);

    CHECK(run("linlab simulate --lambda-a 1") == 1);
    CHECK(run("linlab simulate --bogus") == 1);
}

TEST_CASE_FIXTURE(Workspace, "linlab stability and truncation") {
    const auto out = (kWork / "stab.csv").string();
    REQUIRE(run("linlab stability --lambda-b -2 --h-min 0.01 --h-max 1.5 --points 150 --out " + out) == 0);
    auto lines = [](const std::string& text) {
        std::vector<std::string> rows;
        std::stringstream ss(text);
        for (std::string line; std::getline(ss, line);) rows.push_back(line);
        return rows;
    };
    auto rows = lines(slurp(out));
    REQUIRE(rows.size() == 151);
    CHECK(rows[0] == "H,rho_total,rho_parallel,rho_series,rho_ref");
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto first = rows[i].find(',');
        CHECK(std::stod(rows[i].substr(first + 1)) < 1.0);
        CHECK(rows[i].substr(rows[i].rfind(',')) == ",1");
    }
    REQUIRE(run("linlab stability --h-min 0.5 --h-max 0.5 --points 1 --out " + out) == 0);
    CHECK(lines(slurp(out)).size() == 2);
    CHECK(run("linlab stability --h-min 1.0 --h-max 0.5") == 1);
    REQUIRE(run("linlab truncation --out " + (kWork / "tau.csv").string()) == 0);
    CHECK(slurp(kWork / "stderr.txt").find("slope total") != std::string::npos);
}

TEST_CASE_FIXTURE(Workspace, "cotds run and compare") {
    CHECK(run("cotds run " + (kData / "missing.json").string()) == 1);
    {
        std::ofstream(kWork / "bad.json") << R"({"name": "x", "extra": 1})";
    }
    CHECK(run("cotds run " + (kWork / "bad.json").string()) == 2);

    const auto scen = (kData / "testcase1.json").string();
    const auto a = kWork / "a";
    const auto b = kWork / "b";
    REQUIRE(run("cotds run " + scen + " --method series --t-end 1 --out-dir " + a.string()) == 0);
    CHECK(fs::exists(a / "timeseries.csv"));
    CHECK(fs::exists(a / "summary.txt"));
    CHECK(fs::exists(a / "channels" / "T.bus6.v.csv"));
    CHECK(slurp(a / "summary.txt").find("Converged") != std::string::npos);

    REQUIRE(run("compare " + a.string() + " " + a.string() + " --out " + (kWork / "same.csv").string()) == 0);
    CHECK(slurp(kWork / "same.csv").rfind("channel,max_abs,rms\n", 0) == 0);
    CHECK(slurp(kWork / "stdout.txt").find("max") != std::string::npos);

    REQUIRE(run("cotds run " + scen + " --method monolithic --h 0.003 --t-end 1 --out-dir " + b.string()) == 0);
    CHECK(run("compare " + a.string() + " " + b.string()) == 1);
    CHECK(run("compare " + a.string() + " " + b.string() + " --resample --channels T.bus6.v") == 0);
    CHECK(run("compare " + a.string() + " " + b.string() + " --channels T.nothing") == 1);

    // Relative output directories honour the environment override.
    const std::string env = "COTDS_OUT_DIR=" + (kWork / "env").string() + " ";
    const std::string cmd = env + kCli.string() + " cotds run " + scen + " --t-end 0.1 --out-dir rel > /dev/null";
    CHECK(std::system(cmd.c_str()) == 0);
    CHECK(fs::exists(kWork / "env" / "rel" / "timeseries.csv"));

    REQUIRE(run("cotds run " + scen + " --method series,parallel --h 0.006,0.012 --t-end 0.1 --out-dir " +
                (kWork / "matrix").string()) == 0);
    CHECK(fs::exists(kWork / "matrix" / "parallel_H0.012" / "timeseries.csv"));
}
