// Command-line front end.
//
// Exit codes: 0 success, 1 usage error (bad flags, missing files),
// 2 schema error, 3 numeric failure (initialization or solver).

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "cotds/engine.hpp"
#include "cotds/io.hpp"
#include "cotds/linlab.hpp"

namespace fs = std::filesystem;
using namespace cotds;

namespace {

constexpr int kUsage = 1;
constexpr int kSchema = 2;
constexpr int kNumeric = 3;

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Relative paths land under $COTDS_OUT_DIR when it is set.
fs::path output_path(const std::string& p) {
    const fs::path path(p);
    if (const char* base = std::getenv("COTDS_OUT_DIR"); base && *base && path.is_relative()) return fs::path(base) / path;
    return path;
}

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw UsageError("cannot write " + path.string());
    return out;
}

struct LinParams {
    double la = -1.0, lb = -10.0, ka = 2.0, kb = 2.0;
    int n = 100;

    void add(CLI::App* app) {
        app->add_option("--lambda-a", la, "eigenvalue of sub-system A (< 0)");
        app->add_option("--lambda-b", lb, "eigenvalue of sub-system B (< 0)");
        app->add_option("--ka", ka, "coupling gain K_A (> 0)");
        app->add_option("--kb", kb, "coupling gain K_B (> 0)");
        app->add_option("--n", n, "Euler micro steps per macro step");
    }
    [[nodiscard]] linlab::LinearCoupledParams params() const {
        try {
            return {la, lb, ka, kb};
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
    }
};

std::vector<linlab::SchemeId> parse_schemes(const std::string& list) {
    std::vector<linlab::SchemeId> out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(linlab::scheme_from_string(item));
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
    }
    if (out.empty()) throw UsageError("no scheme given");
    return out;
}

std::vector<double> h_grid(double lo, double hi, int points, bool log_spaced) {
    if (points < 1 || !(lo > 0.0) || !(hi >= lo) || (points == 1 && hi != lo)) {
        throw UsageError("empty or invalid H range");
    }
    std::vector<double> g;
    for (int k = 0; k < points; ++k) {
        const double f = points == 1 ? 0.0 : static_cast<double>(k) / (points - 1);
        g.push_back(log_spaced ? lo * std::pow(hi / lo, f) : lo + f * (hi - lo));
    }
    return g;
}

void emit(const std::string& out, const std::string& text) {
    if (out.empty() || out == "-") {
        std::cout << text;
        return;
    }
    auto f = open_out(output_path(out));
    f << text;
    std::cerr << "wrote " << output_path(out).string() << '\n';
}

// ------------------------------------------------------------- linlab

int linlab_simulate(const LinParams& lp, double x0a, double x0b, double h, double t_end, const std::string& scheme,
                    const std::string& out) {
    const auto p = lp.params();
    if (!(h > 0.0) || !(t_end >= 0.0) || lp.n < 1) throw UsageError("need H > 0, t_end >= 0, n >= 1");
    const auto traj = linlab::simulate_linear(p, {x0a, x0b}, h, lp.n, t_end, linlab::scheme_from_string(scheme));
    std::ostringstream s;
    s << "t,x_a,x_b,analytic_a,analytic_b\n";
    for (const auto& pt : traj.points) {
        const auto ref = linlab::analytic_solution(p, {x0a, x0b}, pt.t);
        s << io::format_double(pt.t) << ',' << io::format_double(pt.x.x_a) << ',' << io::format_double(pt.x.x_b) << ','
          << io::format_double(ref.x_a) << ',' << io::format_double(ref.x_b) << '\n';
    }
    emit(out, s.str());
    if (traj.diverged) std::cerr << "trajectory diverged (non-finite state); output truncated\n";
    return 0;
}

int linlab_stability(const LinParams& lp, const std::string& schemes, double lo, double hi, int points,
                     const std::string& out) {
    const auto p = lp.params();
    const auto list = parse_schemes(schemes);
    const auto grid = h_grid(lo, hi, points, false);
    std::ostringstream s;
    s << "H";
    for (auto sc : list) s << ",rho_" << linlab::to_string(sc);
    s << ",rho_ref\n";
    std::vector<std::vector<linlab::SweepPoint>> sweeps;
    for (auto sc : list) sweeps.push_back(linlab::stability_sweep(p, sc, lp.n, grid));
    for (std::size_t i = 0; i < grid.size(); ++i) {
        s << io::format_double(grid[i]);
        for (const auto& sw : sweeps) s << ',' << io::format_double(sw[i].rho);
        s << ",1\n";
    }
    emit(out, s.str());
    return 0;
}

int linlab_truncation(const LinParams& lp, double x0a, double x0b, double lo, double hi, int points,
                      const std::string& schemes, const std::string& out) {
    const auto p = lp.params();
    const auto list = parse_schemes(schemes);
    const auto grid = h_grid(lo, hi, points, true);
    std::ostringstream s;
    s << "H";
    for (auto sc : list) s << ",tau_" << linlab::to_string(sc);
    s << '\n';
    std::vector<std::vector<double>> taus(list.size());
    for (double h : grid) {
        s << io::format_double(h);
        for (std::size_t k = 0; k < list.size(); ++k) {
            const double t = linlab::local_truncation_error(p, {x0a, x0b}, h, list[k], lp.n).norm();
            taus[k].push_back(t);
            s << ',' << io::format_double(t);
        }
        s << '\n';
    }
    emit(out, s.str());
    if (grid.size() >= 2) {
        for (std::size_t k = 0; k < list.size(); ++k) {
            std::cerr << "slope " << linlab::to_string(list[k]) << ": " << linlab::loglog_slope(grid, taus[k]) << '\n';
        }
    }
    return 0;
}

// --------------------------------------------------------------- runs

std::string format_h(double h) {
    std::ostringstream s;
    s << h;
    return s.str();
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::string safe_name(const std::string& channel) {
    std::string s = channel;
    for (char& c : s) {
        if (c == '/' || c == '\\') c = '_';
    }
    return s;
}

void write_run(const fs::path& dir, const engine::RunResult& r) {
    fs::create_directories(dir / "channels");
    io::write_csv(dir / "timeseries.csv", r.log);
    for (const auto& c : r.log.columns) {
        cosim::TimeSeriesLog one;
        one.columns = {c};
        const auto col = r.log.column(c);
        for (std::size_t i = 0; i < col.size(); ++i) one.append(r.log.times[i], {col[i]});
        io::write_csv(dir / "channels" / (safe_name(c) + ".csv"), one);
    }
}

int cotds_run(const std::string& scenario_path, const std::string& methods, const std::string& hs, double t_end,
              bool no_events, const std::string& out_dir) {
    if (!fs::exists(scenario_path)) throw UsageError("scenario file not found: " + scenario_path);
    engine::Scenario base = io::load_scenario(scenario_path);
    if (no_events) base.events.clear();
    if (t_end >= 0.0) {
        base.run.t_end = t_end;
        const auto late = std::remove_if(base.events.begin(), base.events.end(),
                                         [&](const engine::ScenarioEvent& e) { return e.time > t_end; });
        if (late != base.events.end()) std::cerr << "note: events after t_end dropped\n";
        base.events.erase(late, base.events.end());
    }

    std::vector<engine::RunMethod> method_list;
    for (const auto& m : split_list(methods)) {
        try {
            method_list.push_back(engine::run_method_from_string(m));
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
    }
    if (method_list.empty()) method_list.push_back(base.run.method);
    std::vector<double> h_list;
    for (const auto& h : split_list(hs)) {
        try {
            h_list.push_back(std::stod(h));
        } catch (const std::exception&) {
            throw UsageError("bad --h value '" + h + "'");
        }
        if (!(h_list.back() > 0.0)) throw UsageError("--h must be positive");
    }
    if (h_list.empty()) h_list.push_back(base.run.h);

    const fs::path dir = output_path(out_dir.empty() ? "runs/" + (base.name.empty() ? "scenario" : base.name) : out_dir);
    const bool matrix = method_list.size() * h_list.size() > 1;
    std::ostringstream summary;
    summary << "scenario: " << base.name << '\n'
            << std::left << std::setw(12) << "method" << std::setw(10) << "H" << std::setw(13) << "verdict"
            << std::setw(10) << "steps" << std::setw(10) << "wall_s" << "note\n";
    for (auto m : method_list) {
        for (double h : h_list) {
            engine::Scenario s = base;
            s.run.method = m;
            s.run.h = h;
            try {
                s.validate();
            } catch (const std::invalid_argument& e) {
                throw io::SchemaError(e.what());
            }
            const auto r = engine::run_scenario(s);
            const fs::path sub = matrix ? dir / (engine::to_string(m) + "_H" + format_h(h)) : dir;
            write_run(sub, r);
            summary << std::left << std::setw(12) << engine::to_string(m) << std::setw(10) << format_h(h)
                    << std::setw(13) << engine::to_string(r.verdict) << std::setw(10) << (r.log.rows.size() - 1)
                    << std::setw(10) << std::setprecision(3) << r.wall_time << std::setprecision(6)
                    << (r.log.truncated ? "stopped: " + r.log.cause : "") << '\n';
        }
    }
    fs::create_directories(dir);
    std::ofstream(dir / "summary.txt") << summary.str();
    std::cout << summary.str();
    return 0;
}

int compare(const std::string& a, const std::string& b, const std::string& channels, bool resample,
            const std::string& out) {
    for (const auto& d : {a, b}) {
        if (!fs::exists(fs::path(d) / "timeseries.csv")) throw UsageError("no timeseries.csv in " + d);
    }
    const auto la = io::read_csv(fs::path(a) / "timeseries.csv");
    const auto lb = io::read_csv(fs::path(b) / "timeseries.csv");
    engine::DeviationReport rep;
    try {
        rep = engine::compare_logs(la, lb, split_list(channels), resample);
    } catch (const engine::GridMismatch& e) {
        throw UsageError(std::string(e.what()) + "; pass --resample");
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    std::ostringstream csv;
    csv << "channel,max_abs,rms\n";
    for (const auto& c : rep.channels) {
        csv << c.channel << ',' << io::format_double(c.max_abs) << ',' << io::format_double(c.rms) << '\n';
        std::cout << std::left << std::setw(28) << c.channel << " max " << std::setw(14) << c.max_abs << " rms "
                  << c.rms << '\n';
    }
    std::cout << "overall max deviation: " << rep.max_abs() << '\n';
    if (!out.empty()) emit(out, csv.str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Transmission-distribution co-simulation toolkit"};
    app.require_subcommand(1);

    auto* lin = app.add_subcommand("linlab", "linear coupled test system");
    lin->require_subcommand(1);
    LinParams lp;
    double x0a = 1.0, x0b = 1.0, h = 0.1, t_end = 5.0, h_min = 0.01, h_max = 1.5;
    double tau_min = 1e-4, tau_max = 1e-2;
    int points = 150, trunc_points = 5;
    std::string scheme = "series", schemes = "total,parallel,series", out;

    auto* sim = lin->add_subcommand("simulate", "trajectory CSV with analytic overlay");
    sim->set_help_flag("--help", "Print this help message and exit");  // frees --h
    lp.add(sim);
    sim->add_option("--x0-a", x0a);
    sim->add_option("--x0-b", x0b);
    sim->add_option("--h", h, "macro step H");
    sim->add_option("--t-end", t_end);
    sim->add_option("--scheme", scheme, "total, parallel or series");
    sim->add_option("--out", out, "output CSV (default stdout)");

    auto* stab = lin->add_subcommand("stability", "spectral radius against H");
    lp.add(stab);
    stab->add_option("--schemes", schemes);
    stab->add_option("--h-min", h_min);
    stab->add_option("--h-max", h_max);
    stab->add_option("--points", points);
    stab->add_option("--out", out);

    auto* trunc = lin->add_subcommand("truncation", "local truncation error against H (log grid)");
    lp.add(trunc);
    trunc->add_option("--x0-a", x0a);
    trunc->add_option("--x0-b", x0b);
    trunc->add_option("--schemes", schemes);
    trunc->add_option("--h-min", tau_min);
    trunc->add_option("--h-max", tau_max);
    trunc->add_option("--points", trunc_points);
    trunc->add_option("--out", out);

    auto* cot = app.add_subcommand("cotds", "combined transmission-distribution runs");
    cot->require_subcommand(1);
    auto* run = cot->add_subcommand("run", "run a scenario file");
    std::string scenario, methods, hs, out_dir;
    double run_t_end = -1.0;
    bool no_events = false;
    run->set_help_flag("--help", "Print this help message and exit");
    run->add_option("scenario", scenario, "scenario file")->required();
    run->add_option("--method", methods, "parallel, series, monolithic (comma list allowed)");
    run->add_option("--h", hs, "macro step override (comma list allowed)");
    run->add_option("--t-end", run_t_end, "end time override");
    run->add_flag("--no-events", no_events, "drop all scenario events");
    run->add_option("--out-dir", out_dir, "output directory");

    auto* cmp = app.add_subcommand("compare", "deviation between two run directories");
    std::string dir_a, dir_b, channels;
    bool resample = false;
    cmp->add_option("run_a", dir_a)->required();
    cmp->add_option("run_b", dir_b)->required();
    cmp->add_option("--channels", channels, "comma list (default: all shared)");
    cmp->add_flag("--resample", resample, "interpolate run_b onto run_a's grid");
    cmp->add_option("--out", out, "report CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kUsage;
    }

    try {
        if (sim->parsed()) return linlab_simulate(lp, x0a, x0b, h, t_end, scheme, out);
        if (stab->parsed()) return linlab_stability(lp, schemes, h_min, h_max, points, out);
        if (trunc->parsed()) return linlab_truncation(lp, x0a, x0b, tau_min, tau_max, trunc_points, schemes, out);
        if (run->parsed()) return cotds_run(scenario, methods, hs, run_t_end, no_events, out_dir);
        if (cmp->parsed()) return compare(dir_a, dir_b, channels, resample, out);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kUsage;
    } catch (const io::SchemaError& e) {
        std::cerr << "schema error: " << e.what() << '\n';
        return kSchema;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return kNumeric;
    }
    return kUsage;
}
