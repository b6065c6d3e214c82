#pragma once

// Scenario semantics for combined transmission-distribution runs: model
// assembly, initialization, method selection and run comparison.

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "cotds/cosim.hpp"
#include "cotds/power/feeder.hpp"
#include "cotds/power/td_init.hpp"
#include "cotds/power/transmission.hpp"

namespace cotds::engine {

struct TransmissionData {
    std::string dataset;  // file reference as written in the scenario; empty when inline
    double base_mva = 100.0;
    std::vector<power::Bus> buses;
    std::vector<power::Branch> branches;
    std::vector<power::GeneratorUnit> generators;
};

struct FeederNodeSpec {
    int id = 0;
    int parent = -1;
    double r = 0.0;
    double x = 0.0;
    double p = 0.0;  // nominal load, system base
    double q = 0.0;
};

struct FeederSpec {
    std::string name;
    int bus = 0;
    std::vector<FeederNodeSpec> nodes;
    bool energized = true;
    /// Motor components (e.g. "IM2_n1") that start disconnected.
    std::vector<std::string> disconnected;
};

struct MotorShare {
    std::string name;
    double fraction = 0.0;  // of the motor part of each node's load
    double loading = 0.7;   // electrical power / rating at initialization
};

struct Composition {
    double static_fraction = 1.0;
    power::ZipLoadParams zip;  // fractions only; p0/q0/v0 come from the nodes
    power::InductionMotorParams motor;
    std::vector<MotorShare> motors;
};

struct ScenarioEvent {
    double time = 0.0;
    std::string target;  // feeder name
    cosim::EventAction action;
};

enum class RunMethod { Parallel, Series, MonolithicReference };

[[nodiscard]] std::string to_string(RunMethod m);
/// "parallel", "series", "monolithic"; throws std::invalid_argument.
[[nodiscard]] RunMethod run_method_from_string(const std::string& s);

struct RunSettings {
    RunMethod method = RunMethod::Series;
    double h = 0.006;
    double t_end = 1.0;
    double rk_tolerance = 1e-6;
    int inner_repeats = 1;
    int n_micro = 1;
    double init_tolerance = 1e-10;
    bool concurrent = false;
};

struct Scenario {
    std::string name;
    TransmissionData transmission;
    std::vector<FeederSpec> feeders;
    Composition composition;
    std::vector<ScenarioEvent> events;
    RunSettings run;
    std::vector<std::string> channels;  // extra logged channels

    /// Throws std::invalid_argument describing the first violation.
    void validate() const;
};

/// Component name for a motor share or the static load at a feeder node.
[[nodiscard]] std::string component_name(const std::string& base, int node_id);

/// Feeder with ZIP and motor components from the composition (motor load
/// torques not yet fitted).
[[nodiscard]] power::DistributionFeeder build_feeder(const FeederSpec& spec, const Composition& comp,
                                                     double base_mva, const RunSettings& run);

[[nodiscard]] std::shared_ptr<power::TransmissionNetwork> build_network(const TransmissionData& data);

struct InitializedModel {
    std::shared_ptr<power::TransmissionNetwork> network;
    std::vector<power::DistributionFeeder> feeders;
    power::TdInitResult init;
};

[[nodiscard]] InitializedModel initialize_scenario(const Scenario& s);

enum class Verdict { Converged, Oscillatory, Diverged };
[[nodiscard]] std::string to_string(Verdict v);

struct RunResult {
    cosim::TimeSeriesLog log;
    Verdict verdict = Verdict::Converged;
    double wall_time = 0.0;  // seconds
    RunMethod method = RunMethod::Series;
    double h = 0.0;
    int init_iterations = 0;
};

/// Runs the scenario with its own run settings.
[[nodiscard]] RunResult run_scenario(const Scenario& s);

struct ConvergenceConfig {
    double alternation_threshold = 0.8;
    /// Differences below this are treated as numerically flat.
    double flat_tolerance = 1e-10;
};

/// Verdict on the part of the log with t >= window_start.
[[nodiscard]] Verdict detect_convergence(const cosim::TimeSeriesLog& log, double window_start,
                                         const ConvergenceConfig& cfg = {});

struct ChannelDeviation {
    std::string channel;
    double max_abs = 0.0;
    double rms = 0.0;
};

struct DeviationReport {
    std::vector<ChannelDeviation> channels;
    [[nodiscard]] double max_abs() const noexcept;
};

class GridMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Per-channel deviation of b from a on a's grid. Empty `channels` means all
/// shared columns. Throws std::invalid_argument for missing or disjoint
/// channels and GridMismatch for different grids unless `resample`.
[[nodiscard]] DeviationReport compare_logs(const cosim::TimeSeriesLog& a, const cosim::TimeSeriesLog& b,
                                           const std::vector<std::string>& channels, bool resample = false);

[[nodiscard]] DeviationReport compare_runs(const RunResult& a, const RunResult& b,
                                           const std::vector<std::string>& channels, bool resample = false);

/// Names of the bus-voltage magnitude channels ("T.bus<id>.v") in a log.
[[nodiscard]] std::vector<std::string> bus_voltage_channels(const cosim::TimeSeriesLog& log);

}  // namespace cotds::engine
