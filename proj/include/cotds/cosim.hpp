#pragma once

// Co-simulation orchestrator: sub-systems exchange raw real vectors at fixed
// macro-step boundaries under a parallel (Jacobi) or series (Gauss-Seidel)
// schedule. Inputs are held constant within a macro step.

#include <cstddef>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cotds::cosim {

using SubsystemId = std::size_t;

enum class Method { Parallel, Series };

[[nodiscard]] std::string to_string(Method m);

struct EventAction {
    std::string name;                          // e.g. "connect_motor"
    std::map<std::string, std::string> args;   // action-specific arguments
};

struct Event {
    double time = 0.0;
    SubsystemId target = 0;
    EventAction action;
};

class SubSystem {
public:
    virtual ~SubSystem() = default;

    [[nodiscard]] virtual std::string name() const = 0;
    [[nodiscard]] virtual std::size_t input_size() const = 0;
    [[nodiscard]] virtual std::vector<std::string> output_names() const = 0;
    [[nodiscard]] std::size_t output_size() const { return output_names().size(); }

    /// Bring the sub-system to the steady state consistent with `inputs`.
    virtual void initialize(std::span<const double> inputs) = 0;
    virtual void set_input(std::span<const double> inputs) = 0;
    /// Input value the sub-system currently holds (for consistency checks).
    [[nodiscard]] virtual std::vector<double> current_input() const = 0;
    virtual void advance(double h) = 0;
    [[nodiscard]] virtual std::vector<double> output() const = 0;
    [[nodiscard]] virtual std::map<std::string, double> snapshot() const = 0;
    /// Default rejects every action.
    virtual void apply_event(const EventAction& action);
};

struct IndexRange {
    std::size_t begin = 0;
    std::size_t size = 0;
};

struct CouplingLink {
    SubsystemId source = 0;
    IndexRange source_range;
    SubsystemId sink = 0;
    IndexRange sink_range;
};

struct CouplingSchedule {
    Method method = Method::Series;
    /// Series mode: sub-systems solved first. Everything else is the second tier.
    std::vector<SubsystemId> first_tier;
    double h_macro = 0.01;
    double t_end = 0.0;
    std::vector<Event> events;
    /// Snapshot channels to log, in addition to every exchanged output.
    std::vector<std::string> channels;
    /// Allowed initial interface mismatch.
    double consistency_tolerance = 1e-6;
    /// Advance same-tier sub-systems on worker threads.
    bool concurrent = false;
};

class ScheduleError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class InconsistentInitialization : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Per-step record of exchanged values and selected internal states.
struct TimeSeriesLog {
    std::vector<std::string> columns;
    std::vector<double> times;
    std::vector<std::vector<double>> rows;
    bool truncated = false;
    std::string cause;

    [[nodiscard]] std::size_t column_index(const std::string& name) const;
    [[nodiscard]] bool has_column(const std::string& name) const;
    [[nodiscard]] std::vector<double> column(const std::string& name) const;
    void append(double t, std::vector<double> row);
};

struct LinkMismatch {
    std::size_t link = 0;
    double worst = 0.0;
    std::size_t worst_index = 0;  // offset within the link range
    bool within_tolerance = true;
};

struct ConsistencyReport {
    std::vector<LinkMismatch> links;
    double max_mismatch = 0.0;
    [[nodiscard]] bool ok() const noexcept;
};

using SubsystemSet = std::vector<std::shared_ptr<SubSystem>>;

/// Throws ScheduleError for malformed links.
void validate_links(const SubsystemSet& subsystems, std::span<const CouplingLink> links);

[[nodiscard]] ConsistencyReport verify_initial_consistency(const SubsystemSet& subsystems,
                                                           std::span<const CouplingLink> links, double tol);

/// Runs the schedule. Sub-system failures truncate the log and set `cause`.
/// Throws ScheduleError or InconsistentInitialization before the first step.
[[nodiscard]] TimeSeriesLog run_cosimulation(const CouplingSchedule& schedule, const SubsystemSet& subsystems,
                                             std::span<const CouplingLink> links);

}  // namespace cotds::cosim
