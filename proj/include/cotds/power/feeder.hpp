#pragma once

// Radial distribution feeders: backward/forward sweep power flow and the
// node-level dynamic components stepped with the node voltage held.

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "cotds/cosim.hpp"
#include "cotds/power/components.hpp"

namespace cotds::power {

struct FeederNode {
    int id = 0;
    int parent = -1;  // -1 for the substation node
    double r = 0.0;   // series impedance of the branch to the parent
    double x = 0.0;
};

/// Tree rooted at the unique parent-less node. Node indices follow the input
/// order; `order()` lists them root first with parents before children.
class FeederTopology {
public:
    FeederTopology() = default;
    explicit FeederTopology(std::vector<FeederNode> nodes);

    [[nodiscard]] const std::vector<FeederNode>& nodes() const noexcept { return nodes_; }
    [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }
    [[nodiscard]] std::size_t root() const noexcept { return root_; }
    [[nodiscard]] const std::vector<std::size_t>& order() const noexcept { return order_; }
    /// Parent index; equal to the node index for the root.
    [[nodiscard]] std::size_t parent(std::size_t i) const { return parent_.at(i); }
    [[nodiscard]] Complex impedance(std::size_t i) const { return {nodes_.at(i).r, nodes_.at(i).x}; }
    [[nodiscard]] std::size_t index_of(int node_id) const;

private:
    std::vector<FeederNode> nodes_;
    std::vector<std::size_t> parent_;
    std::vector<std::size_t> order_;
    std::map<int, std::size_t> index_;
    std::size_t root_ = 0;
};

/// Complex power drawn at node index i when its voltage is v.
using LoadModel = std::function<Complex(std::size_t node, Complex v)>;

struct FeederPowerFlowConfig {
    double tolerance = 1e-8;
    int max_iterations = 100;
};

struct FeederPowerFlowResult {
    std::vector<Complex> node_voltages;
    Complex source_power;  // entering at the substation
    int iterations = 0;
};

class PowerFlowDivergence : public SolverError {
public:
    using SolverError::SolverError;
};

/// Backward/forward sweep. `warm_start`, when given, seeds the node voltages.
[[nodiscard]] FeederPowerFlowResult distribution_power_flow(const FeederTopology& feeder, Complex v_substation,
                                                            const LoadModel& loads,
                                                            const FeederPowerFlowConfig& cfg = {},
                                                            const std::vector<Complex>* warm_start = nullptr);

/// Constant-power loads per node.
[[nodiscard]] FeederPowerFlowResult distribution_power_flow(const FeederTopology& feeder, Complex v_substation,
                                                            const std::vector<Complex>& node_powers,
                                                            const FeederPowerFlowConfig& cfg = {});

enum class ComponentKind { Zip, Motor };

struct NodeComponent {
    std::string name;
    int node = 0;
    ComponentKind kind = ComponentKind::Zip;
    ZipLoadParams zip;
    InductionMotorParams motor;
    InductionMotorState state;  // motors only
    double p_set = 0.0;         // motors: electrical power at initialization, system base

    /// Power drawn at node voltage v given the present state (system base).
    [[nodiscard]] Complex power(Complex v) const;
};

/// Advances the component over h with v_node held, as `n_micro` adaptive
/// sub-intervals; returns the power drawn at the end of the step.
Complex node_component_step(NodeComponent& component, Complex v_node, double h, double tol, int n_micro = 1);

struct DistributionFeeder {
    std::string name;
    FeederTopology topology;
    std::vector<NodeComponent> components;
    bool energized = true;
    int inner_repeats = 1;
    int n_micro = 1;  // sub-intervals of each component step
    double rk_tolerance = 1e-6;
    FeederPowerFlowConfig power_flow;

    // Most recent solution.
    std::vector<Complex> node_voltages;
    Complex source_power;

    [[nodiscard]] std::size_t component_index(const std::string& name) const;
    /// Network solve with all components in their present state.
    FeederPowerFlowResult solve(Complex v_substation) const;
    /// Solves and stores the solution.
    void refresh(Complex v_substation);
};

/// (a) power flow, (b) component steps with node voltages held, (c) power
/// flow again; (a)-(b) repeated `inner_repeats` times. Returns source power.
Complex distribution_subsystem_step(DistributionFeeder& feeder, Complex v_substation, double h);

/// Orchestrator adapter. Inputs: substation (v_re, v_im). Outputs: (p, q).
/// Events: connect_motor {component}, disconnect_motor {component},
/// connect_feeder, disconnect_feeder.
class DistributionSubsystem final : public cosim::SubSystem {
public:
    explicit DistributionSubsystem(DistributionFeeder feeder);

    std::string name() const override { return feeder_.name; }
    std::size_t input_size() const override { return 2; }
    std::vector<std::string> output_names() const override { return {"p", "q"}; }
    void initialize(std::span<const double> inputs) override;
    void set_input(std::span<const double> inputs) override;
    std::vector<double> current_input() const override { return {v_sub_.real(), v_sub_.imag()}; }
    void advance(double h) override;
    std::vector<double> output() const override;
    std::map<std::string, double> snapshot() const override;
    void apply_event(const cosim::EventAction& action) override;

    [[nodiscard]] DistributionFeeder& feeder() noexcept { return feeder_; }
    [[nodiscard]] const DistributionFeeder& feeder() const noexcept { return feeder_; }
    [[nodiscard]] Complex substation_voltage() const noexcept { return v_sub_; }

private:
    DistributionFeeder feeder_;
    Complex v_sub_{1.0, 0.0};
};

/// Applies a feeder event to the feeder data (shared with the monolithic
/// reference). Throws std::invalid_argument for unknown actions.
void apply_feeder_event(DistributionFeeder& feeder, const cosim::EventAction& action);

/// Snapshot keys: node voltages, motor slips, component powers.
void feeder_snapshot(const DistributionFeeder& feeder, std::map<std::string, double>& out);

}  // namespace cotds::power
