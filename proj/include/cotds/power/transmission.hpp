#pragma once

// Transmission sub-system: generators (two-axis machine, first-order exciter,
// first-order droop governor) on an algebraic network. Interface loads enter
// as constant P,Q per slot; several slots may share a bus.

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cotds/cosim.hpp"
#include "cotds/integrators.hpp"
#include "cotds/power/components.hpp"

namespace cotds::power {

enum class BusType { Slack, PV, PQ };

struct Bus {
    int id = 0;
    BusType type = BusType::PQ;
};

struct Branch {
    int from = 0;
    int to = 0;
    double r = 0.0;
    double x = 0.0;
    double b = 0.0;  // total line charging
};

struct GeneratorUnit {
    std::string name;
    int bus = 0;
    double p_set = 0.0;  // ignored at the slack bus
    double v_set = 1.0;
    GeneratorParams params;
};

class TransmissionNetwork {
public:
    TransmissionNetwork(double base_mva, std::vector<Bus> buses, std::vector<Branch> branches,
                        std::vector<GeneratorUnit> generators);

    [[nodiscard]] double base_mva() const noexcept { return base_mva_; }
    [[nodiscard]] const std::vector<Bus>& buses() const noexcept { return buses_; }
    [[nodiscard]] const std::vector<Branch>& branches() const noexcept { return branches_; }
    [[nodiscard]] const std::vector<GeneratorUnit>& generators() const noexcept { return generators_; }
    [[nodiscard]] std::vector<GeneratorUnit>& generators() noexcept { return generators_; }
    [[nodiscard]] const Eigen::MatrixXcd& admittance() const noexcept { return ybus_; }
    [[nodiscard]] std::size_t size() const noexcept { return buses_.size(); }
    /// Throws std::out_of_range for unknown ids.
    [[nodiscard]] std::size_t index_of(int bus_id) const;
    [[nodiscard]] bool has_bus(int bus_id) const noexcept { return index_.count(bus_id) > 0; }

private:
    double base_mva_;
    std::vector<Bus> buses_;
    std::vector<Branch> branches_;
    std::vector<GeneratorUnit> generators_;
    std::map<int, std::size_t> index_;
    Eigen::MatrixXcd ybus_;
};

struct PowerFlowResult {
    std::vector<BusState> buses;  // p_inj, q_inj: net injection (generation - load)
    std::vector<Complex> gen_power;  // per generator
    int iterations = 0;
    double mismatch = 0.0;
};

/// Newton power flow with constant P,Q loads (system base) per bus index.
[[nodiscard]] PowerFlowResult transmission_power_flow(const TransmissionNetwork& net,
                                                      const std::vector<Complex>& bus_loads,
                                                      const NewtonConfig& cfg = {});

class VoltageCollapse : public SolverError {
public:
    using SolverError::SolverError;
};

inline constexpr double kCollapseVoltage = 0.2;

/// DAE of the transmission system. x: 6 states per generator; y: (re, im) per
/// bus; u: (p, q) per interface slot.
class TransmissionDae final : public DaeSystem {
public:
    TransmissionDae(const TransmissionNetwork& net, std::vector<int> slot_buses);

    std::size_t num_states() const override { return 6 * net_.generators().size(); }
    std::size_t num_algebraic() const override { return 2 * net_.size(); }
    std::size_t num_inputs() const override { return 2 * slot_bus_index_.size(); }
    void derivatives(const Vec& x, const Vec& y, const Vec& u, Vec& dx) const override;
    void residual(const Vec& x, const Vec& y, const Vec& u, Vec& g) const override;

    /// Current injected by all generators at each bus.
    void generator_injections(const Vec& x, const Vec& y, std::vector<Complex>& inj) const;
    /// Extra per-bus current drawn, used by the monolithic system.
    void add_network_residual(const Vec& x, const Vec& y, const std::vector<Complex>& extra_current_drawn,
                              Vec& g) const;

    [[nodiscard]] const TransmissionNetwork& network() const noexcept { return net_; }
    [[nodiscard]] const std::vector<std::size_t>& slot_bus_index() const noexcept { return slot_bus_index_; }

private:
    const TransmissionNetwork& net_;
    std::vector<std::size_t> slot_bus_index_;
    std::vector<std::size_t> gen_bus_index_;
};

struct TransmissionState {
    Vec x;  // generator states
    Vec y;  // bus voltages
};

/// Builds the equilibrium state from a power-flow result; updates generator
/// references in `net`.
[[nodiscard]] TransmissionState transmission_equilibrium(TransmissionNetwork& net, const PowerFlowResult& pf);

struct TransmissionStepResult {
    TransmissionState state;
    std::vector<Complex> interface_voltages;  // per slot
    bool collapse = false;
    NewtonReport newton;
};

/// One trapezoidal step with interface loads held constant.
[[nodiscard]] TransmissionStepResult transmission_subsystem_step(const TransmissionDae& dae,
                                                                 const TransmissionState& state,
                                                                 const std::vector<Complex>& interface_loads,
                                                                 double h, const NewtonConfig& cfg = {});

/// Orchestrator adapter. Inputs: (p, q) per slot. Outputs: (v_re, v_im) per
/// distinct interface bus, named "bus<id>.v_re" / "bus<id>.v_im".
class TransmissionSubsystem final : public cosim::SubSystem {
public:
    TransmissionSubsystem(std::shared_ptr<TransmissionNetwork> net, std::vector<int> slot_buses,
                          TransmissionState initial, NewtonConfig cfg = {});

    std::string name() const override { return "T"; }
    std::size_t input_size() const override { return 2 * slot_buses_.size(); }
    std::vector<std::string> output_names() const override;
    void initialize(std::span<const double> inputs) override;
    void set_input(std::span<const double> inputs) override;
    std::vector<double> current_input() const override;
    void advance(double h) override;
    std::vector<double> output() const override;
    std::map<std::string, double> snapshot() const override;

    /// Output offset of an interface bus (its v_re entry).
    [[nodiscard]] std::size_t output_offset(int bus_id) const;
    [[nodiscard]] const std::vector<int>& interface_buses() const noexcept { return interface_buses_; }
    [[nodiscard]] const TransmissionState& state() const noexcept { return state_; }
    /// Used by the monolithic reference to publish its solution.
    void set_state(const TransmissionState& s) { state_ = s; }
    [[nodiscard]] const TransmissionDae& dae() const noexcept { return *dae_; }

private:
    std::shared_ptr<TransmissionNetwork> net_;
    std::vector<int> slot_buses_;
    std::vector<int> interface_buses_;
    std::unique_ptr<TransmissionDae> dae_;
    TransmissionState state_;
    Vec u_;
    NewtonConfig cfg_;
};

/// Snapshot keys for a transmission state (bus magnitudes/angles, generator states).
void transmission_snapshot(const TransmissionNetwork& net, const TransmissionState& s,
                           std::map<std::string, double>& out);

}  // namespace cotds::power
