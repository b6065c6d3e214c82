#pragma once

// All transmission and feeder equations stacked into a single DAE, solved
// with one trapezoidal integrator. Same model equations as the sub-systems.

#include <vector>

#include "cotds/power/feeder.hpp"
#include "cotds/power/transmission.hpp"

namespace cotds::power {

/// x = [generator states, motor (slip, e_re, e_im) ...]
/// y = [bus (re, im) ..., non-root feeder node (re, im) ...]
/// The feeders are referenced, not copied: events applied to them take effect
/// on the next evaluation.
class MonolithicDae final : public DaeSystem {
public:
    MonolithicDae(const TransmissionNetwork& net, std::vector<DistributionFeeder*> feeders,
                  std::vector<int> feeder_buses);

    std::size_t num_states() const override { return nx_; }
    std::size_t num_algebraic() const override { return ny_; }
    std::size_t num_inputs() const override { return 0; }
    void derivatives(const Vec& x, const Vec& y, const Vec& u, Vec& dx) const override;
    void residual(const Vec& x, const Vec& y, const Vec& u, Vec& g) const override;

    /// Stacks the present sub-system states.
    void pack(const TransmissionState& t, Vec& x, Vec& y) const;
    /// Writes a stacked solution back into the transmission state and the
    /// feeders (states, node voltages, source power).
    void unpack(const Vec& x, const Vec& y, TransmissionState& t) const;

private:
    struct MotorRef {
        std::size_t feeder;
        std::size_t component;
    };
    Complex node_voltage(const Vec& y, std::size_t feeder, std::size_t node) const;
    Complex motor_state_e(const Vec& x, std::size_t m) const;
    /// Current drawn by the components at a node.
    Complex node_load_current(const Vec& x, std::size_t f, std::size_t node, Complex v) const;

    const TransmissionNetwork& net_;
    TransmissionDae tdae_;
    std::vector<DistributionFeeder*> feeders_;
    std::vector<std::size_t> feeder_bus_index_;
    std::vector<std::size_t> node_offset_;  // per feeder, y offset of its first non-root node slot
    std::vector<std::vector<std::size_t>> node_slot_;  // per feeder and node, slot index (root: unused)
    std::vector<MotorRef> motors_;
    std::vector<std::vector<long>> motor_of_component_;  // -1 if not a motor
    std::size_t nx_ = 0;
    std::size_t ny_ = 0;
};

}  // namespace cotds::power
