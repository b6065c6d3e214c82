#pragma once

// Consistent initial condition for a transmission network with feeders
// attached at its load buses.

#include <vector>

#include "cotds/power/feeder.hpp"
#include "cotds/power/transmission.hpp"

namespace cotds::power {

/// One interface slot: either a feeder or a fixed P,Q load (system base).
struct InterfaceBinding {
    int bus = 0;
    DistributionFeeder* feeder = nullptr;
    Complex fixed_load{};
};

struct TdInitConfig {
    double tolerance = 1e-8;
    int max_outer_iterations = 50;
};

struct TdInitResult {
    TransmissionState transmission;
    PowerFlowResult power_flow;
    std::vector<Complex> interface_loads;  // per binding
    int outer_iterations = 0;
};

class InitializationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Alternates transmission and feeder power flows, then back-solves
/// generator and motor states to equilibrium. Motors use `p_set` as their
/// electrical power; disconnected motors (or motors on de-energized feeders)
/// get their load torque fitted at 1 pu voltage and start at standstill.
/// Updates generator references, motor load torques and feeder solutions.
TdInitResult iterative_td_powerflow_init(TransmissionNetwork& net, std::vector<InterfaceBinding>& bindings,
                                         const TdInitConfig& cfg = {});

}  // namespace cotds::power
