#include "cotds/power/td_init.hpp"

#include <algorithm>
#include <cmath>

namespace cotds::power {

namespace {

// Power-flow view of a feeder: ZIP loads as modeled, connected motors at
// their set power with reactive power from the equivalent circuit.
LoadModel init_load_model(const DistributionFeeder& f, std::vector<std::vector<const NodeComponent*>>& at) {
    at.assign(f.topology.size(), {});
    for (const auto& c : f.components) at[f.topology.index_of(c.node)].push_back(&c);
    return [&at, &f](std::size_t i, Complex v) {
        Complex s{};
        for (const auto* c : at[i]) {
            if (c->kind == ComponentKind::Zip) {
                s += zip_power(c->zip, std::abs(v));
            } else if (c->state.connected) {
                double slip = 0.0;
                try {
                    slip = motor_slip_for_power(c->motor, c->p_set, v);
                } catch (const InfeasibleOperatingPoint&) {
                    throw InitializationError("feeder " + f.name + ", node " + std::to_string(c->node) + ": motor " +
                                              c->name + " has no operating point for its load");
                }
                s += motor_steady_power(c->motor, slip, v);
            }
        }
        return s;
    };
}

void init_motor(const DistributionFeeder& f, NodeComponent& c, Complex v, bool live) {
    const Complex at = live ? v : Complex{1.0, 0.0};
    try {
        const double slip = motor_slip_for_power(c.motor, c.p_set, at);
        const InductionMotorState s = motor_equilibrium(c.motor, slip, at);
        c.state = live ? s : InductionMotorState::standstill(c.state.connected);
    } catch (const InfeasibleOperatingPoint&) {
        throw InitializationError("feeder " + f.name + ", node " + std::to_string(c.node) + ": motor " + c.name +
                                  " has no equilibrium for its load");
    }
}

}  // namespace

TdInitResult iterative_td_powerflow_init(TransmissionNetwork& net, std::vector<InterfaceBinding>& bindings,
                                         const TdInitConfig& cfg) {
    if (!(cfg.tolerance > 0.0) || cfg.max_outer_iterations < 1) {
        throw std::invalid_argument("td init: bad configuration");
    }
    for (const auto& b : bindings) (void)net.index_of(b.bus);

    std::vector<Complex> loads(bindings.size());
    for (std::size_t k = 0; k < bindings.size(); ++k) {
        const auto& b = bindings[k];
        if (!b.feeder) {
            loads[k] = b.fixed_load;
            continue;
        }
        if (!b.feeder->energized) continue;
        for (const auto& c : b.feeder->components) {
            if (c.kind == ComponentKind::Zip) loads[k] += Complex{c.zip.p0, c.zip.q0};
            else if (c.state.connected) loads[k] += Complex{c.p_set, 0.5 * c.p_set};
        }
    }

    NewtonConfig pf_cfg;
    pf_cfg.residual_tolerance = std::min(1e-10, 1e-2 * cfg.tolerance);
    FeederPowerFlowConfig sweep_cfg;
    sweep_cfg.tolerance = std::min(1e-12, 1e-2 * cfg.tolerance);

    TdInitResult out;
    std::vector<Complex> v_prev(bindings.size());
    std::vector<std::vector<const NodeComponent*>> scratch;
    bool converged = false;
    for (int it = 1; it <= cfg.max_outer_iterations && !converged; ++it) {
        std::vector<Complex> bus_loads(net.size());
        for (std::size_t k = 0; k < bindings.size(); ++k) bus_loads[net.index_of(bindings[k].bus)] += loads[k];
        try {
            out.power_flow = transmission_power_flow(net, bus_loads, pf_cfg);
        } catch (const SolverError& e) {
            throw InitializationError(std::string("transmission power flow failed: ") + e.what());
        }
        double change = 0.0;
        for (std::size_t k = 0; k < bindings.size(); ++k) {
            auto& b = bindings[k];
            const Complex v = out.power_flow.buses[net.index_of(b.bus)].phasor();
            if (it > 1) change = std::max(change, std::abs(v - v_prev[k]));
            v_prev[k] = v;
            if (!b.feeder) continue;
            Complex s{};
            if (b.feeder->energized) {
                const LoadModel model = init_load_model(*b.feeder, scratch);
                const auto r = distribution_power_flow(b.feeder->topology, v, model, sweep_cfg);
                s = r.source_power;
            }
            change = std::max(change, std::abs(s - loads[k]));
            loads[k] = s;
        }
        out.outer_iterations = it;
        converged = change <= cfg.tolerance;
    }
    if (!converged) {
        throw InitializationError("transmission/distribution initialization did not converge in " +
                                  std::to_string(cfg.max_outer_iterations) + " outer iterations");
    }

    // Back-solve component states at the converged node voltages.
    for (std::size_t k = 0; k < bindings.size(); ++k) {
        auto& b = bindings[k];
        if (!b.feeder) continue;
        auto& f = *b.feeder;
        const Complex v = v_prev[k];
        std::vector<Complex> node_v(f.topology.size(), Complex{1.0, 0.0});
        if (f.energized) {
            const LoadModel model = init_load_model(f, scratch);
            node_v = distribution_power_flow(f.topology, v, model, sweep_cfg).node_voltages;
        }
        for (auto& c : f.components) {
            if (c.kind != ComponentKind::Motor) continue;
            init_motor(f, c, node_v[f.topology.index_of(c.node)], f.energized && c.state.connected);
        }
        f.node_voltages = node_v;
        const auto saved = f.power_flow;
        f.power_flow = sweep_cfg;
        f.refresh(v);
        f.power_flow = saved;
        loads[k] = f.source_power;
    }
    out.interface_loads = loads;
    std::vector<Complex> bus_loads(net.size());
    for (std::size_t k = 0; k < bindings.size(); ++k) bus_loads[net.index_of(bindings[k].bus)] += loads[k];
    out.power_flow = transmission_power_flow(net, bus_loads, pf_cfg);
    out.transmission = transmission_equilibrium(net, out.power_flow);
    return out;
}

}  // namespace cotds::power
