#include "cotds/power/monolithic.hpp"

namespace cotds::power {

namespace {

void put(Vec& v, std::size_t slot, Complex c) {
    v[static_cast<Eigen::Index>(2 * slot)] = c.real();
    v[static_cast<Eigen::Index>(2 * slot + 1)] = c.imag();
}

Complex get(const Vec& v, std::size_t slot) {
    return {v[static_cast<Eigen::Index>(2 * slot)], v[static_cast<Eigen::Index>(2 * slot + 1)]};
}

}  // namespace

MonolithicDae::MonolithicDae(const TransmissionNetwork& net, std::vector<DistributionFeeder*> feeders,
                             std::vector<int> feeder_buses)
    : net_(net), tdae_(net, {}), feeders_(std::move(feeders)) {
    if (feeder_buses.size() != feeders_.size()) throw std::invalid_argument("monolithic: one bus per feeder");
    for (int b : feeder_buses) feeder_bus_index_.push_back(net_.index_of(b));
    nx_ = tdae_.num_states();
    std::size_t slots = net_.size();
    for (std::size_t f = 0; f < feeders_.size(); ++f) {
        const auto& fd = *feeders_[f];
        node_slot_.emplace_back(fd.topology.size(), 0);
        for (std::size_t i = 0; i < fd.topology.size(); ++i) {
            if (i != fd.topology.root()) node_slot_[f][i] = slots++;
        }
        motor_of_component_.emplace_back(fd.components.size(), -1);
        for (std::size_t c = 0; c < fd.components.size(); ++c) {
            (void)fd.topology.index_of(fd.components[c].node);
            if (fd.components[c].kind == ComponentKind::Motor) {
                motor_of_component_[f][c] = static_cast<long>(motors_.size());
                motors_.push_back({f, c});
            }
        }
    }
    nx_ += 3 * motors_.size();
    ny_ = 2 * slots;
}

Complex MonolithicDae::node_voltage(const Vec& y, std::size_t f, std::size_t node) const {
    if (node == feeders_[f]->topology.root()) return get(y, feeder_bus_index_[f]);
    return get(y, node_slot_[f][node]);
}

Complex MonolithicDae::motor_state_e(const Vec& x, std::size_t m) const {
    const auto o = static_cast<Eigen::Index>(tdae_.num_states() + 3 * m);
    return {x[o + 1], x[o + 2]};
}

Complex MonolithicDae::node_load_current(const Vec& x, std::size_t f, std::size_t node, Complex v) const {
    const auto& fd = *feeders_[f];
    Complex i{};
    for (std::size_t c = 0; c < fd.components.size(); ++c) {
        const auto& comp = fd.components[c];
        if (fd.topology.index_of(comp.node) != node) continue;
        if (comp.kind == ComponentKind::Zip) {
            i += std::conj(zip_power(comp.zip, std::abs(v)) / v);
        } else if (comp.state.connected) {
            const auto m = static_cast<std::size_t>(motor_of_component_[f][c]);
            i += (v - motor_state_e(x, m)) / comp.motor.z_transient() * comp.motor.scale();
        }
    }
    return i;
}

void MonolithicDae::derivatives(const Vec& x, const Vec& y, const Vec& u, Vec& dx) const {
    Vec dt;
    tdae_.derivatives(x.head(static_cast<Eigen::Index>(tdae_.num_states())), y, u, dt);
    dx.resize(static_cast<Eigen::Index>(nx_));
    dx.head(dt.size()) = dt;
    for (std::size_t m = 0; m < motors_.size(); ++m) {
        const auto o = static_cast<Eigen::Index>(tdae_.num_states() + 3 * m);
        const auto& fd = *feeders_[motors_[m].feeder];
        const auto& comp = fd.components[motors_[m].component];
        if (!fd.energized || !comp.state.connected) {
            dx.segment(o, 3).setZero();
            continue;
        }
        const InductionMotorState s{x[o], {x[o + 1], x[o + 2]}, true};
        const auto d = induction_motor_derivatives(
            s, comp.motor, node_voltage(y, motors_[m].feeder, fd.topology.index_of(comp.node)));
        dx[o] = d.d_slip;
        dx[o + 1] = d.d_e.real();
        dx[o + 2] = d.d_e.imag();
    }
}

void MonolithicDae::residual(const Vec& x, const Vec& y, const Vec& /*u*/, Vec& g) const {
    g.resize(static_cast<Eigen::Index>(ny_));
    std::vector<Complex> drawn(net_.size());
    for (std::size_t f = 0; f < feeders_.size(); ++f) {
        const auto& fd = *feeders_[f];
        const auto& topo = fd.topology;
        if (!fd.energized) {
            for (std::size_t i = 0; i < topo.size(); ++i) {
                if (i == topo.root()) continue;
                put(g, node_slot_[f][i], node_voltage(y, f, i) - node_voltage(y, f, topo.parent(i)));
            }
            continue;
        }
        // KCL: current arriving from the parent minus current leaving.
        std::vector<Complex> net_out(topo.size());
        for (std::size_t i = 0; i < topo.size(); ++i) {
            net_out[i] = node_load_current(x, f, i, node_voltage(y, f, i));
        }
        for (std::size_t i = 0; i < topo.size(); ++i) {
            if (i == topo.root()) continue;
            const std::size_t p = topo.parent(i);
            const Complex branch = (node_voltage(y, f, p) - node_voltage(y, f, i)) / topo.impedance(i);
            net_out[i] -= branch;
            net_out[p] += branch;
        }
        for (std::size_t i = 0; i < topo.size(); ++i) {
            if (i == topo.root()) drawn[feeder_bus_index_[f]] += net_out[i];
            else put(g, node_slot_[f][i], net_out[i]);
        }
    }
    Vec gt;
    tdae_.add_network_residual(x.head(static_cast<Eigen::Index>(tdae_.num_states())),
                               y.head(static_cast<Eigen::Index>(2 * net_.size())), drawn, gt);
    g.head(gt.size()) = gt;
}

void MonolithicDae::pack(const TransmissionState& t, Vec& x, Vec& y) const {
    x.resize(static_cast<Eigen::Index>(nx_));
    y.resize(static_cast<Eigen::Index>(ny_));
    x.head(t.x.size()) = t.x;
    y.head(t.y.size()) = t.y;
    for (std::size_t m = 0; m < motors_.size(); ++m) {
        const auto o = static_cast<Eigen::Index>(tdae_.num_states() + 3 * m);
        const auto& s = feeders_[motors_[m].feeder]->components[motors_[m].component].state;
        x[o] = s.slip;
        x[o + 1] = s.e.real();
        x[o + 2] = s.e.imag();
    }
    for (std::size_t f = 0; f < feeders_.size(); ++f) {
        const auto& fd = *feeders_[f];
        const Complex root = get(t.y, feeder_bus_index_[f]);
        for (std::size_t i = 0; i < fd.topology.size(); ++i) {
            if (i == fd.topology.root()) continue;
            const bool have = fd.energized && fd.node_voltages.size() == fd.topology.size();
            put(y, node_slot_[f][i], have ? fd.node_voltages[i] : root);
        }
    }
}

void MonolithicDae::unpack(const Vec& x, const Vec& y, TransmissionState& t) const {
    t.x = x.head(static_cast<Eigen::Index>(tdae_.num_states()));
    t.y = y.head(static_cast<Eigen::Index>(2 * net_.size()));
    for (std::size_t m = 0; m < motors_.size(); ++m) {
        const auto o = static_cast<Eigen::Index>(tdae_.num_states() + 3 * m);
        auto& s = feeders_[motors_[m].feeder]->components[motors_[m].component].state;
        s.slip = x[o];
        s.e = {x[o + 1], x[o + 2]};
    }
    for (std::size_t f = 0; f < feeders_.size(); ++f) {
        auto& fd = *feeders_[f];
        const auto& topo = fd.topology;
        fd.node_voltages.assign(topo.size(), Complex{});
        fd.source_power = {};
        if (!fd.energized) continue;
        for (std::size_t i = 0; i < topo.size(); ++i) fd.node_voltages[i] = node_voltage(y, f, i);
        Complex i_root = node_load_current(x, f, topo.root(), fd.node_voltages[topo.root()]);
        for (std::size_t i = 0; i < topo.size(); ++i) {
            if (i != topo.root() && topo.parent(i) == topo.root()) {
                i_root += (fd.node_voltages[topo.root()] - fd.node_voltages[i]) / topo.impedance(i);
            }
        }
        fd.source_power = fd.node_voltages[topo.root()] * std::conj(i_root);
    }
}

}  // namespace cotds::power
