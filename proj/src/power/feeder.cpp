#include "cotds/power/feeder.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

namespace cotds::power {

FeederTopology::FeederTopology(std::vector<FeederNode> nodes) : nodes_(std::move(nodes)) {
    if (nodes_.empty()) throw std::invalid_argument("feeder: no nodes");
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (!index_.emplace(nodes_[i].id, i).second) {
            throw std::invalid_argument("feeder: duplicate node id " + std::to_string(nodes_[i].id));
        }
    }
    int roots = 0;
    parent_.resize(nodes_.size());
    std::vector<std::vector<std::size_t>> children(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const auto& n = nodes_[i];
        if (n.parent < 0) {
            ++roots;
            root_ = i;
            parent_[i] = i;
            continue;
        }
        const auto it = index_.find(n.parent);
        if (it == index_.end()) {
            throw std::invalid_argument("feeder: node " + std::to_string(n.id) + " has unknown parent");
        }
        if (!(n.r >= 0.0) || std::abs(Complex{n.r, n.x}) == 0.0) {
            throw std::invalid_argument("feeder: node " + std::to_string(n.id) + " has an invalid branch impedance");
        }
        parent_[i] = it->second;
        children[it->second].push_back(i);
    }
    if (roots != 1) throw std::invalid_argument("feeder: exactly one substation node required");
    std::deque<std::size_t> queue{root_};
    while (!queue.empty()) {
        const auto i = queue.front();
        queue.pop_front();
        order_.push_back(i);
        for (auto c : children[i]) queue.push_back(c);
    }
    if (order_.size() != nodes_.size()) throw std::invalid_argument("feeder: nodes unreachable from the substation");
}

std::size_t FeederTopology::index_of(int node_id) const {
    const auto it = index_.find(node_id);
    if (it == index_.end()) throw std::out_of_range("unknown feeder node " + std::to_string(node_id));
    return it->second;
}

FeederPowerFlowResult distribution_power_flow(const FeederTopology& feeder, Complex v_substation,
                                              const LoadModel& loads, const FeederPowerFlowConfig& cfg,
                                              const std::vector<Complex>* warm_start) {
    if (!(std::abs(v_substation) > 0.0) || !std::isfinite(std::abs(v_substation))) {
        throw std::invalid_argument("feeder power flow: substation voltage must be finite and non-zero");
    }
    const std::size_t n = feeder.size();
    std::vector<Complex> v(n, v_substation);
    if (warm_start && warm_start->size() == n) v = *warm_start;
    v[feeder.root()] = v_substation;
    std::vector<Complex> branch(n);
    const auto& order = feeder.order();
    FeederPowerFlowResult out;
    for (int it = 1; it <= cfg.max_iterations; ++it) {
        for (std::size_t i = 0; i < n; ++i) branch[i] = std::conj(loads(i, v[i]) / v[i]);
        for (auto k = order.size(); k-- > 1;) {
            const auto i = order[k];
            branch[feeder.parent(i)] += branch[i];
        }
        double change = 0.0;
        for (std::size_t k = 1; k < order.size(); ++k) {
            const auto i = order[k];
            const Complex vn = v[feeder.parent(i)] - feeder.impedance(i) * branch[i];
            change = std::max(change, std::abs(vn - v[i]));
            v[i] = vn;
        }
        if (!std::isfinite(change)) break;
        if (change <= cfg.tolerance) {
            out.iterations = it;
            out.source_power = v_substation * std::conj(branch[feeder.root()]);
            out.node_voltages = std::move(v);
            return out;
        }
    }
    throw PowerFlowDivergence("feeder power flow did not converge in " + std::to_string(cfg.max_iterations) +
                              " iterations");
}

FeederPowerFlowResult distribution_power_flow(const FeederTopology& feeder, Complex v_substation,
                                              const std::vector<Complex>& node_powers,
                                              const FeederPowerFlowConfig& cfg) {
    if (node_powers.size() != feeder.size()) throw std::invalid_argument("feeder power flow: one power per node");
    return distribution_power_flow(
        feeder, v_substation, [&](std::size_t i, Complex) { return node_powers[i]; }, cfg);
}

// ------------------------------------------------------------ components

Complex NodeComponent::power(Complex v) const {
    if (kind == ComponentKind::Zip) return zip_power(zip, std::abs(v));
    return motor_power_injection(state, motor, v);
}

namespace {

Vec pack(const InductionMotorState& s) { return Vec{{s.slip, s.e.real(), s.e.imag()}}; }

}  // namespace

Complex node_component_step(NodeComponent& c, Complex v_node, double h, double tol, int n_micro) {
    if (n_micro < 1) throw std::invalid_argument("component step: n_micro must be >= 1");
    if (c.kind == ComponentKind::Motor && c.state.connected) {
        const InductionMotorParams& p = c.motor;
        const OdeRhs rhs = [&p, v_node](const Vec& x, const Vec&, Vec& dx) {
            const InductionMotorState s{x[0], {x[1], x[2]}, true};
            const auto d = induction_motor_derivatives(s, p, v_node);
            dx.resize(3);
            dx << d.d_slip, d.d_e.real(), d.d_e.imag();
        };
        Vec x = pack(c.state);
        for (int k = 0; k < n_micro; ++k) x = rk_component_step(rhs, x, Vec(), h / n_micro, tol);
        c.state.slip = x[0];
        c.state.e = {x[1], x[2]};
    }
    return c.power(v_node);
}

// ---------------------------------------------------------------- feeder

std::size_t DistributionFeeder::component_index(const std::string& comp) const {
    for (std::size_t k = 0; k < components.size(); ++k) {
        if (components[k].name == comp) return k;
    }
    throw std::invalid_argument("feeder " + name + ": unknown component '" + comp + "'");
}

FeederPowerFlowResult DistributionFeeder::solve(Complex v_substation) const {
    if (!energized) {
        FeederPowerFlowResult r;
        r.node_voltages.assign(topology.size(), Complex{});
        return r;
    }
    std::vector<std::vector<const NodeComponent*>> at(topology.size());
    for (const auto& c : components) at[topology.index_of(c.node)].push_back(&c);
    const LoadModel model = [&at](std::size_t i, Complex v) {
        Complex s{};
        for (const auto* c : at[i]) s += c->power(v);
        return s;
    };
    // A stored de-energized solution (all zeros) is no usable seed.
    const bool warm = node_voltages.size() == topology.size() &&
                      std::none_of(node_voltages.begin(), node_voltages.end(), [](Complex v) { return v == Complex{}; });
    return distribution_power_flow(topology, v_substation, model, power_flow, warm ? &node_voltages : nullptr);
}

void DistributionFeeder::refresh(Complex v_substation) {
    auto r = solve(v_substation);
    node_voltages = std::move(r.node_voltages);
    source_power = r.source_power;
}

Complex distribution_subsystem_step(DistributionFeeder& feeder, Complex v_substation, double h) {
    if (feeder.inner_repeats < 1) throw std::invalid_argument("feeder: inner_repeats must be >= 1");
    if (!feeder.energized) {
        feeder.refresh(v_substation);
        return feeder.source_power;
    }
    const std::vector<NodeComponent> start = feeder.components;
    for (int rep = 0; rep < feeder.inner_repeats; ++rep) {
        // (a) node voltages with the latest component states; from the
        // second repeat on the states at the end of the step are used.
        feeder.refresh(v_substation);
        // (b) every component from the start-of-step state.
        feeder.components = start;
        for (auto& c : feeder.components) {
            (void)node_component_step(c, feeder.node_voltages[feeder.topology.index_of(c.node)], h,
                                      feeder.rk_tolerance, feeder.n_micro);
        }
    }
    // (c) source power with the updated states.
    feeder.refresh(v_substation);
    return feeder.source_power;
}

void apply_feeder_event(DistributionFeeder& feeder, const cosim::EventAction& action) {
    auto motor = [&]() -> NodeComponent& {
        const auto it = action.args.find("component");
        if (it == action.args.end()) throw std::invalid_argument(action.name + ": missing 'component' argument");
        auto& c = feeder.components[feeder.component_index(it->second)];
        if (c.kind != ComponentKind::Motor) throw std::invalid_argument(action.name + ": '" + c.name + "' is not a motor");
        return c;
    };
    if (action.name == "connect_motor") {
        auto& c = motor();
        if (!c.state.connected) c.state = InductionMotorState::standstill(true);
    } else if (action.name == "disconnect_motor") {
        motor().state = InductionMotorState::standstill(false);
    } else if (action.name == "connect_feeder") {
        if (!feeder.energized) {
            feeder.energized = true;
            feeder.node_voltages.clear();
            for (auto& c : feeder.components) {
                if (c.kind == ComponentKind::Motor && c.state.connected) c.state = InductionMotorState::standstill(true);
            }
        }
    } else if (action.name == "disconnect_feeder") {
        feeder.energized = false;
    } else {
        throw std::invalid_argument("feeder " + feeder.name + ": unsupported event action '" + action.name + "'");
    }
}

void feeder_snapshot(const DistributionFeeder& feeder, std::map<std::string, double>& out) {
    out["source.p"] = feeder.source_power.real();
    out["source.q"] = feeder.source_power.imag();
    for (std::size_t i = 0; i < feeder.topology.size(); ++i) {
        const Complex v = i < feeder.node_voltages.size() ? feeder.node_voltages[i] : Complex{};
        out["node" + std::to_string(feeder.topology.nodes()[i].id) + ".v"] = std::abs(v);
    }
    for (const auto& c : feeder.components) {
        const auto i = feeder.topology.index_of(c.node);
        const Complex v = i < feeder.node_voltages.size() ? feeder.node_voltages[i] : Complex{};
        const Complex s = feeder.energized ? c.power(v) : Complex{};
        out[c.name + ".p"] = s.real();
        out[c.name + ".q"] = s.imag();
        if (c.kind == ComponentKind::Motor) out[c.name + ".slip"] = c.state.slip;
    }
}

// --------------------------------------------------------------- adapter

DistributionSubsystem::DistributionSubsystem(DistributionFeeder feeder) : feeder_(std::move(feeder)) {
    if (feeder_.name.empty()) throw std::invalid_argument("feeder needs a name");
    for (const auto& c : feeder_.components) (void)feeder_.topology.index_of(c.node);
}

void DistributionSubsystem::initialize(std::span<const double> inputs) {
    set_input(inputs);
    feeder_.refresh(v_sub_);
}

void DistributionSubsystem::set_input(std::span<const double> inputs) {
    if (inputs.size() != 2) throw std::invalid_argument("feeder sub-system: input size mismatch");
    v_sub_ = {inputs[0], inputs[1]};
}

void DistributionSubsystem::advance(double h) { (void)distribution_subsystem_step(feeder_, v_sub_, h); }

std::vector<double> DistributionSubsystem::output() const {
    return {feeder_.source_power.real(), feeder_.source_power.imag()};
}

std::map<std::string, double> DistributionSubsystem::snapshot() const {
    std::map<std::string, double> out;
    feeder_snapshot(feeder_, out);
    return out;
}

void DistributionSubsystem::apply_event(const cosim::EventAction& action) {
    apply_feeder_event(feeder_, action);
    feeder_.refresh(v_sub_);
}

}  // namespace cotds::power
