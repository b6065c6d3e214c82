#include "cotds/power/transmission.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace cotds::power {

TransmissionNetwork::TransmissionNetwork(double base_mva, std::vector<Bus> buses, std::vector<Branch> branches,
                                         std::vector<GeneratorUnit> generators)
    : base_mva_(base_mva), buses_(std::move(buses)), branches_(std::move(branches)),
      generators_(std::move(generators)) {
    if (!(base_mva_ > 0.0)) throw std::invalid_argument("network: base MVA must be positive");
    if (buses_.empty()) throw std::invalid_argument("network: no buses");
    int slack = 0;
    for (std::size_t i = 0; i < buses_.size(); ++i) {
        if (!index_.emplace(buses_[i].id, i).second) {
            throw std::invalid_argument("network: duplicate bus id " + std::to_string(buses_[i].id));
        }
        if (buses_[i].type == BusType::Slack) ++slack;
    }
    if (slack != 1) throw std::invalid_argument("network: exactly one slack bus required");

    const auto n = static_cast<Eigen::Index>(buses_.size());
    ybus_ = Eigen::MatrixXcd::Zero(n, n);
    for (const auto& br : branches_) {
        if (!has_bus(br.from) || !has_bus(br.to) || br.from == br.to) {
            throw std::invalid_argument("network: branch with unknown or identical end buses");
        }
        const Complex z{br.r, br.x};
        if (std::abs(z) == 0.0) throw std::invalid_argument("network: zero branch impedance");
        const Complex y = 1.0 / z;
        const Complex ysh{0.0, 0.5 * br.b};
        const auto i = static_cast<Eigen::Index>(index_of(br.from));
        const auto k = static_cast<Eigen::Index>(index_of(br.to));
        ybus_(i, i) += y + ysh;
        ybus_(k, k) += y + ysh;
        ybus_(i, k) -= y;
        ybus_(k, i) -= y;
    }

    std::set<int> gen_buses;
    for (auto& g : generators_) {
        if (!has_bus(g.bus)) throw std::invalid_argument("network: generator " + g.name + " on unknown bus");
        if (!gen_buses.insert(g.bus).second) {
            throw std::invalid_argument("network: more than one generator on bus " + std::to_string(g.bus));
        }
        if (buses_[index_of(g.bus)].type == BusType::PQ) {
            throw std::invalid_argument("network: generator " + g.name + " sits on a PQ bus");
        }
        g.params.validate();
    }
    for (const auto& b : buses_) {
        if (b.type != BusType::PQ && !gen_buses.count(b.id)) {
            throw std::invalid_argument("network: voltage-controlled bus " + std::to_string(b.id) + " has no generator");
        }
    }
}

std::size_t TransmissionNetwork::index_of(int bus_id) const {
    const auto it = index_.find(bus_id);
    if (it == index_.end()) throw std::out_of_range("unknown bus " + std::to_string(bus_id));
    return it->second;
}

// ------------------------------------------------------------ power flow

PowerFlowResult transmission_power_flow(const TransmissionNetwork& net, const std::vector<Complex>& bus_loads,
                                        const NewtonConfig& cfg) {
    const std::size_t n = net.size();
    if (bus_loads.size() != n) throw std::invalid_argument("power flow: one load entry per bus required");

    std::vector<double> vmag(n, 1.0), p_gen(n, 0.0);
    for (const auto& g : net.generators()) {
        const auto i = net.index_of(g.bus);
        vmag[i] = g.v_set;
        p_gen[i] = g.p_set;
    }
    // Unknowns: angle of every non-slack bus, magnitude of every PQ bus.
    std::vector<std::size_t> ang_idx, mag_idx;
    for (std::size_t i = 0; i < n; ++i) {
        if (net.buses()[i].type != BusType::Slack) ang_idx.push_back(i);
        if (net.buses()[i].type == BusType::PQ) mag_idx.push_back(i);
    }
    const auto na = static_cast<Eigen::Index>(ang_idx.size());
    const auto nz = na + static_cast<Eigen::Index>(mag_idx.size());
    const Eigen::MatrixXcd& ybus = net.admittance();

    Eigen::VectorXcd v(static_cast<Eigen::Index>(n));
    std::vector<double> ang(n, 0.0);
    auto assemble = [&](const Vec& z) {
        for (Eigen::Index k = 0; k < na; ++k) ang[ang_idx[static_cast<std::size_t>(k)]] = z[k];
        for (std::size_t k = 0; k < mag_idx.size(); ++k) vmag[mag_idx[k]] = z[na + static_cast<Eigen::Index>(k)];
        for (std::size_t i = 0; i < n; ++i) v[static_cast<Eigen::Index>(i)] = std::polar(vmag[i], ang[i]);
    };
    auto calc_power = [&]() {
        const Eigen::VectorXcd cur = ybus * v;
        return Eigen::VectorXcd(v.cwiseProduct(cur.conjugate()));
    };
    auto residual = [&](const Vec& z, Vec& r) {
        assemble(z);
        const Eigen::VectorXcd s = calc_power();
        r.resize(nz);
        for (Eigen::Index k = 0; k < na; ++k) {
            const auto i = ang_idx[static_cast<std::size_t>(k)];
            r[k] = s[static_cast<Eigen::Index>(i)].real() - (p_gen[i] - bus_loads[i].real());
        }
        for (std::size_t k = 0; k < mag_idx.size(); ++k) {
            const auto i = mag_idx[k];
            r[na + static_cast<Eigen::Index>(k)] = s[static_cast<Eigen::Index>(i)].imag() + bus_loads[i].imag();
        }
    };

    Vec z = Vec::Zero(nz);
    for (std::size_t k = 0; k < mag_idx.size(); ++k) z[na + static_cast<Eigen::Index>(k)] = 1.0;
    PowerFlowResult out;
    const NewtonReport rep = newton_solve(residual, z, cfg);
    assemble(z);
    const Eigen::VectorXcd s = calc_power();
    out.iterations = rep.iterations;
    out.mismatch = rep.residual_norm;
    out.buses.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        out.buses[i] = {vmag[i], ang[i], s[ii].real(), s[ii].imag()};
    }
    for (const auto& g : net.generators()) {
        const auto i = net.index_of(g.bus);
        out.gen_power.push_back(s[static_cast<Eigen::Index>(i)] + bus_loads[i]);
    }
    return out;
}

// --------------------------------------------------------------- DAE

TransmissionDae::TransmissionDae(const TransmissionNetwork& net, std::vector<int> slot_buses) : net_(net) {
    for (int b : slot_buses) slot_bus_index_.push_back(net_.index_of(b));
    for (const auto& g : net_.generators()) gen_bus_index_.push_back(net_.index_of(g.bus));
}

namespace {

Complex bus_voltage(const Vec& y, std::size_t i) {
    return {y[static_cast<Eigen::Index>(2 * i)], y[static_cast<Eigen::Index>(2 * i + 1)]};
}

}  // namespace

void TransmissionDae::derivatives(const Vec& x, const Vec& y, const Vec& /*u*/, Vec& dx) const {
    dx.resize(static_cast<Eigen::Index>(num_states()));
    const auto& gens = net_.generators();
    for (std::size_t k = 0; k < gens.size(); ++k) {
        const auto o = static_cast<Eigen::Index>(6 * k);
        generator_derivatives(GeneratorState::load(x, o), gens[k].params, bus_voltage(y, gen_bus_index_[k]), dx, o);
    }
}

void TransmissionDae::generator_injections(const Vec& x, const Vec& y, std::vector<Complex>& inj) const {
    inj.assign(net_.size(), Complex{});
    const auto& gens = net_.generators();
    for (std::size_t k = 0; k < gens.size(); ++k) {
        const auto o = static_cast<Eigen::Index>(6 * k);
        const auto b = gen_bus_index_[k];
        inj[b] += generator_stator(GeneratorState::load(x, o), gens[k].params, bus_voltage(y, b)).i_net;
    }
}

void TransmissionDae::add_network_residual(const Vec& x, const Vec& y, const std::vector<Complex>& drawn,
                                           Vec& g) const {
    const std::size_t n = net_.size();
    std::vector<Complex> inj;
    generator_injections(x, y, inj);
    const Eigen::MatrixXcd& ybus = net_.admittance();
    g.resize(static_cast<Eigen::Index>(2 * n));
    for (std::size_t i = 0; i < n; ++i) {
        Complex mis = -inj[i] + drawn[i];
        for (std::size_t k = 0; k < n; ++k) {
            mis += ybus(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) * bus_voltage(y, k);
        }
        g[static_cast<Eigen::Index>(2 * i)] = mis.real();
        g[static_cast<Eigen::Index>(2 * i + 1)] = mis.imag();
    }
}

void TransmissionDae::residual(const Vec& x, const Vec& y, const Vec& u, Vec& g) const {
    std::vector<Complex> drawn(net_.size(), Complex{});
    for (std::size_t s = 0; s < slot_bus_index_.size(); ++s) {
        const auto b = slot_bus_index_[s];
        const Complex load{u[static_cast<Eigen::Index>(2 * s)], u[static_cast<Eigen::Index>(2 * s + 1)]};
        drawn[b] += std::conj(load / bus_voltage(y, b));
    }
    add_network_residual(x, y, drawn, g);
}

TransmissionState transmission_equilibrium(TransmissionNetwork& net, const PowerFlowResult& pf) {
    auto& gens = net.generators();
    TransmissionState st;
    st.x.resize(static_cast<Eigen::Index>(6 * gens.size()));
    st.y.resize(static_cast<Eigen::Index>(2 * net.size()));
    for (std::size_t i = 0; i < net.size(); ++i) {
        const Complex v = pf.buses[i].phasor();
        st.y[static_cast<Eigen::Index>(2 * i)] = v.real();
        st.y[static_cast<Eigen::Index>(2 * i + 1)] = v.imag();
    }
    for (std::size_t k = 0; k < gens.size(); ++k) {
        const Complex v = pf.buses[net.index_of(gens[k].bus)].phasor();
        generator_equilibrium(gens[k].params, v, pf.gen_power[k]).store(st.x, static_cast<Eigen::Index>(6 * k));
    }
    return st;
}

TransmissionStepResult transmission_subsystem_step(const TransmissionDae& dae, const TransmissionState& state,
                                                   const std::vector<Complex>& interface_loads, double h,
                                                   const NewtonConfig& cfg) {
    if (interface_loads.size() != dae.slot_bus_index().size()) {
        throw std::invalid_argument("transmission step: one load per interface slot required");
    }
    Vec u(static_cast<Eigen::Index>(2 * interface_loads.size()));
    for (std::size_t s = 0; s < interface_loads.size(); ++s) {
        if (!std::isfinite(interface_loads[s].real()) || !std::isfinite(interface_loads[s].imag())) {
            throw std::invalid_argument("transmission step: non-finite interface load");
        }
        u[static_cast<Eigen::Index>(2 * s)] = interface_loads[s].real();
        u[static_cast<Eigen::Index>(2 * s + 1)] = interface_loads[s].imag();
    }
    const DaeStepResult r = trapezoidal_dae_step(dae, state.x, state.y, u, h, cfg);
    TransmissionStepResult out;
    out.state = {r.x, r.y};
    out.newton = r.newton;
    for (std::size_t i = 0; i < dae.network().size(); ++i) {
        if (std::abs(bus_voltage(r.y, i)) < kCollapseVoltage) out.collapse = true;
    }
    for (auto b : dae.slot_bus_index()) out.interface_voltages.push_back(bus_voltage(r.y, b));
    return out;
}

// --------------------------------------------------------------- adapter

TransmissionSubsystem::TransmissionSubsystem(std::shared_ptr<TransmissionNetwork> net, std::vector<int> slot_buses,
                                             TransmissionState initial, NewtonConfig cfg)
    : net_(std::move(net)), slot_buses_(std::move(slot_buses)), state_(std::move(initial)), cfg_(cfg) {
    for (int b : slot_buses_) {
        if (std::find(interface_buses_.begin(), interface_buses_.end(), b) == interface_buses_.end()) {
            interface_buses_.push_back(b);
        }
    }
    dae_ = std::make_unique<TransmissionDae>(*net_, slot_buses_);
    if (state_.x.size() != static_cast<Eigen::Index>(dae_->num_states()) ||
        state_.y.size() != static_cast<Eigen::Index>(dae_->num_algebraic())) {
        throw std::invalid_argument("transmission sub-system: initial state has wrong size");
    }
    u_ = Vec::Zero(static_cast<Eigen::Index>(input_size()));
}

std::vector<std::string> TransmissionSubsystem::output_names() const {
    std::vector<std::string> names;
    for (int b : interface_buses_) {
        names.push_back("bus" + std::to_string(b) + ".v_re");
        names.push_back("bus" + std::to_string(b) + ".v_im");
    }
    return names;
}

void TransmissionSubsystem::initialize(std::span<const double> inputs) { set_input(inputs); }

void TransmissionSubsystem::set_input(std::span<const double> inputs) {
    if (inputs.size() != input_size()) throw std::invalid_argument("transmission sub-system: input size mismatch");
    for (std::size_t i = 0; i < inputs.size(); ++i) u_[static_cast<Eigen::Index>(i)] = inputs[i];
}

std::vector<double> TransmissionSubsystem::current_input() const { return {u_.data(), u_.data() + u_.size()}; }

void TransmissionSubsystem::advance(double h) {
    std::vector<Complex> loads;
    for (std::size_t s = 0; s < slot_buses_.size(); ++s) {
        loads.emplace_back(u_[static_cast<Eigen::Index>(2 * s)], u_[static_cast<Eigen::Index>(2 * s + 1)]);
    }
    const auto r = transmission_subsystem_step(*dae_, state_, loads, h, cfg_);
    state_ = r.state;
    if (r.collapse) throw VoltageCollapse("transmission voltage collapse (bus voltage below 0.2 pu)");
}

std::vector<double> TransmissionSubsystem::output() const {
    std::vector<double> out;
    for (int b : interface_buses_) {
        const Complex v = bus_voltage(state_.y, net_->index_of(b));
        out.push_back(v.real());
        out.push_back(v.imag());
    }
    return out;
}

std::size_t TransmissionSubsystem::output_offset(int bus_id) const {
    const auto it = std::find(interface_buses_.begin(), interface_buses_.end(), bus_id);
    if (it == interface_buses_.end()) throw std::out_of_range("bus " + std::to_string(bus_id) + " is not an interface bus");
    return 2 * static_cast<std::size_t>(it - interface_buses_.begin());
}

std::map<std::string, double> TransmissionSubsystem::snapshot() const {
    std::map<std::string, double> out;
    transmission_snapshot(*net_, state_, out);
    return out;
}

void transmission_snapshot(const TransmissionNetwork& net, const TransmissionState& s,
                           std::map<std::string, double>& out) {
    for (std::size_t i = 0; i < net.size(); ++i) {
        const Complex v = bus_voltage(s.y, i);
        const std::string b = "bus" + std::to_string(net.buses()[i].id);
        out[b + ".v"] = std::abs(v);
        out[b + ".angle"] = std::arg(v);
    }
    const auto& gens = net.generators();
    for (std::size_t k = 0; k < gens.size(); ++k) {
        const auto g = GeneratorState::load(s.x, static_cast<Eigen::Index>(6 * k));
        out[gens[k].name + ".delta"] = g.delta;
        out[gens[k].name + ".omega"] = g.omega;
        out[gens[k].name + ".efd"] = g.efd;
        out[gens[k].name + ".pm"] = g.pm;
    }
}

}  // namespace cotds::power
