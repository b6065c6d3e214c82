#include "doctest.h"

#include <cmath>
#include <filesystem>

#include "cotds/engine.hpp"
#include "cotds/io.hpp"
#include "cotds/power/feeder.hpp"
#include "support/oracles.hpp"

using namespace cotds;
using namespace cotds::power;

namespace {

const std::filesystem::path kData = COTDS_DATA_DIR;

FeederTopology four_node() {
    return FeederTopology({{0, -1, 0, 0}, {1, 0, 0.004, 0.008}, {2, 1, 0.006, 0.010}, {3, 1, 0.005, 0.009}});
}

ZipLoadParams zip(double p, double q, double az, double ai, double ap) {
    ZipLoadParams z;
    z.p0 = p;
    z.q0 = q;
    z.a_z = z.b_z = az;
    z.a_i = z.b_i = ai;
    z.a_p = z.b_p = ap;
    return z;
}

DistributionFeeder static_feeder(double az, double ai, double ap) {
    DistributionFeeder f;
    f.name = "S";
    f.topology = four_node();
    for (int n = 1; n <= 3; ++n) {
        NodeComponent c;
        c.name = "zip_n" + std::to_string(n);
        c.node = n;
        c.zip = zip(0.2 * n, 0.05 * n, az, ai, ap);
        f.components.push_back(c);
    }
    return f;
}

}  // namespace

TEST_CASE("feeder topology") {
    CHECK_THROWS_AS(FeederTopology(std::vector<FeederNode>{}), std::invalid_argument);
    CHECK_THROWS_AS(FeederTopology({{0, -1}, {1, -1, 0.1, 0.1}}), std::invalid_argument);
    CHECK_THROWS_AS(FeederTopology({{0, -1}, {1, 7, 0.1, 0.1}}), std::invalid_argument);
    CHECK_THROWS_AS(FeederTopology({{0, -1}, {0, 0, 0.1, 0.1}}), std::invalid_argument);
    CHECK_THROWS_AS(FeederTopology({{0, -1}, {1, 2, 0.1, 0.1}, {2, 1, 0.1, 0.1}}), std::invalid_argument);
    CHECK_THROWS_AS(FeederTopology({{0, -1}, {1, 0, 0.0, 0.0}}), std::invalid_argument);
    const auto t = four_node();
    CHECK(t.root() == 0);
    CHECK(t.parent(3) == 1);
    CHECK(t.order().front() == 0);
    CHECK(t.index_of(2) == 2);
}

TEST_CASE("sweep power flow") {
    const auto t = four_node();
    const Complex v0 = std::polar(1.02, -0.1);
    SUBCASE("unloaded feeder") {
        const auto r = distribution_power_flow(t, v0, std::vector<Complex>(4));
        for (const auto& v : r.node_voltages) CHECK(v == v0);
        CHECK(r.source_power == Complex{});
    }
    SUBCASE("constant current at a single node") {
        const FeederTopology one({{0, -1}, {1, 0, 0.03, 0.07}});
        const Complex i{0.4, -0.2};
        const LoadModel load = [&](std::size_t n, Complex v) { return n == 1 ? v * std::conj(i) : Complex{}; };
        const auto r = distribution_power_flow(one, v0, load, {1e-14, 100});
        CHECK(std::abs((v0 - r.node_voltages[1]) - Complex{0.03, 0.07} * i) <= 1e-13);
    }
    SUBCASE("matches the dense nodal solve") {
        const std::vector<Complex> s{{0.1, 0.02}, {0.3, 0.1}, {0.25, 0.08}, {0.2, 0.05}};
        const auto r = distribution_power_flow(t, v0, s, {1e-12, 100});
        const auto ref = oracle::dense_nodal_solve(t, v0, [&](std::size_t i, Complex) { return s[i]; });
        for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(r.node_voltages[i] - ref[i]) <= 1e-8);
        // Source power is the loads plus the series losses.
        Complex losses{};
        for (std::size_t i = 1; i < 4; ++i) {
            const Complex ib = (r.node_voltages[t.parent(i)] - r.node_voltages[i]) / t.impedance(i);
            losses += t.impedance(i) * std::norm(ib);
        }
        CHECK(std::abs(r.source_power - (s[0] + s[1] + s[2] + s[3] + losses)) <= 1e-9);
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS((void)distribution_power_flow(t, Complex{}, std::vector<Complex>(4)), std::invalid_argument);
        CHECK_THROWS_AS((void)distribution_power_flow(t, v0, std::vector<Complex>(3)), std::invalid_argument);
        const std::vector<Complex> huge(4, Complex{50.0, 50.0});
        CHECK_THROWS_AS((void)distribution_power_flow(t, v0, huge), PowerFlowDivergence);
    }
}

TEST_CASE("testcase2 feeders against the dense nodal solve") {
    auto s = io::load_scenario(kData / "testcase2.json");
    auto model = engine::initialize_scenario(s);
    for (auto& f : model.feeders) {
        f.energized = true;
        for (auto& c : f.components) {
            if (c.kind == ComponentKind::Motor && c.state.slip == 1.0) c.state.e = {0.9, -0.05};
        }
        const Complex v0 = std::polar(0.99, -0.08);
        FeederPowerFlowConfig cfg{1e-12, 100};
        f.power_flow = cfg;
        const auto r = f.solve(v0);
        const auto ref = oracle::dense_nodal_solve(f.topology, v0, [&](std::size_t i, Complex v) {
            Complex sum{};
            for (const auto& c : f.components) {
                if (f.topology.index_of(c.node) == i) sum += c.power(v);
            }
            return sum;
        });
        for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(r.node_voltages[i] - ref[i]) <= 1e-8);
    }
}

TEST_CASE("feeder sub-system step") {
    SUBCASE("static feeder is invariant across steps") {
        auto f = static_feeder(1.0 / 3, 1.0 / 3, 1.0 / 3);
        const Complex v0{1.0, 0.0};
        const auto s1 = distribution_subsystem_step(f, v0, 0.006);
        const auto s2 = distribution_subsystem_step(f, v0, 0.006);
        CHECK(std::abs(s1 - s2) <= 1e-9);
        const auto r = distribution_power_flow(f.topology, v0, [&](std::size_t i, Complex v) {
            return i == 0 ? Complex{} : zip_power(f.components[i - 1].zip, std::abs(v));
        }, f.power_flow);
        CHECK(std::abs(s1 - r.source_power) <= 1e-8);
    }
    SUBCASE("constant-power loads barely react to a 5% voltage step") {
        auto f = static_feeder(0.0, 0.0, 1.0);
        const auto before = distribution_subsystem_step(f, {1.0, 0.0}, 0.006);
        const auto after = distribution_subsystem_step(f, {0.95, 0.0}, 0.006);
        double loads = 0.0;
        for (const auto& c : f.components) loads += c.zip.p0;
        // Only the series losses change.
        CHECK(std::abs(after.real() - before.real()) <= 0.2 * (before.real() - loads) + 1e-12);
        CHECK(after.real() > before.real());
    }
    SUBCASE("de-energized feeder draws nothing") {
        auto f = static_feeder(0.0, 0.0, 1.0);
        f.energized = false;
        CHECK(distribution_subsystem_step(f, {1.0, 0.0}, 0.006) == Complex{});
    }
    SUBCASE("inner repeats must be positive") {
        auto f = static_feeder(0.0, 0.0, 1.0);
        f.inner_repeats = 0;
        CHECK_THROWS_AS((void)distribution_subsystem_step(f, {1.0, 0.0}, 0.006), std::invalid_argument);
    }
}

TEST_CASE("node component step") {
    SUBCASE("ZIP component has no state") {
        NodeComponent c;
        c.zip = zip(0.5, 0.2, 0.5, 0.0, 0.5);
        const auto s = node_component_step(c, {0.9, 0.1}, 0.01, 1e-8);
        CHECK(s == zip_power(c.zip, std::abs(Complex{0.9, 0.1})));
    }
    SUBCASE("motor at equilibrium stays there") {
        NodeComponent c;
        c.kind = ComponentKind::Motor;
        c.motor.rating_mva = 12.0;
        const Complex v{0.99, -0.04};
        c.state = motor_equilibrium(c.motor, 0.012, v);
        const auto s0 = c.power(v);
        const auto before = c.state;
        const auto s1 = node_component_step(c, v, 0.006, 1e-8);
        CHECK(std::abs(c.state.slip - before.slip) <= 1e-8);
        CHECK(std::abs(c.state.e - before.e) <= 1e-8);
        CHECK(std::abs(s1 - s0) <= 1e-8);
    }
    SUBCASE("start-up at rated voltage against a fine reference") {
        NodeComponent c;
        c.kind = ComponentKind::Motor;
        c.motor.rating_mva = 10.0;
        const Complex v{1.0, 0.0};
        (void)motor_equilibrium(c.motor, 0.015, v);
        c.state = InductionMotorState::standstill(true);
        // Classic fourth-order Runge-Kutta at h = 1e-4 on the same equations.
        auto deriv = [&](const std::array<double, 3>& x) {
            const auto d = induction_motor_derivatives({x[0], {x[1], x[2]}, true}, c.motor, v);
            return std::array<double, 3>{d.d_slip, d.d_e.real(), d.d_e.imag()};
        };
        std::array<double, 3> ref{1.0, 0.0, 0.0};
        auto rk4 = [&](double h) {
            auto add = [](std::array<double, 3> a, const std::array<double, 3>& b, double k) {
                for (int i = 0; i < 3; ++i) a[i] += k * b[i];
                return a;
            };
            const auto k1 = deriv(ref);
            const auto k2 = deriv(add(ref, k1, h / 2));
            const auto k3 = deriv(add(ref, k2, h / 2));
            const auto k4 = deriv(add(ref, k3, h));
            for (int i = 0; i < 3; ++i) ref[i] += h / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
        };
        double prev = c.state.slip;
        bool monotone = true;
        double worst = 0.0;
        int steps = 0;
        while (c.state.slip > 0.05 && steps < 5000) {
            (void)node_component_step(c, v, 0.006, 1e-8);
            for (int k = 0; k < 60; ++k) rk4(1e-4);
            monotone = monotone && c.state.slip < prev;
            prev = c.state.slip;
            worst = std::max(worst, std::abs(c.state.slip - ref[0]));
            ++steps;
        }
        CHECK(monotone);
        CHECK(c.state.slip <= 0.05);
        CHECK(worst <= 1e-5);
    }
}

TEST_CASE("feeder events") {
    auto s = io::load_scenario(kData / "testcase1.json");
    auto f = engine::build_feeder(s.feeders[1], s.composition, 100.0, s.run);
    const auto k = f.component_index("IM2_n1");
    CHECK_FALSE(f.components[k].state.connected);
    apply_feeder_event(f, {"connect_motor", {{"component", "IM2_n1"}}});
    CHECK(f.components[k].state.connected);
    CHECK(f.components[k].state.slip == 1.0);
    apply_feeder_event(f, {"disconnect_motor", {{"component", "IM2_n1"}}});
    CHECK_FALSE(f.components[k].state.connected);
    apply_feeder_event(f, {"disconnect_feeder", {}});
    CHECK_FALSE(f.energized);
    apply_feeder_event(f, {"connect_feeder", {}});
    CHECK(f.energized);
    CHECK_THROWS_AS(apply_feeder_event(f, {"connect_motor", {{"component", "zip_n1"}}}), std::invalid_argument);
    CHECK_THROWS_AS(apply_feeder_event(f, {"connect_motor", {}}), std::invalid_argument);
    CHECK_THROWS_AS(apply_feeder_event(f, {"explode", {}}), std::invalid_argument);
}

TEST_CASE("testcase1 feeder follows a fine DAE reference after a motor start") {
    auto s = io::load_scenario(kData / "testcase1.json");
    auto model = engine::initialize_scenario(s);
    auto f = model.feeders[1];
    const Complex v0 = model.init.power_flow.buses[model.network->index_of(6)].phasor();
    apply_feeder_event(f, {"connect_motor", {{"component", "IM2_n1"}}});
    f.refresh(v0);
    auto ref = f;
    ref.power_flow = {1e-13, 100};

    // Reference: every motor state integrated with RK4 at h = 1e-4 and the
    // node voltages re-solved at each stage from a dense nodal solve.
    std::vector<std::size_t> motors;
    for (std::size_t c = 0; c < ref.components.size(); ++c) {
        if (ref.components[c].kind == ComponentKind::Motor && ref.components[c].state.connected) motors.push_back(c);
    }
    auto nodal = [&](const DistributionFeeder& g) {
        return oracle::dense_nodal_solve(g.topology, v0, [&](std::size_t i, Complex v) {
            Complex sum{};
            for (const auto& c : g.components) {
                if (g.topology.index_of(c.node) == i) sum += c.power(v);
            }
            return sum;
        });
    };
    auto deriv = [&](const DistributionFeeder& g) {
        const auto v = nodal(g);
        std::vector<MotorDerivatives> d;
        for (auto c : motors) {
            const auto& comp = g.components[c];
            d.push_back(induction_motor_derivatives(comp.state, comp.motor, v[g.topology.index_of(comp.node)]));
        }
        return d;
    };
    auto shifted = [&](const DistributionFeeder& g, const std::vector<MotorDerivatives>& d, double h) {
        auto out = g;
        for (std::size_t m = 0; m < motors.size(); ++m) {
            out.components[motors[m]].state.slip += h * d[m].d_slip;
            out.components[motors[m]].state.e += h * d[m].d_e;
        }
        return out;
    };
    auto source = [&](const DistributionFeeder& g) {
        const auto v = nodal(g);
        Complex i_root{};
        for (std::size_t i = 0; i < g.topology.size(); ++i) {
            if (i != g.topology.root() && g.topology.parent(i) == g.topology.root()) {
                i_root += (v0 - v[i]) / g.topology.impedance(i);
            }
        }
        for (const auto& c : g.components) {
            if (g.topology.index_of(c.node) == g.topology.root()) i_root += std::conj(c.power(v0) / v0);
        }
        return v0 * std::conj(i_root);
    };

    double worst = 0.0;
    const double h = 1e-4;
    for (int step = 1; step <= 500; ++step) {  // 3 s
        (void)distribution_subsystem_step(f, v0, 0.006);
        for (int k = 0; k < 60; ++k) {
            const auto k1 = deriv(ref);
            const auto k2 = deriv(shifted(ref, k1, h / 2));
            const auto k3 = deriv(shifted(ref, k2, h / 2));
            const auto k4 = deriv(shifted(ref, k3, h));
            for (std::size_t m = 0; m < motors.size(); ++m) {
                auto& st = ref.components[motors[m]].state;
                st.slip += h / 6 * (k1[m].d_slip + 2 * k2[m].d_slip + 2 * k3[m].d_slip + k4[m].d_slip);
                st.e += h / 6 * (k1[m].d_e + 2.0 * k2[m].d_e + 2.0 * k3[m].d_e + k4[m].d_e);
            }
        }
        if (step % 10 == 0) {
            const auto sr = source(ref);
            worst = std::max(worst, std::abs(f.source_power - sr) / std::abs(sr));
        }
    }
    CHECK(worst <= 0.005);
}
