#include "doctest.h"

#include <cmath>

#include "cotds/power/components.hpp"

using namespace cotds;
using namespace cotds::power;

namespace {

InductionMotorParams motor(double rating = 10.0) {
    InductionMotorParams p;
    p.rating_mva = rating;
    p.base_mva = 100.0;
    return p;
}

}  // namespace

TEST_CASE("ZIP load") {
    ZipLoadParams z;
    z.p0 = 0.8;
    z.q0 = 0.3;
    z.a_z = z.a_i = z.b_z = z.b_i = 1.0 / 3.0;
    z.a_p = z.b_p = 1.0 - 2.0 / 3.0;
    const auto s0 = zip_power(z, 1.0);
    CHECK(s0.real() == doctest::Approx(0.8));
    CHECK(s0.imag() == doctest::Approx(0.3));
    CHECK(zip_power(z, 0.95).real() == doctest::Approx(0.8 * (0.9025 + 0.95 + 1.0) / 3.0));
    CHECK((0.9025 + 0.95 + 1.0) / 3.0 == doctest::Approx(0.950833).epsilon(1e-6));

    ZipLoadParams pure_z;
    pure_z.p0 = 2.0;
    pure_z.a_z = 1.0;
    pure_z.a_p = 0.0;
    CHECK(zip_power(pure_z, 0.9).real() == doctest::Approx(0.81 * 2.0));

    ZipLoadParams bad = z;
    bad.a_p = 0.5;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = z;
    bad.v0 = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("motor power injection") {
    const auto p = motor();
    SUBCASE("no current when e equals v") {
        const Complex v{0.98, -0.1};
        const auto s = motor_power_injection({0.02, v, true}, p, v);
        CHECK(s.real() == 0.0);
        CHECK(s.imag() == 0.0);
    }
    SUBCASE("disconnected motor draws nothing") {
        const auto s = motor_power_injection(InductionMotorState::standstill(false), p, {1.0, 0.0});
        CHECK(s == Complex{0.0, 0.0});
    }
    SUBCASE("start-up is inductive") {
        const auto s = motor_power_injection(InductionMotorState::standstill(true), p, {1.0, 0.0});
        CHECK(s.imag() > 0.0);
        CHECK(s.imag() > 3.0 * s.real());
    }
    SUBCASE("steady state reproduces the equivalent circuit") {
        for (double slip : {1.0, 0.3, 0.02}) {
            auto q = p;
            const Complex v{1.0, 0.0};
            const auto st = motor_equilibrium(q, slip, v);
            // Equivalent circuit computed from the branch impedances.
            const Complex rotor{q.rr / slip, q.xr};
            const Complex z = Complex{q.rs, q.xs} + Complex{0.0, q.xm} * rotor / (Complex{0.0, q.xm} + rotor);
            const Complex s_ref = v * std::conj(v / z) * q.scale();
            const auto s = motor_power_injection(st, q, v);
            CHECK(std::abs(s - s_ref) <= 1e-8);
            const auto d = induction_motor_derivatives(st, q, v);
            CHECK(std::abs(d.d_e) <= 1e-8);
            // A quadratic load has no torque at standstill to balance.
            if (slip < 1.0) CHECK(std::abs(d.d_slip) <= 1e-8);
        }
    }
    SUBCASE("energy balance at a running point") {
        auto q = p;
        const Complex v{0.97, 0.05};
        const double slip = 0.015;
        const auto st = motor_equilibrium(q, slip, v);
        const Complex zr{q.rr / slip, q.xr};
        const Complex zm{0.0, q.xm};
        const Complex i = v / (Complex{q.rs, q.xs} + zm * zr / (zm + zr));
        const Complex ir = i * zm / (zm + zr);
        const double p_mech = q.mechanical_torque(slip) * (1.0 - slip);
        const double losses = std::norm(i) * q.rs + std::norm(ir) * q.rr;
        CHECK(std::abs(motor_power_injection(st, q, v).real() / q.scale() - (p_mech + losses)) <= 1e-6);
    }
}

TEST_CASE("motor dynamics") {
    auto p = motor();
    const Complex v{1.0, 0.0};
    const double slip = motor_slip_for_power(p, 0.07, v);
    CHECK(motor_steady_power(p, slip, v).real() == doctest::Approx(0.07).epsilon(1e-9));
    const auto st = motor_equilibrium(p, slip, v);
    const auto d = induction_motor_derivatives(st, p, v);
    CHECK(std::abs(d.d_slip) <= 1e-8);
    CHECK(std::abs(d.d_e) <= 1e-8);

    SUBCASE("accelerates from standstill when the load is below breakdown") {
        // Torque curve from the equivalent circuit: standstill torque
        // |Ir|^2 rr must exceed the load torque there (zero for quadratic).
        const Complex zr{p.rr, p.xr};
        const Complex zm{0.0, p.xm};
        const Complex i = v / (Complex{p.rs, p.xs} + zm * zr / (zm + zr));
        const double t_start = std::norm(i * zm / (zm + zr)) * p.rr;
        CHECK(t_start > p.mechanical_torque(1.0));
        // The transient EMF at standstill settles in a few rotor periods.
        InductionMotorState s = InductionMotorState::standstill(true);
        const OdeRhs rhs = [&](const Vec& x, const Vec&, Vec& dx) {
            const auto dd = induction_motor_derivatives({x[0], {x[1], x[2]}, true}, p, v);
            dx.resize(3);
            dx << 0.0, dd.d_e.real(), dd.d_e.imag();
        };
        const Vec x = rk_component_step(rhs, Vec{{1.0, 0.0, 0.0}}, Vec(), 0.5, 1e-9);
        s.e = {x[1], x[2]};
        CHECK(induction_motor_derivatives(s, p, v).d_slip < 0.0);
        CHECK(motor_electrical_torque(s, p, v) == doctest::Approx(t_start).epsilon(1e-3));
    }
    SUBCASE("no operating point above the peak power") {
        CHECK_THROWS_AS((void)motor_slip_for_power(p, 10.0, v), InfeasibleOperatingPoint);
    }
    SUBCASE("constant torque load") {
        auto c = motor();
        c.torque = TorqueModel::Constant;
        const auto sc = motor_equilibrium(c, 0.02, v);
        CHECK(c.mechanical_torque(0.5) == c.load_torque);
        CHECK(std::abs(induction_motor_derivatives(sc, c, v).d_slip) <= 1e-8);
    }
}

TEST_CASE("generator equilibrium") {
    GeneratorParams g;
    g.h = 6.4;
    g.d = 2.0;
    g.xd = 0.8958;
    g.xq = 0.8645;
    g.xd_p = 0.1198;
    g.xq_p = 0.1969;
    g.td0_p = 6.0;
    g.tq0_p = 0.535;
    const Complex v = std::polar(1.025, 0.1620);
    const Complex s{1.63, 0.067};
    const auto st = generator_equilibrium(g, v, s);
    Vec dx(GeneratorState::kSize);
    generator_derivatives(st, g, v, dx, 0);
    CHECK(dx.cwiseAbs().maxCoeff() <= 1e-8);
    const auto stator = generator_stator(st, g, v);
    const Complex s_out = v * std::conj(stator.i_net);
    CHECK(std::abs(s_out - s) <= 1e-9);
    CHECK(stator.pe == doctest::Approx(st.pm).epsilon(1e-9));
    CHECK(g.p_ref == doctest::Approx(st.pm));
    CHECK(st.omega == 1.0);

    Vec packed(8);
    st.store(packed, 2);
    const auto back = GeneratorState::load(packed, 2);
    CHECK(back.delta == st.delta);
    CHECK(back.efd == st.efd);
}
