#include "cotds/power/components.hpp"

#include <algorithm>
#include <numbers>

namespace cotds::power {

namespace {

constexpr double kHalfPi = 0.5 * std::numbers::pi;

bool fraction_ok(double a, double b, double c) {
    return a >= 0.0 && b >= 0.0 && c >= 0.0 && std::abs(a + b + c - 1.0) <= 1e-12;
}

}  // namespace

void ZipLoadParams::validate() const {
    if (!(v0 > 0.0)) throw std::invalid_argument("ZIP load: v0 must be positive");
    if (!fraction_ok(a_z, a_i, a_p)) throw std::invalid_argument("ZIP load: P fractions must be >= 0 and sum to 1");
    if (!fraction_ok(b_z, b_i, b_p)) throw std::invalid_argument("ZIP load: Q fractions must be >= 0 and sum to 1");
}

Complex zip_power(const ZipLoadParams& params, double v) {
    const double r = v / params.v0;
    const double r2 = r * r;
    return {params.p0 * (params.a_z * r2 + params.a_i * r + params.a_p),
            params.q0 * (params.b_z * r2 + params.b_i * r + params.b_p)};
}

// ---------------------------------------------------------------- motor

void InductionMotorParams::validate() const {
    if (!(rs >= 0.0 && xs > 0.0 && xm > 0.0 && rr > 0.0 && xr > 0.0)) {
        throw std::invalid_argument("induction motor: impedances must be positive (rs >= 0)");
    }
    if (!(h > 0.0)) throw std::invalid_argument("induction motor: inertia must be positive");
    if (!(rating_mva > 0.0) || !(base_mva > 0.0)) throw std::invalid_argument("induction motor: bad MVA base");
}

double InductionMotorParams::mechanical_torque(double slip) const noexcept {
    if (torque == TorqueModel::Constant) return load_torque;
    const double w = 1.0 - slip;
    return load_torque * w * w;
}

Complex InductionMotorParams::equivalent_impedance(double slip) const {
    const Complex rotor{rr / slip, xr};
    const Complex mag{0.0, xm};
    return Complex{rs, xs} + mag * rotor / (mag + rotor);
}

Complex motor_current(const InductionMotorState& s, const InductionMotorParams& p, Complex v_node) {
    if (!s.connected) return {0.0, 0.0};
    return (v_node - s.e) / p.z_transient() * p.scale();
}

Complex motor_power_injection(const InductionMotorState& s, const InductionMotorParams& p, Complex v_node) {
    return v_node * std::conj(motor_current(s, p, v_node));
}

double motor_electrical_torque(const InductionMotorState& s, const InductionMotorParams& p, Complex v_node) {
    const Complex i = (v_node - s.e) / p.z_transient();
    return (s.e * std::conj(i)).real();
}

MotorDerivatives induction_motor_derivatives(const InductionMotorState& s, const InductionMotorParams& p,
                                             Complex v_node) {
    const Complex i = (v_node - s.e) / p.z_transient();
    const Complex j{0.0, 1.0};
    MotorDerivatives d;
    d.d_e = -j * p.omega_base * s.slip * s.e - (s.e - j * (p.x_open() - p.x_transient()) * i) / p.t_open();
    const double te = (s.e * std::conj(i)).real();
    d.d_slip = (p.mechanical_torque(s.slip) - te) / (2.0 * p.h);
    return d;
}

Complex motor_steady_power(const InductionMotorParams& p, double slip, Complex v_node) {
    const Complex i = v_node / p.equivalent_impedance(slip);
    return v_node * std::conj(i) * p.scale();
}

double motor_slip_for_power(const InductionMotorParams& p, double p_target, Complex v_node) {
    constexpr int kScan = 4000;
    constexpr double kMinSlip = 1e-9;
    double s_peak = kMinSlip;
    double p_peak = -1.0;
    for (int k = 0; k <= kScan; ++k) {
        const double s = std::pow(10.0, -7.0 + 7.0 * k / kScan);
        const double pe = motor_steady_power(p, s, v_node).real();
        if (pe > p_peak) {
            p_peak = pe;
            s_peak = s;
        }
    }
    const double p_low = motor_steady_power(p, kMinSlip, v_node).real();
    if (p_target > p_peak || p_target < p_low) {
        throw InfeasibleOperatingPoint("no motor slip delivers the requested power at this voltage");
    }
    double lo = kMinSlip;
    double hi = s_peak;
    for (int k = 0; k < 200 && hi - lo > 1e-15; ++k) {
        const double mid = 0.5 * (lo + hi);
        (motor_steady_power(p, mid, v_node).real() < p_target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

InductionMotorState motor_equilibrium(InductionMotorParams& p, double slip, Complex v_node) {
    const Complex i = v_node / p.equivalent_impedance(slip);
    InductionMotorState s{slip, v_node - p.z_transient() * i, true};
    const double te = motor_electrical_torque(s, p, v_node);
    const double w = 1.0 - slip;
    p.load_torque = p.torque == TorqueModel::Constant ? te : te / (w * w);
    return s;
}

// ------------------------------------------------------------ generator

void GeneratorParams::validate() const {
    if (!(h > 0.0)) throw std::invalid_argument("generator: inertia must be positive");
    if (!(td0_p > 0.0 && tq0_p > 0.0 && te > 0.0 && tg > 0.0)) {
        throw std::invalid_argument("generator: time constants must be positive");
    }
    if (!(xd_p > 0.0 && xq_p > 0.0 && xd >= xd_p && xq >= xq_p)) {
        throw std::invalid_argument("generator: reactances must satisfy x >= x' > 0");
    }
    if (!(droop > 0.0)) throw std::invalid_argument("generator: droop must be positive");
}

void GeneratorState::store(Vec& x, Eigen::Index o) const {
    x[o] = delta;
    x[o + 1] = omega;
    x[o + 2] = eq_p;
    x[o + 3] = ed_p;
    x[o + 4] = efd;
    x[o + 5] = pm;
}

GeneratorState GeneratorState::load(const Vec& x, Eigen::Index o) {
    return {x[o], x[o + 1], x[o + 2], x[o + 3], x[o + 4], x[o + 5]};
}

StatorSolution generator_stator(const GeneratorState& s, const GeneratorParams& p, Complex v_term) {
    const Complex to_machine = std::polar(1.0, -(s.delta - kHalfPi));
    const Complex vdq = v_term * to_machine;
    StatorSolution out{};
    out.vd = vdq.real();
    out.vq = vdq.imag();
    out.id = (s.eq_p - out.vq) / p.xd_p;
    out.iq = (out.vd - s.ed_p) / p.xq_p;
    out.i_net = Complex{out.id, out.iq} / to_machine;
    out.pe = out.vd * out.id + out.vq * out.iq;
    return out;
}

void generator_derivatives(const GeneratorState& s, const GeneratorParams& p, Complex v_term, Vec& dx,
                           Eigen::Index o) {
    const StatorSolution st = generator_stator(s, p, v_term);
    const double dw = s.omega - 1.0;
    dx[o] = p.omega_base * dw;
    dx[o + 1] = (s.pm - st.pe - p.d * dw) / (2.0 * p.h);
    dx[o + 2] = (-s.eq_p - (p.xd - p.xd_p) * st.id + s.efd) / p.td0_p;
    dx[o + 3] = (-s.ed_p + (p.xq - p.xq_p) * st.iq) / p.tq0_p;
    dx[o + 4] = (p.ke * (p.v_ref - std::abs(v_term)) - s.efd) / p.te;
    dx[o + 5] = (p.p_ref - dw / p.droop - s.pm) / p.tg;
}

GeneratorState generator_equilibrium(GeneratorParams& p, Complex v_term, Complex s_gen) {
    const Complex i = std::conj(s_gen / v_term);
    const Complex eq = v_term + Complex{0.0, p.xq} * i;
    GeneratorState s;
    s.delta = std::arg(eq);
    const Complex to_machine = std::polar(1.0, -(s.delta - kHalfPi));
    const Complex idq = i * to_machine;
    const Complex vdq = v_term * to_machine;
    s.omega = 1.0;
    s.ed_p = (p.xq - p.xq_p) * idq.imag();
    s.eq_p = vdq.imag() + p.xd_p * idq.real();
    s.efd = s.eq_p + (p.xd - p.xd_p) * idq.real();
    s.pm = vdq.real() * idq.real() + vdq.imag() * idq.imag();
    p.v_ref = std::abs(v_term) + s.efd / p.ke;
    p.p_ref = s.pm;
    return s;
}

}  // namespace cotds::power
