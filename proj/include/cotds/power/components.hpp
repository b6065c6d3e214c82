#pragma once

// Per-unit phasor models of the load- and generation-side components.
// Network quantities are on the system MVA base; each machine keeps its own
// parameters on its rating and converts at the terminals.

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

#include "cotds/integrators.hpp"

namespace cotds::power {

using Complex = std::complex<double>;

inline constexpr double kDefaultOmegaBase = 2.0 * std::numbers::pi * 60.0;

struct BusState {
    double v_mag = 1.0;
    double v_ang = 0.0;
    double p_inj = 0.0;
    double q_inj = 0.0;

    [[nodiscard]] Complex phasor() const { return std::polar(v_mag, v_ang); }
};

// ---------------------------------------------------------------- ZIP loads

struct ZipLoadParams {
    double p0 = 0.0;
    double q0 = 0.0;
    double v0 = 1.0;
    double a_z = 0.0, a_i = 0.0, a_p = 1.0;
    double b_z = 0.0, b_i = 0.0, b_p = 1.0;

    /// Fractions non-negative and summing to 1, v0 > 0.
    void validate() const;
};

/// Complex power p + jq drawn at voltage magnitude v.
[[nodiscard]] Complex zip_power(const ZipLoadParams& params, double v);

// ---------------------------------------------------------- induction motor

enum class TorqueModel { Constant, Quadratic };

/// Third-order model (rotor transient EMF behind transient reactance plus
/// rotor acceleration). Impedances, inertia and torque on the motor rating.
struct InductionMotorParams {
    double rs = 0.031;
    double xs = 0.10;
    double xm = 3.2;
    double rr = 0.018;
    double xr = 0.18;
    double h = 0.7;
    TorqueModel torque = TorqueModel::Quadratic;
    double load_torque = 0.0;  // at synchronous speed
    double rating_mva = 1.0;
    double base_mva = 100.0;
    double omega_base = kDefaultOmegaBase;

    void validate() const;

    [[nodiscard]] double x_open() const noexcept { return xs + xm; }
    [[nodiscard]] double x_transient() const noexcept { return xs + xr * xm / (xr + xm); }
    [[nodiscard]] double t_open() const noexcept { return (xr + xm) / (omega_base * rr); }
    [[nodiscard]] Complex z_transient() const noexcept { return {rs, x_transient()}; }
    /// Motor-base to system-base power/current factor.
    [[nodiscard]] double scale() const noexcept { return rating_mva / base_mva; }
    [[nodiscard]] double mechanical_torque(double slip) const noexcept;
    /// Steady-state equivalent-circuit impedance at slip s (motor base).
    [[nodiscard]] Complex equivalent_impedance(double slip) const;
};

struct InductionMotorState {
    double slip = 1.0;
    Complex e{0.0, 0.0};
    bool connected = true;

    static InductionMotorState standstill(bool connected) { return {1.0, {0.0, 0.0}, connected}; }
};

/// Terminal current drawn by the motor, system base.
[[nodiscard]] Complex motor_current(const InductionMotorState& s, const InductionMotorParams& p, Complex v_node);

/// p + jq drawn from the node, system base. Zero when disconnected.
[[nodiscard]] Complex motor_power_injection(const InductionMotorState& s, const InductionMotorParams& p,
                                            Complex v_node);

struct MotorDerivatives {
    double d_slip = 0.0;
    Complex d_e{0.0, 0.0};
};

[[nodiscard]] MotorDerivatives induction_motor_derivatives(const InductionMotorState& s,
                                                           const InductionMotorParams& p, Complex v_node);

/// Electrical torque (motor base) at the given state.
[[nodiscard]] double motor_electrical_torque(const InductionMotorState& s, const InductionMotorParams& p,
                                             Complex v_node);

/// Steady-state power from the equivalent circuit, system base.
[[nodiscard]] Complex motor_steady_power(const InductionMotorParams& p, double slip, Complex v_node);

class InfeasibleOperatingPoint : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Slip in (0, s_peak] at which the motor draws electrical power `p_target`
/// (system base) at `v_node`. Throws InfeasibleOperatingPoint above the peak.
[[nodiscard]] double motor_slip_for_power(const InductionMotorParams& p, double p_target, Complex v_node);

/// Equilibrium state at slip s, with load torque fitted so all derivatives
/// vanish. Returns the adjusted parameters through `p`.
[[nodiscard]] InductionMotorState motor_equilibrium(InductionMotorParams& p, double slip, Complex v_node);

// ------------------------------------------------------------- generator

struct GeneratorParams {
    double h = 5.0;
    double d = 0.0;
    double xd = 1.0, xq = 0.9;
    double xd_p = 0.2, xq_p = 0.3;
    double td0_p = 6.0, tq0_p = 0.5;
    double ke = 20.0, te = 0.2;   // exciter
    double v_ref = 1.0;
    double droop = 0.05, tg = 0.3; // governor
    double p_ref = 0.0;
    double omega_base = kDefaultOmegaBase;

    void validate() const;
};

struct GeneratorState {
    double delta = 0.0;
    double omega = 1.0;
    double eq_p = 1.0;
    double ed_p = 0.0;
    double efd = 1.0;
    double pm = 0.0;

    static constexpr int kSize = 6;
    void store(Vec& x, Eigen::Index offset) const;
    static GeneratorState load(const Vec& x, Eigen::Index offset);
};

struct StatorSolution {
    double id, iq, vd, vq;
    Complex i_net;  // injected into the network
    double pe;
};

[[nodiscard]] StatorSolution generator_stator(const GeneratorState& s, const GeneratorParams& p, Complex v_term);

/// Derivatives in GeneratorState order.
void generator_derivatives(const GeneratorState& s, const GeneratorParams& p, Complex v_term, Vec& dx,
                           Eigen::Index offset);

/// Equilibrium state from a power-flow solution at the terminal; also sets
/// p.v_ref and p.p_ref.
[[nodiscard]] GeneratorState generator_equilibrium(GeneratorParams& p, Complex v_term, Complex s_gen);

}  // namespace cotds::power
