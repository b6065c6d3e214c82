#pragma once

// Linear two-state coupled test system and its discrete schemes.
//
//   dXa/dt = la*Xa - ka*Xb
//   dXb/dt = lb*Xb + kb*Xa
//
// Split as two sub-systems exchanging Ya = kb*Xa and Yb = -ka*Xb. Sub-system
// A is integrated with implicit trapezoidal, sub-system B with n explicit
// Euler micro steps of size H/n. The co-simulation schemes differ only in
// which Xa value feeds B (start of step for parallel, end of step for series).

#include <array>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cotds::linlab {

/// Raised when a scheme produces non-finite state.
class NumericalDivergence : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class LinearCoupledParams {
public:
    /// Throws std::invalid_argument unless la < 0, lb < 0, ka > 0, kb > 0.
    LinearCoupledParams(double lambda_a, double lambda_b, double k_a, double k_b);

    [[nodiscard]] double lambda_a() const noexcept { return lambda_a_; }
    [[nodiscard]] double lambda_b() const noexcept { return lambda_b_; }
    [[nodiscard]] double k_a() const noexcept { return k_a_; }
    [[nodiscard]] double k_b() const noexcept { return k_b_; }

private:
    double lambda_a_;
    double lambda_b_;
    double k_a_;
    double k_b_;
};

struct StateVec2 {
    double x_a = 0.0;
    double x_b = 0.0;

    [[nodiscard]] double norm() const noexcept;
    [[nodiscard]] bool finite() const noexcept;
    friend bool operator==(const StateVec2&, const StateVec2&) = default;
};

class StepConfig {
public:
    /// Throws std::invalid_argument unless h_macro > 0 and n_micro >= 1.
    explicit StepConfig(double h_macro, int n_micro = 100);

    [[nodiscard]] double h_macro() const noexcept { return h_macro_; }
    [[nodiscard]] int n_micro() const noexcept { return n_micro_; }
    [[nodiscard]] double h_micro() const noexcept { return h_macro_ / n_micro_; }

private:
    double h_macro_;
    int n_micro_;
};

struct Matrix2 {
    std::array<double, 4> m{};  // row-major

    [[nodiscard]] double operator()(int r, int c) const noexcept { return m[2 * r + c]; }
    [[nodiscard]] double& operator()(int r, int c) noexcept { return m[2 * r + c]; }
    [[nodiscard]] double trace() const noexcept { return m[0] + m[3]; }
    [[nodiscard]] double det() const noexcept { return m[0] * m[3] - m[1] * m[2]; }
    [[nodiscard]] StateVec2 apply(const StateVec2& s) const noexcept;
    [[nodiscard]] Matrix2 operator*(const Matrix2& o) const noexcept;
    /// Throws std::domain_error when |det| is below round-off.
    [[nodiscard]] Matrix2 inverse() const;

    static Matrix2 identity() noexcept { return {{1.0, 0.0, 0.0, 1.0}}; }
};

enum class SchemeId { TotalTrapezoidal, CosimParallel, CosimSeries };

[[nodiscard]] std::string to_string(SchemeId s);
/// Accepts "total", "parallel", "series" (and the enumerator names).
[[nodiscard]] SchemeId scheme_from_string(const std::string& s);

/// Continuous-time system matrix [[la, -ka], [kb, lb]].
[[nodiscard]] Matrix2 system_matrix(const LinearCoupledParams& p) noexcept;

/// exp(A t) x0 through the closed-form 2x2 exponential.
[[nodiscard]] StateVec2 analytic_solution(const LinearCoupledParams& p, const StateVec2& x0, double t);

// Sub-system halves. The orchestrator adapters and the steppers share these so
// both paths perform identical floating point operations.

/// One trapezoidal step of dXa/dt = la*Xa + ua with ua held over the step.
[[nodiscard]] double advance_a_trapezoidal(double lambda_a, double h_macro, double x_a, double u_a) noexcept;
/// (1 + h*lb)^n, the n-fold Euler amplification of sub-system B.
[[nodiscard]] double euler_gain(double lambda_b, const StepConfig& cfg) noexcept;
/// n Euler micro steps of dXb/dt = lb*Xb + ub in closed form, ub held.
[[nodiscard]] double advance_b_euler(double lambda_b, double gain, double x_b, double u_b) noexcept;

[[nodiscard]] StateVec2 step_total_trapezoidal(const LinearCoupledParams& p, double h_macro, const StateVec2& s);
[[nodiscard]] StateVec2 step_cosim_parallel(const LinearCoupledParams& p, const StepConfig& cfg, const StateVec2& s);
[[nodiscard]] StateVec2 step_cosim_series(const LinearCoupledParams& p, const StepConfig& cfg, const StateVec2& s);
[[nodiscard]] StateVec2 step(SchemeId scheme, const LinearCoupledParams& p, const StepConfig& cfg, const StateVec2& s);

[[nodiscard]] Matrix2 build_M_total(const LinearCoupledParams& p, double h_macro);
[[nodiscard]] Matrix2 build_M_cosim_parallel(const LinearCoupledParams& p, const StepConfig& cfg);
[[nodiscard]] Matrix2 build_M_cosim_series(const LinearCoupledParams& p, const StepConfig& cfg);
[[nodiscard]] Matrix2 build_M(SchemeId scheme, const LinearCoupledParams& p, const StepConfig& cfg);

/// Largest eigenvalue magnitude from the characteristic quadratic.
[[nodiscard]] double spectral_radius(const Matrix2& m) noexcept;

/// tau = (x(H) - x0)/H - phi(x0, H) for the given scheme.
[[nodiscard]] StateVec2 local_truncation_error(const LinearCoupledParams& p, const StateVec2& x0, double h_macro,
                                               SchemeId scheme, int n_micro = 100);

struct SweepPoint {
    double h_macro;
    double rho;
};

[[nodiscard]] std::vector<SweepPoint> stability_sweep(const LinearCoupledParams& p, SchemeId scheme, int n_micro,
                                                      std::span<const double> h_grid);

/// First H in (h_lo, h_hi] where rho crosses 1, located by bisection after a
/// scan of `scan_points` samples. Returns h_hi when no crossing is found.
[[nodiscard]] double stability_threshold(const LinearCoupledParams& p, SchemeId scheme, int n_micro, double h_lo,
                                         double h_hi, int scan_points = 2000);

struct TrajectoryPoint {
    double t;
    StateVec2 x;
};

struct LinearTrajectory {
    std::vector<TrajectoryPoint> points;
    bool diverged = false;
};

[[nodiscard]] LinearTrajectory simulate_linear(const LinearCoupledParams& p, const StateVec2& x0, double h_macro,
                                               int n_micro, double t_end, SchemeId scheme);

/// Least-squares slope of log(y) against log(x).
[[nodiscard]] double loglog_slope(std::span<const double> x, std::span<const double> y);

}  // namespace cotds::linlab
