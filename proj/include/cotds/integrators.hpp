#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cotds {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Base for all solver failures; carries the last residual norm when relevant.
class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& what, double residual = 0.0) : std::runtime_error(what), residual_(residual) {}
    [[nodiscard]] double residual() const noexcept { return residual_; }

private:
    double residual_;
};

class NewtonDivergence : public SolverError {
public:
    using SolverError::SolverError;
};

class SingularJacobian : public SolverError {
public:
    using SolverError::SolverError;
};

class StiffnessError : public SolverError {
public:
    using SolverError::SolverError;
};

class NonFiniteState : public SolverError {
public:
    using SolverError::SolverError;
};

enum class JacobianMode { FiniteDifference, AnalyticIfProvided };

struct NewtonConfig {
    int max_iterations = 20;
    double residual_tolerance = 1e-8;
    JacobianMode jacobian_mode = JacobianMode::FiniteDifference;
    double fd_epsilon = 1e-7;
    int max_halvings = 6;

    void validate() const;
};

/// Semi-explicit DAE   dx/dt = f(x, y, u),  0 = g(x, y, u).
class DaeSystem {
public:
    virtual ~DaeSystem() = default;

    [[nodiscard]] virtual std::size_t num_states() const = 0;
    [[nodiscard]] virtual std::size_t num_algebraic() const = 0;
    [[nodiscard]] virtual std::size_t num_inputs() const = 0;

    virtual void derivatives(const Vec& x, const Vec& y, const Vec& u, Vec& dx) const = 0;
    virtual void residual(const Vec& x, const Vec& y, const Vec& u, Vec& g) const = 0;

    /// Optional analytic Jacobian of the stacked trapezoidal residual with
    /// respect to [x+; y+]. Return false to fall back to finite differences.
    virtual bool trapezoidal_jacobian(const Vec& /*x*/, const Vec& /*y*/, const Vec& /*u*/, double /*h*/,
                                      Mat& /*jac*/) const {
        return false;
    }
};

struct NewtonReport {
    int iterations = 0;
    double residual_norm = 0.0;
};

/// Damped Newton on F(z) = 0 with finite-difference Jacobian (or the supplied
/// one). Throws NewtonDivergence / SingularJacobian.
using ResidualFn = std::function<void(const Vec& z, Vec& r)>;
using JacobianFn = std::function<bool(const Vec& z, Mat& jac)>;

NewtonReport newton_solve(const ResidualFn& residual, Vec& z, const NewtonConfig& cfg,
                          const JacobianFn& jacobian = {});

/// Dense finite-difference Jacobian of `residual` at z.
void fd_jacobian(const ResidualFn& residual, const Vec& z, const Vec& r0, double eps, Mat& jac);

struct DaeStepResult {
    Vec x;
    Vec y;
    NewtonReport newton;
};

/// One implicit trapezoidal step with the algebraic equations enforced at the
/// end point; u is held over the step.
DaeStepResult trapezoidal_dae_step(const DaeSystem& sys, const Vec& x, const Vec& y, const Vec& u, double h,
                                   const NewtonConfig& cfg = {});

/// Solve g(x, y, u) = 0 for y with x fixed (consistent algebraic re-init).
NewtonReport solve_algebraic(const DaeSystem& sys, const Vec& x, Vec& y, const Vec& u, const NewtonConfig& cfg = {});

using OdeRhs = std::function<void(const Vec& x, const Vec& u, Vec& dx)>;

/// n explicit Euler steps of size h/n with u held.
Vec euler_substeps(const OdeRhs& deriv, const Vec& x, const Vec& u, double h, int n);

struct RkConfig {
    double tolerance = 1e-6;
    double initial_step = 0.0;  // 0 -> pick from h
};

struct RkReport {
    int accepted = 0;
    int rejected = 0;
};

/// Adaptive Dormand-Prince 5(4) from 0 to h with u held. Per-step error is
/// measured against tol*(1 + |x|) component-wise.
Vec rk_component_step(const OdeRhs& deriv, const Vec& x, const Vec& u, double h, double tol,
                      RkReport* report = nullptr);

/// `steps` fixed Dormand-Prince steps (fifth-order solution), for order checks.
Vec rk_fixed_steps(const OdeRhs& deriv, const Vec& x, const Vec& u, double h, int steps);

}  // namespace cotds
