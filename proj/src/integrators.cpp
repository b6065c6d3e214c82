#include "cotds/integrators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace cotds {

void NewtonConfig::validate() const {
    if (max_iterations < 1) throw std::invalid_argument("newton: max_iterations must be >= 1");
    if (!(residual_tolerance > 0.0)) throw std::invalid_argument("newton: tolerance must be positive");
    if (!(fd_epsilon > 0.0)) throw std::invalid_argument("newton: fd_epsilon must be positive");
    if (max_halvings < 0) throw std::invalid_argument("newton: max_halvings must be >= 0");
}

void fd_jacobian(const ResidualFn& residual, const Vec& z, const Vec& r0, double eps, Mat& jac) {
    const auto n = z.size();
    jac.resize(r0.size(), n);
    Vec zp = z;
    Vec rp(r0.size());
    for (Eigen::Index j = 0; j < n; ++j) {
        const double dz = eps * std::max(1.0, std::abs(z[j]));
        zp[j] = z[j] + dz;
        residual(zp, rp);
        jac.col(j) = (rp - r0) / dz;
        zp[j] = z[j];
    }
}

namespace {

double inf_norm(const Vec& v) {
    if (v.size() == 0) return 0.0;
    const double n = v.cwiseAbs().maxCoeff();
    return std::isfinite(n) ? n : std::numeric_limits<double>::infinity();
}

}  // namespace

NewtonReport newton_solve(const ResidualFn& residual, Vec& z, const NewtonConfig& cfg, const JacobianFn& jacobian) {
    cfg.validate();
    Vec r(z.size());
    residual(z, r);
    double norm = inf_norm(r);
    NewtonReport report;
    Mat jac;
    Vec trial(z.size());
    Vec r_trial(r.size());
    while (norm > cfg.residual_tolerance) {
        if (report.iterations >= cfg.max_iterations) {
            std::ostringstream msg;
            msg << "Newton did not converge in " << cfg.max_iterations << " iterations (residual " << norm << ")";
            throw NewtonDivergence(msg.str(), norm);
        }
        const bool analytic =
            cfg.jacobian_mode == JacobianMode::AnalyticIfProvided && jacobian && jacobian(z, jac);
        if (!analytic) {
            fd_jacobian(residual, z, r, cfg.fd_epsilon, jac);
        }
        Eigen::PartialPivLU<Mat> lu(jac);
        const Mat& u = lu.matrixLU();
        const double diag_max = u.diagonal().cwiseAbs().maxCoeff();
        const double diag_min = u.diagonal().cwiseAbs().minCoeff();
        if (!(diag_min > 1e-14 * diag_max) || !std::isfinite(diag_max)) {
            throw SingularJacobian("singular Jacobian in Newton iteration", norm);
        }
        const Vec dz = lu.solve(-r);
        double alpha = 1.0;
        double trial_norm = 0.0;
        for (int k = 0; k <= cfg.max_halvings; ++k) {
            trial = z + alpha * dz;
            residual(trial, r_trial);
            trial_norm = inf_norm(r_trial);
            if (trial_norm < norm) break;
            alpha *= 0.5;
        }
        ++report.iterations;
        if (!std::isfinite(trial_norm)) {
            throw NewtonDivergence("Newton iterate produced non-finite residual", norm);
        }
        z = trial;
        r = r_trial;
        norm = trial_norm;
    }
    report.residual_norm = norm;
    return report;
}

DaeStepResult trapezoidal_dae_step(const DaeSystem& sys, const Vec& x, const Vec& y, const Vec& u, double h,
                                   const NewtonConfig& cfg) {
    if (!(h > 0.0)) throw std::invalid_argument("trapezoidal step: h must be positive");
    const auto nx = static_cast<Eigen::Index>(sys.num_states());
    const auto ny = static_cast<Eigen::Index>(sys.num_algebraic());
    Vec f0(nx);
    sys.derivatives(x, y, u, f0);

    Vec xp(nx), yp(ny), fp(nx), gp(ny);
    auto residual = [&](const Vec& z, Vec& r) {
        xp = z.head(nx);
        yp = z.tail(ny);
        sys.derivatives(xp, yp, u, fp);
        sys.residual(xp, yp, u, gp);
        r.resize(nx + ny);
        r.head(nx) = xp - x - 0.5 * h * (f0 + fp);
        r.tail(ny) = gp;
    };
    auto jacobian = [&](const Vec& z, Mat& jac) {
        return sys.trapezoidal_jacobian(z.head(nx), z.tail(ny), u, h, jac);
    };

    Vec z(nx + ny);
    z << x, y;
    DaeStepResult out;
    out.newton = newton_solve(residual, z, cfg, jacobian);
    out.x = z.head(nx);
    out.y = z.tail(ny);
    return out;
}

NewtonReport solve_algebraic(const DaeSystem& sys, const Vec& x, Vec& y, const Vec& u, const NewtonConfig& cfg) {
    auto residual = [&](const Vec& z, Vec& r) {
        r.resize(z.size());
        sys.residual(x, z, u, r);
    };
    return newton_solve(residual, y, cfg);
}

Vec euler_substeps(const OdeRhs& deriv, const Vec& x, const Vec& u, double h, int n) {
    if (n < 1) throw std::invalid_argument("euler_substeps: n must be >= 1");
    const double dt = h / n;
    Vec state = x;
    Vec dx(x.size());
    for (int i = 0; i < n; ++i) {
        deriv(state, u, dx);
        state += dt * dx;
        if (!state.allFinite()) {
            throw NonFiniteState("euler_substeps: non-finite state at micro step " + std::to_string(i + 1));
        }
    }
    return state;
}

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

struct DopriStage {
    Vec k1, k2, k3, k4, k5, k6, k7, tmp, x5;
    explicit DopriStage(Eigen::Index n) : k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), tmp(n), x5(n) {}

    // Fills x5 and returns the embedded error vector in tmp. k1 must hold f(x).
    void step(const OdeRhs& f, const Vec& x, const Vec& u, double h) {
        tmp = x + h * a21 * k1;
        f(tmp, u, k2);
        tmp = x + h * (a31 * k1 + a32 * k2);
        f(tmp, u, k3);
        tmp = x + h * (a41 * k1 + a42 * k2 + a43 * k3);
        f(tmp, u, k4);
        tmp = x + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
        f(tmp, u, k5);
        tmp = x + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
        f(tmp, u, k6);
        x5 = x + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        f(x5, u, k7);
        tmp = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    }
};

}  // namespace

Vec rk_component_step(const OdeRhs& deriv, const Vec& x, const Vec& u, double h, double tol, RkReport* report) {
    if (!(tol > 0.0)) throw std::invalid_argument("rk_component_step: tol must be positive");
    if (!(h > 0.0)) throw std::invalid_argument("rk_component_step: h must be positive");
    const auto n = x.size();
    DopriStage st(n);
    Vec state = x;
    double t = 0.0;
    double dt = h;
    const double min_step = h * 1e-12;
    RkReport local;
    deriv(state, u, st.k1);
    while (t < h) {
        dt = std::min(dt, h - t);
        if (dt < min_step && h - t > min_step) {
            throw StiffnessError("rk_component_step: step size underflow");
        }
        st.step(deriv, state, u, dt);
        double err = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double sc = tol * (1.0 + std::max(std::abs(state[i]), std::abs(st.x5[i])));
            err = std::max(err, std::abs(st.tmp[i]) / sc);
        }
        if (!std::isfinite(err)) {
            err = 1e10;
        }
        if (err <= 1.0) {
            t += dt;
            state = st.x5;
            st.k1 = st.k7;
            ++local.accepted;
        } else {
            ++local.rejected;
        }
        const double factor = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
        dt *= factor;
    }
    if (!state.allFinite()) {
        throw NonFiniteState("rk_component_step: non-finite state");
    }
    if (report) *report = local;
    return state;
}

Vec rk_fixed_steps(const OdeRhs& deriv, const Vec& x, const Vec& u, double h, int steps) {
    if (steps < 1) throw std::invalid_argument("rk_fixed_steps: steps must be >= 1");
    DopriStage st(x.size());
    Vec state = x;
    const double dt = h / steps;
    for (int i = 0; i < steps; ++i) {
        deriv(state, u, st.k1);
        st.step(deriv, state, u, dt);
        state = st.x5;
    }
    return state;
}

}  // namespace cotds
