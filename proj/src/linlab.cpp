#include "cotds/linlab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace cotds::linlab {

LinearCoupledParams::LinearCoupledParams(double lambda_a, double lambda_b, double k_a, double k_b)
    : lambda_a_(lambda_a), lambda_b_(lambda_b), k_a_(k_a), k_b_(k_b) {
    if (!(lambda_a < 0.0) || !(lambda_b < 0.0)) {
        throw std::invalid_argument("lambda_a and lambda_b must be negative");
    }
    if (!(k_a > 0.0) || !(k_b > 0.0)) {
        throw std::invalid_argument("k_a and k_b must be positive");
    }
    if (!std::isfinite(lambda_a) || !std::isfinite(lambda_b) || !std::isfinite(k_a) || !std::isfinite(k_b)) {
        throw std::invalid_argument("parameters must be finite");
    }
}

double StateVec2::norm() const noexcept { return std::hypot(x_a, x_b); }

bool StateVec2::finite() const noexcept { return std::isfinite(x_a) && std::isfinite(x_b); }

StepConfig::StepConfig(double h_macro, int n_micro) : h_macro_(h_macro), n_micro_(n_micro) {
    if (!(h_macro > 0.0) || !std::isfinite(h_macro)) {
        throw std::invalid_argument("macro step must be positive and finite");
    }
    if (n_micro < 1) {
        throw std::invalid_argument("micro step count must be at least 1");
    }
}

StateVec2 Matrix2::apply(const StateVec2& s) const noexcept {
    return {m[0] * s.x_a + m[1] * s.x_b, m[2] * s.x_a + m[3] * s.x_b};
}

Matrix2 Matrix2::operator*(const Matrix2& o) const noexcept {
    return {{m[0] * o.m[0] + m[1] * o.m[2], m[0] * o.m[1] + m[1] * o.m[3], m[2] * o.m[0] + m[3] * o.m[2],
             m[2] * o.m[1] + m[3] * o.m[3]}};
}

Matrix2 Matrix2::inverse() const {
    const double d = det();
    const double scale = std::max({std::abs(m[0] * m[3]), std::abs(m[1] * m[2]), std::numeric_limits<double>::min()});
    if (std::abs(d) <= 64.0 * std::numeric_limits<double>::epsilon() * scale) {
        throw std::domain_error("singular 2x2 matrix");
    }
    return {{m[3] / d, -m[1] / d, -m[2] / d, m[0] / d}};
}

std::string to_string(SchemeId s) {
    switch (s) {
        case SchemeId::TotalTrapezoidal: return "total";
        case SchemeId::CosimParallel: return "parallel";
        case SchemeId::CosimSeries: return "series";
    }
    return "unknown";
}

SchemeId scheme_from_string(const std::string& s) {
    if (s == "total" || s == "TotalTrapezoidal") return SchemeId::TotalTrapezoidal;
    if (s == "parallel" || s == "CosimParallel") return SchemeId::CosimParallel;
    if (s == "series" || s == "CosimSeries") return SchemeId::CosimSeries;
    throw std::invalid_argument("unknown scheme: " + s);
}

Matrix2 system_matrix(const LinearCoupledParams& p) noexcept {
    return {{p.lambda_a(), -p.k_a(), p.k_b(), p.lambda_b()}};
}

StateVec2 analytic_solution(const LinearCoupledParams& p, const StateVec2& x0, double t) {
    if (!std::isfinite(t) || t < 0.0) {
        throw std::invalid_argument("time must be finite and non-negative");
    }
    const Matrix2 a = system_matrix(p);
    const double half_trace = 0.5 * a.trace();
    const double disc = half_trace * half_trace - a.det();
    // exp(At) = e^{t tr/2} (c(t) I + s(t) (A - tr/2 I))
    double c = 1.0;
    double s = t;
    if (disc > 0.0) {
        const double mu = std::sqrt(disc);
        c = std::cosh(mu * t);
        s = std::sinh(mu * t) / mu;
    } else if (disc < 0.0) {
        const double nu = std::sqrt(-disc);
        c = std::cos(nu * t);
        s = std::sin(nu * t) / nu;
    }
    const double e = std::exp(half_trace * t);
    const Matrix2 shifted{{a(0, 0) - half_trace, a(0, 1), a(1, 0), a(1, 1) - half_trace}};
    const StateVec2 sx = shifted.apply(x0);
    return {e * (c * x0.x_a + s * sx.x_a), e * (c * x0.x_b + s * sx.x_b)};
}

double advance_a_trapezoidal(double lambda_a, double h_macro, double x_a, double u_a) noexcept {
    // x+ = x + H/2 (la x + u) + H/2 (la x+ + u)
    return ((1.0 + 0.5 * lambda_a * h_macro) * x_a + h_macro * u_a) / (1.0 - 0.5 * lambda_a * h_macro);
}

double euler_gain(double lambda_b, const StepConfig& cfg) noexcept {
    return std::pow(1.0 + cfg.h_micro() * lambda_b, cfg.n_micro());
}

double advance_b_euler(double lambda_b, double gain, double x_b, double u_b) noexcept {
    return x_b * gain + (gain - 1.0) / lambda_b * u_b;
}

namespace {

StateVec2 checked(const StateVec2& s, const char* what) {
    if (!s.finite()) {
        throw NumericalDivergence(std::string(what) + ": non-finite state");
    }
    return s;
}

}  // namespace

StateVec2 step_total_trapezoidal(const LinearCoupledParams& p, double h_macro, const StateVec2& s) {
    if (!(h_macro > 0.0)) {
        throw std::invalid_argument("macro step must be positive");
    }
    const double h2 = 0.5 * h_macro;
    const Matrix2 lhs{{1.0 - h2 * p.lambda_a(), h2 * p.k_a(), -h2 * p.k_b(), 1.0 - h2 * p.lambda_b()}};
    const StateVec2 rhs{(1.0 + h2 * p.lambda_a()) * s.x_a - h2 * p.k_a() * s.x_b,
                        h2 * p.k_b() * s.x_a + (1.0 + h2 * p.lambda_b()) * s.x_b};
    const double d = lhs.det();
    if (d == 0.0 || !std::isfinite(d)) {
        throw std::domain_error("trapezoidal step: singular left-hand matrix");
    }
    // Cramer's rule
    const StateVec2 next{(rhs.x_a * lhs(1, 1) - lhs(0, 1) * rhs.x_b) / d,
                         (lhs(0, 0) * rhs.x_b - lhs(1, 0) * rhs.x_a) / d};
    return checked(next, "total trapezoidal");
}

StateVec2 step_cosim_parallel(const LinearCoupledParams& p, const StepConfig& cfg, const StateVec2& s) {
    const double u_a = -p.k_a() * s.x_b;
    const double u_b = p.k_b() * s.x_a;
    const double g = euler_gain(p.lambda_b(), cfg);
    StateVec2 next{advance_a_trapezoidal(p.lambda_a(), cfg.h_macro(), s.x_a, u_a),
                   advance_b_euler(p.lambda_b(), g, s.x_b, u_b)};
    return checked(next, "parallel co-simulation");
}

StateVec2 step_cosim_series(const LinearCoupledParams& p, const StepConfig& cfg, const StateVec2& s) {
    const double u_a = -p.k_a() * s.x_b;
    const double x_a = advance_a_trapezoidal(p.lambda_a(), cfg.h_macro(), s.x_a, u_a);
    const double u_b = p.k_b() * x_a;
    const double g = euler_gain(p.lambda_b(), cfg);
    return checked({x_a, advance_b_euler(p.lambda_b(), g, s.x_b, u_b)}, "series co-simulation");
}

StateVec2 step(SchemeId scheme, const LinearCoupledParams& p, const StepConfig& cfg, const StateVec2& s) {
    switch (scheme) {
        case SchemeId::TotalTrapezoidal: return step_total_trapezoidal(p, cfg.h_macro(), s);
        case SchemeId::CosimParallel: return step_cosim_parallel(p, cfg, s);
        case SchemeId::CosimSeries: return step_cosim_series(p, cfg, s);
    }
    throw std::invalid_argument("unknown scheme");
}

Matrix2 build_M_total(const LinearCoupledParams& p, double h_macro) {
    if (!(h_macro > 0.0)) {
        throw std::invalid_argument("macro step must be positive");
    }
    const double h2 = 0.5 * h_macro;
    const Matrix2 lhs{{1.0 - h2 * p.lambda_a(), h2 * p.k_a(), -h2 * p.k_b(), 1.0 - h2 * p.lambda_b()}};
    const Matrix2 rhs{{1.0 + h2 * p.lambda_a(), -h2 * p.k_a(), h2 * p.k_b(), 1.0 + h2 * p.lambda_b()}};
    return lhs.inverse() * rhs;
}

Matrix2 build_M_cosim_parallel(const LinearCoupledParams& p, const StepConfig& cfg) {
    const double h = cfg.h_macro();
    const double g = euler_gain(p.lambda_b(), cfg);
    const Matrix2 lhs{{1.0 - 0.5 * p.lambda_a() * h, 0.0, 0.0, 1.0}};
    const Matrix2 rhs{{1.0 + 0.5 * p.lambda_a() * h, -p.k_a() * h, (p.k_b() / p.lambda_b()) * (g - 1.0), g}};
    return lhs.inverse() * rhs;
}

Matrix2 build_M_cosim_series(const LinearCoupledParams& p, const StepConfig& cfg) {
    const double h = cfg.h_macro();
    const double g = euler_gain(p.lambda_b(), cfg);
    const Matrix2 lhs{{1.0 - 0.5 * p.lambda_a() * h, 0.0, -(p.k_b() / p.lambda_b()) * (g - 1.0), 1.0}};
    const Matrix2 rhs{{1.0 + 0.5 * p.lambda_a() * h, -p.k_a() * h, 0.0, g}};
    return lhs.inverse() * rhs;
}

Matrix2 build_M(SchemeId scheme, const LinearCoupledParams& p, const StepConfig& cfg) {
    switch (scheme) {
        case SchemeId::TotalTrapezoidal: return build_M_total(p, cfg.h_macro());
        case SchemeId::CosimParallel: return build_M_cosim_parallel(p, cfg);
        case SchemeId::CosimSeries: return build_M_cosim_series(p, cfg);
    }
    throw std::invalid_argument("unknown scheme");
}

double spectral_radius(const Matrix2& m) noexcept {
    const double half_trace = 0.5 * m.trace();
    const double det = m.det();
    const double disc = half_trace * half_trace - det;
    if (disc < 0.0) {
        // complex pair: |mu|^2 = det
        return std::sqrt(det);
    }
    const double root = std::sqrt(disc);
    return std::max(std::abs(half_trace + root), std::abs(half_trace - root));
}

StateVec2 local_truncation_error(const LinearCoupledParams& p, const StateVec2& x0, double h_macro, SchemeId scheme,
                                 int n_micro) {
    const StepConfig cfg(h_macro, n_micro);
    const StateVec2 exact = analytic_solution(p, x0, h_macro);
    const StateVec2 numeric = step(scheme, p, cfg, x0);
    // (x(H) - x0)/H - (x1 - x0)/H
    return {(exact.x_a - numeric.x_a) / h_macro, (exact.x_b - numeric.x_b) / h_macro};
}

std::vector<SweepPoint> stability_sweep(const LinearCoupledParams& p, SchemeId scheme, int n_micro,
                                        std::span<const double> h_grid) {
    std::vector<SweepPoint> out;
    out.reserve(h_grid.size());
    for (std::size_t i = 0; i < h_grid.size(); ++i) {
        if (!(h_grid[i] > 0.0)) {
            throw std::invalid_argument("sweep grid values must be positive");
        }
        if (i > 0 && h_grid[i] < h_grid[i - 1]) {
            throw std::invalid_argument("sweep grid must be sorted");
        }
        out.push_back({h_grid[i], spectral_radius(build_M(scheme, p, StepConfig(h_grid[i], n_micro)))});
    }
    return out;
}

double stability_threshold(const LinearCoupledParams& p, SchemeId scheme, int n_micro, double h_lo, double h_hi,
                           int scan_points) {
    auto excess = [&](double h) { return spectral_radius(build_M(scheme, p, StepConfig(h, n_micro))) - 1.0; };
    double prev = h_lo;
    for (int i = 1; i <= scan_points; ++i) {
        const double h = h_lo + (h_hi - h_lo) * i / scan_points;
        if (excess(h) > 0.0) {
            double lo = prev;
            double hi = h;
            for (int k = 0; k < 60 && hi - lo > 1e-14 * hi; ++k) {
                const double mid = 0.5 * (lo + hi);
                (excess(mid) > 0.0 ? hi : lo) = mid;
            }
            return 0.5 * (lo + hi);
        }
        prev = h;
    }
    return h_hi;
}

LinearTrajectory simulate_linear(const LinearCoupledParams& p, const StateVec2& x0, double h_macro, int n_micro,
                                 double t_end, SchemeId scheme) {
    if (!(t_end >= 0.0)) {
        throw std::invalid_argument("t_end must be non-negative");
    }
    const StepConfig cfg(h_macro, n_micro);
    const auto steps = static_cast<long>(std::ceil(t_end / h_macro - 1e-9));
    LinearTrajectory traj;
    traj.points.reserve(static_cast<std::size_t>(steps) + 1);
    traj.points.push_back({0.0, x0});
    StateVec2 x = x0;
    for (long i = 1; i <= steps; ++i) {
        try {
            x = step(scheme, p, cfg, x);
        } catch (const NumericalDivergence&) {
            traj.diverged = true;
            break;
        }
        traj.points.push_back({static_cast<double>(i) * h_macro, x});
    }
    return traj;
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) {
        throw std::invalid_argument("slope fit needs at least two paired points");
    }
    const auto n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double lx = std::log(x[i]);
        const double ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace cotds::linlab
