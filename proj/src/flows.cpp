#include "carnot/flows.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace carnot::flows {

void FlowSolverConfig::validate() const
{
    if (!(rtol > 0 && atol > 0 && max_step > 0 && newton_tol > 0 && newton_max_iter > 0))
        throw ConfigError("flow solver tolerances must be positive");
    if (newton_tol < atol)
        throw ConfigError("newton tolerance must not be below the ODE tolerance");
}

namespace {

// Dormand-Prince 5(4) with FSAL and standard step control.
template <class State, class Rhs, class Check>
State dopri5(Rhs&& f, State y, double T, const FlowSolverConfig& cfg, Check&& check)
{
    if (T == 0.0)
        return y;
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
    (void)c2, (void)c3, (void)c4, (void)c5;

    const double dir = T > 0 ? 1.0 : -1.0;
    const double span = std::abs(T);
    double t = 0.0;
    double h = std::min(cfg.max_step, span);
    // Cheap initial guess from the first derivative.
    State k1 = f(y);
    {
        const double d = k1.cwiseAbs().maxCoeff();
        if (d > 0)
            h = std::min(h, 0.05 * (1.0 + y.cwiseAbs().maxCoeff()) / d);
        h = std::max(h, 1e-6 * span);
    }
    int steps = 0;
    while (t < span) {
        if (++steps > cfg.max_steps)
            throw NoConvergence("ODE step budget exhausted");
        if (t + h > span)
            h = span - t;
        const double hs = dir * h;
        State k2 = f(State(y + hs * a21 * k1));
        State k3 = f(State(y + hs * (a31 * k1 + a32 * k2)));
        State k4 = f(State(y + hs * (a41 * k1 + a42 * k2 + a43 * k3)));
        State k5 = f(State(y + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4)));
        State k6 = f(State(y + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5)));
        State yn = y + hs * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        State k7 = f(yn);
        State err = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
        double en = 0.0;
        for (int i = 0; i < y.size(); ++i) {
            const double sc = cfg.atol + cfg.rtol * std::max(std::abs(y[i]), std::abs(yn[i]));
            en = std::max(en, std::abs(err[i]) / sc);
        }
        if (!std::isfinite(en))
            throw NoConvergence("non-finite ODE state");
        if (en <= 1.0) {
            t += h;
            y = yn;
            k1 = k7;
            check(y);
        }
        const double fac = en == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(en, -0.2), 0.2, 5.0);
        h = std::min(cfg.max_step, h * (en <= 1.0 ? fac : std::min(1.0, fac)));
        if (h < 1e-14 * std::max(1.0, span))
            throw NoConvergence("ODE step size underflow");
    }
    return y;
}

auto domain_check(const ChartFrame& frame)
{
    return [&frame](const auto& y) {
        Vec p = y.head(frame.dim());
        if (!frame.domain().contains(p))
            throw LeftDomain("trajectory left the chart of " + frame.name());
    };
}

} // namespace

Vec exp_combination(const ChartFrame& frame, const Vec& u, const Vec& a, double t, const FlowSolverConfig& cfg)
{
    if (!frame.domain().contains(u))
        throw LeftDomain("start point outside the chart of " + frame.name());
    if (a.isZero(0.0) || t == 0.0)
        return u;
    auto rhs = [&](const Vec& y) -> Vec { return frame.frame(y) * a; };
    return dopri5<Vec>(rhs, u, t, cfg, domain_check(frame));
}

FlowWithJacobian exp_combination_jacobian(const ChartFrame& frame, const Vec& u, const Vec& a,
                                          const FlowSolverConfig& cfg)
{
    const int n = frame.dim();
    Eigen::VectorXd y0 = Eigen::VectorXd::Zero(n + n * n);
    y0.head(n) = u;
    auto rhs = [&](const Eigen::VectorXd& y) -> Eigen::VectorXd {
        Vec p = y.head(n);
        Mat X = frame.frame(p);
        Mat A = Mat::Zero(n, n);
        for (int i = 0; i < n; ++i)
            if (a[i] != 0.0)
                A += a[i] * frame.jacobian(i, p);
        Eigen::VectorXd d(n + n * n);
        d.head(n) = X * a;
        Eigen::Map<const Eigen::MatrixXd> J(y.data() + n, n, n);
        Eigen::Map<Eigen::MatrixXd> dJ(d.data() + n, n, n);
        dJ = A * J + Eigen::MatrixXd(X);
        return d;
    };
    if (!frame.domain().contains(u))
        throw LeftDomain("start point outside the chart of " + frame.name());
    Eigen::VectorXd y = dopri5<Eigen::VectorXd>(rhs, y0, 1.0, cfg, domain_check(frame));
    FlowWithJacobian out;
    out.point = y.head(n);
    out.d_coeffs = Eigen::Map<const Eigen::MatrixXd>(y.data() + n, n, n);
    return out;
}

NormalCoords normal_coords(const ChartFrame& frame, const Vec& u, const Vec& v, const FlowSolverConfig& cfg)
{
    NormalCoords nc;
    nc.base = u;
    const int n = frame.dim();
    if ((v - u).cwiseAbs().maxCoeff() == 0.0) {
        nc.a = Vec::Zero(n);
        return nc;
    }
    Vec a = frames::eval_frame(frame, u).fullPivLu().solve(Vec(v - u));
    bool exact = false;
    double prev = std::numeric_limits<double>::infinity();
    Vec prev_a = a;
    for (int it = 0; it < cfg.newton_max_iter; ++it) {
        Vec img;
        Mat J;
        if (exact) {
            FlowWithJacobian fj = exp_combination_jacobian(frame, u, a, cfg);
            img = fj.point;
            J = fj.d_coeffs;
        } else {
            img = exp_combination(frame, u, a, 1.0, cfg);
        }
        Vec r = img - v;
        const double res = r.cwiseAbs().maxCoeff();
        nc.iterations = it + 1;
        nc.residual = res;
        if (res < cfg.newton_tol) {
            nc.a = a;
            return nc;
        }
        if (!exact && res > 0.5 * prev) {
            // Slow contraction: redo from the last iterate with the exact flow Jacobian.
            exact = true;
            a = prev_a;
            continue;
        }
        if (!exact)
            J = frames::eval_frame(frame, img);
        prev = res;
        prev_a = a;
        a -= J.fullPivLu().solve(r);
        if (!a.allFinite())
            break;
    }
    throw NoConvergence("normal coordinates did not converge (residual " + std::to_string(nc.residual) + ")");
}

Vec cone_flow(const cone::NilpotentCone& cone, const Vec& s, const Vec& a, const FlowSolverConfig& cfg)
{
    if (a.isZero(0.0))
        return s;
    auto rhs = [&](const Vec& y) -> Vec { return cone.canonical_matrix(y) * a; };
    return dopri5<Vec>(rhs, s, 1.0, cfg, [](const Vec&) {});
}

Vec exp_nilpotent(const ChartFrame& frame, const cone::NilpotentCone& cone, const Vec& w, const Vec& a,
                  const FlowSolverConfig& cfg)
{
    if (a.isZero(0.0))
        return w;
    Vec s = normal_coords(frame, cone.base(), w, cfg).a;
    Vec s1 = cone_flow(cone, s, a, cfg);
    return exp_combination(frame, cone.base(), s1, 1.0, cfg);
}

double riem_gap(const ChartFrame& frame, const Vec& u, const Vec& v)
{
    Vec mid = 0.5 * (u + v);
    Vec c = frame.frame(mid).fullPivLu().solve(Vec(v - u));
    return std::sqrt(c.dot(frame.riemann(mid) * c));
}

bool HolderReport::stable(double tol) const
{
    for (size_t k = 1; k < estimates.size(); ++k)
        if (std::abs(estimates[k] - estimates[k - 1]) > tol * std::max(estimates[k - 1], 1e-300))
            return estimates[k - 1] < 1e-10 && estimates[k] < 1e-10;
    return true;
}

HolderReport estimate_parameter_holder(const ChartFrame& frame, const Vec& center, double radius, const Vec& a,
                                       double alpha, int refinements, int base_samples, std::uint64_t seed,
                                       const FlowSolverConfig& cfg)
{
    HolderReport rep;
    const int n = frame.dim();
    Rng rng(seed);
    int samples = base_samples;
    double sep = 0.5 * radius;
    for (int k = 0; k < refinements; ++k) {
        double best = 0.0;
        for (int s = 0; s < samples; ++s) {
            Vec u(n), d(n);
            for (int i = 0; i < n; ++i) {
                u[i] = center[i] + radius * rng.uniform();
                d[i] = rng.uniform();
            }
            d *= sep * rng.uniform(0.5, 1.0) / d.norm();
            Vec up = u + d;
            const double rho = riem_gap(frame, u, up);
            if (rho <= 0.0)
                continue;
            Vec du = exp_combination(frame, u, a, 1.0, cfg) - u;
            Vec dp = exp_combination(frame, up, a, 1.0, cfg) - up;
            best = std::max(best, (du - dp).norm() / std::pow(rho, alpha));
        }
        rep.samples.push_back(samples);
        rep.separations.push_back(sep);
        rep.estimates.push_back(best);
        samples *= 4;
        sep *= 0.5;
    }
    rep.value = rep.estimates.empty() ? 0.0 : rep.estimates.back();
    return rep;
}

} // namespace carnot::flows
