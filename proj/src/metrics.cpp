#include "carnot/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace carnot::metrics {

double d_inf(const ChartFrame& frame, const Vec& u, const Vec& v, const FlowSolverConfig& cfg)
{
    return cone::homogeneous_norm(frame.grading(), flows::normal_coords(frame, u, v, cfg).a);
}

double roundoff_floor(const Vec& u, const Vec& v)
{
    return 64 * std::numeric_limits<double>::epsilon() *
           std::max({1.0, u.cwiseAbs().maxCoeff(), v.cwiseAbs().maxCoeff()});
}

double d_inf_resolved(const ChartFrame& frame, const Vec& u, const Vec& v, const FlowSolverConfig& cfg)
{
    if ((u - v).cwiseAbs().maxCoeff() <= roundoff_floor(u, v))
        return 0.0;
    return d_inf(frame, u, v, cfg);
}

double d_riem(const ChartFrame& frame, const Vec& u, const Vec& v, const FlowSolverConfig& cfg)
{
    return cone::max_abs(flows::normal_coords(frame, u, v, cfg).a);
}

Vec cone_quotient(const ChartFrame& frame, const cone::NilpotentCone& cone, const Vec& u, const Vec& v,
                  const FlowSolverConfig& cfg)
{
    Vec su = flows::normal_coords(frame, cone.base(), u, cfg).a;
    Vec sv = flows::normal_coords(frame, cone.base(), v, cfg).a;
    return cone.bch(-su, sv);
}

double d_inf_at(const ChartFrame& frame, const cone::NilpotentCone& cone, const Vec& u, const Vec& v,
                const FlowSolverConfig& cfg)
{
    return cone::homogeneous_norm(frame.grading(), cone_quotient(frame, cone, u, v, cfg));
}

double d2(const ChartFrame& frame, const cone::NilpotentCone& cone, const Vec& u, const Vec& v,
          const FlowSolverConfig& cfg)
{
    return cone::layer_norm(frame.grading(), cone_quotient(frame, cone, u, v, cfg));
}

bool in_box(const ChartFrame& frame, const BoxSpec& box, const Vec& p, const FlowSolverConfig& cfg)
{
    if (!(box.r > 0))
        throw ConfigError("box radius must be positive");
    switch (box.kind) {
    case MetricKind::Inf:
        return d_inf(frame, box.center, p, cfg) <= box.r;
    case MetricKind::InfAt:
        return d_inf_at(frame, cone::build_cone(frame, box.base), box.center, p, cfg) <= box.r;
    case MetricKind::D2:
        return d2(frame, cone::build_cone(frame, box.base), box.center, p, cfg) <= box.r;
    }
    return false;
}

Vec box_point(const ChartFrame& frame, const Vec& center, double r, const Vec& c, const FlowSolverConfig& cfg)
{
    Vec a(c.size());
    for (int i = 0; i < c.size(); ++i)
        a[i] = std::pow(r, frame.grading().degree(i)) * c[i];
    return flows::exp_combination(frame, center, a, 1.0, cfg);
}

Eigen::VectorXd sample_cube(int m, Rng& rng)
{
    Eigen::VectorXd x(m);
    const double mode = rng.uniform(0.0, 1.0);
    for (int i = 0; i < m; ++i) {
        if (mode < 0.1)
            x[i] = rng.coin() ? 1.0 : -1.0;
        else if (mode < 0.4 && rng.uniform(0.0, 1.0) < 0.3)
            x[i] = rng.coin() ? 1.0 : -1.0;
        else
            x[i] = rng.uniform();
    }
    return x;
}

namespace {

Vec head(const Eigen::VectorXd& x, int off, int n) { return Vec(x.segment(off, n)); }

double safe_eval(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x)
{
    try {
        const double v = f(x);
        return std::isfinite(v) ? v : -std::numeric_limits<double>::infinity();
    } catch (const Error&) {
        return -std::numeric_limits<double>::infinity();
    }
}

} // namespace

Estimate maximize(int m, int samples, const std::function<double(const Eigen::VectorXd&)>& f, std::uint64_t seed,
                  int climbers, int climb_steps)
{
    Rng rng(seed);
    std::vector<std::pair<double, Eigen::VectorXd>> draws;
    draws.reserve(samples);
    std::vector<double> values;
    for (int s = 0; s < samples; ++s) {
        Eigen::VectorXd x = sample_cube(m, rng);
        const double v = safe_eval(f, x);
        if (std::isfinite(v)) {
            values.push_back(v);
            draws.emplace_back(v, std::move(x));
        }
    }
    Estimate est;
    est.samples = samples;
    est.seed = seed;
    if (draws.empty())
        return est;
    std::sort(values.begin(), values.end());
    est.p99 = values[std::min(values.size() - 1, static_cast<size_t>(0.99 * values.size()))];
    const int top = std::min<int>(climbers, draws.size());
    std::partial_sort(draws.begin(), draws.begin() + top, draws.end(),
                      [](const auto& a, const auto& b) { return a.first > b.first; });
    est.max = draws[0].first;
    est.argmax = draws[0].second;
    for (int c = 0; c < top; ++c) {
        Eigen::VectorXd x = draws[c].second;
        double fx = draws[c].first;
        double step = 0.25;
        int fails = 0;
        for (int it = 0; it < climb_steps && step > 1e-4; ++it) {
            Eigen::VectorXd y = x;
            for (int i = 0; i < m; ++i)
                y[i] = std::clamp(y[i] + step * rng.uniform(), -1.0, 1.0);
            const double fy = safe_eval(f, y);
            if (fy > fx) {
                x = y;
                fx = fy;
                fails = 0;
            } else if (++fails >= 8) {
                step *= 0.5;
                fails = 0;
            }
        }
        if (fx > est.max) {
            est.max = fx;
            est.argmax = x;
        }
    }
    return est;
}

Estimate estimate_triangle_constant(const ChartFrame& frame, const Vec& center, double r, int samples,
                                    std::uint64_t seed, const FlowSolverConfig& cfg)
{
    const int n = frame.dim();
    auto ratio = [&](const Eigen::VectorXd& x) {
        Vec u = box_point(frame, center, r, head(x, 0, n), cfg);
        Vec v = box_point(frame, center, r, head(x, n, n), cfg);
        Vec w = box_point(frame, center, r, head(x, 2 * n, n), cfg);
        const double den = d_inf(frame, u, w, cfg) + d_inf(frame, w, v, cfg);
        if (den <= 0.0)
            return 1.0;
        return d_inf(frame, u, v, cfg) / den;
    };
    Estimate e = maximize(3 * n, samples, ratio, seed);
    // w = u gives ratio 1, so the constant is never below one.
    e.max = std::max(1.0, e.max);
    e.p99 = std::max(1.0, e.p99);
    return e;
}

NestingReport box_nesting_check(const ChartFrame& frame, const Vec& u, const Vec& v, double r, double xi, int samples,
                                std::uint64_t seed, const FlowSolverConfig& cfg)
{
    if (!(r > 0 && xi > 0))
        throw ConfigError("box radii must be positive");
    const int n = frame.dim();
    auto cone = cone::build_cone(frame, u);
    const Vec sv = flows::normal_coords(frame, u, v, cfg).a;
    const auto& g = frame.grading();
    auto excess = [&](const Eigen::VectorXd& x) {
        Vec sx = cone.bch(sv, cone.dilate(r, head(x, 0, n)));
        Vec sy = cone.bch(sx, cone.dilate(xi, head(x, n, n)));
        return (cone::homogeneous_norm(g, cone.bch(-sv, sy)) - r) / xi;
    };
    NestingReport rep;
    rep.estimate = maximize(2 * n, samples, excess, seed);
    rep.C = std::max(0.0, rep.estimate.max);
    rep.pass = std::isfinite(rep.C);
    return rep;
}

double DiameterReport::spread() const
{
    if (L.empty())
        return 0.0;
    double lo = L[0].max, hi = L[0].max;
    for (const auto& e : L) {
        lo = std::min(lo, e.max);
        hi = std::max(hi, e.max);
    }
    return lo > 0 ? (hi - lo) / lo : std::numeric_limits<double>::infinity();
}

DiameterReport diameter_check(const ChartFrame& frame, const Vec& center, const std::vector<double>& eps, int samples,
                              std::uint64_t seed, const FlowSolverConfig& cfg)
{
    const int n = frame.dim();
    DiameterReport rep;
    for (size_t k = 0; k < eps.size(); ++k) {
        const double e = eps[k];
        if (!(e > 0))
            throw ConfigError("diameter scales must be positive");
        auto ratio = [&](const Eigen::VectorXd& x) {
            Vec v = box_point(frame, center, e, head(x, 0, n), cfg);
            Vec w = box_point(frame, center, e, head(x, n, n), cfg);
            return d_inf(frame, v, w, cfg) / e;
        };
        rep.eps.push_back(e);
        rep.L.push_back(maximize(2 * n, samples, ratio, seed + k));
    }
    return rep;
}

ChainReport chain_constants(const ChartFrame& frame, const Vec& center, double r, int samples, std::uint64_t seed,
                            const FlowSolverConfig& cfg)
{
    const int n = frame.dim();
    const double M = frame.grading().depth();
    ChainReport rep;
    rep.pairs = samples;
    auto pair = [&](const Eigen::VectorXd& x) {
        return std::make_pair(box_point(frame, center, r, head(x, 0, n), cfg),
                              box_point(frame, center, r, head(x, n, n), cfg));
    };
    rep.riem_over_inf = maximize(
        2 * n, samples,
        [&](const Eigen::VectorXd& x) {
            auto [u, v] = pair(x);
            const double di = d_inf(frame, u, v, cfg);
            return di > 0 ? d_riem(frame, u, v, cfg) / di : 0.0;
        },
        seed);
    rep.inf_over_riem_root = maximize(
        2 * n, samples,
        [&](const Eigen::VectorXd& x) {
            auto [u, v] = pair(x);
            const double dr = d_riem(frame, u, v, cfg);
            return dr > 0 ? d_inf(frame, u, v, cfg) / std::pow(dr, 1.0 / M) : 0.0;
        },
        seed + 1);
    Rng rng(seed + 2);
    for (int s = 0; s < samples; ++s) {
        auto [u, v] = pair(sample_cube(2 * n, rng));
        rep.symmetry_residual =
            std::max(rep.symmetry_residual, std::abs(d_inf(frame, u, v, cfg) - d_inf(frame, v, u, cfg)));
    }
    return rep;
}

} // namespace carnot::metrics
