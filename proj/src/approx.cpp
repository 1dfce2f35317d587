#include "carnot/approx.hpp"

#include <cmath>

namespace carnot::approx {

namespace {

Vec dilate_coords(const frames::Grading& g, double eps, const Vec& s)
{
    Vec out(s.size());
    for (int i = 0; i < s.size(); ++i)
        out[i] = std::pow(eps, g.degree(i)) * s[i];
    return out;
}

} // namespace

Mat pulled_back_frame(const ChartFrame& frame, const Vec& g, const Vec& s, const FlowSolverConfig& cfg)
{
    auto fj = flows::exp_combination_jacobian(frame, g, s, cfg);
    Eigen::FullPivLU<Mat> lu(fj.d_coeffs);
    if (!lu.isInvertible())
        throw SingularFrame("exponential map is singular at the requested coefficients");
    return lu.solve(frame.frame(fj.point));
}

Vec rescaled_field(const ChartFrame& frame, const Vec& g, double eps, int i, const Vec& x,
                   const FlowSolverConfig& cfg)
{
    if (!(eps > 0))
        throw ConfigError("scale must be positive");
    const auto& gr = frame.grading();
    Vec s = flows::normal_coords(frame, g, x, cfg).a;
    Mat Y = pulled_back_frame(frame, g, dilate_coords(gr, eps, s), cfg);
    Vec out(frame.dim());
    for (int k = 0; k < frame.dim(); ++k)
        out[k] = std::pow(eps, gr.degree(i) - gr.degree(k)) * Y(k, i);
    return out;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y)
{
    const size_t n = std::min(x.size(), y.size());
    double mx = 0, my = 0;
    for (size_t k = 0; k < n; ++k) {
        mx += std::log(x[k]);
        my += std::log(y[k]);
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0;
    for (size_t k = 0; k < n; ++k) {
        const double dx = std::log(x[k]) - mx;
        sxy += dx * (std::log(y[k]) - my);
        sxx += dx * dx;
    }
    return sxx > 0 ? sxy / sxx : 0.0;
}

bool ConvergenceReport::higher_strictly_decreasing() const
{
    for (size_t k = 1; k < higher.size(); ++k)
        if (!(higher[k] < higher[k - 1]))
            return false;
    return true;
}

ConvergenceReport gromov_convergence_report(const ChartFrame& frame, const Vec& g, double r,
                                            const std::vector<double>& eps, int samples, std::uint64_t seed,
                                            const FlowSolverConfig& cfg)
{
    for (size_t k = 0; k < eps.size(); ++k)
        if (!(eps[k] > 0) || (k > 0 && !(eps[k] < eps[k - 1])))
            throw ConfigError("scale grid must be positive and strictly decreasing");
    const int n = frame.dim();
    const auto& gr = frame.grading();
    auto cone = cone::build_cone(frame, g);
    Rng rng(seed);
    std::vector<Vec> pts;
    for (int s = 0; s < samples; ++s)
        pts.push_back(dilate_coords(gr, r, Vec(metrics::sample_cube(n, rng))));

    ConvergenceReport rep;
    rep.base = g;
    rep.radius = r;
    rep.samples = samples;
    rep.eps = eps;
    for (double e : eps) {
        Mat sup = Mat::Zero(n, n);
        for (const Vec& c : pts) {
            // x = theta_g(s) ranges over Box(g, e r); expand X_j(x) = sum_k a_jk Xhat_k(x).
            Vec s = dilate_coords(gr, e, c);
            Mat A = cone.canonical_matrix(s).fullPivLu().solve(pulled_back_frame(frame, g, s, cfg));
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k)
                    sup(k, j) = std::max(sup(k, j), std::abs(A(k, j) - (k == j ? 1.0 : 0.0)));
        }
        double a = 0, b = 0;
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                const int gap = gr.degree(k) - gr.degree(j);
                if (gap <= 0)
                    a = std::max(a, sup(k, j));
                else
                    b = std::max(b, sup(k, j) / std::pow(e, gap));
            }
        rep.table.push_back(sup);
        rep.same_or_lower.push_back(a);
        rep.higher.push_back(b);
    }
    auto positive = [](const std::vector<double>& v) {
        for (double x : v)
            if (!(x > 0))
                return false;
        return !v.empty();
    };
    if (positive(rep.same_or_lower))
        rep.slope_same_or_lower = loglog_slope(rep.eps, rep.same_or_lower);
    if (positive(rep.higher))
        rep.slope_higher = loglog_slope(rep.eps, rep.higher);
    return rep;
}

DivergenceGap cone_divergence(const ChartFrame& frame, const cone::NilpotentCone& cone, const Vec& w0,
                              const std::vector<Vec>& word, double eps, const FlowSolverConfig& cfg)
{
    const auto& gr = frame.grading();
    // The nilpotent chain stays in exponential coordinates at the base; only the end is mapped back.
    Vec s_hat = flows::normal_coords(frame, cone.base(), w0, cfg).a;
    Vec w = w0;
    bool moved = false;
    for (const Vec& c : word) {
        if (c.isZero(0.0))
            continue;
        moved = true;
        Vec a = dilate_coords(gr, eps, c);
        s_hat = cone.bch(s_hat, a);
        w = flows::exp_combination(frame, w, a, 1.0, cfg);
    }
    DivergenceGap gap;
    if (!moved)
        return gap;
    Vec w_hat = flows::exp_combination(frame, cone.base(), s_hat, 1.0, cfg);
    if ((w_hat - w).cwiseAbs().maxCoeff() == 0.0)
        return gap;
    Vec sw = flows::normal_coords(frame, cone.base(), w, cfg).a;
    gap.at_base = cone::homogeneous_norm(gr, cone.bch(-s_hat, sw));
    gap.plain = metrics::d_inf(frame, w_hat, w, cfg);
    return gap;
}

double two_cone_divergence(const ChartFrame& frame, const cone::NilpotentCone& cu, const cone::NilpotentCone& cu2,
                           const Vec& v, const Vec& w, double eps, const FlowSolverConfig& cfg)
{
    Vec a = dilate_coords(frame.grading(), eps, w);
    Vec p = flows::exp_nilpotent(frame, cu, v, a, cfg);
    Vec q = flows::exp_nilpotent(frame, cu2, v, a, cfg);
    if ((p - q).cwiseAbs().maxCoeff() == 0.0)
        return 0.0;
    return std::max(metrics::d_inf_at(frame, cu, p, q, cfg), metrics::d_inf_at(frame, cu2, p, q, cfg));
}

ApproximationDefect local_approximation_defect(const ChartFrame& frame, const cone::NilpotentCone& cu,
                                               const cone::NilpotentCone& cu2, const Vec& v, const Vec& w,
                                               const FlowSolverConfig& cfg)
{
    ApproximationDefect d;
    const double du = metrics::d_inf_at(frame, cu, v, w, cfg);
    d.between_cones = std::abs(du - metrics::d_inf_at(frame, cu2, v, w, cfg));
    d.against_plain = std::abs(du - metrics::d_inf(frame, v, w, cfg));
    return d;
}

Mat cone_frame_at(const ChartFrame& frame, const cone::NilpotentCone& cone, const Vec& q, const FlowSolverConfig& cfg)
{
    Vec s = flows::normal_coords(frame, cone.base(), q, cfg).a;
    return flows::exp_combination_jacobian(frame, cone.base(), s, cfg).d_coeffs * cone.canonical_matrix(s);
}

Mat transition_matrix(const ChartFrame& frame, const cone::NilpotentCone& cu, const cone::NilpotentCone& cu2,
                      const Vec& q, const FlowSolverConfig& cfg)
{
    Eigen::FullPivLU<Mat> lu(cone_frame_at(frame, cu, q, cfg));
    if (!lu.isInvertible())
        throw SingularFrame("nilpotent frame is degenerate at the evaluation point");
    return lu.solve(cone_frame_at(frame, cu2, q, cfg));
}

} // namespace carnot::approx
