#include "carnot/hcdiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "carnot/approx.hpp"

namespace carnot::hcdiff {

Mat SmoothMap::jacobian(const Vec& p) const
{
    if (df)
        return df(p);
    return frames::richardson_jacobian(f, p, "map");
}

SmoothMap identity_map()
{
    return {[](const Vec& p) { return p; }, [](const Vec& p) { return Mat(Mat::Identity(p.size(), p.size())); }};
}

SmoothMap compose(const SmoothMap& outer, const SmoothMap& inner)
{
    SmoothMap m;
    m.f = [outer, inner](const Vec& p) { return outer(inner(p)); };
    m.df = [outer, inner](const Vec& p) { return Mat(outer.jacobian(inner(p)) * inner.jacobian(p)); };
    return m;
}

CurveWindow make_curve_window(const ChartFrame& frame, const std::function<Vec(double)>& curve, double s,
                              double radius, int levels, double ratio, const FlowSolverConfig& cfg)
{
    if (!(radius > 0 && ratio > 0 && ratio < 1 && levels > 0))
        throw ConfigError("curve window needs radius > 0, ratio in (0,1), levels > 0");
    CurveWindow w;
    w.base = curve(s);
    for (int k = 0; k < levels; ++k) {
        const double t = radius * std::pow(ratio, k);
        for (double tau : {t, -t}) {
            w.tau.push_back(tau);
            w.coords.push_back(flows::normal_coords(frame, w.base, curve(s + tau), cfg).a);
        }
    }
    return w;
}

CurveDerivative curve_hc_derivative(const ChartFrame& frame, const CurveWindow& window, double noise_floor)
{
    const auto& g = frame.grading();
    const int n = frame.dim();
    const int m = static_cast<int>(window.tau.size());
    if (m < 5)
        throw GridTooCoarse("curve window has " + std::to_string(m) + " points");
    CurveDerivative out;
    out.alpha = Vec::Zero(g.horizontal_dim());
    out.exponent.assign(n, std::numeric_limits<double>::infinity());
    out.pass = true;
    for (int i = 0; i < n; ++i) {
        if (g.degree(i) == 1) {
            // gamma_i / tau = alpha + beta tau, least squares.
            Eigen::MatrixXd A(m, 2);
            Eigen::VectorXd y(m);
            for (int k = 0; k < m; ++k) {
                A(k, 0) = 1.0;
                A(k, 1) = window.tau[k];
                y[k] = window.coords[k][i] / window.tau[k];
            }
            out.alpha[i] = A.colPivHouseholderQr().solve(y)[0];
            continue;
        }
        std::vector<double> lt, lg;
        for (int k = 0; k < m; ++k) {
            const double v = std::abs(window.coords[k][i]);
            if (v > noise_floor) {
                lt.push_back(std::abs(window.tau[k]));
                lg.push_back(v);
            }
        }
        if (lt.empty())
            continue;
        if (lt.size() < 5)
            throw GridTooCoarse("coordinate " + std::to_string(i) + " has " + std::to_string(lt.size()) +
                                " points above the noise floor");
        out.exponent[i] = approx::loglog_slope(lt, lg);
        if (!(out.exponent[i] > g.degree(i) - 0.1))
            out.pass = false;
    }
    return out;
}

ContactReport contact_check(const ChartFrame& source, const ChartFrame& target, const SmoothMap& phi, const Vec& p,
                            double tol)
{
    const int h = source.grading().horizontal_dim();
    const int ht = target.grading().horizontal_dim();
    Mat D = phi.jacobian(p);
    if (D.rows() != target.dim() || D.cols() != source.dim())
        throw ConfigError("map dimensions do not match the frames");
    Mat Xh = source.frame(p).leftCols(h);
    ContactReport rep;
    rep.coefficients = frames::eval_frame(target, phi(p)).fullPivLu().solve(Mat(D * Xh));
    const double scale = std::max(1.0, rep.coefficients.cwiseAbs().maxCoeff());
    if (rep.coefficients.rows() > ht)
        rep.vertical_leak = rep.coefficients.bottomRows(rep.coefficients.rows() - ht).cwiseAbs().maxCoeff() / scale;
    rep.pass = rep.vertical_leak <= tol;
    return rep;
}

HcDifferential hc_differential(const ChartFrame& source, const ChartFrame& target, const SmoothMap& phi, const Vec& p,
                               double tol)
{
    auto contact = contact_check(source, target, phi, p, tol);
    if (!contact.pass)
        throw HorizontalMismatch("map is not contact at the base point (leak " + std::to_string(contact.vertical_leak) +
                                 ")");
    const auto& gs = source.grading();
    const auto& gt = target.grading();
    HcDifferential D{p, phi(p), contact.coefficients.topRows(gt.horizontal_dim()), Mat::Zero(gt.dim(), gs.dim()),
                     gs, gt, 0.0};
    auto cs = cone::build_cone(source, p);
    auto ct = cone::build_cone(target, D.image);
    if (!cs.bracket_generating())
        throw ConfigError("source cone is not bracket generating");
    D.induced.topLeftCorner(gt.horizontal_dim(), gs.horizontal_dim()) = D.b;
    for (int k = 2; k <= gs.depth(); ++k) {
        if (k > gt.depth())
            break;
        const auto& words = cs.layer_words(k);
        Mat T(gt.layer_size(k), static_cast<int>(words.size()));
        for (size_t c = 0; c < words.size(); ++c) {
            Vec v = D.induced.col(words[c].back());
            for (int q = static_cast<int>(words[c].size()) - 2; q >= 0; --q)
                v = ct.bracket(D.induced.col(words[c][q]), v);
            T.col(c) = v.segment(gt.layer_begin(k), gt.layer_size(k));
        }
        D.induced.block(gt.layer_begin(k), gs.layer_begin(k), gt.layer_size(k), gs.layer_size(k)) =
            T * cs.layer_basis(k).inverse();
    }
    // The extension must respect every bracket, not only the presentation words.
    double res = 0.0;
    for (int a = 0; a < gs.dim(); ++a)
        for (int b = a + 1; b < gs.dim(); ++b) {
            Vec lhs = D.induced * cs.bracket(Vec::Unit(gs.dim(), a), Vec::Unit(gs.dim(), b));
            Vec rhs = ct.bracket(D.induced.col(a), D.induced.col(b));
            res = std::max(res, (lhs - rhs).cwiseAbs().maxCoeff());
        }
    D.compatibility = res;
    const double scale = std::max(1.0, std::pow(D.induced.cwiseAbs().maxCoeff(), 2));
    if (res > tol * scale)
        throw ExtensionObstruction("horizontal differential does not extend to a homomorphism (residual " +
                                   std::to_string(res) + ")");
    return D;
}

bool HomomorphismReport::decays() const
{
    if (residual.empty())
        return false;
    const double mx = *std::max_element(residual.begin(), residual.end());
    // Inclusive halving with a solver-tolerance margin: sqrt-rate residuals land exactly on it over a 4x range.
    return mx < 1e-8 || residual.back() <= 0.5 * residual.front() * (1.0 + 1e-6);
}

HomomorphismReport homomorphism_residual(const ChartFrame& source, const ChartFrame& target, const SmoothMap& phi,
                                         const HcDifferential& D, const std::vector<double>& t, int samples,
                                         std::uint64_t seed, const FlowSolverConfig& cfg)
{
    auto ct = cone::build_cone(target, D.image);
    Rng rng(seed);
    std::vector<Vec> as;
    for (int s = 0; s < samples; ++s)
        as.push_back(Vec(metrics::sample_cube(source.dim(), rng)));
    HomomorphismReport rep;
    for (double tt : t) {
        if (!(tt > 0))
            throw ConfigError("homomorphism scales must be positive");
        double worst = 0.0;
        for (const Vec& a : as) {
            Vec y = phi(metrics::box_point(source, D.base, tt, a, cfg));
            Vec st = flows::normal_coords(target, D.image, y, cfg).a;
            Vec la = D.apply(a);
            Vec expect = ct.dilate(tt, la);
            if ((st - expect).cwiseAbs().maxCoeff() <= metrics::roundoff_floor(st, expect))
                continue;
            worst = std::max(worst, cone::homogeneous_norm(ct.grading(), ct.bch(-la, ct.dilate(1.0 / tt, st))));
        }
        rep.t.push_back(tt);
        rep.residual.push_back(worst);
    }
    return rep;
}

double chain_rule_check(const ChartFrame& m, const ChartFrame& n, const ChartFrame& x, const SmoothMap& phi,
                        const SmoothMap& psi, const Vec& p)
{
    auto d1 = hc_differential(m, n, phi, p);
    auto d2 = hc_differential(n, x, psi, d1.image);
    auto d12 = hc_differential(m, x, compose(psi, phi), p);
    return (d12.induced - d2.induced * d1.induced).cwiseAbs().maxCoeff();
}

BasisChange basis_independence_check(const ChartFrame& fx, const ChartFrame& fy, const Vec& g,
                                     const std::vector<double>& t, int samples, std::uint64_t seed,
                                     const FlowSolverConfig& cfg)
{
    const int h = fx.grading().horizontal_dim();
    if (fy.grading().horizontal_dim() != h || fx.dim() != fy.dim())
        throw HorizontalMismatch("framings have different horizontal dimensions");
    Mat Xh = fx.frame(g).leftCols(h), Yh = fy.frame(g).leftCols(h);
    Mat coef = Yh.colPivHouseholderQr().solve(Xh);
    if ((Yh * coef - Xh).cwiseAbs().maxCoeff() > 1e-8 * std::max(1.0, Xh.cwiseAbs().maxCoeff()))
        throw HorizontalMismatch("first layers span different subspaces");
    BasisChange out;
    auto id = identity_map();
    out.differential = hc_differential(fx, fy, id, g);
    Eigen::FullPivLU<Mat> lu(out.differential.induced);
    out.invertible = lu.isInvertible() && lu.rcond() > 1e-10;
    out.residual = homomorphism_residual(fx, fy, id, out.differential, t, samples, seed, cfg);
    return out;
}

} // namespace carnot::hcdiff
