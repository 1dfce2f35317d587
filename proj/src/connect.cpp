#include "carnot/connect.hpp"

#include <cmath>
#include <limits>

#include "carnot/approx.hpp"

namespace carnot::connect {

Vec word_product(const cone::NilpotentCone& cone, const Word& word)
{
    Vec p = Vec::Zero(cone.dim());
    for (const auto& s : word)
        p = cone.bch(p, s.coef * Vec::Unit(cone.dim(), s.field));
    return p;
}

Word inverse(const Word& word)
{
    Word out(word.rbegin(), word.rend());
    for (auto& s : out)
        s.coef = -s.coef;
    return out;
}

Word merge(const Word& word)
{
    Word out;
    for (const auto& s : word) {
        if (!out.empty() && out.back().field == s.field)
            out.back().coef += s.coef;
        else
            out.push_back(s);
        if (out.back().coef == 0.0)
            out.pop_back();
    }
    return out;
}

namespace {

// Iterated group commutator realizing the right-nested bracket word at scale t.
Word realize(const std::vector<int>& letters, size_t pos, double t, double sign)
{
    Word x{{letters[pos], sign * t}};
    if (pos + 1 == letters.size())
        return x;
    Word y = realize(letters, pos + 1, t, 1.0);
    Word out = x;
    out.insert(out.end(), y.begin(), y.end());
    Word xi = inverse(x), yi = inverse(y);
    out.insert(out.end(), xi.begin(), xi.end());
    out.insert(out.end(), yi.begin(), yi.end());
    return out;
}

int realized_length(int k) { return k == 1 ? 1 : 2 + 2 * realized_length(k - 1); }

} // namespace

int max_word_length(const frames::Grading& g)
{
    int total = 0;
    for (int k = 1; k <= g.depth(); ++k)
        total += g.layer_size(k) * realized_length(k);
    return total;
}

Word group_connect(const cone::NilpotentCone& cone, const Vec& v, const Vec& w)
{
    if (!cone.bracket_generating())
        throw ConfigError("cone is not bracket generating");
    const auto& g = cone.grading();
    const Vec q = cone.bch(-v, w);
    Word word;
    Vec P = Vec::Zero(cone.dim());
    for (int k = 1; k <= g.depth(); ++k) {
        const int b = g.layer_begin(k), sz = g.layer_size(k);
        Vec r = cone.bch(-P, q);
        Eigen::VectorXd rk = r.segment(b, sz);
        if (rk.cwiseAbs().maxCoeff() == 0.0)
            continue;
        if (k == 1) {
            for (int h = 0; h < sz; ++h)
                if (rk[h] != 0.0)
                    word.push_back({h, rk[h]});
        } else {
            const auto& words = cone.layer_words(k);
            Eigen::MatrixXd B(sz, static_cast<int>(words.size()));
            for (size_t c = 0; c < words.size(); ++c)
                B.col(c) = word_product(cone, realize(words[c], 0, 1.0, 1.0)).segment(b, sz);
            Eigen::VectorXd lam = B.fullPivLu().solve(rk);
            for (size_t c = 0; c < words.size(); ++c) {
                if (lam[c] == 0.0)
                    continue;
                Word piece = realize(words[c], 0, std::pow(std::abs(lam[c]), 1.0 / k), lam[c] > 0 ? 1.0 : -1.0);
                word.insert(word.end(), piece.begin(), piece.end());
            }
        }
        P = word_product(cone, word);
    }
    return merge(word);
}

double path_length(const ChartFrame& frame, const Word& word, const Vec& v, const FlowSolverConfig& cfg)
{
    double len = 0.0;
    if (!frame.has_metric()) {
        for (const auto& s : word)
            len += std::abs(s.coef);
        return len;
    }
    // Composite Simpson rule on sqrt(G_ii) along each segment.
    constexpr int m = 8;
    Vec p = v;
    for (const auto& s : word) {
        Vec a = s.coef * Vec::Unit(frame.dim(), s.field);
        double acc = 0.0;
        for (int q = 0; q <= m; ++q) {
            Vec x = q == 0 ? p : flows::exp_combination(frame, p, a, double(q) / m, cfg);
            const double wgt = (q == 0 || q == m) ? 1.0 : (q % 2 ? 4.0 : 2.0);
            acc += wgt * std::sqrt(frame.riemann(x)(s.field, s.field));
        }
        len += std::abs(s.coef) * acc / (3.0 * m);
        p = flows::exp_combination(frame, p, a, 1.0, cfg);
    }
    return len;
}

Lift lift_to_manifold(const ChartFrame& frame, const cone::NilpotentCone& cone, const Word& word, const Vec& v,
                      const FlowSolverConfig& cfg)
{
    for (const auto& s : word)
        if (s.field < 0 || s.field >= frame.grading().horizontal_dim())
            throw HorizontalMismatch("word uses a non-horizontal field");
    Lift out;
    Vec sv = flows::normal_coords(frame, cone.base(), v, cfg).a;
    out.target = flows::exp_combination(frame, cone.base(), cone.bch(sv, word_product(cone, word)), 1.0, cfg);
    Vec p = v;
    for (const auto& s : word)
        p = flows::exp_combination(frame, p, s.coef * Vec::Unit(frame.dim(), s.field), 1.0, cfg);
    out.path.start = v;
    out.path.segments = word;
    out.path.end = p;
    out.path.length = path_length(frame, word, v, cfg);
    out.mismatch = metrics::d_inf_resolved(frame, p, out.target, cfg);
    return out;
}

ConnectResult cc_connect(const ChartFrame& frame, const Vec& v, const Vec& w, double tol, int max_rounds,
                         const FlowSolverConfig& cfg)
{
    ConnectResult res;
    res.path.start = v;
    res.path.end = v;
    if ((v - w).cwiseAbs().maxCoeff() == 0.0)
        return res;
    double prev = metrics::d_inf(frame, v, w, cfg);
    if (prev < tol)
        return res;
    int stalls = 0;
    Vec p = v;
    while (res.rounds < max_rounds) {
        ++res.rounds;
        // The cone at the current endpoint has the target at theta_p(s_w).
        auto c = cone::build_cone(frame, p);
        Vec sw = flows::normal_coords(frame, p, w, cfg).a;
        Lift lift = lift_to_manifold(frame, c, group_connect(c, Vec::Zero(frame.dim()), sw), p, cfg);
        res.path.segments.insert(res.path.segments.end(), lift.path.segments.begin(), lift.path.segments.end());
        res.path.length += lift.path.length;
        p = lift.path.end;
        const double r = metrics::d_inf(frame, p, w, cfg);
        res.residuals.push_back(r);
        if (r < tol)
            break;
        // d_inf cannot resolve below ulp^{1/M}; stop once the endpoint matches w to roundoff.
        if ((p - w).cwiseAbs().maxCoeff() <= metrics::roundoff_floor(p, w)) {
            res.roundoff_limited = true;
            break;
        }
        stalls = r >= prev ? stalls + 1 : 0;
        if (stalls >= 3)
            throw NoContraction("residuals stopped decreasing; reduce the scale");
        prev = r;
    }
    if (!res.roundoff_limited && (res.residuals.empty() || res.residuals.back() >= tol))
        throw NoContraction("round budget exhausted before reaching tolerance");
    res.path.end = p;
    return res;
}

namespace {

double upper_rec(const ChartFrame& frame, const Vec& v, const Vec& w, int budget, double tol,
                 const FlowSolverConfig& cfg)
{
    double best = std::numeric_limits<double>::infinity();
    try {
        best = cc_connect(frame, v, w, tol, 30, cfg).path.length;
    } catch (const NoContraction&) {
    }
    if (budget > 0) {
        Vec s = flows::normal_coords(frame, v, w, cfg).a;
        Vec m = metrics::box_point(frame, v, 0.5, s, cfg);
        best = std::min(best, upper_rec(frame, v, m, budget - 1, tol, cfg) + upper_rec(frame, m, w, budget - 1, tol, cfg));
    }
    return best;
}

} // namespace

double cc_distance_upper(const ChartFrame& frame, const Vec& v, const Vec& w, int budget, double tol,
                         const FlowSolverConfig& cfg)
{
    if ((v - w).cwiseAbs().maxCoeff() == 0.0)
        return 0.0;
    const double d = upper_rec(frame, v, w, budget, tol, cfg);
    if (!std::isfinite(d))
        throw NoContraction("no subdivision level connected the points");
    return d;
}

namespace {

double spread(const std::vector<double>& x)
{
    if (x.empty())
        return 0.0;
    double lo = x[0], hi = x[0];
    for (double v : x) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    return (hi - lo) / lo;
}

} // namespace

double BallBoxReport::spread_C1() const { return spread(C1); }
double BallBoxReport::spread_C2() const { return spread(C2); }

BallBoxReport ballbox_check(const ChartFrame& frame, const Vec& g, const std::vector<double>& r, int samples,
                            std::uint64_t seed, int budget, const FlowSolverConfig& cfg)
{
    const int n = frame.dim();
    const int h = frame.grading().horizontal_dim();
    constexpr int K = 6;
    BallBoxReport rep;
    for (size_t k = 0; k < r.size(); ++k) {
        const double rr = r[k];
        if (!(rr > 0))
            throw ConfigError("ball-box radii must be positive");
        auto ratio = [&](const Eigen::VectorXd& c) {
            Word word;
            for (int j = 0; j < K; ++j)
                word.push_back({j % h, rr * c[j] / K});
            word = merge(word);
            Vec p = g;
            for (const auto& s : word)
                p = flows::exp_combination(frame, p, s.coef * Vec::Unit(n, s.field), 1.0, cfg);
            const double len = path_length(frame, word, g, cfg);
            return len > 0 ? metrics::d_inf(frame, g, p, cfg) / len : 0.0;
        };
        auto upper = [&](const Eigen::VectorXd& c) {
            return cc_distance_upper(frame, g, metrics::box_point(frame, g, rr, Vec(c), cfg), budget, 1e-9, cfg) / rr;
        };
        rep.r.push_back(rr);
        rep.c2.push_back(metrics::maximize(K, samples, ratio, seed + 2 * k));
        rep.upper_over_r.push_back(metrics::maximize(n, samples, upper, seed + 2 * k + 1, 3, 40));
        rep.C2.push_back(rep.c2.back().max);
        rep.C1.push_back(1.0 / rep.upper_over_r.back().max);
    }
    return rep;
}

DimensionReport hausdorff_dimension_estimate(const ChartFrame& frame, const frames::Box& region,
                                             const std::vector<double>& r, int centers, int samples,
                                             std::uint64_t seed, const FlowSolverConfig& cfg)
{
    const int n = frame.dim();
    const auto& gr = frame.grading();
    double region_vol = 1.0;
    for (int i = 0; i < n; ++i)
        region_vol *= region.hi[i] - region.lo[i];
    if (!(region_vol > 0))
        throw ConfigError("region must have positive volume");
    Rng rng(seed);
    std::vector<Vec> xs, cs;
    for (int c = 0; c < centers; ++c) {
        Vec x(n);
        for (int i = 0; i < n; ++i)
            x[i] = rng.uniform(region.lo[i], region.hi[i]);
        xs.push_back(x);
    }
    for (int s = 0; s < samples; ++s) {
        Vec c(n);
        for (int i = 0; i < n; ++i)
            c[i] = rng.uniform();
        cs.push_back(c);
    }
    DimensionReport rep;
    rep.formula = gr.homogeneous_dim();
    for (double rr : r) {
        if (!(rr > 0))
            throw ConfigError("box radii must be positive");
        double scale = 1.0;
        for (int i = 0; i < n; ++i)
            scale *= 2.0 * std::pow(rr, gr.degree(i));
        double mean = 0.0;
        for (const Vec& x : xs)
            for (const Vec& c : cs) {
                Vec a(n);
                for (int i = 0; i < n; ++i)
                    a[i] = std::pow(rr, gr.degree(i)) * c[i];
                mean += std::abs(flows::exp_combination_jacobian(frame, x, a, cfg).d_coeffs.determinant());
            }
        mean /= double(xs.size() * cs.size());
        rep.r.push_back(rr);
        rep.count.push_back(region_vol / (scale * mean));
    }
    std::vector<double> inv;
    for (double x : rep.r)
        inv.push_back(1.0 / x);
    rep.dimension = approx::loglog_slope(inv, rep.count);
    return rep;
}

} // namespace carnot::connect
