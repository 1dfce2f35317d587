#include "carnot/coarea.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <string>

#include "carnot/approx.hpp"

namespace carnot::coarea {

namespace {

int numeric_rank(const Mat& A, double tol)
{
    if (A.size() == 0)
        return 0;
    Eigen::JacobiSVD<Mat> svd(A);
    const auto& s = svd.singularValues();
    const double cut = tol * std::max(1.0, s.size() ? s[0] : 0.0);
    int r = 0;
    for (int i = 0; i < s.size(); ++i)
        if (s[i] > cut)
            ++r;
    return r;
}

double gram_root(const Mat& A)
{
    if (A.rows() == 0)
        return 1.0;
    return std::sqrt(std::max(0.0, Mat(A * A.transpose()).determinant()));
}

// Orthonormal basis of ker A in the columns.
Mat kernel_basis(const Mat& A, double tol)
{
    const int n = static_cast<int>(A.cols());
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Eigen::MatrixXd(A), Eigen::ComputeFullV);
    const int r = numeric_rank(A, tol);
    return svd.matrixV().rightCols(n - r);
}

int product_layers(const frames::Grading& g, int k) { return k <= g.depth() ? g.layer_size(k) : 0; }

double layer_product(const frames::Grading& s, const frames::Grading& t)
{
    double p = 1.0;
    for (int k = 1; k <= s.depth(); ++k) {
        const int d = s.layer_size(k) - product_layers(t, k);
        if (d < 0)
            throw ConfigError("target layer " + std::to_string(k) + " is larger than the source layer");
        p *= unit_ball_volume(d);
    }
    if (t.depth() > s.depth())
        throw ConfigError("target is deeper than the source");
    return p;
}

struct Local {
    Mat A, B;
    int rank_d = 0, rank_hc = 0;
    double normA = 0.0, normB = 0.0;
};

Local local_data(const ChartFrame& m, const ChartFrame& n, const SmoothMap& phi, const Vec& p, double tol)
{
    Local L;
    L.A = frame_derivative(m, n, phi, p);
    L.rank_d = numeric_rank(L.A, tol);
    L.normA = gram_root(L.A);
    if (L.rank_d < n.dim())
        return L;
    L.B = hc_matrix(m, n, phi, p);
    L.rank_hc = numeric_rank(L.B, tol);
    L.normB = L.rank_hc < n.dim() ? 0.0 : gram_root(L.B);
    return L;
}

double density_from(const ChartFrame& m, const Local& L, const Vec& p, double level_c)
{
    if (L.rank_hc < L.A.rows() || L.normA == 0.0)
        return 0.0;
    Mat K = kernel_basis(L.A, 1e-9);
    double gker = 1.0;
    if (K.cols() > 0)
        gker = std::sqrt(std::max(0.0, Mat(K.transpose() * m.riemann(p) * K).determinant()));
    return level_c / gker * L.normB / L.normA;
}

// Metric of the chart induced by the frame metric.
Mat chart_metric(const ChartFrame& m, const Vec& p)
{
    Mat Xi = m.frame(p).inverse();
    return Xi.transpose() * m.riemann(p) * Xi;
}

double volume_density(const ChartFrame& m, const Vec& p)
{
    return std::sqrt(std::max(0.0, m.riemann(p).determinant())) / std::abs(m.frame(p).determinant());
}

Vec uniform_in_ball(int d, Rng& rng)
{
    Vec v(d);
    for (int i = 0; i < d; ++i)
        v[i] = rng.normal();
    const double nv = v.norm();
    if (nv == 0.0)
        return Vec::Zero(d);
    return v * (std::pow(rng.uniform(0.0, 1.0), 1.0 / d) / nv);
}

// Multilinear interpolation on a regular node grid over a box.
class NodeField {
public:
    NodeField(const frames::Box& box, int nodes, const std::function<double(const Vec&)>& f)
        : box_(box), nodes_(std::max(1, nodes)), dim_(static_cast<int>(box.lo.size()))
    {
        int total = 1;
        for (int i = 0; i < dim_; ++i)
            total *= nodes_;
        values_.resize(total);
        for (int idx = 0; idx < total; ++idx)
            values_[idx] = f(node(idx));
    }

    double operator()(const Vec& p) const
    {
        if (nodes_ == 1)
            return values_[0];
        std::vector<int> base(dim_);
        std::vector<double> w(dim_);
        for (int i = 0; i < dim_; ++i) {
            const double span = box_.hi[i] - box_.lo[i];
            double u = span > 0 ? (p[i] - box_.lo[i]) / span * (nodes_ - 1) : 0.0;
            u = std::clamp(u, 0.0, static_cast<double>(nodes_ - 1));
            base[i] = std::min(static_cast<int>(u), nodes_ - 2);
            w[i] = u - base[i];
        }
        double acc = 0.0;
        for (int c = 0; c < (1 << dim_); ++c) {
            double wt = 1.0;
            int idx = 0, stride = 1;
            for (int i = 0; i < dim_; ++i) {
                const int bit = (c >> i) & 1;
                wt *= bit ? w[i] : 1.0 - w[i];
                idx += (base[i] + bit) * stride;
                stride *= nodes_;
            }
            acc += wt * values_[idx];
        }
        return acc;
    }

    double min() const { return *std::min_element(values_.begin(), values_.end()); }
    double max() const { return *std::max_element(values_.begin(), values_.end()); }

private:
    Vec node(int idx) const
    {
        Vec p(dim_);
        for (int i = 0; i < dim_; ++i) {
            const int j = idx % nodes_;
            idx /= nodes_;
            p[i] = nodes_ == 1 ? 0.5 * (box_.lo[i] + box_.hi[i])
                               : box_.lo[i] + (box_.hi[i] - box_.lo[i]) * j / (nodes_ - 1);
        }
        return p;
    }

    frames::Box box_;
    int nodes_, dim_;
    std::vector<double> values_;
};

struct Simplex {
    std::array<Vec, 3> v;
    int k = 2; // 1 = segment, 2 = triangle

    Vec centroid() const
    {
        Vec c = v[0];
        for (int i = 1; i <= k; ++i)
            c += v[i];
        return c / (k + 1);
    }

    double diameter() const
    {
        double d = 0.0;
        for (int i = 0; i <= k; ++i)
            for (int j = i + 1; j <= k; ++j)
                d = std::max(d, (v[i] - v[j]).norm());
        return d;
    }

    double measure(const Mat& g) const
    {
        Mat E(v[0].size(), k);
        for (int i = 0; i < k; ++i)
            E.col(i) = v[i + 1] - v[0];
        const double det = Mat(E.transpose() * g * E).determinant();
        return std::sqrt(std::max(0.0, det)) / (k == 2 ? 2.0 : 1.0);
    }

    std::vector<Simplex> split() const
    {
        if (k == 1) {
            Vec mid = 0.5 * (v[0] + v[1]);
            return {Simplex{{v[0], mid, mid}, 1}, Simplex{{mid, v[1], v[1]}, 1}};
        }
        Vec a = 0.5 * (v[0] + v[1]), b = 0.5 * (v[1] + v[2]), c = 0.5 * (v[0] + v[2]);
        return {Simplex{{v[0], a, c}, 2}, Simplex{{a, v[1], b}, 2}, Simplex{{c, b, v[2]}, 2}, Simplex{{a, b, c}, 2}};
    }
};

Vec cross_point(const Vec& a, const Vec& b, double fa, double fb, double t)
{
    const double s = (t - fa) / (fb - fa);
    return a + s * (b - a);
}

// Level set {f = t} of the piecewise-linear interpolant on one simplex cell (triangle or tetrahedron).
void march_cell(const std::vector<Vec>& p, const std::vector<double>& f, double t, std::vector<Simplex>& out)
{
    const int nv = static_cast<int>(p.size());
    std::vector<int> pos, neg;
    for (int i = 0; i < nv; ++i)
        (f[i] > t ? pos : neg).push_back(i);
    if (pos.empty() || neg.empty())
        return;
    auto X = [&](int i, int j) { return cross_point(p[i], p[j], f[i], f[j], t); };
    if (nv == 3) {
        const auto& odd = pos.size() == 1 ? pos : neg;
        const auto& rest = pos.size() == 1 ? neg : pos;
        Vec a = X(odd[0], rest[0]), b = X(odd[0], rest[1]);
        out.push_back(Simplex{{a, b, b}, 1});
        return;
    }
    if (pos.size() == 1 || neg.size() == 1) {
        const auto& odd = pos.size() == 1 ? pos : neg;
        const auto& rest = pos.size() == 1 ? neg : pos;
        out.push_back(Simplex{{X(odd[0], rest[0]), X(odd[0], rest[1]), X(odd[0], rest[2])}, 2});
        return;
    }
    // Two and two: a planar quadrilateral, split along a diagonal.
    Vec a = X(pos[0], neg[0]), b = X(pos[0], neg[1]), c = X(pos[1], neg[1]), d = X(pos[1], neg[0]);
    out.push_back(Simplex{{a, b, c}, 2});
    out.push_back(Simplex{{a, c, d}, 2});
}

constexpr int kTets[6][4] = {{0, 5, 1, 6}, {0, 1, 2, 6}, {0, 2, 3, 6}, {0, 3, 7, 6}, {0, 7, 4, 6}, {0, 4, 5, 6}};
constexpr int kCube[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}, {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
constexpr int kTris[2][3] = {{0, 1, 2}, {0, 2, 3}};
constexpr int kSquare[4][2] = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};

struct Grid {
    int n = 0, dim = 0;
    frames::Box box;
    std::vector<double> values;

    Vec node(const std::array<int, 3>& ijk) const
    {
        Vec p(dim);
        for (int i = 0; i < dim; ++i)
            p[i] = box.lo[i] + (box.hi[i] - box.lo[i]) * ijk[i] / n;
        return p;
    }

    int index(const std::array<int, 3>& ijk) const
    {
        int idx = 0;
        for (int i = dim - 1; i >= 0; --i)
            idx = idx * (n + 1) + ijk[i];
        return idx;
    }

    std::vector<Simplex> level(double t) const
    {
        std::vector<Simplex> out;
        const int c3 = dim == 3 ? n : 1;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < c3; ++k) {
                    if (dim == 3) {
                        std::array<Vec, 8> P;
                        std::array<double, 8> F;
                        for (int c = 0; c < 8; ++c) {
                            std::array<int, 3> ijk{i + kCube[c][0], j + kCube[c][1], k + kCube[c][2]};
                            P[c] = node(ijk);
                            F[c] = values[index(ijk)];
                        }
                        for (const auto& tet : kTets) {
                            std::vector<Vec> p{P[tet[0]], P[tet[1]], P[tet[2]], P[tet[3]]};
                            std::vector<double> f{F[tet[0]], F[tet[1]], F[tet[2]], F[tet[3]]};
                            march_cell(p, f, t, out);
                        }
                    } else {
                        std::array<Vec, 4> P;
                        std::array<double, 4> F;
                        for (int c = 0; c < 4; ++c) {
                            std::array<int, 3> ijk{i + kSquare[c][0], j + kSquare[c][1], 0};
                            P[c] = node(ijk);
                            F[c] = values[index(ijk)];
                        }
                        for (const auto& tri : kTris) {
                            std::vector<Vec> p{P[tri[0]], P[tri[1]], P[tri[2]]};
                            std::vector<double> f{F[tri[0]], F[tri[1]], F[tri[2]]};
                            march_cell(p, f, t, out);
                        }
                    }
                }
        return out;
    }
};

// Horizontal block of the hc-differential, flattened; it vanishes exactly on chi and Z for scalar maps.
Eigen::VectorXd hc_row(const ChartFrame& m, const ChartFrame& n, const SmoothMap& phi, const Vec& p)
{
    Mat A = frame_derivative(m, n, phi, p);
    Mat H = A.leftCols(m.grading().horizontal_dim());
    return Eigen::Map<const Eigen::VectorXd>(H.data(), H.size());
}

// Solves [hc_row(p); phi(p) - t] = 0 by Gauss-Newton from p0.
bool refine_characteristic(const ChartFrame& m, const ChartFrame& n, const SmoothMap& phi, double t, Vec& p)
{
    auto F = [&](const Vec& q) {
        Eigen::VectorXd h = hc_row(m, n, phi, q);
        Eigen::VectorXd r(h.size() + 1);
        r.head(h.size()) = h;
        r[h.size()] = phi(q)[0] - t;
        return r;
    };
    for (int it = 0; it < 40; ++it) {
        Eigen::VectorXd r = F(p);
        if (r.cwiseAbs().maxCoeff() < 1e-11)
            return true;
        Eigen::MatrixXd J(r.size(), p.size());
        for (int i = 0; i < p.size(); ++i) {
            const double h = 1e-6 * std::max(1.0, std::abs(p[i]));
            Vec a = p, b = p;
            a[i] += h;
            b[i] -= h;
            J.col(i) = (F(a) - F(b)) / (2 * h);
        }
        Eigen::VectorXd step = J.completeOrthogonalDecomposition().solve(r);
        p -= Vec(step);
        if (!p.allFinite() || !m.domain().contains(p))
            return false;
    }
    return F(p).cwiseAbs().maxCoeff() < 1e-9;
}

// Chart-coordinate half widths bounding Box_inf(c, rho).
Vec guard_extent(const ChartFrame& m, const Vec& c, double rho)
{
    const int N = m.dim();
    Vec ext = Vec::Zero(N);
    int total = 1;
    for (int i = 0; i < N; ++i)
        total *= 3;
    for (int idx = 0; idx < total; ++idx) {
        Vec s(N);
        int q = idx;
        for (int i = 0; i < N; ++i) {
            s[i] = static_cast<double>(q % 3) - 1.0;
            q /= 3;
        }
        try {
            Vec y = metrics::box_point(m, c, rho, s);
            ext = ext.cwiseMax((y - c).cwiseAbs());
        } catch (const LeftDomain&) {
        }
    }
    return 1.5 * ext + Vec::Constant(N, 1e-12);
}

struct Guard {
    Vec center;
    Vec extent;
};

bool inside_guard(const ChartFrame& m, const Guard& g, double rho, const Vec& p)
{
    if (((p - g.center).cwiseAbs() - g.extent).maxCoeff() > 0)
        return false;
    try {
        return metrics::d_inf(m, g.center, p) < rho;
    } catch (const NoConvergence&) {
        return false;
    }
}

} // namespace

const char* kind_name(PointKind k)
{
    switch (k) {
    case PointKind::Z:
        return "Z";
    case PointKind::Chi:
        return "chi";
    case PointKind::Regular:
        return "regular";
    }
    return "?";
}

Mat frame_derivative(const ChartFrame& m, const ChartFrame& n, const SmoothMap& phi, const Vec& p)
{
    Mat D = phi.jacobian(p);
    if (D.rows() != n.dim() || D.cols() != m.dim())
        throw ConfigError("map dimensions do not match the frames");
    return frames::eval_frame(n, phi(p)).fullPivLu().solve(Mat(D * m.frame(p)));
}

Mat hc_matrix(const ChartFrame& m, const ChartFrame& n, const SmoothMap& phi, const Vec& p)
{
    if (n.grading().depth() == 1) {
        Mat A = frame_derivative(m, n, phi, p);
        Mat B = Mat::Zero(n.dim(), m.dim());
        const int h = m.grading().horizontal_dim();
        B.leftCols(h) = A.leftCols(h);
        return B;
    }
    return hcdiff::hc_differential(m, n, phi, p).induced;
}

int nu0(const ChartFrame& m, const ChartFrame& n, const SmoothMap& phi, const Vec& p, double tol)
{
    Mat A = frame_derivative(m, n, phi, p);
    const int N2 = n.dim();
    if (numeric_rank(A, tol) < N2)
        throw DegenerateDifferential("rank of the differential is below the target dimension");
    const auto& g = m.grading();
    std::vector<int> order(m.dim());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return g.degree(a) < g.degree(b); });
    // Greedy rank augmentation by degree is optimal: the degrees weight a linear matroid.
    Mat chosen(N2, 0);
    int rank = 0, nu = 0;
    for (int i : order) {
        Mat trial(N2, chosen.cols() + 1);
        trial << chosen, A.col(i);
        const int r = numeric_rank(trial, tol);
        if (r > rank) {
            chosen = trial;
            rank = r;
            nu += g.degree(i);
            if (rank == N2)
                break;
        }
    }
    return nu;
}

PointClass classify(const ChartFrame& m, const ChartFrame& n, const SmoothMap& phi, const Vec& p, double tol)
{
    PointClass pc;
    pc.point = p;
    Local L = local_data(m, n, phi, p, tol);
    pc.rank_d = L.rank_d;
    const int N2 = n.dim();
    if (L.rank_d < N2) {
        pc.kind = PointKind::Z;
        return pc;
    }
    pc.rank_hc = L.rank_hc;
    pc.nu0 = nu0(m, n, phi, p, tol);
    pc.kind = L.rank_hc < N2 ? PointKind::Chi : PointKind::Regular;
    if (pc.kind != PointKind::Chi)
        return pc;

    // Kernel directions of the hc-differential must be compensated by the smallest-degree fields,
    // with image layers non-decreasing in the degree.
    const auto& gs = m.grading();
    const auto& gt = n.grading();
    std::vector<int> order;
    for (int i = gs.horizontal_dim(); i < m.dim(); ++i)
        order.push_back(i);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return gs.degree(a) < gs.degree(b); });
    Mat span = L.B;
    int rank = L.rank_hc, last_layer = 0;
    bool ordered = true;
    for (int i : order) {
        if (rank == N2)
            break;
        Mat trial(N2, span.cols() + 1);
        trial << span, L.A.col(i);
        const int r = numeric_rank(trial, tol);
        if (r <= rank)
            continue;
        span = trial;
        rank = r;
        int layer = 1;
        for (int j = 0; j < N2; ++j)
            if (std::abs(L.A(j, i)) > tol * std::max(1.0, L.A.cwiseAbs().maxCoeff()))
                layer = std::max(layer, gt.degree(j));
        if (layer < last_layer)
            ordered = false;
        last_layer = layer;
    }
    pc.assumption_holds = rank == N2 && ordered;
    return pc;
}

double unit_ball_volume(int s)
{
    if (s < 0)
        throw ConfigError("negative ball dimension");
    return std::pow(M_PI, 0.5 * s) / std::tgamma(0.5 * s + 1.0);
}

double level_constant(const frames::Grading& source, const frames::Grading& target)
{
    return unit_ball_volume(source.homogeneous_dim() - target.homogeneous_dim()) / layer_product(source, target);
}

double coarea_constant(const frames::Grading& source, const frames::Grading& target)
{
    const int N1 = source.dim(), N2 = target.dim();
    const int nu1 = source.homogeneous_dim(), nu2 = target.homogeneous_dim();
    return unit_ball_volume(N1) / unit_ball_volume(nu1) * unit_ball_volume(nu2) / unit_ball_volume(N2) *
           level_constant(source, target);
}

double sr_coarea_factor(const ChartFrame& m, const ChartFrame& n, const SmoothMap& phi, const Vec& p)
{
    Local L = local_data(m, n, phi, p, 1e-9);
    if (L.rank_d < n.dim() || L.rank_hc < n.dim())
        return 0.0;
    return L.normB * coarea_constant(m.grading(), n.grading());
}

double level_set_density(const ChartFrame& m, const ChartFrame& n, const SmoothMap& phi, const Vec& p,
                         const std::vector<Vec>& chi, double guard)
{
    Local L = local_data(m, n, phi, p, 1e-9);
    if (L.rank_d < n.dim())
        throw DegenerateDifferential("point lies in the degenerate set");
    if (L.rank_hc < n.dim())
        throw CharacteristicNearby("point is characteristic");
    for (const Vec& c : chi) {
        const double d = metrics::d_inf(m, c, p);
        if (d < guard)
            throw CharacteristicNearby("characteristic point at distance " + std::to_string(d));
    }
    return density_from(m, L, p, level_constant(m.grading(), n.grading()));
}

double tangent_box_measure(const frames::Grading& g, const Mat& K, double r, int samples, std::uint64_t seed)
{
    const int N = g.dim();
    const int d = static_cast<int>(K.cols());
    if (K.rows() != N)
        throw ConfigError("subspace basis has the wrong ambient dimension");
    if (!(r > 0))
        throw ConfigError("box radius must be positive");
    if (d == 0)
        return 1.0;
    Eigen::HouseholderQR<Eigen::MatrixXd> qr{Eigen::MatrixXd(K)};
    Mat Q = Eigen::MatrixXd(qr.householderQ()).leftCols(d);

    // Exact when the subspace splits along the layers: a product of Euclidean balls.
    std::vector<int> split(g.depth() + 1, 0);
    int total = 0;
    for (int k = 1; k <= g.depth(); ++k) {
        Mat outside(N - g.layer_size(k), d);
        int row = 0;
        for (int i = 0; i < N; ++i)
            if (g.degree(i) != k)
                outside.row(row++) = Q.row(i);
        split[k] = d - numeric_rank(outside, 1e-10);
        total += split[k];
    }
    if (total == d) {
        double v = 1.0;
        for (int k = 1; k <= g.depth(); ++k)
            v *= unit_ball_volume(split[k]) * std::pow(r, k * split[k]);
        return v;
    }

    // Otherwise sample the unit-scale slice of the dilated subspace and scale back.
    Mat Kr = Q;
    for (int i = 0; i < N; ++i)
        Kr.row(i) /= std::pow(r, g.degree(i));
    Eigen::HouseholderQR<Eigen::MatrixXd> qr1{Eigen::MatrixXd(Kr)};
    Mat Q1 = Eigen::MatrixXd(qr1.householderQ()).leftCols(d);
    Mat DQ = Q1;
    for (int i = 0; i < N; ++i)
        DQ.row(i) *= std::pow(r, g.degree(i));
    const double jac = std::sqrt(std::max(0.0, Mat(DQ.transpose() * DQ).determinant()));
    const double R = std::sqrt(static_cast<double>(g.depth()));
    Rng rng(seed);
    int hits = 0;
    for (int s = 0; s < samples; ++s) {
        Vec u(d);
        for (int i = 0; i < d; ++i)
            u[i] = rng.uniform(-R, R);
        Vec x = Q1 * u;
        bool in = true;
        for (int k = 1; k <= g.depth() && in; ++k)
            in = x.segment(g.layer_begin(k), g.layer_size(k)).norm() <= 1.0;
        hits += in;
    }
    return jac * std::pow(2 * R, d) * hits / samples;
}

TangentMeasureFit tangent_measure_fit(const ChartFrame& m, const ChartFrame& n, const SmoothMap& phi, const Vec& x,
                                      const std::vector<double>& r, int samples, std::uint64_t seed)
{
    if (r.size() < 2)
        throw ConfigError("tangent measure fit needs at least two radii");
    TangentMeasureFit fit;
    fit.expected = m.grading().homogeneous_dim() - nu0(m, n, phi, x);
    Mat K = kernel_basis(frame_derivative(m, n, phi, x), 1e-9);
    for (double ri : r) {
        fit.r.push_back(ri);
        fit.measure.push_back(tangent_box_measure(m.grading(), K, ri, samples, seed));
    }
    fit.exponent = approx::loglog_slope(fit.r, fit.measure);
    {
        const auto& g = m.grading();
        int total = 0;
        for (int k = 1; k <= g.depth(); ++k) {
            Mat outside(g.dim() - g.layer_size(k), K.cols());
            int row = 0;
            for (int i = 0; i < g.dim(); ++i)
                if (g.degree(i) != k)
                    outside.row(row++) = K.row(i);
            total += static_cast<int>(K.cols()) - numeric_rank(outside, 1e-10);
        }
        fit.aligned = total == K.cols();
    }
    fit.pass = std::abs(fit.exponent - fit.expected) <= 0.15;
    return fit;
}

double box_volume_ratio(const ChartFrame& frame, const Vec& x, double r, int samples, std::uint64_t seed)
{
    const auto& g = frame.grading();
    Rng rng(seed);
    double sum_r = 0.0, sum_h = 0.0;
    for (int s = 0; s < samples; ++s) {
        Vec u(g.dim());
        for (int k = 1; k <= g.depth(); ++k)
            u.segment(g.layer_begin(k), g.layer_size(k)) = uniform_in_ball(g.layer_size(k), rng);
        for (double rr : {r, 0.5 * r}) {
            Vec a = u;
            for (int i = 0; i < g.dim(); ++i)
                a[i] *= std::pow(rr, g.degree(i));
            auto fj = flows::exp_combination_jacobian(frame, x, a);
            const double w = std::abs(fj.d_coeffs.determinant()) * volume_density(frame, fj.point);
            (rr == r ? sum_r : sum_h) += w;
        }
    }
    // vol(Box_2(x, r)) / (prod omega r^nu) = mean of the Jacobian weight; extrapolate r -> 0 linearly.
    const double mean_r = sum_r / samples, mean_h = sum_h / samples;
    return 1.0 / (2.0 * mean_h - mean_r);
}

CoareaReport coarea_verify(const ChartFrame& m, const ChartFrame& n, const SmoothMap& phi, const frames::Box& domain,
                           const CoareaGrid& grid)
{
    const int N1 = m.dim();
    if (n.dim() != 1)
        throw ConfigError("coarea verification supports scalar targets only");
    if (N1 != 2 && N1 != 3)
        throw ConfigError("coarea verification supports 2- and 3-dimensional sources only");
    if (domain.lo.size() != N1 || domain.hi.size() != N1)
        throw ConfigError("domain dimension does not match the frame");
    if (!m.domain().contains(domain.lo) || !m.domain().contains(domain.hi))
        throw ConfigError("domain leaves the chart");
    if (grid.cells < 2 || grid.levels < 1)
        throw ConfigError("coarea grid needs at least two cells and one level");
    for (size_t i = 1; i < grid.guards.size(); ++i)
        if (!(grid.guards[i] < grid.guards[i - 1]))
            throw ConfigError("guard radii must decrease");

    const auto& gs = m.grading();
    const auto& gt = n.grading();
    const double J_c = coarea_constant(gs, gt);
    const double level_c = level_constant(gs, gt);
    const double w1 = unit_ball_volume(gs.homogeneous_dim()) / unit_ball_volume(N1);
    const double w2 = unit_ball_volume(gt.homogeneous_dim()) / unit_ball_volume(gt.dim());

    CoareaReport rep;
    rep.domain = domain;
    rep.guards = grid.guards;

    // Hausdorff-to-volume calibration on both sides.
    NodeField ratio1(domain, grid.calibration_nodes, [&](const Vec& x) {
        return box_volume_ratio(m, x, 0.04, grid.calibration_samples, grid.seed);
    });
    rep.volume_ratio_min = ratio1.min();
    rep.volume_ratio_max = ratio1.max();

    Grid G;
    G.n = grid.cells;
    G.dim = N1;
    G.box = domain;
    const int per_axis = grid.cells + 1;
    {
        int total = 1;
        for (int i = 0; i < N1; ++i)
            total *= per_axis;
        G.values.resize(total);
        for (int idx = 0; idx < total; ++idx) {
            std::array<int, 3> ijk{0, 0, 0};
            int q = idx;
            for (int i = 0; i < N1; ++i) {
                ijk[i] = q % per_axis;
                q /= per_axis;
            }
            G.values[idx] = phi(G.node(ijk))[0];
        }
    }
    const double tmin = *std::min_element(G.values.begin(), G.values.end());
    const double tmax = *std::max_element(G.values.begin(), G.values.end());

    // Left side: midpoint rule over the cells.
    {
        Vec h = (domain.hi - domain.lo) / grid.cells;
        const double cell = h.prod();
        const int c3 = N1 == 3 ? grid.cells : 1;
        double lhs = 0.0;
        for (int i = 0; i < grid.cells; ++i)
            for (int j = 0; j < grid.cells; ++j)
                for (int k = 0; k < c3; ++k) {
                    Vec p(N1);
                    p[0] = domain.lo[0] + (i + 0.5) * h[0];
                    p[1] = domain.lo[1] + (j + 0.5) * h[1];
                    if (N1 == 3)
                        p[2] = domain.lo[2] + (k + 0.5) * h[2];
                    Local L = local_data(m, n, phi, p, 1e-9);
                    lhs += L.normB * J_c * w1 * ratio1(p) * volume_density(m, p) * cell;
                }
        rep.lhs = lhs;
    }
    if (!(tmax > tmin)) {
        rep.rhs = 0.0;
        rep.error = rep.lhs > 0 ? 1.0 : 0.0;
        rep.guard_contribution.assign(grid.guards.size(), 0.0);
        return rep;
    }

    frames::Box trange{Vec::Constant(1, tmin), Vec::Constant(1, tmax)};
    NodeField ratio2(trange, grid.calibration_nodes, [&](const Vec& z) {
        return box_volume_ratio(n, z, 0.04, grid.calibration_samples, grid.seed) * volume_density(n, z);
    });

    // Lipschitz bound of the horizontal row, used to decide which simplices may hold a characteristic point.
    double lip = 0.0;
    {
        Rng rng(grid.seed ^ 0x5bd1e995u);
        const double step = 1e-4 * (domain.hi - domain.lo).maxCoeff();
        for (int s = 0; s < 64; ++s) {
            Vec p(N1);
            for (int i = 0; i < N1; ++i)
                p[i] = rng.uniform(domain.lo[i] + step, domain.hi[i] - step);
            Eigen::VectorXd h0 = hc_row(m, n, phi, p);
            double gsum = 0.0;
            for (int i = 0; i < N1; ++i) {
                Vec q = p;
                q[i] += step;
                gsum += ((hc_row(m, n, phi, q) - h0) / step).squaredNorm();
            }
            lip = std::max(lip, std::sqrt(gsum));
        }
        lip = 2.0 * lip + 1e-12;
    }

    const double dt = (tmax - tmin) / grid.levels;
    std::vector<double> contrib(grid.guards.size(), 0.0);
    double rhs = 0.0;
    for (int l = 0; l < grid.levels; ++l) {
        const double t = tmin + (l + 0.5) * dt;
        auto simplices = G.level(t);
        LevelDiagnostics diag;
        diag.t = t;
        diag.simplices = static_cast<int>(simplices.size());

        std::vector<Vec> chi;
        std::vector<double> integrand(simplices.size());
        for (size_t s = 0; s < simplices.size(); ++s) {
            const Simplex& S = simplices[s];
            Vec c = S.centroid();
            Local L = local_data(m, n, phi, c, 1e-9);
            integrand[s] = density_from(m, L, c, level_c) * S.measure(chart_metric(m, c));
            const double hn = L.A.leftCols(gs.horizontal_dim()).norm();
            if (hn > lip * S.diameter())
                continue;
            bool known = false;
            for (const Vec& q : chi)
                known = known || (q - c).norm() < 2.0 * S.diameter();
            if (known)
                continue;
            Vec q = c;
            if (refine_characteristic(m, n, phi, t, q) && (q - c).norm() < 2.0 * S.diameter()) {
                bool dup = false;
                for (const Vec& o : chi)
                    dup = dup || (o - q).norm() < 1e-6;
                if (!dup)
                    chi.push_back(q);
            }
        }
        diag.chi_points = static_cast<int>(chi.size());
        rep.chi_points += diag.chi_points;

        double total = std::accumulate(integrand.begin(), integrand.end(), 0.0);
        std::vector<double> level_contrib(grid.guards.size(), 0.0);
        for (size_t gi = 0; gi < grid.guards.size(); ++gi) {
            const double rho = grid.guards[gi];
            for (const Vec& c : chi) {
                Guard gd{c, guard_extent(m, c, rho)};
                for (const Simplex& S : simplices) {
                    bool overlap = true;
                    for (int i = 0; i < N1 && overlap; ++i) {
                        double lo = S.v[0][i], hi = S.v[0][i];
                        for (int v = 1; v <= S.k; ++v) {
                            lo = std::min(lo, S.v[v][i]);
                            hi = std::max(hi, S.v[v][i]);
                        }
                        overlap = hi >= c[i] - gd.extent[i] && lo <= c[i] + gd.extent[i];
                    }
                    if (!overlap)
                        continue;
                    // Refine until pieces are small against the guard, then classify by centroid.
                    std::vector<Simplex> work{S}, leaves;
                    while (!work.empty()) {
                        Simplex cur = work.back();
                        work.pop_back();
                        if (cur.diameter() > 0.25 * rho && leaves.size() + work.size() < 4096) {
                            for (auto& piece : cur.split())
                                work.push_back(piece);
                        } else {
                            leaves.push_back(cur);
                        }
                    }
                    for (const Simplex& leaf : leaves) {
                        Vec lc = leaf.centroid();
                        if (!inside_guard(m, gd, rho, lc))
                            continue;
                        Local L = local_data(m, n, phi, lc, 1e-9);
                        level_contrib[gi] += density_from(m, L, lc, level_c) * leaf.measure(chart_metric(m, lc));
                    }
                }
            }
        }
        const double weight = dt * w2 * ratio2(Vec::Constant(1, t));
        const double excised = level_contrib.empty() ? 0.0 : level_contrib.back();
        diag.measure = total - excised;
        rhs += weight * diag.measure;
        for (size_t gi = 0; gi < contrib.size(); ++gi)
            contrib[gi] += weight * level_contrib[gi];
        rep.levels.push_back(diag);
    }
    rep.rhs = rhs;
    rep.guard_contribution = contrib;
    const double scale = std::max(rep.lhs, rep.rhs);
    rep.error = scale > 0 ? std::abs(rep.lhs - rep.rhs) / scale : 0.0;
    for (size_t gi = 1; gi < contrib.size(); ++gi)
        if (contrib[gi - 1] > 1e-12 * std::max(scale, 1e-300) && contrib[gi] > 0.5 * contrib[gi - 1])
            rep.guard_decay = false;
    if (!rep.guard_decay) {
        std::string msg = "excised contribution does not decay:";
        for (double c : contrib)
            msg += " " + std::to_string(c);
        throw GuardNotVanishing(msg);
    }
    return rep;
}

} // namespace carnot::coarea
