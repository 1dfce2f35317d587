#include "carnot/frames.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace carnot::frames {

Grading::Grading(std::vector<int> dims) : dims_(std::move(dims))
{
    if (dims_.empty())
        throw ConfigError("grading needs at least one layer");
    int prev = 0;
    for (int d : dims_) {
        if (d <= prev)
            throw ConfigError("grading dims must be strictly increasing and positive");
        prev = d;
    }
    if (dims_.back() > kMaxDim)
        throw ConfigError("chart dimension above " + std::to_string(kMaxDim));
    degree_.resize(dims_.back());
    for (int i = 0; i < dims_.back(); ++i) {
        int m = 0;
        while (i >= dims_[m])
            ++m;
        degree_[i] = m + 1;
    }
}

int Grading::homogeneous_dim() const
{
    int nu = 0;
    for (int k = 1; k <= depth(); ++k)
        nu += k * layer_size(k);
    return nu;
}

bool Box::contains(const Vec& p) const
{
    for (int i = 0; i < p.size(); ++i)
        if (!(p[i] >= lo[i] && p[i] <= hi[i]))
            return false;
    return true;
}

ChartFrame::ChartFrame(std::string name, Grading grading, Box domain, FrameFn frame, JacobianFn jacobian,
                       MetricFn metric)
    : name_(std::move(name)), grading_(std::move(grading)), domain_(std::move(domain)), frame_(std::move(frame)),
      jac_(std::move(jacobian)), metric_(std::move(metric))
{
}

Mat richardson_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& p, const std::string& what)
{
    const int n = static_cast<int>(p.size());
    const double h = std::cbrt(std::numeric_limits<double>::epsilon()) * std::max(1.0, p.norm());
    auto central = [&](double step) {
        Mat D;
        for (int c = 0; c < n; ++c) {
            Vec pp = p, pm = p;
            pp[c] += step;
            pm[c] -= step;
            Vec col = (f(pp) - f(pm)) / (2.0 * step);
            if (c == 0)
                D.resize(col.size(), n);
            D.col(c) = col;
        }
        return D;
    };
    Mat coarse = central(h);
    Mat fine = central(0.5 * h);
    Mat rich = (4.0 * fine - coarse) / 3.0;
    double gap = (fine - coarse).cwiseAbs().maxCoeff();
    double scale = std::max(1.0, rich.cwiseAbs().maxCoeff());
    if (gap > 1e-6 * scale)
        throw NumericalJacobianUnstable(what + " Richardson gap " + std::to_string(gap));
    return rich;
}

Mat ChartFrame::fd_jacobian(int i, const Vec& p) const
{
    return richardson_jacobian([&](const Vec& x) { return Vec(frame_(x).col(i)); }, p, "field " + std::to_string(i));
}

Mat ChartFrame::jacobian(int i, const Vec& p) const
{
    if (jac_)
        return jac_(i, p);
    return fd_jacobian(i, p);
}

Mat ChartFrame::riemann(const Vec& p) const
{
    if (metric_)
        return metric_(p);
    return Mat::Identity(dim(), dim());
}

double frame_rcond(const Mat& X)
{
    Eigen::FullPivLU<Mat> lu(X);
    if (!lu.isInvertible())
        return 0.0;
    return lu.rcond();
}

Mat eval_frame(const ChartFrame& frame, const Vec& p)
{
    Mat X = frame.frame(p);
    double rc = frame_rcond(X);
    if (!(rc >= 1e-10))
        throw SingularFrame("reciprocal condition " + std::to_string(rc) + " at frame " + frame.name());
    return X;
}

Vec lie_bracket(const ChartFrame& frame, int i, int j, const Vec& p)
{
    Mat X = frame.frame(p);
    return frame.jacobian(j, p) * X.col(i) - frame.jacobian(i, p) * X.col(j);
}

namespace {

StructureConstants solve_constants(const ChartFrame& frame, const Vec& p, bool both_orders)
{
    const int n = frame.dim();
    Mat X = eval_frame(frame, p);
    Eigen::FullPivLU<Mat> lu(X);
    std::vector<Mat> J(n);
    for (int i = 0; i < n; ++i)
        J[i] = frame.jacobian(i, p);

    StructureConstants sc;
    sc.base = p;
    sc.n = n;
    sc.c.assign(n * n * n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            Vec b = J[j] * X.col(i) - J[i] * X.col(j);
            Vec c = lu.solve(b);
            sc.residual = std::max(sc.residual, (X * c - b).cwiseAbs().maxCoeff());
            Vec c2 = c;
            if (both_orders)
                c2 = lu.solve(Vec(J[i] * X.col(j) - J[j] * X.col(i)));
            for (int k = 0; k < n; ++k) {
                sc.at(i, j, k) = c[k];
                sc.at(j, i, k) = c2[k];
            }
            if (!both_orders)
                for (int k = 0; k < n; ++k)
                    sc.at(j, i, k) = -c[k];
        }
    return sc;
}

double grading_leak(const StructureConstants& sc, const Grading& g, double* scale_out)
{
    const int n = sc.n;
    double scale = 1.0;
    for (double v : sc.c)
        scale = std::max(scale, std::abs(v));
    double leak = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                if (g.degree(k) > g.degree(i) + g.degree(j))
                    leak = std::max(leak, std::abs(sc(i, j, k)));
    if (scale_out)
        *scale_out = scale;
    return leak;
}

} // namespace

StructureConstants structure_constants_unchecked(const ChartFrame& frame, const Vec& p, double* leak)
{
    StructureConstants sc = solve_constants(frame, p, false);
    if (leak)
        *leak = grading_leak(sc, frame.grading(), nullptr);
    return sc;
}

StructureConstants structure_constants(const ChartFrame& frame, const Vec& p)
{
    StructureConstants sc = solve_constants(frame, p, false);
    double scale = 1.0;
    double leak = grading_leak(sc, frame.grading(), &scale);
    if (leak > 1e-8 * scale)
        throw GradingViolation("bracket leaks into a higher layer by " + std::to_string(leak) + " on frame " +
                               frame.name());
    return sc;
}

Vec sample_domain(const ChartFrame& frame, double margin, Rng& rng)
{
    const Box& b = frame.domain();
    Vec p(frame.dim());
    for (int i = 0; i < p.size(); ++i) {
        double lo = b.lo[i] + margin * (b.hi[i] - b.lo[i]);
        double hi = b.hi[i] - margin * (b.hi[i] - b.lo[i]);
        p[i] = rng.uniform(lo, hi);
    }
    return p;
}

ValidationReport validate_carnot(const ChartFrame& frame, int sample_count, std::uint64_t seed)
{
    ValidationReport rep;
    const Grading& g = frame.grading();
    const int n = frame.dim();
    rep.layers_consistent = g.dim() == n && static_cast<int>(g.dims().size()) >= 1;
    Rng rng(seed);
    for (int s = 0; s < sample_count; ++s) {
        Vec p = sample_domain(frame, 0.1, rng);
        ++rep.samples;
        StructureConstants sc;
        try {
            sc = solve_constants(frame, p, true);
        } catch (const SingularFrame& e) {
            rep.frame_invertible = false;
            rep.messages.emplace_back(e.what());
            continue;
        }
        rep.max_residual = std::max(rep.max_residual, sc.residual);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k)
                    rep.max_antisymmetry = std::max(rep.max_antisymmetry, std::abs(sc(i, j, k) + sc(j, i, k)));
        double scale = 1.0;
        double leak = grading_leak(sc, g, &scale);
        rep.max_grading_leak = std::max(rep.max_grading_leak, leak);
        if (leak > 1e-8 * scale)
            rep.grading_closed = false;

        for (int j = 1; j < g.depth(); ++j) {
            const int rows = g.layer_size(1) * g.layer_size(j);
            Eigen::MatrixXd A(rows, g.layer_size(j + 1));
            int r = 0;
            for (int h = g.layer_begin(1); h < g.layer_end(1); ++h)
                for (int l = g.layer_begin(j); l < g.layer_end(j); ++l, ++r)
                    for (int k = g.layer_begin(j + 1); k < g.layer_end(j + 1); ++k)
                        A(r, k - g.layer_begin(j + 1)) = sc(h, l, k);
            Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
            const auto& sv = svd.singularValues();
            int rank = 0;
            for (int q = 0; q < sv.size(); ++q)
                if (sv[q] > 1e-8 * std::max(1.0, sv[0]))
                    ++rank;
            if (rank < g.layer_size(j + 1) && rep.bracket_generating) {
                rep.bracket_generating = false;
                rep.messages.push_back("layer " + std::to_string(j + 1) + " not generated by brackets (rank " +
                                       std::to_string(rank) + ")");
            }
        }
    }
    if (!rep.grading_closed)
        rep.messages.push_back("brackets leave the declared filtration");
    return rep;
}

namespace {

Box cube(int n, double r)
{
    Box b{Vec::Constant(n, -r), Vec::Constant(n, r)};
    return b;
}

} // namespace

FramePtr abelian(int n)
{
    auto f = [n](const Vec&) { return Mat(Mat::Identity(n, n)); };
    auto j = [n](int, const Vec&) { return Mat(Mat::Zero(n, n)); };
    return std::make_shared<ChartFrame>("abelian" + std::to_string(n), Grading({n}), cube(n, 3.0), f, j);
}

FramePtr heisenberg1()
{
    auto f = [](const Vec& p) {
        Mat X = Mat::Identity(3, 3);
        X(2, 0) = -0.5 * p[1];
        X(2, 1) = 0.5 * p[0];
        return X;
    };
    auto j = [](int i, const Vec&) {
        Mat J = Mat::Zero(3, 3);
        if (i == 0)
            J(2, 1) = -0.5;
        else if (i == 1)
            J(2, 0) = 0.5;
        return J;
    };
    return std::make_shared<ChartFrame>("heisenberg1", Grading({2, 3}), cube(3, 3.0), f, j);
}

FramePtr rototranslation()
{
    auto f = [](const Vec& p) {
        const double c = std::cos(p[2]), s = std::sin(p[2]);
        Mat X(3, 3);
        X << c, 0, s, s, 0, -c, 0, 1, 0;
        return X;
    };
    auto j = [](int i, const Vec& p) {
        const double c = std::cos(p[2]), s = std::sin(p[2]);
        Mat J = Mat::Zero(3, 3);
        if (i == 0) {
            J(0, 2) = -s;
            J(1, 2) = c;
        } else if (i == 2) {
            J(0, 2) = c;
            J(1, 2) = s;
        }
        return J;
    };
    Box b{Vec::Constant(3, -3.0), Vec::Constant(3, 3.0)};
    b.lo[2] = -4.0;
    b.hi[2] = 4.0;
    return std::make_shared<ChartFrame>("rototranslation", Grading({2, 3}), b, f, j);
}

namespace {

FramePtr make_engel(bool model)
{
    const double tilt = model ? 0.0 : 1.0;
    auto f = [tilt](const Vec& p) {
        Mat X = Mat::Zero(4, 4);
        X(0, 0) = 1.0;
        X(0, 1) = tilt * (p[0] + p[1]);
        X(1, 1) = 1.0;
        X(2, 1) = p[0];
        X(3, 1) = 0.5 * p[0] * p[0];
        X(2, 2) = 1.0;
        X(3, 2) = p[0];
        X(3, 3) = 1.0;
        return X;
    };
    auto j = [tilt](int i, const Vec& p) {
        Mat J = Mat::Zero(4, 4);
        if (i == 1) {
            J(0, 0) = tilt;
            J(0, 1) = tilt;
            J(2, 0) = 1.0;
            J(3, 0) = p[0];
        } else if (i == 2) {
            J(3, 0) = 1.0;
        }
        return J;
    };
    return std::make_shared<ChartFrame>(model ? "engel_model" : "engel", Grading({2, 3, 4}), cube(4, 2.0), f, j);
}

} // namespace

FramePtr engel() { return make_engel(false); }
FramePtr engel_model() { return make_engel(true); }

std::vector<std::string> builtin_names()
{
    return {"heisenberg1", "rototranslation", "engel", "engel_model", "abelian2", "abelian3", "abelian4"};
}

FramePtr builtin(const std::string& name)
{
    if (name == "heisenberg1")
        return heisenberg1();
    if (name == "rototranslation")
        return rototranslation();
    if (name == "engel")
        return engel();
    if (name == "engel_model")
        return engel_model();
    if (name.rfind("abelian", 0) == 0 && name.size() > 7) {
        int n = std::stoi(name.substr(7));
        if (n >= 1 && n <= kMaxDim)
            return abelian(n);
    }
    throw ConfigError("unknown built-in frame '" + name + "'");
}

FramePtr recombine(const FramePtr& base, const Mat& A, Grading grading, std::string name)
{
    if (std::abs(A.determinant()) < 1e-12)
        throw SingularFrame("recombination matrix is singular");
    auto f = [base, A](const Vec& p) { return Mat(base->frame(p) * A); };
    JacobianFn j;
    if (base->has_analytic_jacobian())
        j = [base, A](int i, const Vec& p) {
            Mat J = Mat::Zero(A.rows(), A.rows());
            for (int k = 0; k < A.rows(); ++k)
                if (A(k, i) != 0.0)
                    J += A(k, i) * base->jacobian(k, p);
            return J;
        };
    MetricFn m;
    return std::make_shared<ChartFrame>(std::move(name), std::move(grading), base->domain(), f, j, m);
}

FramePtr without_jacobian(const FramePtr& base)
{
    auto f = [base](const Vec& p) { return base->frame(p); };
    return std::make_shared<ChartFrame>(base->name() + "_fd", base->grading(), base->domain(), f);
}

} // namespace carnot::frames
