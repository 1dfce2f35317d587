#include "carnot/cone.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>

#include <boost/rational.hpp>
#include <json.hpp>

namespace carnot::cone {

GradedConstants from_table(const Grading& grading, const std::vector<Entry>& entries)
{
    GradedConstants g;
    g.grading = grading;
    const int n = grading.dim();
    g.base = Vec::Zero(n);
    g.c.assign(n * n * n, 0.0);
    for (const Entry& e : entries) {
        g.c[(e.i * n + e.j) * n + e.k] = e.value;
        g.c[(e.j * n + e.i) * n + e.k] = -e.value;
    }
    return g;
}

double check_jacobi(const GradedConstants& g)
{
    const int n = g.n();
    const Grading& gr = g.grading;
    double worst = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int m = 0; m < n; ++m)
                for (int l = 0; l < n; ++l) {
                    if (gr.degree(l) != gr.degree(i) + gr.degree(j) + gr.degree(m))
                        continue;
                    double s = 0.0;
                    for (int k = 0; k < n; ++k)
                        s += g(i, j, k) * g(k, m, l) + g(m, i, k) * g(k, j, l) + g(j, m, k) * g(k, i, l);
                    worst = std::max(worst, std::abs(s));
                }
    return worst;
}

GradedConstants nilpotentize(const frames::StructureConstants& c, const Grading& grading)
{
    GradedConstants g;
    g.grading = grading;
    g.base = c.base;
    const int n = grading.dim();
    g.c.assign(n * n * n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                if (grading.degree(k) == grading.degree(i) + grading.degree(j))
                    g.c[(i * n + j) * n + k] = c(i, j, k);
    double r = check_jacobi(g);
    if (r > 1e-8)
        throw JacobiViolation("graded Jacobi residual " + std::to_string(r));
    return g;
}

double max_abs(const Vec& a) { return a.size() ? a.cwiseAbs().maxCoeff() : 0.0; }

double homogeneous_norm(const Grading& g, const Vec& a)
{
    double m = 0.0;
    for (int i = 0; i < a.size(); ++i)
        m = std::max(m, std::pow(std::abs(a[i]), 1.0 / g.degree(i)));
    return m;
}

double layer_norm(const Grading& g, const Vec& a)
{
    double m = 0.0;
    for (int k = 1; k <= g.depth(); ++k) {
        double s = a.segment(g.layer_begin(k), g.layer_size(k)).norm();
        m = std::max(m, std::pow(s, 1.0 / k));
    }
    return m;
}

NilpotentCone::NilpotentCone(GradedConstants g) : g_(std::move(g))
{
    build_dynkin();
    extract_group_law();
    build_presentation();
}

Vec NilpotentCone::bracket(const Vec& a, const Vec& b) const
{
    const int n = dim();
    Vec r = Vec::Zero(n);
    for (int i = 0; i < n; ++i) {
        if (a[i] == 0.0)
            continue;
        for (int j = 0; j < n; ++j) {
            const double ab = a[i] * b[j];
            if (ab == 0.0)
                continue;
            const double* row = &g_.c[(i * n + j) * n];
            for (int k = 0; k < n; ++k)
                r[k] += row[k] * ab;
        }
    }
    return r;
}

void NilpotentCone::build_dynkin()
{
    using Q = boost::rational<long long>;
    const int M = grading().depth();
    std::map<std::vector<int>, Q> acc;
    std::vector<long long> fact(M + 1, 1);
    for (int k = 1; k <= M; ++k)
        fact[k] = fact[k - 1] * k;

    // Enumerate (r_1,s_1,...,r_n,s_n) with r_i + s_i >= 1 and total length <= M.
    std::vector<std::pair<int, int>> blocks;
    std::function<void(int)> rec = [&](int used) {
        if (!blocks.empty()) {
            const int n = static_cast<int>(blocks.size());
            Q coef(n % 2 == 1 ? 1 : -1, n);
            long long denom = used;
            for (auto [r, s] : blocks)
                denom *= fact[r] * fact[s];
            coef /= denom;
            std::vector<int> word;
            for (auto [r, s] : blocks) {
                word.insert(word.end(), r, 0);
                word.insert(word.end(), s, 1);
            }
            acc[word] += coef;
        }
        for (int r = 0; used + r <= M; ++r)
            for (int s = 0; used + r + s <= M; ++s) {
                if (r + s == 0)
                    continue;
                blocks.emplace_back(r, s);
                rec(used + r + s);
                blocks.pop_back();
            }
    };
    rec(0);
    for (auto& [w, q] : acc) {
        if (q.numerator() == 0)
            continue;
        // [a,[a,...]] with repeated trailing letters vanishes.
        const size_t L = w.size();
        if (L >= 2 && w[L - 1] == w[L - 2])
            continue;
        dynkin_.emplace_back(w, boost::rational_cast<double>(q));
    }
}

Vec NilpotentCone::bch(const Vec& x, const Vec& y) const
{
    Vec z = x + y;
    for (const auto& [w, coef] : dynkin_) {
        if (w.size() < 2)
            continue;
        Vec v = w.back() == 0 ? x : y;
        for (int p = static_cast<int>(w.size()) - 2; p >= 0; --p) {
            v = bracket(w[p] == 0 ? x : y, v);
            if (v.isZero(0.0))
                break;
        }
        z += coef * v;
    }
    return z;
}

Vec NilpotentCone::dilate(double eps, const Vec& x) const
{
    Vec r = x;
    for (int i = 0; i < r.size(); ++i)
        r[i] *= std::pow(eps, grading().degree(i));
    return r;
}

namespace {

double monomial(const std::vector<int>& mu, const Vec& x)
{
    double v = 1.0;
    for (size_t i = 0; i < mu.size(); ++i)
        for (int e = 0; e < mu[i]; ++e)
            v *= x[i];
    return v;
}

// All exponent vectors supported on `vars` with weighted degree exactly d.
void weighted_exponents(const std::vector<int>& vars, const Grading& g, int d, std::vector<std::vector<int>>& out)
{
    std::vector<int> mu(g.dim(), 0);
    std::function<void(size_t, int)> rec = [&](size_t idx, int left) {
        if (left == 0) {
            out.push_back(mu);
            return;
        }
        if (idx == vars.size())
            return;
        const int v = vars[idx];
        const int w = g.degree(v);
        for (int e = 0; e * w <= left; ++e) {
            mu[v] = e;
            rec(idx + 1, left - e * w);
        }
        mu[v] = 0;
    };
    rec(0, d);
}

} // namespace

void NilpotentCone::extract_group_law()
{
    const int n = dim();
    const Grading& gr = grading();
    F_.assign(n, {});
    Rng rng(0x5eed);
    for (int j = 0; j < n; ++j) {
        const int d = gr.degree(j);
        if (d < 2)
            continue;
        std::vector<int> vars;
        for (int i = 0; i < n; ++i)
            if (gr.degree(i) < d)
                vars.push_back(i);
        // Candidate (mu, beta) pairs with |mu|_h + |beta|_h = d, both nonzero.
        std::vector<std::pair<std::vector<int>, std::vector<int>>> cand;
        for (int dm = 1; dm < d; ++dm) {
            std::vector<std::vector<int>> ms, bs;
            weighted_exponents(vars, gr, dm, ms);
            weighted_exponents(vars, gr, d - dm, bs);
            for (auto& m : ms)
                for (auto& b : bs)
                    cand.emplace_back(m, b);
        }
        if (cand.empty())
            continue;
        const int m = static_cast<int>(cand.size());
        auto fill = [&](int rows, Eigen::MatrixXd& A, Eigen::VectorXd& rhs) {
            A.resize(rows, m);
            rhs.resize(rows);
            for (int r = 0; r < rows; ++r) {
                Vec x(n), y(n);
                for (int i = 0; i < n; ++i) {
                    x[i] = rng.uniform();
                    y[i] = rng.uniform();
                }
                Vec z = bch(x, y);
                rhs[r] = z[j] - x[j] - y[j];
                for (int c = 0; c < m; ++c)
                    A(r, c) = monomial(cand[c].first, x) * monomial(cand[c].second, y);
            }
        };
        Eigen::MatrixXd A, V;
        Eigen::VectorXd rhs, vr;
        fill(std::max(4 * m, m + 16), A, rhs);
        Eigen::VectorXd coef = A.colPivHouseholderQr().solve(rhs);
        fill(std::max(2 * m, 16), V, vr);
        for (int c = 0; c < m; ++c)
            if (std::abs(coef[c]) < 1e-12)
                coef[c] = 0.0;
        const double res = (V * coef - vr).cwiseAbs().maxCoeff();
        extraction_residual_ = std::max(extraction_residual_, res);
        if (res > 1e-10)
            throw ExtractionResidual("layer coordinate " + std::to_string(j) + " residual " + std::to_string(res));
        for (int c = 0; c < m; ++c)
            if (coef[c] != 0.0)
                F_[j].push_back({cand[c].first, cand[c].second, coef[c]});
    }

    Z_.assign(n, std::vector<std::vector<PolyTerm>>(n));
    for (int j = 0; j < n; ++j)
        for (const GroupTerm& t : F_[j]) {
            int ones = 0, idx = -1;
            for (int i = 0; i < n; ++i)
                if (t.beta[i] != 0) {
                    ones += t.beta[i];
                    idx = i;
                }
            if (ones == 1)
                Z_[idx][j].push_back({t.mu, t.coef});
        }
}

Vec NilpotentCone::group_law_eval(const Vec& x, const Vec& y) const
{
    Vec z = x + y;
    for (int j = 0; j < dim(); ++j)
        for (const GroupTerm& t : F_[j])
            z[j] += t.coef * monomial(t.mu, x) * monomial(t.beta, y);
    return z;
}

Vec NilpotentCone::canonical_field(int i, const Vec& x) const
{
    const int n = dim();
    Vec z = Vec::Zero(n);
    z[i] = 1.0;
    for (int j = 0; j < n; ++j)
        for (const PolyTerm& t : Z_[i][j])
            z[j] += t.coef * monomial(t.mu, x);
    return z;
}

Mat NilpotentCone::canonical_matrix(const Vec& x) const
{
    const int n = dim();
    Mat Z(n, n);
    for (int i = 0; i < n; ++i)
        Z.col(i) = canonical_field(i, x);
    return Z;
}

Vec NilpotentCone::canonical_field_interp(int i, const Vec& x) const
{
    const int M = grading().depth();
    const int nodes = M + 1;
    std::vector<double> t(nodes);
    for (int k = 0; k < nodes; ++k)
        t[k] = k - 0.5 * M + 0.25;
    // Derivative of the Lagrange basis at 0.
    Vec d = Vec::Zero(dim());
    for (int k = 0; k < nodes; ++k) {
        double w = 0.0;
        for (int a = 0; a < nodes; ++a) {
            if (a == k)
                continue;
            double prod = 1.0 / (t[k] - t[a]);
            for (int b = 0; b < nodes; ++b)
                if (b != k && b != a)
                    prod *= (0.0 - t[b]) / (t[k] - t[b]);
            w += prod;
        }
        Vec e = Vec::Zero(dim());
        e[i] = t[k];
        d += w * bch(x, e);
    }
    return d;
}

Vec NilpotentCone::word_vector(const std::vector<int>& word) const
{
    Vec v = Vec::Unit(dim(), word.back());
    for (int p = static_cast<int>(word.size()) - 2; p >= 0; --p)
        v = bracket(Vec::Unit(dim(), word[p]), v);
    return v;
}

void NilpotentCone::build_presentation()
{
    const Grading& gr = grading();
    const int M = gr.depth();
    words_.assign(M, {});
    basis_.assign(M, Mat());
    for (int h = 0; h < gr.horizontal_dim(); ++h)
        words_[0].push_back({h});
    basis_[0] = Mat::Identity(gr.layer_size(1), gr.layer_size(1));
    for (int k = 2; k <= M; ++k) {
        const int b = gr.layer_begin(k), sz = gr.layer_size(k);
        Eigen::MatrixXd acc(sz, 0);
        for (int h = 0; h < gr.horizontal_dim() && acc.cols() < sz; ++h)
            for (const auto& w : words_[k - 2]) {
                if (acc.cols() == sz)
                    break;
                std::vector<int> cand{h};
                cand.insert(cand.end(), w.begin(), w.end());
                Eigen::VectorXd v = word_vector(cand).segment(b, sz);
                if (v.norm() < 1e-12)
                    continue;
                Eigen::MatrixXd trial(sz, acc.cols() + 1);
                trial << acc, v;
                Eigen::FullPivLU<Eigen::MatrixXd> lu(trial);
                lu.setThreshold(1e-10);
                if (lu.rank() == trial.cols()) {
                    acc = trial;
                    words_[k - 1].push_back(cand);
                }
            }
        if (acc.cols() < sz) {
            generating_ = false;
            basis_[k - 1] = Mat::Zero(sz, sz);
            continue;
        }
        basis_[k - 1] = acc;
    }
}

NilpotentCone build_cone(const frames::ChartFrame& frame, const Vec& u)
{
    return NilpotentCone(nilpotentize(frames::structure_constants(frame, u), frame.grading()));
}

double check_exp_line_identity(const NilpotentCone& cone, const Vec& a)
{
    double worst = 0.0;
    for (int s = 0; s <= 10; ++s) {
        const double t = 0.1 * s;
        Vec x = t * a;
        Vec flow = Vec::Zero(a.size());
        for (int i = 0; i < a.size(); ++i)
            if (a[i] != 0.0)
                flow += a[i] * cone.canonical_field(i, x);
        worst = std::max(worst, max_abs(flow - a));
    }
    return worst;
}

double property_sum_defect(const NilpotentCone& cone, const Vec& x)
{
    const int n = cone.dim();
    const Grading& gr = cone.grading();
    double worst = 0.0;
    for (int j = 0; j < n; ++j) {
        if (gr.degree(j) < 2)
            continue;
        std::map<int, double> by_order;
        for (int i = 0; i < n; ++i)
            for (const PolyTerm& t : cone.canonical_terms(i)[j]) {
                int order = 1;
                for (int e : t.mu)
                    order += e;
                by_order[order] += x[i] * t.coef * monomial(t.mu, x);
            }
        for (auto& [l, v] : by_order)
            if (l >= 2)
                worst = std::max(worst, std::abs(v));
    }
    return worst;
}

std::string dump_json(const NilpotentCone& cone)
{
    nlohmann::json j;
    const int n = cone.dim();
    j["base"] = std::vector<double>(cone.base().data(), cone.base().data() + cone.base().size());
    j["dims"] = cone.grading().dims();
    nlohmann::json consts = nlohmann::json::array();
    for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b)
            for (int k = 0; k < n; ++k)
                if (cone.constants()(a, b, k) != 0.0)
                    consts.push_back({{"i", a + 1}, {"j", b + 1}, {"k", k + 1}, {"value", cone.constants()(a, b, k)}});
    j["graded_constants"] = consts;
    nlohmann::json F = nlohmann::json::array();
    for (int c = 0; c < n; ++c)
        for (const GroupTerm& t : cone.group_law()[c])
            F.push_back({{"j", c + 1}, {"mu", t.mu}, {"beta", t.beta}, {"value", t.coef}});
    j["group_law"] = F;
    return j.dump(2);
}

} // namespace carnot::cone
