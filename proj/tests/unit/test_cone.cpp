#include <doctest.h>

#include <cmath>

#include <json.hpp>

#include "carnot/cone.hpp"

using namespace carnot;
using namespace carnot::cone;

namespace {

Vec rand_vec(Rng& rng, int n, double s = 1.0)
{
    Vec v(n);
    for (int i = 0; i < n; ++i)
        v[i] = s * rng.uniform();
    return v;
}

// Faithful strictly upper-triangular representation, used as an independent BCH oracle.
struct MatrixRep {
    std::vector<Eigen::MatrixXd> basis;

    Eigen::MatrixXd embed(const Vec& x) const
    {
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(basis[0].rows(), basis[0].cols());
        for (size_t i = 0; i < basis.size(); ++i)
            A += x[i] * basis[i];
        return A;
    }
    static Eigen::MatrixXd expm(const Eigen::MatrixXd& A)
    {
        Eigen::MatrixXd r = Eigen::MatrixXd::Identity(A.rows(), A.cols()), term = r;
        for (int k = 1; k < A.rows(); ++k) {
            term = term * A / k;
            r += term;
        }
        return r;
    }
    static Eigen::MatrixXd logm(const Eigen::MatrixXd& G)
    {
        Eigen::MatrixXd N = G - Eigen::MatrixXd::Identity(G.rows(), G.cols());
        Eigen::MatrixXd r = Eigen::MatrixXd::Zero(G.rows(), G.cols()), pw = N;
        for (int k = 1; k < G.rows(); ++k) {
            r += (k % 2 ? 1.0 : -1.0) * pw / k;
            pw = pw * N;
        }
        return r;
    }
    Vec coords(const Eigen::MatrixXd& A) const
    {
        Eigen::MatrixXd B(A.size(), basis.size());
        for (size_t i = 0; i < basis.size(); ++i)
            B.col(i) = Eigen::Map<const Eigen::VectorXd>(basis[i].data(), basis[i].size());
        Eigen::VectorXd c = B.colPivHouseholderQr().solve(Eigen::Map<const Eigen::VectorXd>(A.data(), A.size()));
        return Vec(c);
    }
    Vec product(const Vec& x, const Vec& y) const { return coords(logm(expm(embed(x)) * expm(embed(y)))); }
};

Eigen::MatrixXd E(int n, int i, int j)
{
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    m(i, j) = 1.0;
    return m;
}

MatrixRep heisenberg_rep() { return {{E(3, 0, 1), E(3, 1, 2), E(3, 0, 2)}}; }

// e1 = E12+E23+E34, e2 = E34, e3 = E24, e4 = E14 gives [e1,e2]=e3, [e1,e3]=e4.
MatrixRep engel_rep() { return {{E(4, 0, 1) + E(4, 1, 2) + E(4, 2, 3), E(4, 2, 3), E(4, 1, 3), E(4, 0, 3)}}; }

NilpotentCone heis() { return NilpotentCone(from_table(Grading({2, 3}), {{0, 1, 2, 1.0}})); }
NilpotentCone engel_cone() { return NilpotentCone(from_table(Grading({2, 3, 4}), {{0, 1, 2, 1.0}, {0, 2, 3, 1.0}})); }

} // namespace

TEST_CASE("nilpotentize filters to degree-exact constants")
{
    Vec p(3);
    p << 0.3, -0.2, 1.1;
    auto rt = frames::rototranslation();
    auto g = nilpotentize(frames::structure_constants(*rt, p), rt->grading());
    CHECK(std::abs(g(0, 1, 2) - 1.0) < 1e-14);
    CHECK(g(1, 2, 0) == 0.0);
    double total = 0.0;
    for (double c : g.c)
        total += std::abs(c);
    CHECK(std::abs(total - 2.0) < 1e-13);

    auto ab = frames::abelian(3);
    auto ga = nilpotentize(frames::structure_constants(*ab, Vec::Zero(3)), ab->grading());
    for (double c : ga.c)
        CHECK(c == 0.0);

    auto en = frames::engel();
    Vec q(4);
    q << 0.1, 0.7, -0.3, 0.2;
    auto ge = nilpotentize(frames::structure_constants(*en, q), en->grading());
    CHECK(std::abs(ge(1, 2, 3) - 0.8) < 1e-13);
    CHECK(ge(0, 1, 0) == 0.0);
}

TEST_CASE("graded Jacobi residual")
{
    CHECK(check_jacobi(heis().constants()) == 0.0);
    CHECK(check_jacobi(engel_cone().constants()) == 0.0);
    // Engel with a varying c_234 stays a Lie algebra: two generators admit no graded Jacobi quadruple.
    CHECK(check_jacobi(from_table(Grading({2, 3, 4}), {{0, 1, 2, 1.0}, {0, 2, 3, 1.0}, {1, 2, 3, 0.3}})) == 0.0);
    // Three generators: [e1,e2]=e4, [e4,e3]=e5, all else zero. The cyclic sum at (1,2,3;5) is 1.
    auto bad = from_table(Grading({3, 4, 5}), {{0, 1, 3, 1.0}, {3, 2, 4, 1.0}});
    CHECK(std::abs(check_jacobi(bad) - 1.0) < 1e-15);
    frames::StructureConstants sc;
    sc.base = Vec::Zero(5);
    sc.n = 5;
    sc.c = bad.c;
    CHECK_THROWS_AS(nilpotentize(sc, Grading({3, 4, 5})), JacobiViolation);
}

TEST_CASE("BCH product against closed forms and matrix oracles")
{
    auto h = heis();
    Vec x(3), y(3);
    x << 1, 0, 0;
    y << 0, 1, 0;
    Vec z = h.bch(x, y);
    CHECK((z - Vec((Vec(3) << 1, 1, 0.5).finished())).norm() < 1e-15);

    Rng rng(9);
    auto hr = heisenberg_rep();
    auto e = engel_cone();
    auto er = engel_rep();
    for (int s = 0; s < 200; ++s) {
        Vec a = rand_vec(rng, 3), b = rand_vec(rng, 3);
        Vec c = h.bch(a, b);
        CHECK(std::abs(c[2] - (a[2] + b[2] + 0.5 * (a[0] * b[1] - a[1] * b[0]))) < 1e-14);
        CHECK((c - hr.product(a, b)).norm() < 1e-12);
        Vec p = rand_vec(rng, 4), q = rand_vec(rng, 4);
        CHECK((e.bch(p, q) - er.product(p, q)).norm() < 1e-12);
    }
}

TEST_CASE("group axioms and dilation homomorphism")
{
    Rng rng(10);
    std::vector<NilpotentCone> cones{heis(), engel_cone(),
                                     NilpotentCone(from_table(Grading({2, 3, 4}),
                                                              {{0, 1, 2, 1.0}, {0, 2, 3, 1.0}, {1, 2, 3, -0.6}}))};
    for (auto& c : cones) {
        const int n = c.dim();
        for (int s = 0; s < 1000; ++s) {
            Vec x = rand_vec(rng, n), y = rand_vec(rng, n), w = rand_vec(rng, n);
            CHECK((c.bch(c.bch(x, y), w) - c.bch(x, c.bch(y, w))).cwiseAbs().maxCoeff() < 1e-9);
            CHECK((c.bch(x, Vec::Zero(n)) - x).norm() == 0.0);
            CHECK((c.bch(Vec::Zero(n), y) - y).norm() == 0.0);
            CHECK(c.bch(x, -x).cwiseAbs().maxCoeff() < 1e-15);
            const double eps = rng.uniform(0.01, 2.0);
            CHECK((c.bch(c.dilate(eps, x), c.dilate(eps, y)) - c.dilate(eps, c.bch(x, y))).cwiseAbs().maxCoeff() <
                  1e-12);
        }
    }
    Vec one = Vec::Ones(3);
    CHECK((heis().dilate(0.5, one) - Vec((Vec(3) << 0.5, 0.5, 0.25).finished())).norm() == 0.0);
    CHECK((heis().dilate(1.0, one) - one).norm() == 0.0);
}

TEST_CASE("group law coefficients")
{
    auto h = heis();
    const auto& F = h.group_law();
    REQUIRE(F[2].size() == 2);
    for (const auto& t : F[2]) {
        if (t.mu[0] == 1)
            CHECK(std::abs(t.coef - 0.5) < 1e-13);
        else
            CHECK(std::abs(t.coef + 0.5) < 1e-13);
    }
    auto ab = NilpotentCone(from_table(Grading({3}), {}));
    for (const auto& f : ab.group_law())
        CHECK(f.empty());

    auto e = engel_cone();
    bool found = false;
    for (const auto& t : e.group_law()[3]) {
        int w = 0;
        for (int i = 0; i < 4; ++i)
            w += (t.mu[i] + t.beta[i]) * e.grading().degree(i);
        CHECK(w == 3);
        found = true;
    }
    CHECK(found);
    CHECK(e.extraction_residual() < 1e-10);
    Rng rng(12);
    for (int s = 0; s < 200; ++s) {
        Vec x = rand_vec(rng, 4), y = rand_vec(rng, 4);
        CHECK((e.group_law_eval(x, y) - e.bch(x, y)).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("canonical fields")
{
    auto h = heis();
    Vec x(3);
    x << 0.7, -1.3, 2.0;
    CHECK((h.canonical_field(0, x) - Vec((Vec(3) << 1, 0, 0.65).finished())).norm() < 1e-13);
    CHECK((h.canonical_field(1, x) - Vec((Vec(3) << 0, 1, 0.35).finished())).norm() < 1e-13);
    for (int i = 0; i < 3; ++i)
        CHECK((h.canonical_field(i, Vec::Zero(3)) - Vec::Unit(3, i)).norm() == 0.0);

    auto e = engel_cone();
    bool quadratic = false;
    for (const auto& t : e.canonical_terms(0)[3]) {
        int order = 0;
        for (int m : t.mu)
            order += m;
        quadratic |= (order == 2);
    }
    CHECK(quadratic);

    Rng rng(13);
    for (auto* c : {&h, &e})
        for (int s = 0; s < 100; ++s) {
            Vec p = rand_vec(rng, c->dim());
            for (int i = 0; i < c->dim(); ++i)
                CHECK((c->canonical_field(i, p) - c->canonical_field_interp(i, p)).cwiseAbs().maxCoeff() < 1e-10);
        }
}

TEST_CASE("straight lines are integral curves and property_sum cancels")
{
    auto h = heis();
    CHECK(check_exp_line_identity(h, Vec::Unit(3, 0)) == 0.0);
    CHECK(check_exp_line_identity(h, Vec((Vec(3) << 1, 2, 3).finished())) < 1e-10);
    Rng rng(14);
    auto en = frames::engel();
    for (int s = 0; s < 20; ++s) {
        Vec u = frames::sample_domain(*en, 0.2, rng);
        auto c = build_cone(*en, u);
        CHECK(check_exp_line_identity(c, rand_vec(rng, 4)) < 1e-9);
        for (int k = 0; k < 10; ++k)
            CHECK(property_sum_defect(c, rand_vec(rng, 4)) < 1e-10);
    }
    for (int k = 0; k < 200; ++k)
        CHECK(property_sum_defect(h, rand_vec(rng, 3)) < 1e-10);
}

TEST_CASE("bracket-generator presentation")
{
    auto e = engel_cone();
    CHECK(e.bracket_generating());
    REQUIRE(e.layer_words(2).size() == 1);
    REQUIRE(e.layer_words(3).size() == 1);
    CHECK(std::abs(e.layer_basis(3)(0, 0)) == doctest::Approx(1.0));
    auto flat = NilpotentCone(from_table(Grading({1, 3}), {}));
    CHECK_FALSE(flat.bracket_generating());
}

TEST_CASE("cone dump round-trips through json")
{
    auto j = nlohmann::json::parse(dump_json(heis()));
    CHECK(j["graded_constants"].size() == 1);
    CHECK(j["group_law"].size() == 2);
    CHECK(j["dims"][0] == 2);
}
