#include <doctest.h>

#include <cmath>

#include "carnot/frames.hpp"

using namespace carnot;
using namespace carnot::frames;

namespace {

Vec v3(double a, double b, double c)
{
    Vec v(3);
    v << a, b, c;
    return v;
}

} // namespace

TEST_CASE("grading bookkeeping")
{
    Grading g({2, 3, 4});
    CHECK(g.depth() == 3);
    CHECK(g.degree(0) == 1);
    CHECK(g.degree(1) == 1);
    CHECK(g.degree(2) == 2);
    CHECK(g.degree(3) == 3);
    CHECK(g.homogeneous_dim() == 7);
    CHECK(Grading({2, 3}).homogeneous_dim() == 4);
    CHECK_THROWS_AS(Grading({2, 2}), ConfigError);
    CHECK_THROWS_AS(Grading(std::vector<int>{}), ConfigError);
}

TEST_CASE("frame matrices of built-in frames")
{
    Rng rng(1);
    auto ab = abelian(3);
    for (int s = 0; s < 5; ++s)
        CHECK((eval_frame(*ab, sample_domain(*ab, 0.1, rng)) - Mat::Identity(3, 3)).norm() == 0.0);

    auto h = heisenberg1();
    CHECK((eval_frame(*h, v3(0, 0, 0)) - Mat::Identity(3, 3)).norm() == 0.0);

    auto rt = rototranslation();
    Mat X = eval_frame(*rt, v3(0, 0, M_PI / 2));
    Mat expect(3, 3);
    expect << 0, 0, 1, 1, 0, 0, 0, 1, 0;
    CHECK((X - expect).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("singular frame is rejected")
{
    auto f = [](const Vec& p) {
        Mat X = Mat::Identity(2, 2);
        X(1, 1) = p[0];
        return X;
    };
    ChartFrame fr("degenerate", Grading({2}), Box{Vec::Constant(2, -1), Vec::Constant(2, 1)}, f);
    Vec p = Vec::Zero(2);
    CHECK_THROWS_AS(eval_frame(fr, p), SingularFrame);
}

TEST_CASE("lie brackets against symbolic derivatives")
{
    Rng rng(2);
    auto ab = abelian(3);
    auto h = heisenberg1();
    auto rt = rototranslation();
    for (int s = 0; s < 20; ++s) {
        Vec p = sample_domain(*h, 0.1, rng);
        CHECK(lie_bracket(*ab, 0, 1, p).norm() == 0.0);
        CHECK((lie_bracket(*h, 0, 1, p) - v3(0, 0, 1)).norm() < 1e-15);
        Vec q = sample_domain(*rt, 0.1, rng);
        CHECK((lie_bracket(*rt, 1, 2, q) - v3(std::cos(q[2]), std::sin(q[2]), 0)).norm() < 1e-14);
        CHECK((lie_bracket(*rt, 0, 1, q) - v3(std::sin(q[2]), -std::cos(q[2]), 0)).norm() < 1e-14);
    }
}

TEST_CASE("structure constants of the built-in frames")
{
    Rng rng(3);
    auto h = heisenberg1();
    auto rt = rototranslation();
    auto en = engel();
    for (int s = 0; s < 20; ++s) {
        auto c = structure_constants(*h, sample_domain(*h, 0.1, rng));
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                for (int k = 0; k < 3; ++k) {
                    double expect = (i == 0 && j == 1 && k == 2) ? 1.0 : (i == 1 && j == 0 && k == 2) ? -1.0 : 0.0;
                    CHECK(std::abs(c(i, j, k) - expect) < 1e-14);
                }
        auto r = structure_constants(*rt, sample_domain(*rt, 0.1, rng));
        CHECK(std::abs(r(0, 1, 2) - 1.0) < 1e-14);
        CHECK(std::abs(r(1, 2, 0) - 1.0) < 1e-14);
        CHECK(std::abs(r(0, 2, 0)) < 1e-14);

        Vec p = sample_domain(*en, 0.1, rng);
        auto e = structure_constants(*en, p);
        CHECK(std::abs(e(0, 1, 2) - 1.0) < 1e-13);
        CHECK(std::abs(e(0, 2, 3) - 1.0) < 1e-13);
        CHECK(std::abs(e(0, 1, 0) - 1.0) < 1e-13);
        CHECK(std::abs(e(1, 2, 3) - p[0] - p[1]) < 1e-13);
        CHECK(e.residual < 1e-13);
    }
}

TEST_CASE("grading violation and bracket generation")
{
    // Engel fields reordered so that a horizontal bracket lands in layer 3.
    Mat P = Mat::Zero(4, 4);
    P(0, 0) = 1;
    P(1, 1) = 1;
    P(3, 2) = 1;
    P(2, 3) = 1;
    auto bad = recombine(engel(), P, Grading({2, 3, 4}), "engel_swapped");
    Vec p = Vec::Constant(4, 0.2);
    CHECK_THROWS_AS(structure_constants(*bad, p), GradingViolation);
    CHECK_FALSE(validate_carnot(*bad, 10, 5).grading_closed);

    // Heisenberg with a single horizontal field: closed filtration, but not bracket generating.
    auto h13 = recombine(heisenberg1(), Mat::Identity(3, 3), Grading({1, 3}), "heisenberg_13");
    auto rep = validate_carnot(*h13, 20, 7);
    CHECK(rep.frame_invertible);
    CHECK(rep.grading_closed);
    CHECK_FALSE(rep.bracket_generating);

    for (auto f : {heisenberg1(), rototranslation(), engel(), abelian(3)}) {
        auto ok = validate_carnot(*f, 100, 11);
        CHECK(ok.ok());
        CHECK(ok.max_antisymmetry < 1e-10);
    }
}

TEST_CASE("finite-difference jacobians converge at second order")
{
    Rng rng(4);
    for (auto f : {heisenberg1(), rototranslation(), engel()}) {
        auto fd = without_jacobian(f);
        for (int s = 0; s < 5; ++s) {
            Vec p = sample_domain(*f, 0.1, rng);
            for (int i = 0; i < f->dim(); ++i) {
                CHECK((fd->jacobian(i, p) - f->jacobian(i, p)).cwiseAbs().maxCoeff() < 1e-8);
                // Plain central differences at h and h/2 give the observed order.
                auto central = [&](double h) {
                    Mat D(f->dim(), f->dim());
                    for (int c = 0; c < f->dim(); ++c) {
                        Vec a = p, b = p;
                        a[c] += h;
                        b[c] -= h;
                        D.col(c) = (f->field(i, a) - f->field(i, b)) / (2 * h);
                    }
                    return D;
                };
                const double e1 = (central(0.1) - f->jacobian(i, p)).cwiseAbs().maxCoeff();
                const double e2 = (central(0.05) - f->jacobian(i, p)).cwiseAbs().maxCoeff();
                if (e1 > 1e-12)
                    CHECK(std::log2(e1 / e2) > 1.9);
            }
        }
    }
}

TEST_CASE("finite-difference path raises on noisy fields")
{
    auto f = [](const Vec& p) {
        Mat X = Mat::Identity(2, 2);
        X(0, 1) = std::abs(p[0] - 0.3) < 1e-9 ? 0.0 : std::copysign(1.0, p[0] - 0.3);
        return X;
    };
    ChartFrame fr("kink", Grading({2}), Box{Vec::Constant(2, -1), Vec::Constant(2, 1)}, f);
    Vec p(2);
    p << 0.3 + 1e-6, 0.0;
    CHECK_THROWS_AS(fr.jacobian(1, p), NumericalJacobianUnstable);
}
