#include <doctest.h>

#include <cmath>

#include "carnot/coarea.hpp"

using namespace carnot;
using namespace carnot::coarea;

namespace {

Vec vec(std::initializer_list<double> l)
{
    Vec v(static_cast<int>(l.size()));
    int i = 0;
    for (double x : l)
        v[i++] = x;
    return v;
}

SmoothMap scalar(std::function<double(const Vec&)> f)
{
    return {[f](const Vec& q) { return Vec(Vec::Constant(1, f(q))); }, {}};
}

// Minimum degree sum over all column subsets of full rank; subsets of size one or two.
int nu0_brute(const ChartFrame& m, const ChartFrame& n, const SmoothMap& phi, const Vec& p)
{
    Mat A = frame_derivative(m, n, phi, p);
    const auto& g = m.grading();
    int best = 1 << 20;
    if (n.dim() == 1) {
        for (int i = 0; i < m.dim(); ++i)
            if (std::abs(A(0, i)) > 1e-9)
                best = std::min(best, g.degree(i));
    } else {
        for (int i = 0; i < m.dim(); ++i)
            for (int j = i + 1; j < m.dim(); ++j) {
                Mat S(2, 2);
                S << A.col(i), A.col(j);
                if (std::abs(S.determinant()) > 1e-9)
                    best = std::min(best, g.degree(i) + g.degree(j));
            }
    }
    return best;
}

const frames::Box kUnitBox{Vec::Constant(3, -0.5), Vec::Constant(3, 0.5)};

} // namespace

TEST_CASE("unit ball volumes")
{
    CHECK(unit_ball_volume(0) == doctest::Approx(1.0));
    CHECK(unit_ball_volume(1) == doctest::Approx(2.0));
    CHECK(unit_ball_volume(2) == doctest::Approx(M_PI));
    CHECK(unit_ball_volume(3) == doctest::Approx(4.0 * M_PI / 3.0));
    CHECK(unit_ball_volume(4) == doctest::Approx(M_PI * M_PI / 2.0));
    CHECK_THROWS_AS(unit_ball_volume(-1), ConfigError);
}

TEST_CASE("nu0 on the Heisenberg group")
{
    auto h = frames::heisenberg1();
    auto r = frames::abelian(1);
    auto x = scalar([](const Vec& q) { return q[0]; });
    auto t = scalar([](const Vec& q) { return q[2]; });
    CHECK(nu0(*h, *r, x, vec({0.3, -0.2, 0.1})) == 1);
    CHECK(nu0(*h, *r, t, Vec::Zero(3)) == 2);
    CHECK(nu0(*h, *r, t, vec({1.0, 0.0, 0.0})) == 1);
    auto c = scalar([](const Vec&) { return 0.7; });
    CHECK_THROWS_AS(nu0(*h, *r, c, Vec::Zero(3)), DegenerateDifferential);
}

TEST_CASE("greedy nu0 matches exhaustive enumeration")
{
    auto h = frames::heisenberg1();
    auto e = frames::engel();
    auto r = frames::abelian(1);
    auto r2 = frames::abelian(2);
    std::vector<SmoothMap> hmaps{scalar([](const Vec& q) { return q[0]; }), scalar([](const Vec& q) { return q[2]; }),
                                 scalar([](const Vec& q) { return q[0] * q[1] + q[2]; }),
                                 scalar([](const Vec& q) { return q[2] * q[2] + q[1]; })};
    std::vector<SmoothMap> emaps{scalar([](const Vec& q) { return q[3]; }), scalar([](const Vec& q) { return q[2]; }),
                                 scalar([](const Vec& q) { return q[0] + q[3]; })};
    SmoothMap e2{[](const Vec& q) { return Vec(vec({q[2], q[3]})); }, {}};
    Rng rng(17);
    for (int s = 0; s < 20; ++s) {
        Vec p = frames::sample_domain(*h, 0.5, rng);
        Vec pe = frames::sample_domain(*e, 0.5, rng);
        if (s == 0) {
            p.setZero();
            pe.setZero();
        }
        for (const auto& f : hmaps)
            CHECK(nu0(*h, *r, f, p) == nu0_brute(*h, *r, f, p));
        for (const auto& f : emaps)
            CHECK(nu0(*e, *r, f, pe) == nu0_brute(*e, *r, f, pe));
        CHECK(nu0(*e, *r2, e2, pe) == nu0_brute(*e, *r2, e2, pe));
    }
}

TEST_CASE("point classes")
{
    auto h = frames::heisenberg1();
    auto r = frames::abelian(1);
    auto x = scalar([](const Vec& q) { return q[0]; });
    auto t = scalar([](const Vec& q) { return q[2]; });
    auto c = scalar([](const Vec&) { return 1.0; });
    Rng rng(3);
    for (int s = 0; s < 10; ++s) {
        Vec p = frames::sample_domain(*h, 0.5, rng);
        auto pc = classify(*h, *r, x, p);
        CHECK(pc.kind == PointKind::Regular);
        CHECK(pc.nu0 == 1);
        CHECK(classify(*h, *r, c, p).kind == PointKind::Z);
        // nu0 >= nu2 with equality exactly on the regular set.
        auto pt = classify(*h, *r, t, p);
        CHECK(pt.nu0 >= 1);
        CHECK((pt.nu0 == 1) == (pt.kind == PointKind::Regular));
    }
    auto chi = classify(*h, *r, t, Vec::Zero(3));
    CHECK(chi.kind == PointKind::Chi);
    CHECK(chi.rank_d == 1);
    CHECK(chi.rank_hc == 0);
    CHECK(chi.nu0 == 2);
    CHECK(chi.assumption_holds);
    CHECK(std::string(kind_name(chi.kind)) == "chi");
}

TEST_CASE("sub-Riemannian coarea factor")
{
    auto h = frames::heisenberg1();
    auto r = frames::abelian(1);
    // Independent evaluation of the omega ratios for n = (2, 1), ntilde = (1, 0).
    const double w1 = 2.0, w3 = 4.0 * M_PI / 3.0, w4 = M_PI * M_PI / 2.0;
    const double expect = w3 / w4 * (w1 / w1) * (w3 / (w1 * w1));
    CHECK(expect == doctest::Approx(8.0 / 9.0));
    CHECK(coarea_constant(h->grading(), r->grading()) == doctest::Approx(expect));

    auto x = scalar([](const Vec& q) { return q[0]; });
    auto x2 = scalar([](const Vec& q) { return 2.0 * q[0]; });
    auto t = scalar([](const Vec& q) { return q[2]; });
    Vec p = vec({0.2, -0.4, 0.3});
    CHECK(sr_coarea_factor(*h, *r, x, p) == doctest::Approx(8.0 / 9.0).epsilon(1e-8));
    CHECK(sr_coarea_factor(*h, *r, x2, p) == doctest::Approx(16.0 / 9.0).epsilon(1e-8));
    CHECK(sr_coarea_factor(*h, *r, t, Vec::Zero(3)) == 0.0);
    // Off the axis the horizontal row of t is (-y/2, x/2).
    CHECK(sr_coarea_factor(*h, *r, t, vec({0.6, 0.8, 0.0})) == doctest::Approx(0.5 * 8.0 / 9.0).epsilon(1e-8));
}

TEST_CASE("level-set density")
{
    auto h = frames::heisenberg1();
    auto r = frames::abelian(1);
    auto x = scalar([](const Vec& q) { return q[0]; });
    auto x2 = scalar([](const Vec& q) { return 2.0 * q[0]; });
    auto y = scalar([](const Vec& q) { return q[1]; });
    auto t = scalar([](const Vec& q) { return q[2]; });
    const double lc = (4.0 * M_PI / 3.0) / 4.0;
    Rng rng(9);
    for (int s = 0; s < 5; ++s) {
        Vec p = frames::sample_domain(*h, 0.5, rng);
        const double dx = level_set_density(*h, *r, x, p);
        CHECK(dx == doctest::Approx(lc).epsilon(1e-8));
        CHECK(level_set_density(*h, *r, x2, p) == doctest::Approx(dx).epsilon(1e-8));
        CHECK(level_set_density(*h, *r, y, p) == doctest::Approx(dx).epsilon(1e-8));
    }
    // For t: |horizontal row| / |full row| = (rho/2) / sqrt(1 + rho^2/4).
    Vec p = vec({0.6, 0.8, 0.1});
    CHECK(level_set_density(*h, *r, t, p) == doctest::Approx(lc * 0.5 / std::sqrt(1.25)).epsilon(1e-8));
    CHECK_THROWS_AS(level_set_density(*h, *r, t, Vec::Zero(3)), CharacteristicNearby);
    CHECK_THROWS_AS(level_set_density(*h, *r, t, vec({0.01, 0.0, 0.0}), {Vec::Zero(3)}, 0.05), CharacteristicNearby);
    CHECK_NOTHROW(level_set_density(*h, *r, t, vec({0.2, 0.0, 0.0}), {Vec::Zero(3)}, 0.05));
}

TEST_CASE("tangent plane box measures")
{
    auto h = frames::heisenberg1();
    auto r = frames::abelian(1);
    auto x = scalar([](const Vec& q) { return q[0]; });
    auto t = scalar([](const Vec& q) { return q[2]; });
    const std::vector<double> radii{0.2, 0.1, 0.05};

    auto fx = tangent_measure_fit(*h, *r, x, vec({0.1, 0.2, 0.3}), radii);
    CHECK(fx.aligned);
    CHECK(fx.expected == 3);
    for (size_t i = 0; i < radii.size(); ++i)
        CHECK(fx.measure[i] == doctest::Approx(2 * radii[i] * 2 * radii[i] * radii[i]).epsilon(1e-10));
    CHECK(fx.pass);

    auto ft = tangent_measure_fit(*h, *r, t, Vec::Zero(3), radii);
    CHECK(ft.aligned);
    CHECK(ft.expected == 2);
    CHECK(ft.measure[0] == doctest::Approx(M_PI * 0.04).epsilon(1e-10));
    CHECK(ft.pass);

    // Tilted kernel: sampled, exponent 4 - 1 = 3 and halving scales by 1/8.
    auto fr = tangent_measure_fit(*h, *r, t, vec({1.0, 0.0, 0.0}), radii);
    CHECK_FALSE(fr.aligned);
    CHECK(fr.expected == 3);
    CHECK(fr.pass);
    for (size_t i = 1; i < radii.size(); ++i)
        CHECK(fr.measure[i] / fr.measure[i - 1] == doctest::Approx(0.125).epsilon(0.05));

    CHECK(tangent_box_measure(h->grading(), Mat(3, 0), 0.1) == 1.0);
    CHECK_THROWS_AS(tangent_box_measure(h->grading(), Mat::Identity(2, 2), 0.1), ConfigError);
}

TEST_CASE("box volume ratio on the model groups")
{
    CHECK(box_volume_ratio(*frames::heisenberg1(), vec({0.3, -0.1, 0.2})) == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(box_volume_ratio(*frames::abelian(1), vec({0.3})) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(box_volume_ratio(*frames::rototranslation(), vec({0.1, 0.2, 0.3})) == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("coarea formula for linear maps")
{
    auto h = frames::heisenberg1();
    auto r = frames::abelian(1);
    CoareaGrid coarse;
    coarse.cells = coarse.levels = 12;
    CoareaGrid fine;
    fine.cells = fine.levels = 24;
    for (auto f : {scalar([](const Vec& q) { return q[0]; }), scalar([](const Vec& q) { return q[0] + q[1]; })}) {
        auto a = coarea_verify(*h, *r, f, kUnitBox, coarse);
        auto b = coarea_verify(*h, *r, f, kUnitBox, fine);
        CHECK(a.error < 0.05);
        CHECK(b.error < 0.05);
        // Both quadratures are exact for linear maps, so refinement can only move roundoff.
        CHECK((b.error <= a.error || std::max(a.error, b.error) < 1e-8));
        CHECK(b.chi_points == 0);
        CHECK(b.lhs > 0);
    }
    // Constant densities: the left side is 8/9 * (3 pi / 8) * |D phi| * vol.
    auto x = coarea_verify(*h, *r, scalar([](const Vec& q) { return q[0]; }), kUnitBox, coarse);
    CHECK(x.lhs == doctest::Approx(M_PI / 3.0).epsilon(1e-8));
}

TEST_CASE("coarea formula across the characteristic line")
{
    auto h = frames::heisenberg1();
    auto r = frames::abelian(1);
    CoareaGrid g;
    g.cells = g.levels = 20;
    auto rep = coarea_verify(*h, *r, scalar([](const Vec& q) { return q[2]; }), kUnitBox, g);
    CHECK(rep.error < 0.1);
    CHECK(rep.guard_decay);
    CHECK(rep.chi_points == g.levels);
    REQUIRE(rep.guard_contribution.size() == 3);
    for (size_t i = 1; i < 3; ++i)
        CHECK(rep.guard_contribution[i] <= 0.5 * rep.guard_contribution[i - 1]);
    CHECK(rep.guard_contribution.back() > 0);
    for (const auto& lv : rep.levels)
        CHECK(lv.chi_points == 1);
}

TEST_CASE("coarea on a curved map and a planar chart")
{
    auto ro = frames::rototranslation();
    auto r = frames::abelian(1);
    CoareaGrid g;
    g.cells = g.levels = 20;
    auto rep = coarea_verify(*ro, *r, scalar([](const Vec& q) { return q[0] + 0.3 * q[2] * q[2]; }), kUnitBox, g);
    CHECK(rep.error < 0.05);

    auto a2 = frames::abelian(2);
    frames::Box sq{Vec::Constant(2, -0.5), Vec::Constant(2, 0.5)};
    auto q = coarea_verify(*a2, *r, scalar([](const Vec& p) { return p[0] * p[0] + p[1] * p[1]; }), sq, g);
    CHECK(q.error < 0.01);
}

TEST_CASE("coarea configuration errors")
{
    auto h = frames::heisenberg1();
    auto r = frames::abelian(1);
    auto x = scalar([](const Vec& q) { return q[0]; });
    CHECK_THROWS_AS(coarea_verify(*frames::engel(), *r, x, kUnitBox), ConfigError);
    CoareaGrid bad;
    bad.guards = {0.05, 0.1};
    CHECK_THROWS_AS(coarea_verify(*h, *r, x, kUnitBox, bad), ConfigError);
    frames::Box wide{Vec::Constant(3, -5.0), Vec::Constant(3, 5.0)};
    CHECK_THROWS_AS(coarea_verify(*h, *r, x, wide), ConfigError);
}
