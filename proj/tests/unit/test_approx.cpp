#include <doctest.h>

#include <cmath>

#include "carnot/approx.hpp"

using namespace carnot;
using namespace carnot::approx;

namespace {

Vec vec(std::initializer_list<double> l)
{
    Vec v(static_cast<int>(l.size()));
    int i = 0;
    for (double x : l)
        v[i++] = x;
    return v;
}

const std::vector<double> kEps{0.2, 0.1, 0.05, 0.025};

} // namespace

TEST_CASE("rescaled fields of self-similar frames")
{
    auto ab = frames::abelian(3);
    auto h = frames::heisenberg1();
    Vec x = vec({0.3, -0.2, 0.1});
    auto ch = cone::build_cone(*h, Vec::Zero(3));
    Vec s = flows::normal_coords(*h, Vec::Zero(3), x).a;
    for (double e : kEps)
        for (int i = 0; i < 3; ++i) {
            CHECK((rescaled_field(*ab, Vec::Zero(3), e, i, x) - Vec::Unit(3, i)).cwiseAbs().maxCoeff() < 1e-12);
            CHECK((rescaled_field(*h, Vec::Zero(3), e, i, x) - ch.canonical_field(i, s)).cwiseAbs().maxCoeff() <
                  1e-9);
        }
    CHECK_THROWS_AS(rescaled_field(*h, Vec::Zero(3), 0.0, 0, x), ConfigError);
}

TEST_CASE("gromov convergence rates")
{
    auto h = frames::heisenberg1();
    auto rh = gromov_convergence_report(*h, vec({0.2, -0.1, 0.3}), 1.0, kEps, 100, 1);
    for (size_t k = 0; k < kEps.size(); ++k) {
        CHECK(rh.same_or_lower[k] < 1e-9);
        CHECK(rh.higher[k] < 1e-9);
    }

    auto rt = frames::rototranslation();
    auto rr = gromov_convergence_report(*rt, Vec::Zero(3), 1.0, kEps, 100, 2);
    CHECK(rr.slope_same_or_lower >= 0.8);
    CHECK(rr.slope_same_or_lower <= 1.2);
    for (size_t k = 1; k < kEps.size(); ++k)
        CHECK(std::abs(rr.same_or_lower[k - 1] / rr.same_or_lower[k] - 2.0) < 0.5);
    CHECK(rr.higher_strictly_decreasing());

    auto en = frames::engel();
    auto re = gromov_convergence_report(*en, vec({0.1, 0.3, -0.2, 0.1}), 1.0, kEps, 100, 3);
    CHECK(re.slope_same_or_lower >= 0.8);
    CHECK(re.higher_strictly_decreasing());

    CHECK_THROWS_AS(gromov_convergence_report(*h, Vec::Zero(3), 1.0, {0.1, 0.2}, 10, 1), ConfigError);
    CHECK(loglog_slope({1, 2, 4}, {3, 12, 48}) == doctest::Approx(2.0));
}

TEST_CASE("cone divergence")
{
    auto h = frames::heisenberg1();
    auto ch = cone::build_cone(*h, vec({0.1, -0.2, 0}));
    std::vector<Vec> word{vec({1, 0.5, 0.2}), vec({-0.4, 1, -0.3})};
    for (double e : kEps) {
        Vec w0 = metrics::box_point(*h, ch.base(), e, vec({0.5, -0.3, 0.4}));
        CHECK(cone_divergence(*h, ch, w0, word, e).value() < 1e-8);
        CHECK(cone_divergence(*h, ch, w0, {Vec::Zero(3), Vec::Zero(3)}, e).value() == 0.0);
    }

    // Rates against eps^{1 + 1/M}: bounded, and the Q-step gap is controlled by single steps.
    auto rt = frames::rototranslation();
    auto en = frames::engel();
    for (auto f : {rt, en}) {
        const int n = f->dim();
        Vec u = Vec::Zero(n);
        u[0] = 0.1;
        u[1] = -0.2;
        auto cu = cone::build_cone(*f, u);
        std::vector<Vec> w;
        for (int q = 0; q < 2; ++q) {
            Vec c(n);
            for (int i = 0; i < n; ++i)
                c[i] = std::cos(1.0 + 2.0 * i + 3.0 * q);
            w.push_back(c);
        }
        const double M = f->grading().depth();
        std::vector<double> norm;
        for (double e : {0.2, 0.1, 0.05}) {
            Vec w0 = metrics::box_point(*f, u, e, Vec::Constant(n, 0.3));
            const double gap = cone_divergence(*f, cu, w0, w, e).value();
            const double gap1 = cone_divergence(*f, cu, w0, {w[0]}, e).value();
            CHECK(gap > 0.0);
            CHECK(gap <= 3.0 * 2 * gap1 + 1e-8);
            norm.push_back(gap / std::pow(e, 1.0 + 1.0 / M));
        }
        CHECK(norm[1] <= 1.3 * norm[0]);
        CHECK(norm[2] <= 1.3 * norm[0]);
    }
}

TEST_CASE("two-cone divergence and local approximation defect")
{
    auto ab = frames::abelian(3);
    auto c1 = cone::build_cone(*ab, Vec::Zero(3));
    auto c2 = cone::build_cone(*ab, vec({0.3, 0.1, -0.2}));
    CHECK(two_cone_divergence(*ab, c1, c2, vec({0.1, 0.1, 0.1}), vec({1, -1, 0.5}), 0.1) < 1e-14);

    auto rt = frames::rototranslation();
    Vec u = vec({0.1, -0.2, 0.0});
    auto cu = cone::build_cone(*rt, u);
    Vec v0 = vec({0.2, -0.1, 0.05});
    CHECK(two_cone_divergence(*rt, cu, cu, v0, vec({1, 0.5, -0.3}), 0.1) < 1e-8);
    CHECK(local_approximation_defect(*rt, cu, cu, v0, u).between_cones == 0.0);

    std::vector<double> defect, tc;
    for (double e : kEps) {
        Vec up = metrics::box_point(*rt, u, e, vec({0.4, -0.24, 0.32}));
        auto cu2 = cone::build_cone(*rt, up);
        Vec v = metrics::box_point(*rt, u, e, vec({-0.4, 1, -0.3}));
        Vec w = metrics::box_point(*rt, u, e, vec({1, 0.5, 0.2}));
        defect.push_back(local_approximation_defect(*rt, cu, cu2, v, w).between_cones / e);
        const double rho = flows::riem_gap(*rt, u, up);
        tc.push_back(two_cone_divergence(*rt, cu, cu2, v, vec({1, 0.5, 0.2}), e) / (e * std::sqrt(rho)));
    }
    for (size_t k = 1; k < kEps.size(); ++k) {
        CHECK(defect[k] * 2.0 <= defect[k - 1]);
        CHECK(tc[k] <= 1.3 * tc[0]);
    }

    auto h = frames::heisenberg1();
    auto ha = cone::build_cone(*h, Vec::Zero(3));
    auto hb = cone::build_cone(*h, vec({0.2, 0.3, -0.1}));
    auto d = local_approximation_defect(*h, ha, hb, vec({0.1, 0.0, 0.1}), vec({-0.1, 0.2, 0.0}));
    CHECK(d.between_cones < 1e-8);
    CHECK(d.against_plain < 1e-8);
}

TEST_CASE("transition matrices")
{
    auto h = frames::heisenberg1();
    auto ha = cone::build_cone(*h, Vec::Zero(3));
    auto hb = cone::build_cone(*h, vec({0.2, 0.3, -0.1}));
    Vec q = vec({0.1, -0.1, 0.05});
    CHECK((transition_matrix(*h, ha, ha, q) - Mat::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((transition_matrix(*h, ha, hb, q) - Mat::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-8);

    // Lipschitz in the base: |Xi - I| / rho(u,u') stays bounded as u' -> u.
    auto rt = frames::rototranslation();
    Vec u = vec({0.1, -0.2, 0.3});
    auto cu = cone::build_cone(*rt, u);
    std::vector<double> K;
    for (double t : {0.1, 0.05, 0.025}) {
        Vec up = u + t * vec({0.3, 0.5, -0.4});
        auto cu2 = cone::build_cone(*rt, up);
        Mat Xi = transition_matrix(*rt, cu, cu2, u + vec({0.02, 0.01, -0.02}));
        K.push_back((Xi - Mat::Identity(3, 3)).cwiseAbs().maxCoeff() / flows::riem_gap(*rt, u, up));
    }
    CHECK(K[0] > 0.0);
    CHECK(std::abs(K[2] - K[0]) <= 0.3 * K[0]);
}
