#pragma once

#include <cstdint>
#include <vector>

#include "carnot/hcdiff.hpp"

namespace carnot::coarea {

using frames::ChartFrame;
using hcdiff::SmoothMap;

enum class PointKind { Z, Chi, Regular };

const char* kind_name(PointKind k);

struct PointClass {
    Vec point;
    int rank_d = 0;  // rank of D phi
    int rank_hc = 0; // rank of the hc-differential
    int nu0 = -1;    // -1 on Z
    PointKind kind = PointKind::Z;
    bool assumption_holds = true; // characteristic-point property; trivially true off chi
};

// [X_i phi](p) in the target frame at phi(p): N2 x N1.
Mat frame_derivative(const ChartFrame& m, const ChartFrame& n, const SmoothMap& phi, const Vec& p);

// Induced graded matrix of the hc-differential. Targets with one layer skip the cone construction.
Mat hc_matrix(const ChartFrame& m, const ChartFrame& n, const SmoothMap& phi, const Vec& p);

int nu0(const ChartFrame& m, const ChartFrame& n, const SmoothMap& phi, const Vec& p, double tol = 1e-9);
PointClass classify(const ChartFrame& m, const ChartFrame& n, const SmoothMap& phi, const Vec& p, double tol = 1e-9);

// Volume of the Euclidean unit ball in R^s.
double unit_ball_volume(int s);

// Product of the omega ratios in the sub-Riemannian coarea factor.
double coarea_constant(const frames::Grading& source, const frames::Grading& target);
// omega_{nu1-nu2} / prod omega_{n_k - ntilde_k}.
double level_constant(const frames::Grading& source, const frames::Grading& target);

double sr_coarea_factor(const ChartFrame& m, const ChartFrame& n, const SmoothMap& phi, const Vec& p);

// Density of H^{nu1-nu2} against the Riemannian H^{N1-N2} on the level set through p.
// Throws CharacteristicNearby within d_inf distance `guard` of any listed characteristic point.
double level_set_density(const ChartFrame& m, const ChartFrame& n, const SmoothMap& phi, const Vec& p,
                         const std::vector<Vec>& chi = {}, double guard = 0.0);

// Lebesgue measure of span(K) intersected with Box_2(0, r); K holds a basis in its columns.
double tangent_box_measure(const frames::Grading& g, const Mat& K, double r, int samples = 200000,
                           std::uint64_t seed = 1);

struct TangentMeasureFit {
    std::vector<double> r, measure;
    double exponent = 0.0;
    int expected = 0; // nu1 - nu0
    bool aligned = false;
    bool pass = false;
};

TangentMeasureFit tangent_measure_fit(const ChartFrame& m, const ChartFrame& n, const SmoothMap& phi, const Vec& x,
                                      const std::vector<double>& r, int samples = 200000, std::uint64_t seed = 1);

// lim_r prod omega_{n_k} r^nu / vol(Box_2(x, r)); 1 for orthonormal frames of the model groups.
double box_volume_ratio(const ChartFrame& frame, const Vec& x, double r = 0.04, int samples = 200,
                        std::uint64_t seed = 1);

struct CoareaGrid {
    int cells = 40;
    int levels = 40;
    std::vector<double> guards{0.1, 0.05, 0.025};
    int calibration_nodes = 3;
    int calibration_samples = 200;
    std::uint64_t seed = 1;
};

struct LevelDiagnostics {
    double t = 0.0;
    double measure = 0.0; // H^{nu1-nu2} of the level inside the domain, outside the finest guard
    int simplices = 0;
    int chi_points = 0;
};

struct CoareaReport {
    frames::Box domain;
    double lhs = 0.0;
    double rhs = 0.0;
    double error = 0.0;
    std::vector<LevelDiagnostics> levels;
    std::vector<double> guards;
    std::vector<double> guard_contribution;
    bool guard_decay = true;
    int chi_points = 0;
    double volume_ratio_min = 0.0, volume_ratio_max = 0.0;
};

// Both sides of the coarea formula for a real-valued map on a 2- or 3-dimensional chart box.
CoareaReport coarea_verify(const ChartFrame& m, const ChartFrame& n, const SmoothMap& phi, const frames::Box& domain,
                           const CoareaGrid& grid = {});

} // namespace carnot::coarea
