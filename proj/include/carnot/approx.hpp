#pragma once

#include <cstdint>
#include <vector>

#include "carnot/metrics.hpp"

namespace carnot::approx {

using flows::FlowSolverConfig;
using frames::ChartFrame;

// Component k of (Delta^g_{1/eps})_* eps^{deg i} X_i at x, in exponential coordinates at g.
Vec rescaled_field(const ChartFrame& frame, const Vec& g, double eps, int i, const Vec& x,
                   const FlowSolverConfig& cfg = {});

// X_i pulled back to exponential coordinates at g: Dtheta_g(s)^{-1} X_i(theta_g(s)), all i as columns.
Mat pulled_back_frame(const ChartFrame& frame, const Vec& g, const Vec& s, const FlowSolverConfig& cfg = {});

struct ConvergenceReport {
    Vec base;
    double radius = 0.0;
    int samples = 0;
    std::vector<double> eps;
    // X_j = sum_k a_jk Xhat_k on Box(g, eps r). Per eps: sup |a_jk - delta_jk| over deg k <= deg j,
    // and sup |a_jk| / eps^{deg k - deg j} over deg k > deg j.
    std::vector<double> same_or_lower;
    std::vector<double> higher;
    std::vector<Mat> table; // per eps, sup |a_jk - delta_jk| at (k, j)
    double slope_same_or_lower = 0.0;
    double slope_higher = 0.0;
    bool higher_strictly_decreasing() const;
};

ConvergenceReport gromov_convergence_report(const ChartFrame& frame, const Vec& g, double r,
                                            const std::vector<double>& eps, int samples, std::uint64_t seed,
                                            const FlowSolverConfig& cfg = {});

// Least-squares slope of log y against log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

struct DivergenceGap {
    double at_base = 0.0; // d_inf^u
    double plain = 0.0;   // d_inf
    double value() const { return std::max(at_base, plain); }
};

DivergenceGap cone_divergence(const ChartFrame& frame, const cone::NilpotentCone& cone, const Vec& w0,
                              const std::vector<Vec>& word, double eps, const FlowSolverConfig& cfg = {});

// Both endpoints come from v with coefficients delta_eps w, one per cone.
double two_cone_divergence(const ChartFrame& frame, const cone::NilpotentCone& cu, const cone::NilpotentCone& cu2,
                           const Vec& v, const Vec& w, double eps, const FlowSolverConfig& cfg = {});

struct ApproximationDefect {
    double between_cones = 0.0; // |d_inf^u(v,w) - d_inf^{u'}(v,w)|
    double against_plain = 0.0; // |d_inf^u(v,w) - d_inf(v,w)|
};

ApproximationDefect local_approximation_defect(const ChartFrame& frame, const cone::NilpotentCone& cu,
                                               const cone::NilpotentCone& cu2, const Vec& v, const Vec& w,
                                               const FlowSolverConfig& cfg = {});

// Nilpotentized fields at q as chart vectors, columns i.
Mat cone_frame_at(const ChartFrame& frame, const cone::NilpotentCone& cone, const Vec& q,
                  const FlowSolverConfig& cfg = {});

Mat transition_matrix(const ChartFrame& frame, const cone::NilpotentCone& cu, const cone::NilpotentCone& cu2,
                      const Vec& q, const FlowSolverConfig& cfg = {});

} // namespace carnot::approx
