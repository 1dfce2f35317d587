#pragma once

#include <cstdint>
#include <vector>

#include "carnot/cone.hpp"
#include "carnot/frames.hpp"

namespace carnot::flows {

using frames::ChartFrame;

struct FlowSolverConfig {
    double rtol = 1e-10;
    double atol = 1e-12;
    double max_step = 0.25;
    int max_steps = 200000;
    int newton_max_iter = 50;
    double newton_tol = 1e-10;

    void validate() const;
};

struct NormalCoords {
    Vec base;
    Vec a;
    int iterations = 0;
    double residual = 0.0;
};

// Phi(t, u, a) = exp(sum t a_i X_i)(u).
Vec exp_combination(const ChartFrame& frame, const Vec& u, const Vec& a, double t = 1.0,
                    const FlowSolverConfig& cfg = {});

struct FlowWithJacobian {
    Vec point;
    Mat d_coeffs; // dPhi/da at t = 1
};

// Integrates the variational equation alongside the flow.
FlowWithJacobian exp_combination_jacobian(const ChartFrame& frame, const Vec& u, const Vec& a,
                                          const FlowSolverConfig& cfg = {});

NormalCoords normal_coords(const ChartFrame& frame, const Vec& u, const Vec& v, const FlowSolverConfig& cfg = {});

// Flow of sum a_i Zhat_i from s in the cone's own coordinates.
Vec cone_flow(const cone::NilpotentCone& cone, const Vec& s, const Vec& a, const FlowSolverConfig& cfg = {});

// theta_u[exp(sum a_i Xhat_i)(theta_u^{-1}(w))] with u the cone base.
Vec exp_nilpotent(const ChartFrame& frame, const cone::NilpotentCone& cone, const Vec& w, const Vec& a,
                  const FlowSolverConfig& cfg = {});

// Riemannian length of the chord u -> v, frame taken at the midpoint.
double riem_gap(const ChartFrame& frame, const Vec& u, const Vec& v);

struct HolderReport {
    std::vector<int> samples;
    std::vector<double> separations;
    std::vector<double> estimates;
    double value = 0.0;
    bool stable(double tol) const;
};

HolderReport estimate_parameter_holder(const ChartFrame& frame, const Vec& center, double radius, const Vec& a,
                                       double alpha, int refinements, int base_samples, std::uint64_t seed,
                                       const FlowSolverConfig& cfg = {});

} // namespace carnot::flows
