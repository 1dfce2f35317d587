#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "carnot/metrics.hpp"

namespace carnot::hcdiff {

using flows::FlowSolverConfig;
using frames::ChartFrame;

struct SmoothMap {
    std::function<Vec(const Vec&)> f;
    std::function<Mat(const Vec&)> df; // optional

    Vec operator()(const Vec& p) const { return f(p); }
    Mat jacobian(const Vec& p) const;
};

SmoothMap identity_map();
SmoothMap compose(const SmoothMap& outer, const SmoothMap& inner);

struct CurveWindow {
    Vec base;                // gamma(s)
    std::vector<double> tau; // symmetric geometric grid, 0 excluded
    std::vector<Vec> coords; // normal coordinates of gamma(s + tau) at gamma(s)
};

CurveWindow make_curve_window(const ChartFrame& frame, const std::function<Vec(double)>& curve, double s,
                              double radius, int levels, double ratio = 0.5, const FlowSolverConfig& cfg = {});

struct CurveDerivative {
    Vec alpha;                  // horizontal coefficients
    std::vector<double> exponent; // fitted |gamma_i| ~ |tau|^p_i; infinity when below the noise floor
    bool pass = false;
};

CurveDerivative curve_hc_derivative(const ChartFrame& frame, const CurveWindow& window, double noise_floor = 1e-14);

struct ContactReport {
    bool pass = false;
    double vertical_leak = 0.0; // largest non-horizontal coefficient of D phi X_i
    Mat coefficients;           // D phi X_i in the target frame, columns i
};

ContactReport contact_check(const ChartFrame& source, const ChartFrame& target, const SmoothMap& phi, const Vec& p,
                            double tol = 1e-8);

struct HcDifferential {
    Vec base, image;
    Mat b;       // horizontal block: target horizontal x source horizontal
    Mat induced; // graded, block diagonal per layer
    frames::Grading source_grading, target_grading;
    double compatibility = 0.0; // bracket residual of the extension

    Vec apply(const Vec& x) const { return induced * x; }
};

HcDifferential hc_differential(const ChartFrame& source, const ChartFrame& target, const SmoothMap& phi, const Vec& p,
                               double tol = 1e-8);

struct HomomorphismReport {
    std::vector<double> t;
    std::vector<double> residual; // per t, max over samples
    bool decays() const;
};

HomomorphismReport homomorphism_residual(const ChartFrame& source, const ChartFrame& target, const SmoothMap& phi,
                                         const HcDifferential& D, const std::vector<double>& t, int samples,
                                         std::uint64_t seed, const FlowSolverConfig& cfg = {});

double chain_rule_check(const ChartFrame& m, const ChartFrame& n, const ChartFrame& x, const SmoothMap& phi,
                        const SmoothMap& psi, const Vec& p);

struct BasisChange {
    HcDifferential differential;
    bool invertible = false;
    HomomorphismReport residual;
};

// Identity map of the manifold read from framing X into framing Y.
BasisChange basis_independence_check(const ChartFrame& fx, const ChartFrame& fy, const Vec& g,
                                     const std::vector<double>& t, int samples, std::uint64_t seed,
                                     const FlowSolverConfig& cfg = {});

} // namespace carnot::hcdiff
