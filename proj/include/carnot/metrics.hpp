#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "carnot/cone.hpp"
#include "carnot/flows.hpp"

namespace carnot::metrics {

using flows::FlowSolverConfig;
using frames::ChartFrame;

enum class MetricKind { Inf, InfAt, D2 };

struct BoxSpec {
    Vec center;
    double r = 0.0;
    MetricKind kind = MetricKind::Inf;
    Vec base; // cone base for InfAt and D2
};

double d_inf(const ChartFrame& frame, const Vec& u, const Vec& v, const FlowSolverConfig& cfg = {});
// d_inf that reads points equal to machine precision as equal; d_inf alone cannot resolve below ulp^{1/M}.
double d_inf_resolved(const ChartFrame& frame, const Vec& u, const Vec& v, const FlowSolverConfig& cfg = {});
double roundoff_floor(const Vec& u, const Vec& v);

double d_riem(const ChartFrame& frame, const Vec& u, const Vec& v, const FlowSolverConfig& cfg = {});

// Cone-based quasimetrics; the cone must be built at the base point g.
double d_inf_at(const ChartFrame& frame, const cone::NilpotentCone& cone, const Vec& u, const Vec& v,
                const FlowSolverConfig& cfg = {});
double d2(const ChartFrame& frame, const cone::NilpotentCone& cone, const Vec& u, const Vec& v,
          const FlowSolverConfig& cfg = {});

// Left quotient s_u^{-1} s_v in exponential coordinates of the cone.
Vec cone_quotient(const ChartFrame& frame, const cone::NilpotentCone& cone, const Vec& u, const Vec& v,
                  const FlowSolverConfig& cfg = {});

bool in_box(const ChartFrame& frame, const BoxSpec& box, const Vec& p, const FlowSolverConfig& cfg = {});

// exp(sum r^{deg i} c_i X_i)(center) for c in the unit cube.
Vec box_point(const ChartFrame& frame, const Vec& center, double r, const Vec& c, const FlowSolverConfig& cfg = {});

// Uniform unit-cube coordinates with extra mass on faces and corners.
Eigen::VectorXd sample_cube(int m, Rng& rng);

struct Estimate {
    double max = 0.0;
    double p99 = 0.0;
    int samples = 0;
    std::uint64_t seed = 0;
    Eigen::VectorXd argmax;
};

// Random search over [-1,1]^m followed by hill climbing from the best draws.
// Evaluations that throw a carnot::Error are skipped.
Estimate maximize(int m, int samples, const std::function<double(const Eigen::VectorXd&)>& f, std::uint64_t seed,
                  int climbers = 6, int climb_steps = 120);

Estimate estimate_triangle_constant(const ChartFrame& frame, const Vec& center, double r, int samples,
                                    std::uint64_t seed, const FlowSolverConfig& cfg = {});

struct NestingReport {
    double C = 0.0;
    Estimate estimate;
    bool pass = false;
};

// Smallest C with Box^u(x, xi) inside Box^u(v, r + C xi) for all sampled x in Box^u(v, r).
NestingReport box_nesting_check(const ChartFrame& frame, const Vec& u, const Vec& v, double r, double xi, int samples,
                                std::uint64_t seed, const FlowSolverConfig& cfg = {});

struct DiameterReport {
    std::vector<double> eps;
    std::vector<Estimate> L;
    double spread() const; // (max - min) / min over the eps list
};

DiameterReport diameter_check(const ChartFrame& frame, const Vec& center, const std::vector<double>& eps, int samples,
                              std::uint64_t seed, const FlowSolverConfig& cfg = {});

struct ChainReport {
    Estimate riem_over_inf;      // d_riem <= c1 d_inf
    Estimate inf_over_riem_root; // d_inf <= c2 d_riem^{1/M}
    double symmetry_residual = 0.0;
    int pairs = 0;
};

ChainReport chain_constants(const ChartFrame& frame, const Vec& center, double r, int samples, std::uint64_t seed,
                            const FlowSolverConfig& cfg = {});

} // namespace carnot::metrics
