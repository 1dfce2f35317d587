#pragma once

#include <cstdint>
#include <vector>

#include "carnot/metrics.hpp"

namespace carnot::connect {

using flows::FlowSolverConfig;
using frames::ChartFrame;

struct Segment {
    int field = 0; // horizontal index
    double coef = 0.0;
};

using Word = std::vector<Segment>;

struct HorizontalPath {
    Vec start;
    Word segments;
    Vec end;
    double length = 0.0;
};

// Product of the horizontal exponentials of a word in cone coordinates.
Vec word_product(const cone::NilpotentCone& cone, const Word& word);
Word inverse(const Word& word);
// Adjacent segments on the same field are combined; zero segments dropped.
Word merge(const Word& word);
// Longest word group_connect can return for this grading.
int max_word_length(const frames::Grading& g);

// Horizontal word whose product carries v to w in the cone: v * prod(word) = w.
Word group_connect(const cone::NilpotentCone& cone, const Vec& v, const Vec& w);

struct Lift {
    HorizontalPath path;
    Vec target;
    double mismatch = 0.0; // d_inf(true endpoint, group target)
};

// True flows of the word from v; the group target is theta_u(s_v * prod(word)).
Lift lift_to_manifold(const ChartFrame& frame, const cone::NilpotentCone& cone, const Word& word, const Vec& v,
                      const FlowSolverConfig& cfg = {});

// Length of the horizontal path word from v under the frame metric.
double path_length(const ChartFrame& frame, const Word& word, const Vec& v, const FlowSolverConfig& cfg = {});

struct ConnectResult {
    HorizontalPath path;
    std::vector<double> residuals; // d_inf(endpoint, w) after each round
    int rounds = 0;
    bool roundoff_limited = false; // stopped with |endpoint - w| at machine precision
};

ConnectResult cc_connect(const ChartFrame& frame, const Vec& v, const Vec& w, double tol, int max_rounds = 30,
                         const FlowSolverConfig& cfg = {});

double cc_distance_upper(const ChartFrame& frame, const Vec& v, const Vec& w, int budget = 4, double tol = 1e-9,
                         const FlowSolverConfig& cfg = {});

struct BallBoxReport {
    std::vector<double> r;
    std::vector<metrics::Estimate> c2; // sup d_inf(endpoints) / length
    std::vector<metrics::Estimate> upper_over_r; // sup cc_distance_upper / r over Box(g, r)
    std::vector<double> C1, C2;
    double spread_C1() const;
    double spread_C2() const;
};

BallBoxReport ballbox_check(const ChartFrame& frame, const Vec& g, const std::vector<double>& r, int samples,
                            std::uint64_t seed, int budget = 1, const FlowSolverConfig& cfg = {});

struct DimensionReport {
    std::vector<double> r;
    std::vector<double> count; // covering number estimate per r
    double dimension = 0.0;
    int formula = 0;
};

// Covering numbers N(r) = vol(region) / vol(Box(x, r)), box volumes from the Jacobian of theta_x.
DimensionReport hausdorff_dimension_estimate(const ChartFrame& frame, const frames::Box& region,
                                             const std::vector<double>& r, int centers, int samples,
                                             std::uint64_t seed, const FlowSolverConfig& cfg = {});

} // namespace carnot::connect
