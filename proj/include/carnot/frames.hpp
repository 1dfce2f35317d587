#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "carnot/errors.hpp"
#include "carnot/rng.hpp"
#include "carnot/types.hpp"

namespace carnot::frames {

// Filtration H_1 < ... < H_M = TM, fields are 0-based.
class Grading {
public:
    Grading() = default;
    explicit Grading(std::vector<int> dims);

    const std::vector<int>& dims() const { return dims_; }
    int depth() const { return static_cast<int>(dims_.size()); }
    int dim() const { return dims_.empty() ? 0 : dims_.back(); }
    int degree(int i) const { return degree_[i]; }
    int homogeneous_dim() const;

    // Layer k (1-based) occupies fields [begin(k), end(k)).
    int layer_begin(int k) const { return k == 1 ? 0 : dims_[k - 2]; }
    int layer_end(int k) const { return dims_[k - 1]; }
    int layer_size(int k) const { return layer_end(k) - layer_begin(k); }
    int horizontal_dim() const { return dims_.front(); }

private:
    std::vector<int> dims_;
    std::vector<int> degree_;
};

struct Box {
    Vec lo, hi;
    bool contains(const Vec& p) const;
};

using FrameFn = std::function<Mat(const Vec&)>;
// Returns the Jacobian of field i at p.
using JacobianFn = std::function<Mat(int, const Vec&)>;
using MetricFn = std::function<Mat(const Vec&)>;

class ChartFrame {
public:
    ChartFrame(std::string name, Grading grading, Box domain, FrameFn frame, JacobianFn jacobian = {},
               MetricFn metric = {});

    const std::string& name() const { return name_; }
    const Grading& grading() const { return grading_; }
    const Box& domain() const { return domain_; }
    int dim() const { return grading_.dim(); }
    bool has_analytic_jacobian() const { return static_cast<bool>(jac_); }

    Mat frame(const Vec& p) const { return frame_(p); }
    Vec field(int i, const Vec& p) const { return frame_(p).col(i); }
    // Analytic when available, else central differences with one Richardson level.
    Mat jacobian(int i, const Vec& p) const;
    Mat fd_jacobian(int i, const Vec& p) const;
    Mat riemann(const Vec& p) const;
    bool has_metric() const { return static_cast<bool>(metric_); }

private:
    std::string name_;
    Grading grading_;
    Box domain_;
    FrameFn frame_;
    JacobianFn jac_;
    MetricFn metric_;
};

using FramePtr = std::shared_ptr<const ChartFrame>;

struct StructureConstants {
    Vec base;
    int n = 0;
    std::vector<double> c; // c[(i*n + j)*n + k]
    double residual = 0.0;

    double operator()(int i, int j, int k) const { return c[(i * n + j) * n + k]; }
    double& at(int i, int j, int k) { return c[(i * n + j) * n + k]; }
};

struct ValidationReport {
    int samples = 0;
    bool frame_invertible = true;   // condition (1)
    bool layers_consistent = true;  // condition (2): dims strictly increasing, last = N
    bool grading_closed = true;     // condition (3)
    bool bracket_generating = true; // condition (4)
    double max_residual = 0.0;
    double max_antisymmetry = 0.0;
    double max_grading_leak = 0.0;
    std::vector<std::string> messages;

    bool ok() const { return frame_invertible && layers_consistent && grading_closed && bracket_generating; }
};

Mat eval_frame(const ChartFrame& frame, const Vec& p);
// Reciprocal condition estimate of the frame matrix.
double frame_rcond(const Mat& X);
Vec lie_bracket(const ChartFrame& frame, int i, int j, const Vec& p);
StructureConstants structure_constants(const ChartFrame& frame, const Vec& p);
// Same as structure_constants but never raises GradingViolation; leak is reported instead.
StructureConstants structure_constants_unchecked(const ChartFrame& frame, const Vec& p, double* leak = nullptr);
ValidationReport validate_carnot(const ChartFrame& frame, int sample_count, std::uint64_t seed);

// Central differences at h and h/2 combined by one Richardson step.
Mat richardson_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& p, const std::string& what);

// Sample a point uniformly in the inner part of the domain (shrunk by `margin` per side).
Vec sample_domain(const ChartFrame& frame, double margin, Rng& rng);

// Built-in frames.
FramePtr abelian(int n);
FramePtr heisenberg1();
FramePtr rototranslation();
FramePtr engel();
FramePtr engel_model();
FramePtr builtin(const std::string& name);
std::vector<std::string> builtin_names();

// New frame with fields Y_j = sum_i A(i,j) X_i for a constant invertible A.
FramePtr recombine(const FramePtr& base, const Mat& A, Grading grading, std::string name);
// Drop the analytic Jacobian so finite differences are used.
FramePtr without_jacobian(const FramePtr& base);

} // namespace carnot::frames
