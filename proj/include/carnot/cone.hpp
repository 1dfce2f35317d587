#pragma once

#include <string>
#include <utility>
#include <vector>

#include "carnot/frames.hpp"

namespace carnot::cone {

using frames::Grading;

struct GradedConstants {
    Vec base;
    Grading grading;
    std::vector<double> c; // c[(i*n + j)*n + k], nonzero only where deg k = deg i + deg j

    int n() const { return grading.dim(); }
    double operator()(int i, int j, int k) const { return c[(i * n() + j) * n() + k]; }
};

struct Entry {
    int i, j, k;
    double value;
};

// Constants from a sparse table; antisymmetric partners are filled in.
GradedConstants from_table(const Grading& grading, const std::vector<Entry>& entries);

GradedConstants nilpotentize(const frames::StructureConstants& c, const Grading& grading);
double check_jacobi(const GradedConstants& g);

// A monomial x^mu y^beta with its coefficient in layer j of the product.
struct GroupTerm {
    std::vector<int> mu, beta;
    double coef;
};

struct PolyTerm {
    std::vector<int> mu;
    double coef;
};

class NilpotentCone {
public:
    explicit NilpotentCone(GradedConstants g);

    const Grading& grading() const { return g_.grading; }
    const GradedConstants& constants() const { return g_; }
    const Vec& base() const { return g_.base; }
    int dim() const { return g_.n(); }

    Vec bracket(const Vec& a, const Vec& b) const;
    Vec bch(const Vec& x, const Vec& y) const;
    Vec dilate(double eps, const Vec& x) const;

    // F^j_{mu,beta}, indexed by component j.
    const std::vector<std::vector<GroupTerm>>& group_law() const { return F_; }
    Vec group_law_eval(const Vec& x, const Vec& y) const;
    double extraction_residual() const { return extraction_residual_; }

    Vec canonical_field(int i, const Vec& x) const;
    Mat canonical_matrix(const Vec& x) const;
    // d/dt bch(x, t e_i) at t = 0 by exact Lagrange interpolation.
    Vec canonical_field_interp(int i, const Vec& x) const;
    const std::vector<std::vector<PolyTerm>>& canonical_terms(int i) const { return Z_[i]; }

    // Bracket-generator presentation: layer k basis as right-nested words in horizontal letters.
    bool bracket_generating() const { return generating_; }
    const std::vector<std::vector<int>>& layer_words(int k) const { return words_[k - 1]; }
    // Columns are layer-k coordinates of the chosen words.
    const Mat& layer_basis(int k) const { return basis_[k - 1]; }
    Vec word_vector(const std::vector<int>& word) const;

private:
    void build_dynkin();
    void extract_group_law();
    void build_presentation();

    GradedConstants g_;
    std::vector<std::pair<std::vector<int>, double>> dynkin_; // letters 0 = x, 1 = y
    std::vector<std::vector<GroupTerm>> F_;
    std::vector<std::vector<std::vector<PolyTerm>>> Z_; // Z_[i][j]
    double extraction_residual_ = 0.0;
    bool generating_ = true;
    std::vector<std::vector<std::vector<int>>> words_;
    std::vector<Mat> basis_;
};

NilpotentCone build_cone(const frames::ChartFrame& frame, const Vec& u);

double homogeneous_norm(const Grading& g, const Vec& a);
double layer_norm(const Grading& g, const Vec& a); // max_k |block_k|^{1/k}
double max_abs(const Vec& a);

double check_exp_line_identity(const NilpotentCone& cone, const Vec& a);
// Largest per-(j,l) sum of the mixed polynomial terms; zero by cancellation.
double property_sum_defect(const NilpotentCone& cone, const Vec& x);

std::string dump_json(const NilpotentCone& cone);

} // namespace carnot::cone
