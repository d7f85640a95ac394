#pragma once

#include "stats.hpp"

#include <string>
#include <vector>

namespace sph {

// ============================================================================
// B-spline bases and difference penalties (P-splines)
// ============================================================================

struct SmoothSpec {
    enum class Kind { univariate, tensor2d };
    Kind kind = Kind::univariate;
    int n_splines = 10;   // basis size (per margin for tensor2d)
    int n_splines_v = 0;  // second tensor margin; 0 means same as n_splines
    int degree = 3;
    int penalty_order = 2;

    int margin_v() const { return n_splines_v > 0 ? n_splines_v : n_splines; }
};

// Clamped B-spline basis with quantile-placed interior knots. Evaluations
// outside [lo, hi] clamp to the boundary.
class BSplineBasis {
public:
    static BSplineBasis from_quantiles(const Vector& x, int n_basis, int degree);

    Matrix evaluate(const Vector& x) const; // rows sum to 1
    int size() const { return n_basis_; }
    int degree() const { return degree_; }
    double lo() const { return lo_; }
    double hi() const { return hi_; }
    const std::vector<double>& knots() const { return knots_; }

    // Greville abscissae (interval midpoints for degree 0); the coefficient
    // sites the divided-difference penalty is anchored to.
    std::vector<double> greville() const;

private:
    std::vector<double> knots_; // full clamped knot vector, size n_basis + degree + 1
    int n_basis_ = 0;
    int degree_ = 3;
    double lo_ = 0.0;
    double hi_ = 1.0;
};

// P = D'D with D the order-th difference operator; null space dimension
// equals `order`.
Matrix difference_penalty(int n_basis, int order);

// Divided-difference variant anchored at coefficient sites. Its null space is
// exactly the polynomials of degree < order in the site coordinate, so with
// Greville sites an order-2 penalty leaves straight lines in x unpenalized
// for any knot spacing. Reduces to the plain operator on unit-spaced sites.
Matrix difference_penalty(const std::vector<double>& sites, int order);

// ============================================================================
// Penalized least squares over additive smooth terms
// ============================================================================

struct TermInput {
    std::string name;
    SmoothSpec spec;
    Vector x;       // univariate values (ignored for tensor2d)
    Vector u, v;    // tensor coordinates (ignored for univariate)
    double lambda = 1.0;
};

// One fitted additive term. Coefficients live in a reduced space with the
// constant direction removed (B * 1 = 1 would alias the intercept); the
// weighted column centering makes every term sum to zero over the training
// sample.
struct FittedSmooth {
    std::string name;
    SmoothSpec spec;
    BSplineBasis basis_u;
    BSplineBasis basis_v; // tensor only
    Matrix null_remover;  // k x (k-1) orthonormal complement of the ones direction
    Vector center;        // weighted column means of the reduced design
    Vector coef;          // reduced coefficients
    Matrix penalty;       // reduced penalty, PSD
    double lambda = 0.0;
    double edf = 0.0;
    Matrix posterior_cov; // reduced block of (X'WX + S)^-1 * sigma^2

    // Centered reduced design rows for new inputs.
    Matrix design(const Vector& x) const;                    // univariate
    Matrix design2d(const Vector& u, const Vector& v) const; // tensor
    Vector value(const Vector& x) const;
    Vector value2d(const Vector& u, const Vector& v) const;
};

struct PenalizedFit {
    double intercept = 0.0;
    double intercept_var = 0.0;
    std::vector<FittedSmooth> terms;
    Vector fitted;
    double rss_w = 0.0;
    double edf_total = 0.0;
    double sigma2 = 0.0;
    double gcv = 0.0;
    double r2 = 0.0;
    double ridge_bump = 0.0; // 0 unless the penalized system needed stabilizing
    Eigen::Index n_obs = 0;

    Vector predict(const std::vector<Vector>& term_inputs,
                   const Vector* tensor_u = nullptr, const Vector* tensor_v = nullptr) const;
};

// Minimizes sum_i w_i (y_i - eta_i)^2 + sum_b lambda_b beta_b' P_b beta_b
// with eta = intercept + sum of centered smooth terms. Empty weights mean 1.
PenalizedFit fit_pls(const std::vector<TermInput>& terms, const Vector& y, const Vector& weights);

// GCV = n * RSS_w / (n - tr(H))^2; lower is better.
double gcv_score(const PenalizedFit& fit);

struct CiBand {
    Vector grid;
    Vector estimate;
    Vector lower;
    Vector upper;
    bool clamped = false; // grid points outside the training range were clamped
};

// Pointwise band: estimate +/- z_{(1+level)/2} * se at each grid point.
CiBand ci_band(const FittedSmooth& term, const Vector& grid, double level = 0.95);

// ============================================================================
// GCV grid search
// ============================================================================

struct SmoothGrids {
    std::vector<double> lambdas = {0.001, 0.01, 0.1, 1, 10, 100, 1000};
    std::vector<int> n_splines = {5, 8, 12, 20};
    std::vector<double> tensor_lambdas = {0.001, 0.01, 0.1, 1, 10, 100, 1000};
    std::vector<int> tensor_splines = {5, 8};
};

struct GridChoice {
    double lambda_main = 1.0;
    double lambda_tensor = 1.0;
    int n_splines = 10;
    int tensor_splines = 0; // 0 when no tensor term
    double gcv = 0.0;
};

// Shared machinery for the GAM layers: full factorial search over lambda and
// n_splines (tensor lambda is a separate axis when with_tensor). Ties prefer
// the smaller lambda, then the smaller basis.
struct GridSearchResult {
    PenalizedFit fit;
    GridChoice choice;
};
GridSearchResult fit_pls_gcv(const std::vector<std::string>& term_names,
                             const Matrix& term_columns, // n x T, one column per term
                             const Vector& y, const Vector& weights,
                             const SmoothGrids& grids,
                             const Matrix* tensor_coords); // n x 2 or nullptr

} // namespace sph
