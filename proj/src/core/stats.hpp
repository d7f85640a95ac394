#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace sph {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// R^2 = 1 - SSE/SST. Degenerate SST (constant y) returns 1 for a perfect fit
// and -infinity otherwise.
double r_squared(const Vector& y, const Vector& pred);

double pearson(const Vector& a, const Vector& b);

// Ranks of scores in descending order (rank 1 = largest score), ties get the
// average rank of the tied block.
std::vector<double> rank_descending(const std::vector<double>& scores);

// Sample covariance (n-1 denominator) of the columns of X.
Matrix sample_covariance(const Matrix& x);

struct ShrunkCovariance {
    Matrix sigma;
    double intensity = 0.0; // weight on the identity target
    double min_eigenvalue = 0.0;
};

// Linear shrinkage (1-g)*S + g*I with the smallest g from `intensities`
// making lambda_min >= min_eig. Shrinkage is applied only when p/n > 0.1 or
// the raw covariance is near-singular; throws NumericError when even the
// largest intensity fails.
ShrunkCovariance shrink_covariance(const Matrix& x, double min_eig = 1e-6);

// Gaussian conditional x_j | x_{-j} under (mu, sigma): returns weights w and
// intercept c with E[x_j | x_{-j}] = c + x_{-j}^T w. Singular systems are
// ridge-stabilized; *ridge_used reports the bump (0 when clean).
struct ConditionalGaussian {
    Vector weights; // length p-1, ordered by original column index skipping j
    double intercept = 0.0;
    double ridge_used = 0.0;
};
ConditionalGaussian conditional_gaussian(const Matrix& sigma, const Vector& mu, int j);

// OLS fit via QR; returns coefficients for [intercept, columns of X].
Vector ols_fit(const Matrix& x, const Vector& y);

double median(std::vector<double> v);
double median_absolute_deviation(const std::vector<double>& v);

// Inverse standard normal CDF (Wichura AS241, double precision).
double normal_quantile(double p);

// Type-7 (linear interpolation) quantile of unsorted values, p in [0,1].
double quantile(std::vector<double> v, double p);

} // namespace sph
