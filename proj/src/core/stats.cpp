#include "stats.hpp"

#include "error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace sph {

double r_squared(const Vector& y, const Vector& pred) {
    if (y.size() != pred.size() || y.size() == 0) {
        throw DataError("r_squared: size mismatch");
    }
    const double mean = y.mean();
    const double sst = (y.array() - mean).square().sum();
    const double sse = (y - pred).squaredNorm();
    if (sst <= 0.0) {
        return sse <= 1e-24 ? 1.0 : -std::numeric_limits<double>::infinity();
    }
    return 1.0 - sse / sst;
}

double pearson(const Vector& a, const Vector& b) {
    if (a.size() != b.size() || a.size() < 2) {
        throw DataError("pearson: need two equally sized vectors with n >= 2");
    }
    const double ma = a.mean();
    const double mb = b.mean();
    const Eigen::ArrayXd da = a.array() - ma;
    const Eigen::ArrayXd db = b.array() - mb;
    const double denom = std::sqrt(da.square().sum() * db.square().sum());
    if (denom <= 0.0) return 0.0;
    return (da * db).sum() / denom;
}

std::vector<double> rank_descending(const std::vector<double>& scores) {
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] > scores[b];
    });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

Matrix sample_covariance(const Matrix& x) {
    const Eigen::Index n = x.rows();
    if (n < 2) throw DataError("sample_covariance: need n >= 2");
    Matrix centered = x.rowwise() - x.colwise().mean();
    return (centered.transpose() * centered) / static_cast<double>(n - 1);
}

ShrunkCovariance shrink_covariance(const Matrix& x, double min_eig) {
    ShrunkCovariance out;
    out.sigma = sample_covariance(x);
    const double p = static_cast<double>(x.cols());
    const double n = static_cast<double>(x.rows());
    auto lambda_min = [](const Matrix& m) {
        Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
        return es.eigenvalues().minCoeff();
    };
    double lmin = lambda_min(out.sigma);
    const bool needs_shrinkage = (p / n > 0.1) || (lmin < min_eig);
    if (!needs_shrinkage) {
        out.min_eigenvalue = lmin;
        return out;
    }
    const Matrix identity = Matrix::Identity(x.cols(), x.cols());
    for (double g : {0.01, 0.05, 0.1, 0.2, 0.5}) {
        Matrix candidate = (1.0 - g) * out.sigma + g * identity;
        lmin = lambda_min(candidate);
        if (lmin >= min_eig) {
            out.sigma = std::move(candidate);
            out.intensity = g;
            out.min_eigenvalue = lmin;
            return out;
        }
    }
    throw NumericError("covariance not positive definite even at shrinkage 0.5");
}

ConditionalGaussian conditional_gaussian(const Matrix& sigma, const Vector& mu, int j) {
    const Eigen::Index p = sigma.rows();
    if (j < 0 || j >= p) throw ConfigError("conditional_gaussian: column out of range");
    ConditionalGaussian out;
    if (p == 1) {
        out.weights = Vector::Zero(0);
        out.intercept = mu(0);
        return out;
    }
    Matrix s_rest(p - 1, p - 1);
    Vector s_cross(p - 1);
    Vector mu_rest(p - 1);
    Eigen::Index r = 0;
    for (Eigen::Index a = 0; a < p; ++a) {
        if (a == j) continue;
        s_cross(r) = sigma(a, j);
        mu_rest(r) = mu(a);
        Eigen::Index c = 0;
        for (Eigen::Index b = 0; b < p; ++b) {
            if (b == j) continue;
            s_rest(r, c) = sigma(a, b);
            ++c;
        }
        ++r;
    }
    double ridge = 0.0;
    Eigen::LDLT<Matrix> ldlt(s_rest);
    Vector w;
    bool ok = ldlt.info() == Eigen::Success && ldlt.isPositive();
    if (ok) {
        w = ldlt.solve(s_cross);
        ok = (s_rest * w - s_cross).norm() <= 1e-8 * (1.0 + s_cross.norm());
    }
    if (!ok) {
        ridge = 1e-8 * std::max(1.0, s_rest.trace() / static_cast<double>(p - 1));
        Matrix stabilized = s_rest + ridge * Matrix::Identity(p - 1, p - 1);
        w = stabilized.ldlt().solve(s_cross);
    }
    out.weights = w;
    out.intercept = mu(j) - w.dot(mu_rest);
    out.ridge_used = ridge;
    return out;
}

Vector ols_fit(const Matrix& x, const Vector& y) {
    Matrix design(x.rows(), x.cols() + 1);
    design.col(0).setOnes();
    design.rightCols(x.cols()) = x;
    return design.colPivHouseholderQr().solve(y);
}

double median(std::vector<double> v) {
    if (v.empty()) throw DataError("median of empty vector");
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    double hi = v[mid];
    if (v.size() % 2 == 1) return hi;
    double lo = *std::max_element(v.begin(), v.begin() + mid);
    return 0.5 * (lo + hi);
}

double median_absolute_deviation(const std::vector<double>& v) {
    const double med = median(v);
    std::vector<double> dev(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) dev[i] = std::abs(v[i] - med);
    return median(dev);
}

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw ConfigError("normal_quantile: p must be in (0,1)");
    const double q = p - 0.5;
    double r;
    if (std::abs(q) <= 0.425) {
        r = 0.180625 - q * q;
        return q *
               (((((((2509.0809287301226727 * r + 33430.575583588128105) * r + 67265.770927008700853) * r +
                    45921.953931549871457) * r + 13731.693765509461125) * r + 1971.5909503065514427) * r +
                  133.14166789178437745) * r + 3.387132872796366608) /
               (((((((5226.495278852545703 * r + 28729.085735721942674) * r + 39307.89580009271061) * r +
                    21213.794301586595867) * r + 5394.1960214247511077) * r + 687.1870074920579083) * r +
                  42.313330701600911252) * r + 1.0);
    }
    r = q < 0.0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double val;
    if (r <= 5.0) {
        r -= 1.6;
        val = (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r + 0.24178072517745061177) * r +
                   1.27045825245236838258) * r + 3.64784832476320460504) * r + 5.7694972214606914055) * r +
                 4.6303378461565452959) * r + 1.42343711074968357734) /
              (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r + 0.0151986665636164571966) * r +
                   0.14810397642748007459) * r + 0.68976733498510000455) * r + 1.6763848301838038494) * r +
                 2.05319162663775882187) * r + 1.0);
    } else {
        r -= 5.0;
        val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r + 0.0012426609473880784386) * r +
                   0.026532189526576123093) * r + 0.29656057182850489123) * r + 1.7848265399172913358) * r +
                 5.4637849111641143699) * r + 6.6579046435011037772) /
              (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r + 1.8463183175100546818e-5) * r +
                   7.868691311456132591e-4) * r + 0.0148753612908506148525) * r + 0.13692988092273580531) * r +
                 0.59983220655588793769) * r + 1.0);
    }
    return q < 0.0 ? -val : val;
}

double quantile(std::vector<double> v, double p) {
    if (v.empty()) throw DataError("quantile of empty vector");
    if (p <= 0.0) return *std::min_element(v.begin(), v.end());
    if (p >= 1.0) return *std::max_element(v.begin(), v.end());
    std::sort(v.begin(), v.end());
    const double h = p * static_cast<double>(v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double frac = h - std::floor(h);
    return v[lo] * (1.0 - frac) + v[hi] * frac;
}

} // namespace sph
