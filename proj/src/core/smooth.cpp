#include "smooth.hpp"

#include "error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace sph {

// ============================================================================
// Basis construction
// ============================================================================

BSplineBasis BSplineBasis::from_quantiles(const Vector& x, int n_basis, int degree) {
    if (degree < 0 || degree > 10) throw ConfigError("bspline degree must be in [0, 10]");
    if (n_basis < degree + 1) throw ConfigError("n_splines must be at least degree + 1");
    if (x.size() < 2) throw DataError("bspline basis needs at least 2 points");

    std::vector<double> vals(x.data(), x.data() + x.size());
    std::set<double> distinct(vals.begin(), vals.end());
    if (static_cast<int>(distinct.size()) < n_basis) {
        throw DataError("fewer distinct x values (" + std::to_string(distinct.size()) +
                        ") than n_splines (" + std::to_string(n_basis) +
                        "); use a smaller basis");
    }

    BSplineBasis b;
    b.n_basis_ = n_basis;
    b.degree_ = degree;
    b.lo_ = *distinct.begin();
    b.hi_ = *distinct.rbegin();

    const int interior = n_basis - degree - 1;
    b.knots_.assign(static_cast<std::size_t>(degree + 1), b.lo_);
    for (int i = 1; i <= interior; ++i) {
        const double p = static_cast<double>(i) / static_cast<double>(interior + 1);
        b.knots_.push_back(quantile(vals, p));
    }
    for (int i = 0; i <= degree; ++i) b.knots_.push_back(b.hi_);

    for (int i = 0; i < interior; ++i) {
        const double t = b.knots_[static_cast<std::size_t>(degree + 1 + i)];
        const double prev = b.knots_[static_cast<std::size_t>(degree + i)];
        if (!(t > prev) || !(t < b.hi_)) {
            throw DataError("degenerate quantile knots (too many ties in x); use a smaller basis");
        }
    }
    return b;
}

Matrix BSplineBasis::evaluate(const Vector& x) const {
    const Eigen::Index n = x.size();
    Matrix out = Matrix::Zero(n, n_basis_);
    const int p = degree_;
    std::vector<double> basis(static_cast<std::size_t>(p + 1));
    std::vector<double> left(static_cast<std::size_t>(p + 1));
    std::vector<double> right(static_cast<std::size_t>(p + 1));
    for (Eigen::Index i = 0; i < n; ++i) {
        const double xi = std::min(std::max(x(i), lo_), hi_);
        // Span k: largest index with knots[k] <= xi, clamped to the
        // non-degenerate intervals [degree, n_basis-1].
        int k = static_cast<int>(std::upper_bound(knots_.begin() + p,
                                                  knots_.begin() + n_basis_ + 1, xi) -
                                 knots_.begin()) - 1;
        k = std::min(std::max(k, p), n_basis_ - 1);

        // Cox-de Boor triangular scheme for the p+1 nonzero functions.
        basis[0] = 1.0;
        for (int j = 1; j <= p; ++j) {
            left[static_cast<std::size_t>(j)] = xi - knots_[static_cast<std::size_t>(k + 1 - j)];
            right[static_cast<std::size_t>(j)] = knots_[static_cast<std::size_t>(k + j)] - xi;
            double saved = 0.0;
            for (int r = 0; r < j; ++r) {
                const double denom =
                    right[static_cast<std::size_t>(r + 1)] + left[static_cast<std::size_t>(j - r)];
                const double temp = basis[static_cast<std::size_t>(r)] / denom;
                basis[static_cast<std::size_t>(r)] = saved + right[static_cast<std::size_t>(r + 1)] * temp;
                saved = left[static_cast<std::size_t>(j - r)] * temp;
            }
            basis[static_cast<std::size_t>(j)] = saved;
        }
        for (int j = 0; j <= p; ++j) {
            out(i, k - p + j) = basis[static_cast<std::size_t>(j)];
        }
    }
    return out;
}

Matrix difference_penalty(int n_basis, int order) {
    std::vector<double> sites(static_cast<std::size_t>(n_basis));
    for (int i = 0; i < n_basis; ++i) sites[static_cast<std::size_t>(i)] = i;
    return difference_penalty(sites, order);
}

Matrix difference_penalty(const std::vector<double>& sites, int order) {
    const int n_basis = static_cast<int>(sites.size());
    if (order < 0 || order >= n_basis) throw ConfigError("penalty order must be in [0, n_basis)");
    // Divided differences: row-wise recursion over the site spacings, with
    // each row rescaled by the local mean spacing so the operator matches the
    // classic [1,-2,1] stencil on unit-spaced sites.
    Matrix d = Matrix::Identity(n_basis, n_basis);
    for (int o = 1; o <= order; ++o) {
        const Eigen::Index rows = d.rows() - 1;
        Matrix next(rows, n_basis);
        for (Eigen::Index r = 0; r < rows; ++r) {
            const double gap = (sites[static_cast<std::size_t>(r + o)] - sites[static_cast<std::size_t>(r)]) /
                               static_cast<double>(o);
            if (!(gap > 0)) throw NumericError("difference penalty: coefficient sites must increase");
            next.row(r) = (d.row(r + 1) - d.row(r)) / gap;
        }
        d = std::move(next);
    }
    return d.transpose() * d;
}

std::vector<double> BSplineBasis::greville() const {
    std::vector<double> sites(static_cast<std::size_t>(n_basis_));
    if (degree_ == 0) {
        for (int k = 0; k < n_basis_; ++k) {
            sites[static_cast<std::size_t>(k)] =
                0.5 * (knots_[static_cast<std::size_t>(k)] + knots_[static_cast<std::size_t>(k + 1)]);
        }
        return sites;
    }
    for (int k = 0; k < n_basis_; ++k) {
        double sum = 0.0;
        for (int j = 1; j <= degree_; ++j) sum += knots_[static_cast<std::size_t>(k + j)];
        sites[static_cast<std::size_t>(k)] = sum / static_cast<double>(degree_);
    }
    return sites;
}

namespace {

Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return out;
}

// Orthonormal basis of the complement of the ones direction (Householder).
// B * 1 = 1 for any partition-of-unity basis, so the constant direction would
// alias the intercept.
Matrix ones_complement(int k) {
    if (k < 2) throw ConfigError("basis too small to remove the constant direction");
    Vector u = Vector::Constant(k, 1.0 / std::sqrt(static_cast<double>(k)));
    Vector v = u;
    v(0) += 1.0;
    const double vtv = v.squaredNorm();
    Matrix h = Matrix::Identity(k, k) - (2.0 / vtv) * (v * v.transpose());
    return h.rightCols(k - 1);
}

Matrix row_kronecker(const Matrix& bu, const Matrix& bv) {
    const Eigen::Index n = bu.rows();
    Matrix out(n, bu.cols() * bv.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::Index c = 0;
        for (Eigen::Index a = 0; a < bu.cols(); ++a) {
            for (Eigen::Index b = 0; b < bv.cols(); ++b) {
                out(i, c++) = bu(i, a) * bv(i, b);
            }
        }
    }
    return out;
}

struct AssembledTerm {
    FittedSmooth shape;
    Matrix design; // centered reduced design, n x (k-1)
    Eigen::Index offset = 0;
};

struct Assembly {
    std::vector<AssembledTerm> terms;
    Vector y;
    Vector w;
    double wsum = 0.0;
    Eigen::Index n = 0;
    Eigen::Index dim = 0;
    Matrix gram; // X' W X
    Vector xty;  // X' W y
    double yty = 0.0;
    Matrix design; // includes the intercept column
};

// Values at rows with positive weight; knots must not depend on zero-weight
// rows or those rows would influence the fit through knot placement.
Vector positive_weight_values(const Vector& x, const Vector& w) {
    std::vector<double> kept;
    kept.reserve(static_cast<std::size_t>(x.size()));
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (w(i) > 0) kept.push_back(x(i));
    }
    return Eigen::Map<const Vector>(kept.data(), static_cast<Eigen::Index>(kept.size()));
}

AssembledTerm assemble_term(const TermInput& term, const Vector& w, double wsum) {
    AssembledTerm at;
    at.shape.name = term.name;
    at.shape.spec = term.spec;
    at.shape.lambda = term.lambda;
    Matrix raw;
    Matrix penalty_full;
    if (term.spec.kind == SmoothSpec::Kind::univariate) {
        at.shape.basis_u = BSplineBasis::from_quantiles(positive_weight_values(term.x, w),
                                                        term.spec.n_splines, term.spec.degree);
        raw = at.shape.basis_u.evaluate(term.x);
        penalty_full = difference_penalty(at.shape.basis_u.greville(), term.spec.penalty_order);
    } else {
        at.shape.basis_u = BSplineBasis::from_quantiles(positive_weight_values(term.u, w),
                                                        term.spec.n_splines, term.spec.degree);
        at.shape.basis_v = BSplineBasis::from_quantiles(positive_weight_values(term.v, w),
                                                        term.spec.margin_v(), term.spec.degree);
        raw = row_kronecker(at.shape.basis_u.evaluate(term.u), at.shape.basis_v.evaluate(term.v));
        const Matrix pu = difference_penalty(at.shape.basis_u.greville(), term.spec.penalty_order);
        const Matrix pv = difference_penalty(at.shape.basis_v.greville(), term.spec.penalty_order);
        penalty_full = kron(pu, Matrix::Identity(at.shape.basis_v.size(), at.shape.basis_v.size())) +
                       kron(Matrix::Identity(at.shape.basis_u.size(), at.shape.basis_u.size()), pv);
    }
    const int k = static_cast<int>(raw.cols());
    at.shape.null_remover = ones_complement(k);
    const Matrix reduced = raw * at.shape.null_remover;
    // Weighted centering keeps zero-weight rows influence-free and decouples
    // the intercept from every smooth block.
    at.shape.center = (w.transpose() * reduced).transpose() / wsum;
    at.design = reduced.rowwise() - at.shape.center.transpose();
    Matrix pen = at.shape.null_remover.transpose() * penalty_full * at.shape.null_remover;
    pen = 0.5 * (pen + pen.transpose());
    // Normalize the penalty scale so lambda grids mean the same thing for
    // inputs measured in meters and in standardized units.
    const double tr = pen.trace();
    if (tr > 0) pen *= static_cast<double>(pen.rows()) / tr;
    at.shape.penalty = pen;
    return at;
}

Assembly assemble(const std::vector<TermInput>& terms, const Vector& y, const Vector& weights) {
    if (terms.empty()) throw ConfigError("fit_pls: need at least one smooth term");
    Assembly a;
    a.n = y.size();
    if (a.n < 2) throw DataError("fit_pls: need at least 2 observations");
    a.y = y;
    a.w = weights.size() == 0 ? Vector::Ones(a.n) : weights;
    if (a.w.size() != a.n) throw ConfigError("fit_pls: weights length mismatch");
    if ((a.w.array() < 0).any()) throw ConfigError("fit_pls: weights must be non-negative");
    a.wsum = a.w.sum();
    if (!(a.wsum > 0)) throw ConfigError("fit_pls: weights must not be all zero");

    Eigen::Index dim = 1;
    for (const auto& t : terms) {
        auto at = assemble_term(t, a.w, a.wsum);
        at.offset = dim;
        dim += at.design.cols();
        a.terms.push_back(std::move(at));
    }
    a.dim = dim;
    a.design.resize(a.n, dim);
    a.design.col(0).setOnes();
    for (const auto& at : a.terms) {
        a.design.block(0, at.offset, a.n, at.design.cols()) = at.design;
    }
    const Matrix wx = a.w.asDiagonal() * a.design;
    a.gram = a.design.transpose() * wx;
    a.xty = wx.transpose() * y;
    a.yty = y.dot(a.w.cwiseProduct(y));
    return a;
}

Matrix penalty_matrix(const Assembly& a, const std::vector<double>& lambdas) {
    Matrix s = Matrix::Zero(a.dim, a.dim);
    for (std::size_t t = 0; t < a.terms.size(); ++t) {
        const auto& at = a.terms[t];
        s.block(at.offset, at.offset, at.design.cols(), at.design.cols()) =
            lambdas[t] * at.shape.penalty;
    }
    return s;
}

struct SolveOut {
    Vector beta;
    double rss_w = 0.0;
    double tr_h = 0.0;
    double gcv = std::numeric_limits<double>::infinity();
    double ridge_bump = 0.0;
};

SolveOut solve_lambdas(const Assembly& a, const std::vector<double>& lambdas) {
    SolveOut out;
    Matrix A = a.gram + penalty_matrix(a, lambdas);
    Eigen::LDLT<Matrix> ldlt(A);
    bool ok = ldlt.info() == Eigen::Success;
    Vector beta;
    if (ok) {
        beta = ldlt.solve(a.xty);
        const double rel = (A.selfadjointView<Eigen::Lower>() * beta - a.xty).norm() /
                           (a.xty.norm() + 1e-300);
        ok = std::isfinite(rel) && rel <= 1e-8;
    }
    if (!ok) {
        out.ridge_bump = 1e-8 * std::max(1.0, A.trace() / static_cast<double>(a.dim));
        A.diagonal().array() += out.ridge_bump;
        ldlt.compute(A);
        if (ldlt.info() != Eigen::Success) {
            throw NumericError("penalized least squares system could not be factorized");
        }
        beta = ldlt.solve(a.xty);
    }
    out.beta = beta;
    out.rss_w = std::max(
        0.0, a.yty - 2.0 * beta.dot(a.xty) + beta.dot(a.gram.selfadjointView<Eigen::Lower>() * beta));
    const Matrix ainv_m = ldlt.solve(a.gram);
    out.tr_h = ainv_m.trace();
    const double n = static_cast<double>(a.n);
    const double denom = n - out.tr_h;
    out.gcv = denom > 1e-9 ? n * out.rss_w / (denom * denom)
                           : std::numeric_limits<double>::infinity();
    return out;
}

PenalizedFit finalize(const Assembly& a, const std::vector<double>& lambdas) {
    const SolveOut s = solve_lambdas(a, lambdas);
    PenalizedFit fit;
    fit.n_obs = a.n;
    fit.intercept = s.beta(0);
    fit.fitted = a.design * s.beta;
    fit.rss_w = s.rss_w;
    fit.edf_total = s.tr_h;
    fit.ridge_bump = s.ridge_bump;
    const double n = static_cast<double>(a.n);
    fit.sigma2 = (n - s.tr_h) > 1e-9 ? s.rss_w / (n - s.tr_h) : 0.0;
    fit.gcv = s.gcv;
    const double ymean = a.y.dot(a.w) / a.wsum;
    const double sst = (a.y.array() - ymean).square().matrix().dot(a.w);
    fit.r2 = sst > 0 ? 1.0 - s.rss_w / sst : 0.0;

    Matrix A = a.gram + penalty_matrix(a, lambdas);
    if (s.ridge_bump > 0) A.diagonal().array() += s.ridge_bump;
    Eigen::LDLT<Matrix> ldlt(A);
    const Matrix ainv = ldlt.solve(Matrix::Identity(a.dim, a.dim));
    const Matrix ainv_m = ainv * a.gram;
    fit.intercept_var = ainv(0, 0) * fit.sigma2;

    for (const auto& at : a.terms) {
        FittedSmooth term = at.shape;
        const Eigen::Index k = at.design.cols();
        term.coef = s.beta.segment(at.offset, k);
        term.posterior_cov = ainv.block(at.offset, at.offset, k, k) * fit.sigma2;
        term.edf = ainv_m.block(at.offset, at.offset, k, k).trace();
        fit.terms.push_back(std::move(term));
    }
    return fit;
}

} // namespace

Matrix FittedSmooth::design(const Vector& x) const {
    if (spec.kind != SmoothSpec::Kind::univariate) {
        throw ConfigError("design(x): term is not univariate");
    }
    Matrix reduced = basis_u.evaluate(x) * null_remover;
    return reduced.rowwise() - center.transpose();
}

Matrix FittedSmooth::design2d(const Vector& u, const Vector& v) const {
    if (spec.kind != SmoothSpec::Kind::tensor2d) {
        throw ConfigError("design2d(u,v): term is not a tensor smooth");
    }
    Matrix reduced = row_kronecker(basis_u.evaluate(u), basis_v.evaluate(v)) * null_remover;
    return reduced.rowwise() - center.transpose();
}

Vector FittedSmooth::value(const Vector& x) const { return design(x) * coef; }

Vector FittedSmooth::value2d(const Vector& u, const Vector& v) const {
    return design2d(u, v) * coef;
}

Vector PenalizedFit::predict(const std::vector<Vector>& term_inputs,
                             const Vector* tensor_u, const Vector* tensor_v) const {
    Eigen::Index n = -1;
    std::size_t input_idx = 0;
    Vector out;
    for (const auto& term : terms) {
        Vector contribution;
        if (term.spec.kind == SmoothSpec::Kind::univariate) {
            if (input_idx >= term_inputs.size()) throw ConfigError("predict: missing term input");
            contribution = term.value(term_inputs[input_idx++]);
        } else {
            if (!tensor_u || !tensor_v) throw ConfigError("predict: missing tensor coordinates");
            contribution = term.value2d(*tensor_u, *tensor_v);
        }
        if (n < 0) {
            n = contribution.size();
            out = Vector::Constant(n, intercept);
        }
        out += contribution;
    }
    if (n < 0) throw ConfigError("predict: model has no terms");
    return out;
}

PenalizedFit fit_pls(const std::vector<TermInput>& terms, const Vector& y, const Vector& weights) {
    const Assembly a = assemble(terms, y, weights);
    std::vector<double> lambdas;
    lambdas.reserve(terms.size());
    for (const auto& t : terms) lambdas.push_back(t.lambda);
    return finalize(a, lambdas);
}

double gcv_score(const PenalizedFit& fit) {
    const double n = static_cast<double>(fit.n_obs);
    if (fit.edf_total >= n - 1e-9) {
        throw NumericError("GCV undefined: effective degrees of freedom reached n");
    }
    const double denom = n - fit.edf_total;
    return n * fit.rss_w / (denom * denom);
}

CiBand ci_band(const FittedSmooth& term, const Vector& grid, double level) {
    if (!(level > 0.0 && level < 1.0)) throw ConfigError("ci level must be in (0,1)");
    CiBand band;
    band.grid = grid;
    const double lo = term.basis_u.lo();
    const double hi = term.basis_u.hi();
    for (Eigen::Index i = 0; i < grid.size(); ++i) {
        if (grid(i) < lo || grid(i) > hi) band.clamped = true;
    }
    const Matrix b = term.design(grid);
    band.estimate = b * term.coef;
    const double z = normal_quantile(0.5 * (1.0 + level));
    Vector se(grid.size());
    for (Eigen::Index i = 0; i < grid.size(); ++i) {
        const double var = b.row(i) * term.posterior_cov * b.row(i).transpose();
        se(i) = std::sqrt(std::max(0.0, var));
    }
    band.lower = band.estimate - z * se;
    band.upper = band.estimate + z * se;
    return band;
}

GridSearchResult fit_pls_gcv(const std::vector<std::string>& term_names,
                             const Matrix& term_columns,
                             const Vector& y, const Vector& weights,
                             const SmoothGrids& grids,
                             const Matrix* tensor_coords) {
    if (term_names.size() != static_cast<std::size_t>(term_columns.cols())) {
        throw ConfigError("fit_pls_gcv: term names and columns disagree");
    }
    if (term_names.empty() && !tensor_coords) {
        throw ConfigError("fit_pls_gcv: nothing to fit");
    }

    auto feasible_basis = [&](const Vector& col, int requested) {
        std::set<double> distinct(col.data(), col.data() + col.size());
        return std::min<int>(requested, static_cast<int>(distinct.size()));
    };

    GridSearchResult best;
    best.choice.gcv = std::numeric_limits<double>::infinity();
    bool found = false;
    std::vector<double> best_lambdas;
    std::vector<TermInput> best_terms;

    const std::vector<double> tensor_lambda_axis =
        tensor_coords ? grids.tensor_lambdas : std::vector<double>{1.0};
    const std::vector<int> tensor_spline_axis =
        tensor_coords ? grids.tensor_splines : std::vector<int>{0};

    // lambda is the outer axis and n_splines the next one, so the first hit
    // at a tied GCV is the smallest lambda, then the smallest basis.
    for (double lambda_main : grids.lambdas) {
        for (int k_main : grids.n_splines) {
            for (double lambda_tensor : tensor_lambda_axis) {
                for (int k_tensor : tensor_spline_axis) {
                    std::vector<TermInput> terms;
                    std::vector<double> lambdas;
                    bool degenerate = false;
                    for (std::size_t t = 0; t < term_names.size(); ++t) {
                        TermInput ti;
                        ti.name = term_names[t];
                        ti.spec.kind = SmoothSpec::Kind::univariate;
                        ti.spec.n_splines =
                            feasible_basis(term_columns.col(static_cast<Eigen::Index>(t)), k_main);
                        if (ti.spec.n_splines < ti.spec.degree + 1) {
                            degenerate = true;
                            break;
                        }
                        ti.x = term_columns.col(static_cast<Eigen::Index>(t));
                        ti.lambda = lambda_main;
                        terms.push_back(std::move(ti));
                        lambdas.push_back(lambda_main);
                    }
                    if (degenerate) continue;
                    if (tensor_coords) {
                        TermInput ti;
                        ti.name = "tensor(x,y)";
                        ti.spec.kind = SmoothSpec::Kind::tensor2d;
                        ti.spec.n_splines = feasible_basis(tensor_coords->col(0), k_tensor);
                        ti.spec.n_splines_v = feasible_basis(tensor_coords->col(1), k_tensor);
                        if (ti.spec.n_splines < ti.spec.degree + 1 ||
                            ti.spec.n_splines_v < ti.spec.degree + 1) {
                            continue;
                        }
                        ti.u = tensor_coords->col(0);
                        ti.v = tensor_coords->col(1);
                        ti.lambda = lambda_tensor;
                        terms.push_back(std::move(ti));
                        lambdas.push_back(lambda_tensor);
                    }

                    const Assembly a = assemble(terms, y, weights);
                    const SolveOut s = solve_lambdas(a, lambdas);
                    if (!found || s.gcv < best.choice.gcv) {
                        found = true;
                        best.choice.gcv = s.gcv;
                        best.choice.lambda_main = lambda_main;
                        best.choice.lambda_tensor = lambda_tensor;
                        best.choice.n_splines = k_main;
                        best.choice.tensor_splines = tensor_coords ? k_tensor : 0;
                        best_lambdas = lambdas;
                        best_terms = terms;
                    }
                }
            }
        }
    }
    if (!found) throw NumericError("GCV grid search found no feasible configuration");
    const Assembly a = assemble(best_terms, y, weights);
    best.fit = finalize(a, best_lambdas);
    return best;
}

} // namespace sph
