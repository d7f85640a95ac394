#pragma once

#include "gbt.hpp"

namespace sph {

struct ShapResult {
    Matrix values;           // n x p
    double base_value = 0.0; // mean prediction over the background sample
};

// Interventional tree-Shapley values against a background sample. Exact per
// (row, background) pair: every leaf induces a conjunction game over the
// features the pair disagrees on along the path, whose Shapley value has a
// closed form. Local accuracy holds by construction:
//   base_value + sum_j phi_j(x) = prediction(x).
ShapResult shap_values(const GbtModel& model, const Matrix& x, const Matrix& background);

// Seeded row subsample used to cap the background size (row order preserved).
Matrix background_sample(const Matrix& x, Eigen::Index cap, std::uint64_t seed);

} // namespace sph
