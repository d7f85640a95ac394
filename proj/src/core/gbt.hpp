#pragma once

#include "dataset.hpp"
#include "stats.hpp"

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace sph {

struct TreeNode {
    int split_feature = -1; // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double leaf_value = 0.0;
    double gain = 0.0; // SSE reduction of the split (0 for leaves)
    int cover = 0;     // training samples reaching the node
};

struct Hyperparams {
    int n_estimators = 300;
    int max_depth = 4;
    double learning_rate = 0.1;
    double subsample = 1.0;
    int min_samples_leaf = 5;
};

struct GbtModel {
    std::vector<std::vector<TreeNode>> trees;
    double learning_rate = 0.1;
    double base_score = 0.0;
    Hyperparams hyperparams;
    std::uint64_t seed = 0;
    double val_r2 = std::numeric_limits<double>::quiet_NaN();
    Eigen::Index n_features = 0;
    std::vector<std::string> feature_names;

    Vector predict(const Matrix& x) const;
    double predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;

    // Total split gain per feature, summed over all trees.
    Vector feature_gains() const;
    bool uses_feature(int j) const;
};

// Least-squares boosting with exact greedy splits over sorted unique values,
// midpoint thresholds, ties broken by lowest feature index then lowest
// threshold. Deterministic given (x, y, hp, seed).
GbtModel fit_gbt(const Matrix& x, const Vector& y, const Hyperparams& hp, std::uint64_t seed);

std::string gbt_to_json(const GbtModel& model);
GbtModel gbt_from_json(const std::string& text);

// ============================================================================
// Hyperparameter search
// ============================================================================

struct SearchSpace {
    std::vector<int> n_estimators = {100, 200, 300, 400, 500, 600};
    std::vector<int> max_depth = {2, 3, 4, 5, 6, 7, 8};
    std::vector<double> learning_rate = {0.01, 0.03, 0.1, 0.3};
    std::vector<double> subsample = {0.7, 1.0};
    std::vector<int> min_samples_leaf = {5, 20, 50};

    std::size_t size() const {
        return n_estimators.size() * max_depth.size() * learning_rate.size() *
               subsample.size() * min_samples_leaf.size();
    }
    Hyperparams decode(std::size_t index) const;
};

struct CandidateScore {
    Hyperparams hp;
    double cv_r2 = 0.0;
};

struct TuneResult {
    Hyperparams best;
    double best_cv_r2 = 0.0;
    std::vector<CandidateScore> evaluated;
    bool truncated = false; // budget exceeded the finite grid
};

// Randomized search: `budget` distinct candidates from the grid, scored by
// mean R^2 over 5 district-stratified folds after reserving a 10% holdout.
TuneResult tune_hyperparams(const GeoDataset& d, const std::string& outcome, int budget,
                            std::uint64_t seed, const SearchSpace& space = {});

// ============================================================================
// Rashomon ensemble
// ============================================================================

struct RashomonEnsemble {
    std::vector<GbtModel> models;
    double acceptance_threshold = 0.0; // best val_r2 - epsilon
    double best_val_r2 = 0.0;
    int rejected_count = 0; // rejections plus evictions
    bool complete = true;   // false when max_attempts ran out before k models
};

// Fits models with seeds 0,1,2,... on a 90% train split, validating on the
// 10% holdout; accepts models with val_r2 >= best - epsilon, evicting and
// refilling when the running best improves.
RashomonEnsemble sample_rashomon(const GeoDataset& d, const std::string& outcome,
                                 const Hyperparams& hp, int k, double epsilon,
                                 int max_attempts, std::uint64_t split_seed);

} // namespace sph
