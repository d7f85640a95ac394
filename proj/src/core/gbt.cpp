#include "gbt.hpp"

#include "error.hpp"
#include "parallel.hpp"
#include "rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace sph {

namespace {

// Exact greedy regression tree on a subsample, built over per-feature index
// arrays kept sorted by (value, row) so splits are deterministic and
// invariant to monotone feature transforms.
class TreeBuilder {
public:
    TreeBuilder(const Matrix& x, const Vector& residual, int max_depth, int min_leaf)
        : x_(x), r_(residual), max_depth_(max_depth), min_leaf_(min_leaf) {}

    std::vector<TreeNode> build(const std::vector<int>& rows,
                                const std::vector<std::vector<int>>& presorted) {
        nodes_.clear();
        const int p = static_cast<int>(x_.cols());
        const int m = static_cast<int>(rows.size());
        // Filter the global presorted orders down to the subsample.
        std::vector<char> in_sample(static_cast<std::size_t>(x_.rows()), 0);
        for (int row : rows) in_sample[static_cast<std::size_t>(row)] = 1;
        columns_.assign(static_cast<std::size_t>(p), {});
        for (int f = 0; f < p; ++f) {
            auto& col = columns_[static_cast<std::size_t>(f)];
            col.reserve(static_cast<std::size_t>(m));
            for (int row : presorted[static_cast<std::size_t>(f)]) {
                if (in_sample[static_cast<std::size_t>(row)]) col.push_back(row);
            }
        }
        scratch_.resize(static_cast<std::size_t>(m));
        side_.assign(static_cast<std::size_t>(x_.rows()), 0);
        grow(0, m, 0);
        return std::move(nodes_);
    }

private:
    struct Split {
        double gain = 0.0;
        int feature = -1;
        double threshold = 0.0;
        int left_count = 0;
    };

    int grow(int lo, int hi, int depth) {
        const int count = hi - lo;
        double sum = 0.0;
        for (int i = lo; i < hi; ++i) {
            sum += r_(columns_[0][static_cast<std::size_t>(i)]);
        }
        const int node_index = static_cast<int>(nodes_.size());
        nodes_.push_back({});
        nodes_[static_cast<std::size_t>(node_index)].cover = count;
        nodes_[static_cast<std::size_t>(node_index)].leaf_value = sum / count;

        if (depth >= max_depth_ || count < 2 * min_leaf_) return node_index;
        const Split split = best_split(lo, hi, sum, count);
        if (split.feature < 0 || split.gain <= 1e-12) return node_index;

        // Stable-partition every feature column on the chosen split so the
        // children stay sorted.
        for (int i = lo; i < hi; ++i) {
            const int row = columns_[static_cast<std::size_t>(split.feature)][static_cast<std::size_t>(i)];
            side_[static_cast<std::size_t>(row)] =
                x_(row, split.feature) < split.threshold ? 1 : 2;
        }
        for (auto& col : columns_) {
            int out_left = lo;
            int out_right = 0;
            for (int i = lo; i < hi; ++i) {
                const int row = col[static_cast<std::size_t>(i)];
                if (side_[static_cast<std::size_t>(row)] == 1) {
                    col[static_cast<std::size_t>(out_left++)] = row;
                } else {
                    scratch_[static_cast<std::size_t>(out_right++)] = row;
                }
            }
            std::copy(scratch_.begin(), scratch_.begin() + out_right, col.begin() + out_left);
        }

        nodes_[static_cast<std::size_t>(node_index)].split_feature = split.feature;
        nodes_[static_cast<std::size_t>(node_index)].threshold = split.threshold;
        nodes_[static_cast<std::size_t>(node_index)].gain = split.gain;
        const int mid = lo + split.left_count;
        const int left = grow(lo, mid, depth + 1);
        nodes_[static_cast<std::size_t>(node_index)].left = left;
        const int right = grow(mid, hi, depth + 1);
        nodes_[static_cast<std::size_t>(node_index)].right = right;
        return node_index;
    }

    Split best_split(int lo, int hi, double sum, int count) const {
        Split best;
        const double parent_score = sum * sum / count;
        for (int f = 0; f < static_cast<int>(x_.cols()); ++f) {
            const auto& col = columns_[static_cast<std::size_t>(f)];
            double left_sum = 0.0;
            for (int i = lo; i < hi - 1; ++i) {
                const int row = col[static_cast<std::size_t>(i)];
                left_sum += r_(row);
                const int left_count = i - lo + 1;
                const double v = x_(row, f);
                const double v_next = x_(col[static_cast<std::size_t>(i + 1)], f);
                if (!(v_next > v)) continue; // ties must stay together
                if (left_count < min_leaf_ || count - left_count < min_leaf_) continue;
                const double right_sum = sum - left_sum;
                const double gain = left_sum * left_sum / left_count +
                                    right_sum * right_sum / (count - left_count) - parent_score;
                if (gain > best.gain) {
                    best.gain = gain;
                    best.feature = f;
                    best.threshold = 0.5 * (v + v_next);
                    best.left_count = left_count;
                }
            }
        }
        return best;
    }

    const Matrix& x_;
    const Vector& r_;
    int max_depth_;
    int min_leaf_;
    std::vector<TreeNode> nodes_;
    std::vector<std::vector<int>> columns_;
    std::vector<int> scratch_;
    std::vector<char> side_;
};

double tree_predict_row(const std::vector<TreeNode>& nodes,
                        const Eigen::Ref<const Eigen::RowVectorXd>& row) {
    int idx = 0;
    while (nodes[static_cast<std::size_t>(idx)].split_feature >= 0) {
        const auto& node = nodes[static_cast<std::size_t>(idx)];
        idx = row(node.split_feature) < node.threshold ? node.left : node.right;
    }
    return nodes[static_cast<std::size_t>(idx)].leaf_value;
}

} // namespace

Vector GbtModel::predict(const Matrix& x) const {
    if (x.cols() != n_features) {
        throw DataError("predict: expected " + std::to_string(n_features) +
                        " feature columns, got " + std::to_string(x.cols()));
    }
    Vector out = Vector::Constant(x.rows(), base_score);
    for (const auto& tree : trees) {
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            out(i) += learning_rate * tree_predict_row(tree, x.row(i));
        }
    }
    return out;
}

double GbtModel::predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
    double out = base_score;
    for (const auto& tree : trees) {
        out += learning_rate * tree_predict_row(tree, row);
    }
    return out;
}

Vector GbtModel::feature_gains() const {
    Vector gains = Vector::Zero(n_features);
    for (const auto& tree : trees) {
        for (const auto& node : tree) {
            if (node.split_feature >= 0) gains(node.split_feature) += node.gain;
        }
    }
    return gains;
}

bool GbtModel::uses_feature(int j) const {
    for (const auto& tree : trees) {
        for (const auto& node : tree) {
            if (node.split_feature == j) return true;
        }
    }
    return false;
}

GbtModel fit_gbt(const Matrix& x, const Vector& y, const Hyperparams& hp, std::uint64_t seed) {
    const Eigen::Index n = x.rows();
    if (y.size() != n) throw DataError("fit_gbt: x/y row mismatch");
    if (n < 1) throw DataError("fit_gbt: empty training set");
    if (hp.min_samples_leaf < 1 || hp.max_depth < 1 || hp.n_estimators < 0 ||
        hp.subsample <= 0.0 || hp.subsample > 1.0 || hp.learning_rate <= 0.0) {
        throw ConfigError("fit_gbt: invalid hyperparameters");
    }

    GbtModel model;
    model.hyperparams = hp;
    model.learning_rate = hp.learning_rate;
    model.seed = seed;
    model.n_features = x.cols();
    model.base_score = y.mean();

    const double variance = (y.array() - model.base_score).square().sum();
    if (variance <= 0.0 || n < 2 * hp.min_samples_leaf) {
        return model; // degenerate target: zero trees
    }

    // One global presort per fit; the builder filters it per subsample.
    std::vector<std::vector<int>> presorted(static_cast<std::size_t>(x.cols()));
    for (Eigen::Index f = 0; f < x.cols(); ++f) {
        auto& order = presorted[static_cast<std::size_t>(f)];
        order.resize(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            const double va = x(a, f);
            const double vb = x(b, f);
            if (va != vb) return va < vb;
            return a < b;
        });
    }

    Vector pred = Vector::Constant(n, model.base_score);
    std::vector<int> all_rows(static_cast<std::size_t>(n));
    std::iota(all_rows.begin(), all_rows.end(), 0);
    const int subsample_size =
        std::max<int>(2 * hp.min_samples_leaf,
                      static_cast<int>(std::floor(hp.subsample * static_cast<double>(n))));

    for (int t = 0; t < hp.n_estimators; ++t) {
        const Vector residual = y - pred;
        if (residual.cwiseAbs().maxCoeff() < 1e-12) break; // interpolated already

        std::vector<int> rows;
        if (hp.subsample >= 1.0 || subsample_size >= n) {
            rows = all_rows;
        } else {
            Rng rng(seed, Rng::mix(0x5b5ULL, static_cast<std::uint64_t>(t)));
            auto idx = rng.sample_indices(static_cast<std::size_t>(n),
                                          static_cast<std::size_t>(subsample_size));
            std::sort(idx.begin(), idx.end());
            rows.assign(idx.begin(), idx.end());
        }

        TreeBuilder builder(x, residual, hp.max_depth, hp.min_samples_leaf);
        std::vector<TreeNode> tree = builder.build(rows, presorted);
        for (Eigen::Index i = 0; i < n; ++i) {
            pred(i) += hp.learning_rate * tree_predict_row(tree, x.row(i));
        }
        model.trees.push_back(std::move(tree));
    }
    return model;
}

// ============================================================================
// Serialization
// ============================================================================

std::string gbt_to_json(const GbtModel& model) {
    nlohmann::json j;
    j["format"] = "sph.gbt.v1";
    j["learning_rate"] = model.learning_rate;
    j["base_score"] = model.base_score;
    j["seed"] = model.seed;
    j["val_r2"] = model.val_r2;
    j["n_features"] = model.n_features;
    j["feature_names"] = model.feature_names;
    j["hyperparams"] = {{"n_estimators", model.hyperparams.n_estimators},
                        {"max_depth", model.hyperparams.max_depth},
                        {"learning_rate", model.hyperparams.learning_rate},
                        {"subsample", model.hyperparams.subsample},
                        {"min_samples_leaf", model.hyperparams.min_samples_leaf}};
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& tree : model.trees) {
        nlohmann::json nodes = nlohmann::json::array();
        for (const auto& node : tree) {
            nodes.push_back({{"f", node.split_feature},
                             {"t", node.threshold},
                             {"l", node.left},
                             {"r", node.right},
                             {"v", node.leaf_value},
                             {"g", node.gain},
                             {"c", node.cover}});
        }
        trees.push_back(std::move(nodes));
    }
    j["trees"] = std::move(trees);
    return j.dump();
}

GbtModel gbt_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(std::string("model JSON parse error: ") + e.what());
    }
    if (j.value("format", std::string()) != "sph.gbt.v1") {
        throw DataError("unrecognized model format");
    }
    GbtModel model;
    model.learning_rate = j.at("learning_rate").get<double>();
    model.base_score = j.at("base_score").get<double>();
    model.seed = j.at("seed").get<std::uint64_t>();
    model.val_r2 = j.at("val_r2").is_null() ? std::numeric_limits<double>::quiet_NaN()
                                            : j.at("val_r2").get<double>();
    model.n_features = j.at("n_features").get<Eigen::Index>();
    model.feature_names = j.value("feature_names", std::vector<std::string>{});
    const auto& hp = j.at("hyperparams");
    model.hyperparams.n_estimators = hp.at("n_estimators").get<int>();
    model.hyperparams.max_depth = hp.at("max_depth").get<int>();
    model.hyperparams.learning_rate = hp.at("learning_rate").get<double>();
    model.hyperparams.subsample = hp.at("subsample").get<double>();
    model.hyperparams.min_samples_leaf = hp.at("min_samples_leaf").get<int>();
    for (const auto& jt : j.at("trees")) {
        std::vector<TreeNode> tree;
        for (const auto& jn : jt) {
            TreeNode node;
            node.split_feature = jn.at("f").get<int>();
            node.threshold = jn.at("t").get<double>();
            node.left = jn.at("l").get<int>();
            node.right = jn.at("r").get<int>();
            node.leaf_value = jn.at("v").get<double>();
            node.gain = jn.at("g").get<double>();
            node.cover = jn.at("c").get<int>();
            tree.push_back(node);
        }
        model.trees.push_back(std::move(tree));
    }
    return model;
}

// ============================================================================
// Tuning and Rashomon sampling
// ============================================================================

Hyperparams SearchSpace::decode(std::size_t index) const {
    Hyperparams hp;
    hp.n_estimators = n_estimators[index % n_estimators.size()];
    index /= n_estimators.size();
    hp.max_depth = max_depth[index % max_depth.size()];
    index /= max_depth.size();
    hp.learning_rate = learning_rate[index % learning_rate.size()];
    index /= learning_rate.size();
    hp.subsample = subsample[index % subsample.size()];
    index /= subsample.size();
    hp.min_samples_leaf = min_samples_leaf[index % min_samples_leaf.size()];
    return hp;
}

TuneResult tune_hyperparams(const GeoDataset& d, const std::string& outcome, int budget,
                            std::uint64_t seed, const SearchSpace& space) {
    if (budget < 1) throw ConfigError("tune_hyperparams: budget must be >= 1");
    std::set<std::string> distinct(d.district_ids.begin(), d.district_ids.end());
    if (distinct.size() < 5) throw DataError("tune_hyperparams: need at least 5 districts");

    // Reserve 10% for test evaluation; CV runs on the remaining 90%.
    const auto split = district_proportional_holdout(d.district_ids, 0.10, seed);
    const auto train = d.subset(split.train);
    const Vector y = train.outcomes.col(train.outcome_index(outcome));

    const int n_folds = 5;
    const auto fold = stratified_fold_assignment(train.district_ids, n_folds, seed);

    TuneResult result;
    const std::size_t grid = space.size();
    std::size_t n_candidates = static_cast<std::size_t>(budget);
    if (n_candidates > grid) {
        n_candidates = grid;
        result.truncated = true;
    }
    Rng rng(seed, 0xca9dULL);
    const std::vector<std::size_t> candidate_indices = rng.sample_indices(grid, n_candidates);

    std::vector<Matrix> fold_x(n_folds);
    std::vector<Vector> fold_y(n_folds);
    std::vector<Matrix> rest_x(n_folds);
    std::vector<Vector> rest_y(n_folds);
    for (int f = 0; f < n_folds; ++f) {
        std::vector<std::size_t> hold, rest;
        for (std::size_t i = 0; i < fold.size(); ++i) {
            (fold[i] == f ? hold : rest).push_back(i);
        }
        auto fill = [&](const std::vector<std::size_t>& rows, Matrix& xm, Vector& yv) {
            xm.resize(static_cast<Eigen::Index>(rows.size()), train.n_features());
            yv.resize(static_cast<Eigen::Index>(rows.size()));
            for (std::size_t i = 0; i < rows.size(); ++i) {
                xm.row(static_cast<Eigen::Index>(i)) = train.features.row(static_cast<Eigen::Index>(rows[i]));
                yv(static_cast<Eigen::Index>(i)) = y(static_cast<Eigen::Index>(rows[i]));
            }
        };
        fill(hold, fold_x[static_cast<std::size_t>(f)], fold_y[static_cast<std::size_t>(f)]);
        fill(rest, rest_x[static_cast<std::size_t>(f)], rest_y[static_cast<std::size_t>(f)]);
    }

    const std::size_t cells = n_candidates * static_cast<std::size_t>(n_folds);
    std::vector<double> fold_scores(cells, 0.0);
    parallel_for(cells, [&](std::size_t cell) {
        const std::size_t c = cell / static_cast<std::size_t>(n_folds);
        const std::size_t f = cell % static_cast<std::size_t>(n_folds);
        const Hyperparams hp = space.decode(candidate_indices[c]);
        const auto model = fit_gbt(rest_x[f], rest_y[f], hp, Rng::mix(seed, cell));
        fold_scores[cell] = r_squared(fold_y[f], model.predict(fold_x[f]));
    });

    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < n_candidates; ++c) {
        double mean_score = 0.0;
        for (int f = 0; f < n_folds; ++f) {
            mean_score +=
                fold_scores[c * static_cast<std::size_t>(n_folds) + static_cast<std::size_t>(f)];
        }
        mean_score /= n_folds;
        result.evaluated.push_back({space.decode(candidate_indices[c]), mean_score});
        if (mean_score > best_score) {
            best_score = mean_score;
            result.best = space.decode(candidate_indices[c]);
            result.best_cv_r2 = mean_score;
        }
    }
    return result;
}

RashomonEnsemble sample_rashomon(const GeoDataset& d, const std::string& outcome,
                                 const Hyperparams& hp, int k, double epsilon,
                                 int max_attempts, std::uint64_t split_seed) {
    if (k < 1) throw ConfigError("sample_rashomon: k must be >= 1");
    if (epsilon < 0.0) throw ConfigError("sample_rashomon: epsilon must be >= 0");
    if (max_attempts < k) max_attempts = k;

    const auto split = district_proportional_holdout(d.district_ids, 0.10, split_seed);
    const auto train = d.subset(split.train);
    const auto val = d.subset(split.holdout);
    const Vector y_train = train.outcomes.col(train.outcome_index(outcome));
    const Vector y_val = val.outcomes.col(val.outcome_index(outcome));

    RashomonEnsemble ens;
    ens.best_val_r2 = -std::numeric_limits<double>::infinity();

    int next_seed = 0;
    const int batch = std::max(1, max_threads());
    while (static_cast<int>(ens.models.size()) < k && next_seed < max_attempts) {
        const int count = std::min(batch, max_attempts - next_seed);
        std::vector<GbtModel> fitted(static_cast<std::size_t>(count));
        parallel_for(static_cast<std::size_t>(count), [&](std::size_t i) {
            auto model = fit_gbt(train.features, y_train, hp,
                                 static_cast<std::uint64_t>(next_seed + static_cast<int>(i)));
            model.val_r2 = r_squared(y_val, model.predict(val.features));
            model.feature_names = d.feature_names;
            fitted[i] = std::move(model);
        });
        // Accept/evict strictly in seed order so scheduling cannot matter.
        for (auto& model : fitted) {
            if (static_cast<int>(ens.models.size()) >= k) break;
            if (model.val_r2 > ens.best_val_r2) {
                ens.best_val_r2 = model.val_r2;
                const double threshold = ens.best_val_r2 - epsilon;
                std::vector<GbtModel> kept;
                for (auto& m : ens.models) {
                    if (m.val_r2 >= threshold) {
                        kept.push_back(std::move(m));
                    } else {
                        ++ens.rejected_count;
                    }
                }
                ens.models = std::move(kept);
            }
            if (model.val_r2 >= ens.best_val_r2 - epsilon) {
                ens.models.push_back(std::move(model));
            } else {
                ++ens.rejected_count;
            }
        }
        next_seed += count;
    }
    ens.acceptance_threshold = ens.best_val_r2 - epsilon;
    ens.complete = static_cast<int>(ens.models.size()) >= k;
    return ens;
}

} // namespace sph
