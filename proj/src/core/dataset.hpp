#pragma once

#include "stats.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace sph {

// Row-aligned tabular geographic data. Coordinates are projected planar
// meters; no geodesic math anywhere downstream.
struct GeoDataset {
    std::vector<std::string> unit_ids;
    std::vector<std::string> district_ids;
    Matrix coords;   // n x 2
    Matrix features; // n x p
    Matrix outcomes; // n x m
    std::vector<std::string> feature_names;
    std::vector<std::string> outcome_names;
    int year = 0;

    Eigen::Index n_rows() const { return features.rows(); }
    Eigen::Index n_features() const { return features.cols(); }
    Eigen::Index n_outcomes() const { return outcomes.cols(); }

    int feature_index(const std::string& name) const;
    int outcome_index(const std::string& name) const;
    Vector outcome(const std::string& name) const;

    // Copy with a subset of rows, in the given order.
    GeoDataset subset(const std::vector<std::size_t>& rows) const;
    // Copy with a subset of feature columns, in the given order.
    GeoDataset select_features(const std::vector<std::string>& names) const;

    void validate() const; // invariant checks; throws DataError
};

struct ColumnSchema {
    std::string unit_col = "unit_id";
    std::string district_col = "district_id";
    std::string x_col = "x";
    std::string y_col = "y";
    std::string outcome_prefix = "o_";
    std::string year_col = "year"; // optional; first value wins
};

struct LoadReport {
    std::size_t rows_read = 0;
    std::size_t rows_dropped = 0; // unparseable numerics in selected columns
};

// CSV contract: header row; required columns unit_id, district_id, x, y;
// outcome columns prefixed o_; every other numeric column is a feature.
GeoDataset load_csv(const std::string& path, const ColumnSchema& schema, LoadReport* report = nullptr);
GeoDataset load_csv(const std::string& path, LoadReport* report = nullptr);

void write_csv(const std::string& path, const GeoDataset& d, const ColumnSchema& schema = {});

struct ScalingRecord {
    std::vector<std::string> names;
    Vector means;
    Vector sds; // sample sd (n-1); 0 marks a constant column
    std::vector<bool> constant;

    std::vector<std::string> non_constant_names() const;
};

struct StandardizeResult {
    GeoDataset data;
    ScalingRecord features;
};

// (x - mean)/sd per feature column with sample sd; constant columns map to
// zeros and are flagged rather than erroring.
StandardizeResult standardize(const GeoDataset& d);

struct DistrictAggregate {
    std::string district_id;
    double centroid_x = 0.0;
    double centroid_y = 0.0;
    Vector mean_features;
    Vector mean_outcomes;
    std::size_t row_count = 0;
};

// One aggregate per distinct district_id, sorted by id; row-order invariant.
std::vector<DistrictAggregate> aggregate_by_district(const GeoDataset& d);

// Dense views over a district aggregate list.
Matrix aggregate_feature_matrix(const std::vector<DistrictAggregate>& aggs);
Matrix aggregate_outcome_matrix(const std::vector<DistrictAggregate>& aggs);
Matrix aggregate_centroids(const std::vector<DistrictAggregate>& aggs);

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> holdout;
};

// Holds out ~fraction of rows with district-proportional composition.
SplitIndices district_proportional_holdout(const std::vector<std::string>& district_ids,
                                           double fraction, std::uint64_t seed);

// Fold id per row; each fold's district composition mirrors the whole.
std::vector<int> stratified_fold_assignment(const std::vector<std::string>& district_ids,
                                            int n_folds, std::uint64_t seed);

} // namespace sph
