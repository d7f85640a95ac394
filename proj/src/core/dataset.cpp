#include "dataset.hpp"

#include "csv.hpp"
#include "error.hpp"
#include "rng.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace sph {

int GeoDataset::feature_index(const std::string& name) const {
    auto it = std::find(feature_names.begin(), feature_names.end(), name);
    return it == feature_names.end() ? -1 : static_cast<int>(it - feature_names.begin());
}

int GeoDataset::outcome_index(const std::string& name) const {
    auto it = std::find(outcome_names.begin(), outcome_names.end(), name);
    return it == outcome_names.end() ? -1 : static_cast<int>(it - outcome_names.begin());
}

Vector GeoDataset::outcome(const std::string& name) const {
    const int j = outcome_index(name);
    if (j < 0) throw DataError("unknown outcome column: " + name);
    return outcomes.col(j);
}

GeoDataset GeoDataset::subset(const std::vector<std::size_t>& rows) const {
    GeoDataset out;
    out.feature_names = feature_names;
    out.outcome_names = outcome_names;
    out.year = year;
    const Eigen::Index k = static_cast<Eigen::Index>(rows.size());
    out.coords.resize(k, 2);
    out.features.resize(k, features.cols());
    out.outcomes.resize(k, outcomes.cols());
    out.unit_ids.reserve(rows.size());
    out.district_ids.reserve(rows.size());
    for (Eigen::Index i = 0; i < k; ++i) {
        const std::size_t r = rows[static_cast<std::size_t>(i)];
        if (r >= static_cast<std::size_t>(n_rows())) throw DataError("subset: row out of range");
        out.unit_ids.push_back(unit_ids[r]);
        out.district_ids.push_back(district_ids[r]);
        out.coords.row(i) = coords.row(static_cast<Eigen::Index>(r));
        out.features.row(i) = features.row(static_cast<Eigen::Index>(r));
        out.outcomes.row(i) = outcomes.row(static_cast<Eigen::Index>(r));
    }
    return out;
}

GeoDataset GeoDataset::select_features(const std::vector<std::string>& names) const {
    GeoDataset out;
    out.unit_ids = unit_ids;
    out.district_ids = district_ids;
    out.coords = coords;
    out.outcomes = outcomes;
    out.outcome_names = outcome_names;
    out.year = year;
    out.feature_names = names;
    out.features.resize(n_rows(), static_cast<Eigen::Index>(names.size()));
    for (std::size_t j = 0; j < names.size(); ++j) {
        const int idx = feature_index(names[j]);
        if (idx < 0) throw DataError("select_features: unknown feature " + names[j]);
        out.features.col(static_cast<Eigen::Index>(j)) = features.col(idx);
    }
    return out;
}

void GeoDataset::validate() const {
    const std::size_t n = static_cast<std::size_t>(n_rows());
    if (unit_ids.size() != n || district_ids.size() != n ||
        coords.rows() != n_rows() || outcomes.rows() != n_rows()) {
        throw DataError("GeoDataset: row counts disagree across members");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (unit_ids[i].empty()) throw DataError("GeoDataset: empty unit_id at row " + std::to_string(i));
        if (district_ids[i].empty()) throw DataError("GeoDataset: empty district_id at row " + std::to_string(i));
    }
    if (!coords.allFinite() || !features.allFinite() || !outcomes.allFinite()) {
        throw DataError("GeoDataset: non-finite values present");
    }
}

GeoDataset load_csv(const std::string& path, LoadReport* report) {
    return load_csv(path, ColumnSchema{}, report);
}

GeoDataset load_csv(const std::string& path, const ColumnSchema& schema, LoadReport* report) {
    const CsvTable table = read_csv(path);
    if (table.rows.empty()) throw DataError("CSV has a header but no data rows: " + path);

    auto require = [&](const std::string& name) {
        const int idx = table.column(name);
        if (idx < 0) throw DataError("missing mandatory column '" + name + "' in " + path);
        return idx;
    };
    const int unit_idx = require(schema.unit_col);
    const int district_idx = require(schema.district_col);
    const int x_idx = require(schema.x_col);
    const int y_idx = require(schema.y_col);
    const int year_idx = table.column(schema.year_col);

    std::vector<int> outcome_cols;
    std::vector<int> feature_cols;
    GeoDataset d;
    for (std::size_t j = 0; j < table.header.size(); ++j) {
        const int ji = static_cast<int>(j);
        if (ji == unit_idx || ji == district_idx || ji == x_idx || ji == y_idx || ji == year_idx) continue;
        const std::string& name = table.header[j];
        if (name.rfind(schema.outcome_prefix, 0) == 0) {
            outcome_cols.push_back(ji);
            d.outcome_names.push_back(name);
        } else {
            feature_cols.push_back(ji);
            d.feature_names.push_back(name);
        }
    }

    const std::size_t width = table.header.size();
    std::vector<std::size_t> kept;
    std::vector<double> xs, ys;
    std::vector<std::vector<double>> feat_rows, out_rows;
    std::size_t dropped = 0;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        if (row.size() != width) {
            ++dropped;
            continue;
        }
        bool ok = true;
        const auto px = parse_numeric(row[static_cast<std::size_t>(x_idx)]);
        const auto py = parse_numeric(row[static_cast<std::size_t>(y_idx)]);
        ok = px.has_value() && py.has_value() &&
             !row[static_cast<std::size_t>(unit_idx)].empty() &&
             !row[static_cast<std::size_t>(district_idx)].empty();
        std::vector<double> fvals(feature_cols.size());
        std::vector<double> ovals(outcome_cols.size());
        for (std::size_t j = 0; ok && j < feature_cols.size(); ++j) {
            const auto v = parse_numeric(row[static_cast<std::size_t>(feature_cols[j])]);
            if (!v) ok = false;
            else fvals[j] = *v;
        }
        for (std::size_t j = 0; ok && j < outcome_cols.size(); ++j) {
            const auto v = parse_numeric(row[static_cast<std::size_t>(outcome_cols[j])]);
            if (!v) ok = false;
            else ovals[j] = *v;
        }
        if (!ok) {
            ++dropped;
            continue;
        }
        kept.push_back(r);
        d.unit_ids.push_back(row[static_cast<std::size_t>(unit_idx)]);
        d.district_ids.push_back(row[static_cast<std::size_t>(district_idx)]);
        xs.push_back(*px);
        ys.push_back(*py);
        feat_rows.push_back(std::move(fvals));
        out_rows.push_back(std::move(ovals));
        if (year_idx >= 0 && d.year == 0) {
            if (auto y = parse_numeric(row[static_cast<std::size_t>(year_idx)])) {
                d.year = static_cast<int>(*y);
            }
        }
    }
    if (kept.empty()) throw DataError("no usable rows in " + path);

    const Eigen::Index n = static_cast<Eigen::Index>(kept.size());
    d.coords.resize(n, 2);
    d.features.resize(n, static_cast<Eigen::Index>(feature_cols.size()));
    d.outcomes.resize(n, static_cast<Eigen::Index>(outcome_cols.size()));
    for (Eigen::Index i = 0; i < n; ++i) {
        const std::size_t si = static_cast<std::size_t>(i);
        d.coords(i, 0) = xs[si];
        d.coords(i, 1) = ys[si];
        for (std::size_t j = 0; j < feat_rows[si].size(); ++j) {
            d.features(i, static_cast<Eigen::Index>(j)) = feat_rows[si][j];
        }
        for (std::size_t j = 0; j < out_rows[si].size(); ++j) {
            d.outcomes(i, static_cast<Eigen::Index>(j)) = out_rows[si][j];
        }
    }
    if (report) {
        report->rows_read = table.rows.size();
        report->rows_dropped = dropped;
    }
    d.validate();
    return d;
}

void write_csv(const std::string& path, const GeoDataset& d, const ColumnSchema& schema) {
    CsvTable table;
    table.header = {schema.unit_col, schema.district_col, schema.x_col, schema.y_col};
    const bool with_year = d.year != 0;
    if (with_year) table.header.push_back(schema.year_col);
    for (const auto& name : d.outcome_names) table.header.push_back(name);
    for (const auto& name : d.feature_names) table.header.push_back(name);
    table.rows.reserve(static_cast<std::size_t>(d.n_rows()));
    for (Eigen::Index i = 0; i < d.n_rows(); ++i) {
        std::vector<std::string> row;
        row.reserve(table.header.size());
        const std::size_t si = static_cast<std::size_t>(i);
        row.push_back(d.unit_ids[si]);
        row.push_back(d.district_ids[si]);
        row.push_back(format_double(d.coords(i, 0), 17));
        row.push_back(format_double(d.coords(i, 1), 17));
        if (with_year) row.push_back(std::to_string(d.year));
        for (Eigen::Index j = 0; j < d.n_outcomes(); ++j) row.push_back(format_double(d.outcomes(i, j), 17));
        for (Eigen::Index j = 0; j < d.n_features(); ++j) row.push_back(format_double(d.features(i, j), 17));
        table.rows.push_back(std::move(row));
    }
    write_csv(path, table);
}

std::vector<std::string> ScalingRecord::non_constant_names() const {
    std::vector<std::string> out;
    for (std::size_t j = 0; j < names.size(); ++j) {
        if (!constant[j]) out.push_back(names[j]);
    }
    return out;
}

StandardizeResult standardize(const GeoDataset& d) {
    if (d.n_rows() < 2) throw DataError("standardize: need n >= 2");
    StandardizeResult out;
    out.data = d;
    const Eigen::Index p = d.n_features();
    out.features.names = d.feature_names;
    out.features.means.resize(p);
    out.features.sds.resize(p);
    out.features.constant.assign(static_cast<std::size_t>(p), false);
    const double n = static_cast<double>(d.n_rows());
    for (Eigen::Index j = 0; j < p; ++j) {
        const double mean = d.features.col(j).mean();
        const double ss = (d.features.col(j).array() - mean).square().sum();
        const double sd = std::sqrt(ss / (n - 1.0));
        out.features.means(j) = mean;
        out.features.sds(j) = sd;
        if (sd <= 0.0) {
            out.features.constant[static_cast<std::size_t>(j)] = true;
            out.data.features.col(j).setZero();
        } else {
            out.data.features.col(j) = (d.features.col(j).array() - mean) / sd;
        }
    }
    return out;
}

std::vector<DistrictAggregate> aggregate_by_district(const GeoDataset& d) {
    std::map<std::string, std::vector<Eigen::Index>> groups;
    for (Eigen::Index i = 0; i < d.n_rows(); ++i) {
        groups[d.district_ids[static_cast<std::size_t>(i)]].push_back(i);
    }
    std::vector<DistrictAggregate> out;
    out.reserve(groups.size());
    for (const auto& [id, rows] : groups) {
        DistrictAggregate agg;
        agg.district_id = id;
        agg.row_count = rows.size();
        agg.mean_features = Vector::Zero(d.n_features());
        agg.mean_outcomes = Vector::Zero(d.n_outcomes());
        for (const Eigen::Index i : rows) {
            agg.centroid_x += d.coords(i, 0);
            agg.centroid_y += d.coords(i, 1);
            agg.mean_features += d.features.row(i).transpose();
            agg.mean_outcomes += d.outcomes.row(i).transpose();
        }
        const double cnt = static_cast<double>(rows.size());
        agg.centroid_x /= cnt;
        agg.centroid_y /= cnt;
        agg.mean_features /= cnt;
        agg.mean_outcomes /= cnt;
        out.push_back(std::move(agg));
    }
    return out;
}

Matrix aggregate_feature_matrix(const std::vector<DistrictAggregate>& aggs) {
    if (aggs.empty()) return Matrix(0, 0);
    Matrix m(static_cast<Eigen::Index>(aggs.size()), aggs[0].mean_features.size());
    for (std::size_t i = 0; i < aggs.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = aggs[i].mean_features.transpose();
    return m;
}

Matrix aggregate_outcome_matrix(const std::vector<DistrictAggregate>& aggs) {
    if (aggs.empty()) return Matrix(0, 0);
    Matrix m(static_cast<Eigen::Index>(aggs.size()), aggs[0].mean_outcomes.size());
    for (std::size_t i = 0; i < aggs.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = aggs[i].mean_outcomes.transpose();
    return m;
}

Matrix aggregate_centroids(const std::vector<DistrictAggregate>& aggs) {
    Matrix m(static_cast<Eigen::Index>(aggs.size()), 2);
    for (std::size_t i = 0; i < aggs.size(); ++i) {
        m(static_cast<Eigen::Index>(i), 0) = aggs[i].centroid_x;
        m(static_cast<Eigen::Index>(i), 1) = aggs[i].centroid_y;
    }
    return m;
}

namespace {

std::map<std::string, std::vector<std::size_t>> rows_by_district(const std::vector<std::string>& ids) {
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < ids.size(); ++i) groups[ids[i]].push_back(i);
    return groups;
}

} // namespace

SplitIndices district_proportional_holdout(const std::vector<std::string>& district_ids,
                                           double fraction, std::uint64_t seed) {
    if (fraction <= 0.0 || fraction >= 1.0) throw ConfigError("holdout fraction must be in (0,1)");
    SplitIndices split;
    const auto groups = rows_by_district(district_ids);
    for (const auto& [id, rows] : groups) {
        std::vector<std::size_t> shuffled = rows;
        Rng rng(seed, Rng::mix(0x51d7ULL, Rng::hash_string(id)));
        rng.shuffle(shuffled);
        const std::size_t k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(rows.size())));
        for (std::size_t i = 0; i < shuffled.size(); ++i) {
            (i < k ? split.holdout : split.train).push_back(shuffled[i]);
        }
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.holdout.begin(), split.holdout.end());
    if (split.train.empty() || split.holdout.empty()) {
        throw DataError("holdout split produced an empty side; dataset too small");
    }
    return split;
}

std::vector<int> stratified_fold_assignment(const std::vector<std::string>& district_ids,
                                            int n_folds, std::uint64_t seed) {
    if (n_folds < 2) throw ConfigError("need at least 2 folds");
    std::vector<int> fold(district_ids.size(), 0);
    const auto groups = rows_by_district(district_ids);
    std::size_t district_index = 0;
    for (const auto& [id, rows] : groups) {
        std::vector<std::size_t> shuffled = rows;
        Rng rng(seed, Rng::mix(district_index + 1, Rng::hash_string(id)));
        rng.shuffle(shuffled);
        // Rotate the starting fold per district so small districts do not all
        // land their first rows in fold 0.
        const int offset = static_cast<int>(district_index % static_cast<std::size_t>(n_folds));
        for (std::size_t i = 0; i < shuffled.size(); ++i) {
            fold[shuffled[i]] = static_cast<int>((i + static_cast<std::size_t>(offset)) % static_cast<std::size_t>(n_folds));
        }
        ++district_index;
    }
    return fold;
}

} // namespace sph
