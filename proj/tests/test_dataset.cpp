#include <doctest.h>

#include "core/dataset.hpp"
#include "core/error.hpp"
#include "core/synth.hpp"
#include "core/stats.hpp"
#include "core/rng.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

using namespace sph;

namespace {

std::string temp_path(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "sph_test_dataset";
    std::filesystem::create_directories(dir);
    return (dir / name).string();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

} // namespace

TEST_CASE("load_csv parses a small file") {
    const auto path = temp_path("small.csv");
    write_file(path,
               "unit_id,district_id,x,y,o_rx,f_a,f_b\n"
               "u1,d1,0,0,1.5,2,3\n"
               "u2,d1,1,0,2.5,4,5\n"
               "u3,d2,0,1,3.5,6,7\n");
    LoadReport report;
    const auto d = load_csv(path, &report);
    CHECK(d.n_rows() == 3);
    CHECK(d.n_features() == 2);
    CHECK(d.n_outcomes() == 1);
    CHECK(report.rows_dropped == 0);
    CHECK(d.feature_names == std::vector<std::string>{"f_a", "f_b"});
    CHECK(d.outcomes(2, 0) == doctest::Approx(3.5));
}

TEST_CASE("load_csv drops rows with unparseable numerics and counts them") {
    const auto path = temp_path("na.csv");
    write_file(path,
               "unit_id,district_id,x,y,o_rx,f_a\n"
               "u1,d1,0,0,1.0,2\n"
               "u2,d1,1,0,2.0,NA\n"
               "u3,d2,0,1,3.0,6\n");
    LoadReport report;
    const auto d = load_csv(path, &report);
    CHECK(d.n_rows() == 2);
    CHECK(report.rows_dropped == 1);
}

TEST_CASE("load_csv error paths") {
    const auto missing = temp_path("missing_col.csv");
    write_file(missing, "unit_id,district_id,x,o_rx,f_a\nu1,d1,0,1,2\n");
    CHECK_THROWS_WITH_AS(load_csv(missing), doctest::Contains("'y'"), DataError);

    const auto empty = temp_path("empty.csv");
    write_file(empty, "");
    CHECK_THROWS_AS(load_csv(empty), DataError);
}

TEST_CASE("csv round trip preserves values") {
    SynthSpec spec;
    spec.n = 57;
    spec.p = 4;
    spec.districts = 3;
    spec.outcomes.push_back({"o_y", {{0, "constant", 2.0}}, 0.5});
    const auto synth = synth_medsat(spec, 42);
    const auto path = temp_path("roundtrip.csv");
    write_csv(path, synth.data);
    const auto back = load_csv(path);
    CHECK(back.n_rows() == synth.data.n_rows());
    CHECK((back.features - synth.data.features).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
    CHECK((back.coords - synth.data.coords).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
    CHECK((back.outcomes - synth.data.outcomes).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
    CHECK(back.unit_ids == synth.data.unit_ids);
    CHECK(back.year == synth.data.year);
}

TEST_CASE("standardize: symmetric three point column") {
    GeoDataset d;
    d.unit_ids = {"a", "b", "c"};
    d.district_ids = {"d", "d", "d"};
    d.coords = Matrix::Zero(3, 2);
    d.features.resize(3, 2);
    d.features.col(0) << 1, 2, 3;
    d.features.col(1) << 5, 5, 5; // constant
    d.feature_names = {"v", "c"};
    d.outcomes.resize(3, 0);

    const auto res = standardize(d);
    CHECK(res.data.features(0, 0) == doctest::Approx(-1.0));
    CHECK(res.data.features(1, 0) == doctest::Approx(0.0));
    CHECK(res.data.features(2, 0) == doctest::Approx(1.0));
    CHECK(res.features.constant[1]);
    CHECK(res.data.features.col(1).cwiseAbs().maxCoeff() == 0.0);
    CHECK_FALSE(res.features.constant[0]);

    // Idempotence on non-constant columns.
    const auto twice = standardize(res.data);
    CHECK((twice.data.features.col(0) - res.data.features.col(0)).cwiseAbs().maxCoeff() < 1e-12);

    // Standardized view has mean 0, variance 1 within 1e-9.
    const double mean = res.data.features.col(0).mean();
    const double var = (res.data.features.col(0).array() - mean).square().sum() / 2.0;
    CHECK(std::abs(mean) < 1e-9);
    CHECK(std::abs(var - 1.0) < 1e-9);
}

TEST_CASE("aggregate_by_district: hand-computed centroids") {
    GeoDataset d;
    d.unit_ids = {"1", "2", "3", "4"};
    d.district_ids = {"A", "A", "B", "B"};
    d.coords.resize(4, 2);
    d.coords << 0, 0, 2, 0, 1, 1, 3, 3;
    d.features.resize(4, 1);
    d.features << 1, 3, 5, 7;
    d.feature_names = {"f"};
    d.outcomes.resize(4, 0);

    const auto aggs = aggregate_by_district(d);
    REQUIRE(aggs.size() == 2);
    CHECK(aggs[0].district_id == "A");
    CHECK(aggs[0].centroid_x == doctest::Approx(1.0));
    CHECK(aggs[0].centroid_y == doctest::Approx(0.0));
    CHECK(aggs[1].centroid_x == doctest::Approx(2.0));
    CHECK(aggs[1].centroid_y == doctest::Approx(2.0));
    CHECK(aggs[0].mean_features(0) == doctest::Approx(2.0));
    CHECK(aggs[1].row_count == 2);
}

TEST_CASE("aggregate_by_district: single-row district equals the row") {
    GeoDataset d;
    d.unit_ids = {"1"};
    d.district_ids = {"solo"};
    d.coords.resize(1, 2);
    d.coords << 7, 9;
    d.features.resize(1, 2);
    d.features << 1.5, -2.5;
    d.feature_names = {"a", "b"};
    d.outcomes.resize(1, 1);
    d.outcomes << 4.25;
    d.outcome_names = {"o_y"};

    const auto aggs = aggregate_by_district(d);
    REQUIRE(aggs.size() == 1);
    CHECK(aggs[0].centroid_x == 7);
    CHECK(aggs[0].centroid_y == 9);
    CHECK(aggs[0].mean_features(0) == 1.5);
    CHECK(aggs[0].mean_outcomes(0) == 4.25);
    CHECK(aggs[0].row_count == 1);
}

TEST_CASE("aggregate_by_district on synthetic data matches direct recomputation") {
    SynthSpec spec;
    spec.n = 2000;
    spec.p = 20;
    spec.districts = 20;
    spec.outcomes.push_back({"o_y", {{1, "constant", 3.0}, {2, "constant", 2.0}}, 1.0});
    const auto synth = synth_medsat(spec, 7);
    const auto& d = synth.data;
    const auto aggs = aggregate_by_district(d);
    CHECK(aggs.size() == 20);

    for (const auto& agg : aggs) {
        Vector mean_f = Vector::Zero(d.n_features());
        Vector mean_o = Vector::Zero(d.n_outcomes());
        double cx = 0, cy = 0;
        std::size_t count = 0;
        for (Eigen::Index i = 0; i < d.n_rows(); ++i) {
            if (d.district_ids[static_cast<std::size_t>(i)] != agg.district_id) continue;
            mean_f += d.features.row(i).transpose();
            mean_o += d.outcomes.row(i).transpose();
            cx += d.coords(i, 0);
            cy += d.coords(i, 1);
            ++count;
        }
        REQUIRE(count == agg.row_count);
        mean_f /= static_cast<double>(count);
        mean_o /= static_cast<double>(count);
        CHECK((mean_f - agg.mean_features).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((mean_o - agg.mean_outcomes).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(std::abs(cx / static_cast<double>(count) - agg.centroid_x) < 1e-9);
        CHECK(std::abs(cy / static_cast<double>(count) - agg.centroid_y) < 1e-9);
    }
}

TEST_CASE("aggregate_by_district is invariant to row permutation") {
    SynthSpec spec;
    spec.n = 200;
    spec.p = 3;
    spec.districts = 7;
    spec.outcomes.push_back({"o_y", {{0, "constant", 1.0}}, 1.0});
    const auto d = synth_medsat(spec, 3).data;
    std::vector<std::size_t> perm(static_cast<std::size_t>(d.n_rows()));
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    Rng rng(99);
    rng.shuffle(perm);
    const auto shuffled = d.subset(perm);

    const auto a = aggregate_by_district(d);
    const auto b = aggregate_by_district(shuffled);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].district_id == b[i].district_id);
        CHECK(std::abs(a[i].centroid_x - b[i].centroid_x) < 1e-9);
        CHECK((a[i].mean_features - b[i].mean_features).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("synth: OLS recovers planted constant coefficients") {
    SynthSpec spec;
    spec.n = 500;
    spec.p = 20;
    spec.districts = 10;
    spec.outcomes.push_back({"o_y", {{1, "constant", 3.0}, {2, "constant", 2.0}}, 1.0});
    const auto synth = synth_medsat(spec, 7);
    const auto& d = synth.data;
    const Vector beta = ols_fit(d.features, d.outcomes.col(0));
    // Standard error of an OLS coefficient with unit-variance X and sigma=1
    // is roughly 1/sqrt(n).
    const double se = 1.0 / std::sqrt(static_cast<double>(spec.n));
    CHECK(std::abs(beta(2) - 3.0) < 3.0 * se * 1.5);
    CHECK(std::abs(beta(3) - 2.0) < 3.0 * se * 1.5);
}

TEST_CASE("synth: noiseless single active feature gives exact fit") {
    SynthSpec spec;
    spec.n = 100;
    spec.p = 5;
    spec.districts = 4;
    spec.outcomes.push_back({"o_y", {{0, "constant", 2.5}}, 0.0});
    const auto d = synth_medsat(spec, 11).data;
    const Vector beta = ols_fit(d.features, d.outcomes.col(0));
    Matrix design(d.n_rows(), d.n_features() + 1);
    design.col(0).setOnes();
    design.rightCols(d.n_features()) = d.features;
    const Vector resid = d.outcomes.col(0) - design * beta;
    CHECK(resid.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("synth: spatially varying beta yields monotone per-district slopes") {
    SynthSpec spec;
    spec.n = 4000;
    spec.p = 2;
    spec.districts = 9;
    spec.outcomes.push_back({"o_y", {{0, "linear_u", 1.0}}, 0.05});
    const auto d = synth_medsat(spec, 5).data;
    const auto aggs = aggregate_by_district(d);

    // Per-district OLS slope of y on x0 should increase with centroid u.
    std::vector<std::pair<double, double>> slope_by_u;
    for (const auto& agg : aggs) {
        std::vector<std::size_t> rows;
        for (Eigen::Index i = 0; i < d.n_rows(); ++i) {
            if (d.district_ids[static_cast<std::size_t>(i)] == agg.district_id) {
                rows.push_back(static_cast<std::size_t>(i));
            }
        }
        const auto sub = d.subset(rows);
        const Vector beta = ols_fit(sub.features, sub.outcomes.col(0));
        slope_by_u.push_back({agg.centroid_x, beta(1)});
    }
    std::sort(slope_by_u.begin(), slope_by_u.end());
    // Group districts into grid columns (3x3 grid): slopes must increase
    // between the left, middle, and right columns.
    const double s_left = (slope_by_u[0].second + slope_by_u[1].second + slope_by_u[2].second) / 3;
    const double s_mid = (slope_by_u[3].second + slope_by_u[4].second + slope_by_u[5].second) / 3;
    const double s_right = (slope_by_u[6].second + slope_by_u[7].second + slope_by_u[8].second) / 3;
    CHECK(s_left < s_mid);
    CHECK(s_mid < s_right);
}

TEST_CASE("synth: inconsistent active index is a config error") {
    SynthSpec spec;
    spec.p = 5;
    spec.outcomes.push_back({"o_y", {{5, "constant", 1.0}}, 1.0});
    CHECK_THROWS_AS(synth_medsat(spec, 1), ConfigError);
}

TEST_CASE("district-proportional holdout") {
    std::vector<std::string> ids;
    for (int i = 0; i < 100; ++i) ids.push_back("A");
    for (int i = 0; i < 50; ++i) ids.push_back("B");
    const auto split = district_proportional_holdout(ids, 0.1, 9);
    CHECK(split.train.size() + split.holdout.size() == ids.size());
    std::size_t hold_a = 0, hold_b = 0;
    for (auto i : split.holdout) (ids[i] == "A" ? hold_a : hold_b)++;
    CHECK(hold_a == 10);
    CHECK(hold_b == 5);

    // Deterministic given seed.
    const auto again = district_proportional_holdout(ids, 0.1, 9);
    CHECK(again.holdout == split.holdout);
}

TEST_CASE("stratified folds mirror district composition") {
    std::vector<std::string> ids;
    for (int i = 0; i < 100; ++i) ids.push_back("A");
    for (int i = 0; i < 55; ++i) ids.push_back("B");
    const auto fold = stratified_fold_assignment(ids, 5, 4);
    std::vector<int> count_a(5, 0), count_b(5, 0);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        (ids[i] == "A" ? count_a : count_b)[static_cast<std::size_t>(fold[i])]++;
    }
    for (int f = 0; f < 5; ++f) {
        CHECK(count_a[static_cast<std::size_t>(f)] == 20);
        CHECK(count_b[static_cast<std::size_t>(f)] >= 10);
        CHECK(count_b[static_cast<std::size_t>(f)] <= 12);
    }
}
