#include "synth.hpp"

#include "error.hpp"
#include "rng.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>

namespace sph {

double coefficient_at(const CoefficientSpec& c, double u, double v, double domain) {
    (void)v;
    if (c.kind == "constant") return c.value;
    if (c.kind == "linear_u") return c.value * (2.0 * u / domain - 1.0);
    if (c.kind == "step_u") return c.value * (u < 0.5 * domain ? -1.0 : 1.0);
    throw ConfigError("unknown coefficient kind: " + c.kind);
}

SynthResult synth_medsat(const SynthSpec& spec, std::uint64_t seed) {
    if (spec.n < 2) throw ConfigError("synth: n must be >= 2");
    if (spec.p < 1) throw ConfigError("synth: p must be >= 1");
    if (spec.districts < 1) throw ConfigError("synth: districts must be >= 1");
    if (spec.outcomes.empty()) throw ConfigError("synth: need at least one outcome");
    for (const auto& o : spec.outcomes) {
        for (const auto& c : o.active) {
            if (c.feature_index < 0 || c.feature_index >= spec.p) {
                throw ConfigError("synth: active feature index " + std::to_string(c.feature_index) +
                                  " out of range for p=" + std::to_string(spec.p));
            }
            coefficient_at(c, 0.0, 0.0, spec.domain); // validates kind
        }
        if (o.name.rfind("o_", 0) != 0) throw ConfigError("synth: outcome names must start with o_");
    }

    GeoDataset d;
    d.year = spec.year;
    const Eigen::Index n = static_cast<Eigen::Index>(spec.n);
    const Eigen::Index p = spec.p;
    d.features.resize(n, p);
    d.coords.resize(n, 2);
    d.outcomes.resize(n, static_cast<Eigen::Index>(spec.outcomes.size()));
    for (int j = 0; j < spec.p; ++j) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "f_%03d", j);
        d.feature_names.push_back(buf);
    }
    for (const auto& o : spec.outcomes) d.outcome_names.push_back(o.name);

    // Districts on a grid; rows scattered inside their district cell so the
    // layout is spatially coherent for MGWR / local-GAM runs.
    const int grid = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(spec.districts))));
    const double cell = spec.domain / static_cast<double>(grid);
    Rng coord_rng(seed, 101);
    for (Eigen::Index i = 0; i < n; ++i) {
        const int dist = static_cast<int>(i % spec.districts);
        const int gx = dist % grid;
        const int gy = dist / grid;
        const double cx = (gx + 0.5) * cell;
        const double cy = (gy + 0.5) * cell;
        d.coords(i, 0) = cx + (coord_rng.uniform() - 0.5) * 0.9 * cell;
        d.coords(i, 1) = cy + (coord_rng.uniform() - 0.5) * 0.9 * cell;
        char buf[32];
        std::snprintf(buf, sizeof(buf), "E%07d", static_cast<int>(i) + 1);
        d.unit_ids.push_back(buf);
        std::snprintf(buf, sizeof(buf), "D%03d", dist);
        d.district_ids.push_back(buf);
    }

    Rng x_rng(seed, 202);
    const bool ar1 = spec.correlation == "ar1";
    if (!ar1 && spec.correlation != "identity") {
        throw ConfigError("synth: correlation must be 'identity' or 'ar1'");
    }
    const double rho = ar1 ? spec.rho : 0.0;
    const double scale = std::sqrt(1.0 - rho * rho);
    for (Eigen::Index i = 0; i < n; ++i) {
        double prev = 0.0;
        for (Eigen::Index j = 0; j < p; ++j) {
            const double z = x_rng.normal();
            const double x = (j == 0) ? z : rho * prev + scale * z;
            d.features(i, j) = x;
            prev = x;
        }
    }

    for (std::size_t o = 0; o < spec.outcomes.size(); ++o) {
        const auto& os = spec.outcomes[o];
        Rng noise_rng(seed, Rng::mix(303, o + 1));
        for (Eigen::Index i = 0; i < n; ++i) {
            double y = 0.0;
            for (const auto& c : os.active) {
                const double beta = coefficient_at(c, d.coords(i, 0), d.coords(i, 1), spec.domain);
                y += beta * d.features(i, c.feature_index);
            }
            if (os.noise_sd > 0.0) y += os.noise_sd * noise_rng.normal();
            d.outcomes(i, static_cast<Eigen::Index>(o)) = y;
        }
    }

    nlohmann::json truth;
    truth["seed"] = seed;
    truth["n"] = spec.n;
    truth["p"] = spec.p;
    truth["districts"] = spec.districts;
    truth["domain"] = spec.domain;
    truth["correlation"] = spec.correlation;
    truth["rho"] = rho;
    truth["outcomes"] = nlohmann::json::array();
    for (const auto& os : spec.outcomes) {
        nlohmann::json jo;
        jo["name"] = os.name;
        jo["noise_sd"] = os.noise_sd;
        jo["active"] = nlohmann::json::array();
        for (const auto& c : os.active) {
            jo["active"].push_back({{"feature_index", c.feature_index},
                                    {"feature", d.feature_names[static_cast<std::size_t>(c.feature_index)]},
                                    {"kind", c.kind},
                                    {"value", c.value}});
        }
        truth["outcomes"].push_back(jo);
    }

    SynthResult out;
    out.data = std::move(d);
    out.ground_truth_json = truth.dump(2);
    return out;
}

SynthSpec synth_spec_from_json_text(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("synth spec JSON parse error: ") + e.what());
    }
    SynthSpec spec;
    spec.n = j.value("n", spec.n);
    spec.p = j.value("p", spec.p);
    spec.districts = j.value("districts", spec.districts);
    spec.correlation = j.value("correlation", spec.correlation);
    spec.rho = j.value("rho", spec.rho);
    spec.domain = j.value("domain", spec.domain);
    spec.year = j.value("year", spec.year);
    if (j.contains("outcomes")) {
        for (const auto& jo : j.at("outcomes")) {
            OutcomeSpec os;
            os.name = jo.value("name", os.name);
            os.noise_sd = jo.value("noise_sd", os.noise_sd);
            if (jo.contains("active")) {
                for (const auto& jc : jo.at("active")) {
                    CoefficientSpec c;
                    c.feature_index = jc.value("feature_index", 0);
                    c.kind = jc.value("kind", std::string("constant"));
                    c.value = jc.value("value", 1.0);
                    os.active.push_back(c);
                }
            }
            spec.outcomes.push_back(std::move(os));
        }
    }
    return spec;
}

} // namespace sph
