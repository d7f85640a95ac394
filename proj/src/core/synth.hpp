#pragma once

#include "dataset.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace sph {

// Coefficient attached to one active feature. Spatially varying kinds are
// functions of the row coordinate (u = x, v = y), scaled by `value`:
//   constant   beta(u,v) = value
//   linear_u   beta(u,v) = value * (2u/u_max - 1)
//   step_u     beta(u,v) = value * sign(u - u_max/2)
struct CoefficientSpec {
    int feature_index = 0;
    std::string kind = "constant";
    double value = 1.0;
};

struct OutcomeSpec {
    std::string name = "o_y";
    std::vector<CoefficientSpec> active;
    double noise_sd = 1.0;
};

struct SynthSpec {
    std::size_t n = 500;
    int p = 20;
    int districts = 10;
    std::string correlation = "identity"; // or "ar1"
    double rho = 0.0;
    double domain = 10000.0; // square side length in meters
    int year = 2019;
    std::vector<OutcomeSpec> outcomes;
};

struct SynthResult {
    GeoDataset data;
    std::string ground_truth_json; // active sets, coefficient surfaces, noise sd, seed
};

SynthResult synth_medsat(const SynthSpec& spec, std::uint64_t seed);

// True coefficient surface value for a coefficient spec at a coordinate.
double coefficient_at(const CoefficientSpec& c, double u, double v, double domain);

SynthSpec synth_spec_from_json_text(const std::string& json_text);

} // namespace sph
