#pragma once

#include <cstdint>
#include <string>
#include <cstddef>
#include <vector>

namespace sph {

// xoshiro256++ with splitmix64 seeding. Deterministic across platforms and
// standard libraries, unlike std::normal_distribution, so pipeline outputs
// are bit-reproducible.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

    std::uint64_t next_u64();

    // Uniform on [0, 1) with 53 bits of precision.
    double uniform();

    // Uniform on {0, 1, ..., n-1}; n must be > 0.
    std::uint64_t uniform_int(std::uint64_t n);

    // Standard normal via Box-Muller (spare value cached).
    double normal();

    // Fisher-Yates in-place shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_int(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // First k indices of a shuffled [0, n) range (sample without replacement).
    std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k);

    // Stable 64-bit mix for deriving per-item substream seeds.
    static std::uint64_t mix(std::uint64_t a, std::uint64_t b);

    // FNV-1a over bytes; platform-independent (std::hash is not pinned).
    static std::uint64_t hash_bytes(const void* data, std::size_t len);
    static std::uint64_t hash_string(const std::string& s);

private:
    std::uint64_t state_[4];
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace sph
