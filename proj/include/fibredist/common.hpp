#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace fibredist {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IndexList = std::vector<int>;

// Machine-readable error categories; the HTTP layer maps these to status codes.
enum class ErrorCode {
    invalid_argument,
    io_error,
    missing_columns,
    unknown_polymer,
    insufficient_studies,
    degenerate_data,
    not_converged,
    missing_feature,
    not_found,
    internal
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

// splitmix64 finaliser; used to derive independent streams from one run seed.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view text) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : text) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Seed for (purpose, index) under a base seed. Every random draw in the library
// goes through this so any sub-computation can be replayed in isolation.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::string_view purpose,
                                    std::uint64_t index = 0) noexcept {
    return mix64(mix64(base ^ fnv1a(purpose)) + index);
}

using Rng = std::mt19937_64;

// Small counter-based generator for short-lived streams (one per tree node),
// where seeding a Mersenne Twister would dominate the cost.
struct SplitMix64 {
    using result_type = std::uint64_t;
    std::uint64_t state;

    explicit SplitMix64(std::uint64_t seed) : state(seed) {}
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
    result_type operator()() {
        const std::uint64_t out = mix64(state);
        state += 0x9e3779b97f4a7c15ULL;
        return out;
    }
};

// Uniform integer in [0, n) from the raw engine output; avoids the
// implementation-defined std::uniform_int_distribution.
template <typename Engine>
std::size_t uniform_index(Engine& rng, std::size_t n) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t r;
    do {
        r = rng();
    } while (r >= limit);
    return static_cast<std::size_t>(r % n);
}

inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Box-Muller; one draw per call, the sine branch is discarded.
inline double standard_normal(Rng& rng) {
    double u1 = uniform01(rng);
    while (u1 <= 0.0) u1 = uniform01(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

// Fisher-Yates with uniform_index.
template <typename Container>
void shuffle_in_place(Container& c, Rng& rng) {
    for (std::size_t i = c.size(); i > 1; --i) {
        std::swap(c[i - 1], c[uniform_index(rng, i)]);
    }
}

inline constexpr std::uint64_t kDefaultSeed = 42;

}  // namespace fibredist
