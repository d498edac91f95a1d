#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace annolens {

// Thrown for invalid input data or arguments (CLI exit code 1).
// Environment and protocol failures use plain std::runtime_error (exit code 2).
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// FNV-1a, 64 bit. Fixed feature-hashing function: offset basis
// 14695981039346656037, prime 1099511628211, byte order = string order.
inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char delim);

// Lowercased word tokens: maximal runs of alphanumeric (or non-ASCII) bytes.
std::vector<std::string> tokenize_words(const std::string& text);

// Joins items as English prose: "a", "a and b", "a, b, and c".
std::string oxford_join(const std::vector<std::string>& items);

// Compensated (Kahan) accumulator for order-stable reductions.
class KahanSum {
public:
    void add(double x) {
        double y = x - comp_;
        double t = sum_ + y;
        comp_ = (t - sum_) - y;
        sum_ = t;
    }
    double value() const { return sum_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

// Deterministic random helpers. The standard distributions are
// implementation-defined, so everything below is spelled out by hand and
// produces the same stream on every platform for a given mt19937_64 state.
inline std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n) {
    return rng() % n;
}

inline double uniform_real(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;  // [0, 1)
}

double gaussian(std::mt19937_64& rng);  // Box-Muller, mean 0, sd 1

template <typename T>
void deterministic_shuffle(std::vector<T>& v, std::mt19937_64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(uniform_index(rng, i));
        std::swap(v[i - 1], v[j]);
    }
}

// Stream seed derivation so independent phases draw from independent states.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream) {
    std::uint64_t h = fnv1a64(stream);
    h ^= seed + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return h;
}

}  // namespace annolens
