#pragma once
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace paresis {

// Seeded random source with fixed value mappings so that identical seeds
// reproduce identical streams across platforms and standard libraries.
class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    uint64_t next_u64() { return eng_(); }

    // [0, 1)
    double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Box-Muller; u1 in (0, 1] so the log is finite
    double gaussian() {
        double u1 = static_cast<double>((eng_() >> 11) + 1) * 0x1.0p-53;
        double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    // [0, n); modulo draw, bias immaterial for n far below 2^64
    uint64_t below(uint64_t n) { return eng_() % n; }

    int uniform_int(int lo, int hi) { // inclusive bounds
        return lo + static_cast<int>(below(static_cast<uint64_t>(hi - lo + 1)));
    }

    template <class T>
    void shuffle(std::vector<T>& v) { // Fisher-Yates
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 eng_;
};

// splitmix64 finalizer, used to derive independent sub-seeds
inline uint64_t mix_seed(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline uint64_t mix_seed(uint64_t base, uint64_t a) { return mix_seed(base ^ mix_seed(a)); }
inline uint64_t mix_seed(uint64_t base, uint64_t a, uint64_t b) {
    return mix_seed(mix_seed(base, a), b);
}

} // namespace paresis
