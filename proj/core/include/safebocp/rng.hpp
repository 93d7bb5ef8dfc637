#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace safebocp {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Deterministic stream: a given seed yields the same draws in every build of
// this library, independent of the standard library's distribution internals.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() { return splitmix64(state_); }

    // uniform on (0,1), never exactly 0 or 1
    double uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
    }

    // standard normal via Box-Muller
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double r = std::sqrt(-2.0 * std::log(uniform()));
        double a = 6.283185307179586 * uniform();
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// Trial seed = hash(base seed, canonical sweep-point string, replication index).
// Counter-based, so parallel and serial execution see identical streams and
// adding sweep points never perturbs existing ones.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view sweep_point,
                                 std::uint64_t replication) {
    std::uint64_t s = base;
    std::uint64_t h = splitmix64(s) ^ fnv1a64(sweep_point);
    std::uint64_t mixed = splitmix64(h) ^ (0x9e3779b97f4a7c15ULL * (replication + 1));
    return splitmix64(mixed);
}

}  // namespace safebocp
