#include "hcpo/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace hcpo {

namespace {

uint64_t splitmix64(uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

uint64_t fnv1a(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

RngLabel::RngLabel(std::string_view s) : value(fnv1a(s)) {}

Rng derive_rng(uint64_t seed, std::initializer_list<RngLabel> labels) {
    uint64_t state = seed;
    (void)splitmix64(state);
    for (const RngLabel& l : labels) {
        state ^= l.value;
        (void)splitmix64(state);
    }
    return Rng(state);
}

uint64_t Rng::next_u64() { return splitmix64(state_); }

double Rng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

uint64_t Rng::uniform_int(uint64_t n) {
    // rejection sampling to avoid modulo bias
    uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t v;
    do {
        v = next_u64();
    } while (v >= limit);
    return v % n;
}

double Rng::normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    double u1, u2;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
}

int Rng::categorical(std::span<const double> pmf) {
    double total = 0.0;
    for (double p : pmf) total += p;
    if (std::abs(total - 1.0) > 1e-9)
        throw std::invalid_argument("categorical: pmf does not sum to 1");
    double u = uniform();
    double acc = 0.0;
    for (size_t i = 0; i < pmf.size(); ++i) {
        acc += pmf[i];
        if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(pmf.size()) - 1;
}

}  // namespace hcpo
