#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hcpo {

// Counter-based generator built on splitmix64. Every consumer derives its own
// stream from (seed, labels...) so there is no global rng state anywhere.
class Rng {
public:
    explicit Rng(uint64_t state) : state_(state) {}

    uint64_t next_u64();

    // uniform in [0, 1)
    double uniform();

    // uniform integer in [0, n)
    uint64_t uniform_int(uint64_t n);

    double normal();  // standard normal via Box-Muller

    // inverse-CDF draw from a pmf; entries must sum to 1 within 1e-9
    int categorical(std::span<const double> pmf);

private:
    uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

struct RngLabel {
    uint64_t value;
    RngLabel(uint64_t v) : value(v) {}
    RngLabel(int v) : value(static_cast<uint64_t>(v)) {}
    RngLabel(std::string_view s);
    RngLabel(const char* s) : RngLabel(std::string_view(s)) {}
};

// Mixes the seed with each label through splitmix64 rounds. Identical labels
// give identical streams; any differing label decorrelates the stream.
Rng derive_rng(uint64_t seed, std::initializer_list<RngLabel> labels);

}  // namespace hcpo
