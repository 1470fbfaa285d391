#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <vector>

#include "hcpo/rng.hpp"

using namespace hcpo;

TEST_SUITE("rng") {

TEST_CASE("identical labels give identical streams") {
    Rng a = derive_rng(42, {"train", 3, "member"});
    Rng b = derive_rng(42, {"train", 3, "member"});
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("any differing label decorrelates the stream") {
    Rng a = derive_rng(42, {"rollout", 7, 0});
    Rng b = derive_rng(42, {"rollout", 7, 1});
    Rng c = derive_rng(43, {"rollout", 7, 0});
    Rng d = derive_rng(42, {"warmup", 7, 0});
    uint64_t va = a.next_u64();
    CHECK(va != b.next_u64());
    CHECK(va != c.next_u64());
    CHECK(va != d.next_u64());
}

TEST_CASE("uniform stays in [0,1) and looks flat") {
    Rng r = derive_rng(1, {"u"});
    double sum = 0.0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        double x = r.uniform();
        CHECK(x >= 0.0);
        CHECK(x < 1.0);
        sum += x;
    }
    // mean of n uniforms: sd = 1/sqrt(12n)
    CHECK(std::abs(sum / n - 0.5) < 3.0 / std::sqrt(12.0 * n));
}

TEST_CASE("uniform_int bounds and coverage") {
    Rng r = derive_rng(2, {"ui"});
    std::vector<int> counts(7, 0);
    for (int i = 0; i < 7000; ++i) {
        uint64_t v = r.uniform_int(7);
        REQUIRE(v < 7);
        counts[v]++;
    }
    for (int c : counts) CHECK(c > 700);  // ~1000 expected, sd ~ 29
}

TEST_CASE("normal moments") {
    Rng r = derive_rng(3, {"n"});
    const int n = 20000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        double x = r.normal();
        s += x;
        s2 += x * x;
    }
    CHECK(std::abs(s / n) < 3.0 / std::sqrt(static_cast<double>(n)));
    CHECK(std::abs(s2 / n - 1.0) < 3.0 * std::sqrt(2.0 / n));
}

TEST_CASE("categorical follows the pmf and rejects bad input") {
    std::vector<double> point = {1.0, 0.0, 0.0};
    Rng r = derive_rng(4, {"cat"});
    for (int i = 0; i < 50; ++i) CHECK(r.categorical(point) == 0);

    std::vector<double> pmf = {0.2, 0.5, 0.3};
    std::vector<int> counts(3, 0);
    const int n = 10000;
    for (int i = 0; i < n; ++i) counts[r.categorical(pmf)]++;
    for (int k = 0; k < 3; ++k) {
        double sd = std::sqrt(n * pmf[k] * (1 - pmf[k]));
        CHECK(std::abs(counts[k] - n * pmf[k]) < 3.0 * sd);
    }

    std::vector<double> bad = {0.2, 0.2};
    CHECK_THROWS_AS((void)r.categorical(bad), std::invalid_argument);
}

TEST_CASE("cross-correlation of two streams is noise-level") {
    Rng a = derive_rng(5, {"s", 0});
    Rng b = derive_rng(5, {"s", 1});
    const int n = 10000;
    double sa = 0, sb = 0, sab = 0, saa = 0, sbb = 0;
    for (int i = 0; i < n; ++i) {
        double x = a.uniform(), y = b.uniform();
        sa += x; sb += y; sab += x * y; saa += x * x; sbb += y * y;
    }
    double cov = sab / n - (sa / n) * (sb / n);
    double corr = cov / std::sqrt((saa / n - (sa / n) * (sa / n)) *
                                  (sbb / n - (sb / n) * (sb / n)));
    CHECK(std::abs(corr) < 3.0 / std::sqrt(static_cast<double>(n)));
}

}  // TEST_SUITE
