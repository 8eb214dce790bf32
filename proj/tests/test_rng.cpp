#include <doctest.h>

#include "rsdiff/rng.hpp"

#include <cmath>

using namespace rsdiff;

TEST_CASE("philox streams are deterministic and distinct") {
    Philox a(42, 0, RngStream::Diffusion);
    Philox b(42, 0, RngStream::Diffusion);
    Philox c(42, 0, RngStream::Jumps);
    Philox d(42, 1, RngStream::Diffusion);

    bool same_ab = true, same_ac = true, same_ad = true;
    for (int i = 0; i < 64; ++i) {
        const auto va = a.next_u64();
        same_ab &= (va == b.next_u64());
        same_ac &= (va == c.next_u64());
        same_ad &= (va == d.next_u64());
    }
    CHECK(same_ab);
    CHECK_FALSE(same_ac);
    CHECK_FALSE(same_ad);
}

TEST_CASE("uniform stays in [0,1) and uniform_pos in (0,1]") {
    Philox rng(7, 3, RngStream::Aux);
    bool ok = true;
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.uniform();
        ok &= (u >= 0.0 && u < 1.0);
        const double v = rng.uniform_pos();
        ok &= (v > 0.0 && v <= 1.0);
    }
    CHECK(ok);
}

TEST_CASE("gaussian moments match a standard normal") {
    Philox rng(123, 0, RngStream::Diffusion);
    const int n = 200000;
    double sum = 0.0, sumsq = 0.0, sum4 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double g = rng.gaussian();
        sum += g;
        sumsq += g * g;
        sum4 += g * g * g * g;
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    const double kurt = sum4 / n;
    // 3-sigma bands: sd(mean)=1/sqrt(n), sd(var)~sqrt(2/n), sd(m4)~sqrt(96/n)
    CHECK(std::abs(mean) < 3.0 / std::sqrt(static_cast<double>(n)));
    CHECK(std::abs(var - 1.0) < 3.0 * std::sqrt(2.0 / n));
    CHECK(std::abs(kurt - 3.0) < 3.0 * std::sqrt(96.0 / n));
}
