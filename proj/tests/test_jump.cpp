#include <doctest.h>

#include "rsdiff/jump.hpp"
#include "rsdiff/rng.hpp"

#include <cmath>

using namespace rsdiff;

namespace {

QMatrixSample conservative_sample(const Mat& off_diag_rates) {
    const int n = static_cast<int>(off_diag_rates.rows());
    Mat q = off_diag_rates;
    for (int i = 0; i < n; ++i) {
        q(i, i) = 0.0;
        double s = 0.0;
        for (int j = 0; j < n; ++j)
            if (j != i) s += q(i, j);
        q(i, i) = -s;
    }
    return {q, Vec::Zero(1)};
}

}  // namespace

TEST_CASE("gamma partition reproduces the stacked-interval layout") {
    Mat rates = Mat::Zero(2, 2);
    rates(0, 1) = 2.0;
    rates(1, 0) = 3.0;
    auto p = build_gamma(conservative_sample(rates));
    CHECK(p.lo(0, 1) == 0.0);
    CHECK(p.hi(0, 1) == 2.0);
    CHECK(p.lo(1, 0) == 2.0);  // row 2 starts at q_1 = 2
    CHECK(p.hi(1, 0) == 5.0);
    CHECK(p.row_offset(1) == 2.0);
    CHECK(p.exit_rate(0) == 2.0);
    CHECK(p.exit_rate(1) == 3.0);
}

TEST_CASE("zero rate gives an empty interval") {
    Mat rates = Mat::Zero(2, 2);
    rates(1, 0) = 3.0;
    auto p = build_gamma(conservative_sample(rates));
    CHECK(p.lo(0, 1) == p.hi(0, 1));  // Gamma_12 = empty
    CHECK(h_eval(p, StateIndex{1}, 0.0) == 0);
}

TEST_CASE("three-state cumulative offsets") {
    // q_12=1, q_13=2; q_21=3, q_23=4:
    // Gamma_12=[0,1), Gamma_13=[1,3), Gamma_21=[3,6), Gamma_23=[6,10)
    Mat rates = Mat::Zero(3, 3);
    rates(0, 1) = 1.0;
    rates(0, 2) = 2.0;
    rates(1, 0) = 3.0;
    rates(1, 2) = 4.0;
    auto p = build_gamma(conservative_sample(rates));
    CHECK(p.lo(0, 1) == 0.0);
    CHECK(p.hi(0, 1) == 1.0);
    CHECK(p.lo(0, 2) == 1.0);
    CHECK(p.hi(0, 2) == 3.0);
    CHECK(p.lo(1, 0) == 3.0);
    CHECK(p.hi(1, 0) == 6.0);
    CHECK(p.lo(1, 2) == 6.0);
    CHECK(p.hi(1, 2) == 10.0);
    CHECK(p.row_offset(2) == 10.0);
}

TEST_CASE("h_eval frozen cases") {
    Mat rates = Mat::Zero(2, 2);
    rates(0, 1) = 2.0;
    rates(1, 0) = 3.0;
    auto p = build_gamma(conservative_sample(rates));
    CHECK(h_eval(p, StateIndex{1}, 1.5) == 1);   // z in Gamma_12
    CHECK(h_eval(p, StateIndex{2}, 3.0) == -1);  // z in Gamma_21
    CHECK(h_eval(p, StateIndex{1}, 2.5) == 0);   // row-2 interval, irrelevant for state 1
    // half-open boundaries: upper endpoint excluded, lower included
    CHECK(h_eval(p, StateIndex{1}, 0.0) == 1);
    CHECK(h_eval(p, StateIndex{1}, 2.0) == 0);
    CHECK(h_eval(p, StateIndex{2}, 2.0) == -1);
}

TEST_CASE("partition disjointness and row coverage over random conservative samples") {
    Philox rng(31, 0, RngStream::Aux);
    for (int rep = 0; rep < 1000; ++rep) {
        const int n = 2 + static_cast<int>(rng.uniform() * 5);
        Mat rates = Mat::Zero(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (i != j && rng.uniform() < 0.8) rates(i, j) = 5.0 * rng.uniform();
        auto qs = conservative_sample(rates);
        auto p = build_gamma(qs);

        double cursor = 0.0;
        for (int i = 0; i < n; ++i) {
            CHECK(p.row_offset(i) == doctest::Approx(cursor).epsilon(1e-15));
            double row_len = 0.0;
            double expect_lo = p.row_offset(i);
            for (int j = 0; j < n; ++j) {
                if (j == i) continue;
                // contiguity doubles as pairwise disjointness within the row
                CHECK(p.lo(i, j) == doctest::Approx(expect_lo).epsilon(1e-15));
                expect_lo = p.hi(i, j);
                row_len += p.hi(i, j) - p.lo(i, j);
            }
            const double qi = qs.exit_rates()(i);
            // summation-order difference only: a few ulp of accumulation
            CHECK(row_len == doctest::Approx(qi).epsilon(1e-14));
            cursor += qi;
        }

        // round trip: a nonzero jump size lands in the advertised interval
        for (int probe = 0; probe < 20; ++probe) {
            const double z = cursor * rng.uniform();
            for (int i = 1; i <= n; ++i) {
                const int jump = h_eval(p, StateIndex{i}, z);
                if (jump != 0) {
                    const int j = i - 1 + jump;
                    CHECK(z >= p.lo(i - 1, j));
                    CHECK(z < p.hi(i - 1, j));
                }
            }
        }
    }
}

TEST_CASE("thinning never accepts when all rates vanish") {
    Mat q = Mat::Zero(2, 2);
    Philox rng(5, 0, RngStream::Jumps);
    int accepted = 0;
    for (int i = 0; i < 20000; ++i) {
        auto ev = sample_switch_thinning(q, 1, 3.0, 0.01, rng);
        if (ev && ev->accepted) ++accepted;
    }
    CHECK(accepted == 0);
}

TEST_CASE("thinning acceptance fraction matches q_i / c_q") {
    Mat rates = Mat::Zero(2, 2);
    rates(0, 1) = 1.0;
    rates(1, 0) = 2.0;
    Mat q = conservative_sample(rates).entries;
    const double c_q = 3.0;
    Philox rng(17, 0, RngStream::Jumps);
    long proposals = 0, accepts = 0;
    for (int i = 0; i < 400000; ++i) {
        auto ev = sample_switch_thinning(q, 2, c_q, 0.05, rng);
        if (ev) {
            ++proposals;
            if (ev->accepted) ++accepts;
        }
    }
    const double p = 2.0 / c_q;
    const double se = std::sqrt(p * (1.0 - p) / proposals);
    CHECK(std::abs(static_cast<double>(accepts) / proposals - p) < 3.0 * se);
}

TEST_CASE("accepted-jump probability over a step recovers the rate as dt -> 0") {
    Mat rates = Mat::Zero(2, 2);
    rates(0, 1) = 1.0;
    rates(1, 0) = 2.0;
    Mat q = conservative_sample(rates).entries;
    const double c_q = 3.0;
    const double q2 = 2.0;

    const double dts[] = {1e-2, 1e-3, 1e-4};
    double rate_hat[3], rate_se[3];
    Philox rng(29, 0, RngStream::Jumps);
    for (int d = 0; d < 3; ++d) {
        const long n = 2000000;
        long acc = 0;
        for (long i = 0; i < n; ++i) {
            auto ev = sample_switch_thinning(q, 2, c_q, dts[d], rng);
            if (ev && ev->accepted) ++acc;
        }
        const double p = static_cast<double>(acc) / n;
        rate_hat[d] = p / dts[d];
        rate_se[d] = std::sqrt(p * (1.0 - p) / n) / dts[d];
        // exact thinning law at finite dt: (1 - e^{-c_q dt}) q_i / (c_q dt)
        const double expect = (1.0 - std::exp(-c_q * dts[d])) * q2 / (c_q * dts[d]);
        CHECK(std::abs(rate_hat[d] - expect) < 3.0 * rate_se[d]);
    }

    // least-squares intercept of rate(dt) at dt = 0 recovers q_i
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int d = 0; d < 3; ++d) {
        sx += dts[d];
        sy += rate_hat[d];
        sxx += dts[d] * dts[d];
        sxy += dts[d] * rate_hat[d];
    }
    const double slope = (3.0 * sxy - sx * sy) / (3.0 * sxx - sx * sx);
    const double intercept = (sy - slope * sx) / 3.0;
    const double xbar = sx / 3.0;
    const double sxx_c = sxx - 3.0 * xbar * xbar;
    double var_icept = 0.0;
    for (int d = 0; d < 3; ++d) {
        const double c = 1.0 / 3.0 - xbar * (dts[d] - xbar) / sxx_c;
        var_icept += c * c * rate_se[d] * rate_se[d];
    }
    CHECK(std::abs(intercept - q2) < 3.0 * std::sqrt(var_icept));
    CHECK(slope < 0.0);  // first-order thinning deficit
}

TEST_CASE("thinning raises BoundViolated when c_q is too small") {
    Mat rates = Mat::Zero(2, 2);
    rates(0, 1) = 5.0;
    Mat q = conservative_sample(rates).entries;
    Philox rng(3, 0, RngStream::Jumps);
    CHECK_THROWS_AS(
        [&] {
            for (int i = 0; i < 100; ++i) sample_switch_thinning(q, 1, 2.0, 0.01, rng);
        }(),
        BoundViolated);
}

TEST_CASE("embedded transition frequencies pass a chi-squared test at 0.01") {
    // constant 3-state Q; target law given a jump from i is q_ij / q_i
    Mat rates = Mat::Zero(3, 3);
    rates(0, 1) = 1.0;
    rates(0, 2) = 0.5;
    rates(1, 0) = 2.0;
    rates(1, 2) = 1.0;
    rates(2, 0) = 0.7;
    rates(2, 1) = 1.3;
    auto qs = conservative_sample(rates);
    const double c_q = qs.exit_rates().maxCoeff();

    Philox rng(101, 0, RngStream::Jumps);
    int state = 1;
    long jumps = 0;
    Mat counts = Mat::Zero(3, 3);
    const double dt = 0.02;
    while (jumps < 100000) {
        auto ev = sample_switch_thinning(qs.entries, state, c_q, dt, rng);
        if (ev && ev->accepted) {
            counts(ev->from_state - 1, ev->to_state - 1) += 1.0;
            state = ev->to_state;
            ++jumps;
        }
    }

    double chi2 = 0.0;
    int dof = 0;
    for (int i = 0; i < 3; ++i) {
        const double row_total = counts.row(i).sum();
        const double qi = qs.exit_rates()(i);
        int targets = 0;
        for (int j = 0; j < 3; ++j) {
            if (j == i || rates(i, j) == 0.0) continue;
            const double expect = row_total * rates(i, j) / qi;
            chi2 += (counts(i, j) - expect) * (counts(i, j) - expect) / expect;
            ++targets;
        }
        dof += targets - 1;
    }
    // chi2 critical values at alpha = 0.01 for dof 1..6
    const double crit[] = {6.6349, 9.2103, 11.3449, 13.2767, 15.0863, 16.8119};
    REQUIRE(dof >= 1);
    REQUIRE(dof <= 6);
    CHECK(chi2 < crit[dof - 1]);
}
