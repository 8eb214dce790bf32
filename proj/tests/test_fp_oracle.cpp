#include <doctest.h>

#include "rsdiff/fp_oracle.hpp"
#include "test_helpers.hpp"

#include <cmath>

using namespace rsdiff;

namespace {

Vec sampled_normal(const Grid1D& g) {
    Vec phi(g.n);
    for (int i = 0; i < g.n; ++i)
        phi(i) = std::exp(-0.5 * g.node(i) * g.node(i)) / std::sqrt(2.0 * M_PI);
    return phi;
}

/// Max |h_hat - ref| / max ref with ref normalized like the solver output.
double peak_relative_error(const StationarySolution& sol, int state, const Vec& ref_density) {
    const Grid1D& g = sol.grid;
    double ref_mass = 0.0;
    for (int i = 0; i < g.n; ++i) ref_mass += g.h() * ref_density(i);
    double err = 0.0, peak = 0.0;
    for (int i = 0; i < g.n; ++i) {
        const double ex = ref_density(i) / ref_mass;
        err = std::max(err, std::abs(sol.h_hat[state](i) - ex));
        peak = std::max(peak, ex);
    }
    return err / peak;
}

}  // namespace

TEST_CASE("discrete operator annihilates the sampled OU density to O(h^2)") {
    auto bm = testing::ou_model();
    Grid1D g{-8.0, 8.0, 401};
    SpMat a = assemble_adjoint(bm.model, g);
    const Vec r = a * sampled_normal(g);
    CHECK(r.cwiseAbs().maxCoeff() < 1e-3);

    // truncation error scales like h^2
    Grid1D g2{-8.0, 8.0, 201};
    SpMat a2 = assemble_adjoint(bm.model, g2);
    const Vec r2 = a2 * sampled_normal(g2);
    CHECK(r2.cwiseAbs().maxCoeff() / r.cwiseAbs().maxCoeff() == doctest::Approx(4.0).epsilon(0.3));
}

TEST_CASE("uncoupled states assemble block-diagonally") {
    json cfg = testing::two_state_const_q().config;
    cfg["q"]["base"] = {{0.0, 0.0}, {0.0, 0.0}};
    cfg["pi"] = {0.5, 0.5};
    auto bm = model_from_json(cfg);
    Grid1D g{-6.0, 6.0, 33};
    SpMat a = assemble_adjoint(bm.model, g);
    for (int col = 0; col < a.outerSize(); ++col)
        for (SpMat::InnerIterator it(a, col); it; ++it) {
            const int row_state = static_cast<int>(it.row()) % 2;
            const int col_state = static_cast<int>(it.col()) % 2;
            if (row_state != col_state) CHECK(it.value() == 0.0);
        }
}

TEST_CASE("coupling blocks have vanishing column sums (conservativity)") {
    auto bm = example_model(1.0, 2.0, 0.2, 0.5);
    Grid1D g{-6.0, 6.0, 65};
    SpMat coupled = assemble_adjoint(bm.model, g);
    json cfg0 = bm.config;
    cfg0["q"]["base"] = {{0.0, 0.0}, {0.0, 0.0}};
    cfg0["q"]["perturbation"] = {{"family", "none"}};
    cfg0["pi"] = {0.5, 0.5};
    auto uncoupled = model_from_json(cfg0);
    SpMat diff = coupled - assemble_adjoint(uncoupled.model, g);
    const Vec colsum = Eigen::RowVectorXd::Ones(diff.rows()) * diff;
    CHECK(colsum.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("flux-form rows conserve discrete mass for any vector") {
    auto bm = example_model(1.0, 1.0, 0.1, 0.5);
    Grid1D g{-6.0, 6.0, 101};
    SpMat a = assemble_adjoint(bm.model, g);
    Philox rng(71, 0, RngStream::Aux);
    for (int rep = 0; rep < 5; ++rep) {
        Vec v(a.cols());
        for (int i = 0; i < v.size(); ++i) v(i) = rng.gaussian();
        const Vec av = a * v;
        CHECK(std::abs(g.h() * av.sum()) < 1e-8 * v.norm());
    }
}

TEST_CASE("OU stationary solve reproduces the standard normal") {
    auto bm = testing::ou_model();
    Grid1D g{-8.0, 8.0, 401};
    auto sol = solve_stationary(bm.model, g);
    CHECK(sol.residual_norm < 1e-9);
    CHECK(peak_relative_error(sol, 0, sampled_normal(g)) < 1e-3);

    // normalization convention: h * sum of node values = 1
    CHECK(g.h() * sol.h_hat[0].sum() == doctest::Approx(1.0).epsilon(1e-9));
    // nonnegativity up to discretization noise
    CHECK(sol.h_hat[0].minCoeff() > -1e-8 * sol.h_hat[0].maxCoeff());
}

TEST_CASE("grid refinement converges at order two") {
    auto bm = testing::ou_model();
    double errs[3];
    int idx = 0;
    for (int n : {101, 201, 401}) {
        Grid1D g{-8.0, 8.0, n};
        auto sol = solve_stationary(bm.model, g);
        errs[idx++] = peak_relative_error(sol, 0, sampled_normal(g));
    }
    const double slope = std::log(errs[0] / errs[2]) / std::log(4.0);
    CHECK(slope == doctest::Approx(2.0).epsilon(0.15));
}

TEST_CASE("constant-Q zero-Z system recovers pi_k e^V") {
    auto bm = testing::two_state_const_q(1.0, 2.0);
    Grid1D g{-8.0, 8.0, 401};
    auto sol = solve_stationary(bm.model, g);
    const Vec phi = sampled_normal(g);
    for (int k = 0; k < 2; ++k) {
        const Vec ref = bm.ref.pi(k) * phi;
        double ref_mass = 0.0;
        for (int i = 0; i < g.n; ++i) ref_mass += g.h() * phi(i);
        double err = 0.0, peak = 0.0;
        for (int i = 0; i < g.n; ++i) {
            const double ex = bm.ref.pi(k) * phi(i) / ref_mass;
            err = std::max(err, std::abs(sol.h_hat[k](i) - ex));
            peak = std::max(peak, ex);
        }
        CHECK(err / peak < 1e-3);
    }
}

TEST_CASE("reducible switching is reported as an ambiguous null space") {
    json cfg = testing::two_state_const_q().config;
    cfg["q"]["base"] = {{0.0, 0.0}, {0.0, 0.0}};
    cfg["pi"] = {0.5, 0.5};
    auto bm = model_from_json(cfg);
    Grid1D g{-6.0, 6.0, 65};
    CHECK_THROWS_AS(solve_stationary(bm.model, g), NullSpaceDimensionAmbiguous);
}

TEST_CASE("fully coupled solutions are strictly positive inside") {
    auto bm = example_model(1.0, 1.0, 0.1, 0.5);
    Grid1D g{-6.0, 6.0, 301};
    auto sol = solve_stationary(bm.model, g);
    for (int k = 0; k < 2; ++k)
        for (int i = 1; i + 1 < g.n; ++i) CHECK(sol.h_hat[k](i) > 0.0);
}

TEST_CASE("comparison of the oracle against itself is zero") {
    auto bm = testing::two_state_const_q(1.0, 2.0);
    Grid1D g{-6.0, 6.0, 201};
    auto sol = solve_stationary(bm.model, g);

    const int bins = 50;  // 200 intervals, 4 per bin
    auto grid = HistogramGrid::uniform_1d(-6.0, 6.0, bins);
    EmpiricalMeasure em = EmpiricalMeasure::zero(grid, 2);
    em.total_time = 1.0;
    const int r = (g.n - 1) / bins;
    for (int k = 0; k < 2; ++k)
        for (int b = 0; b < bins; ++b) {
            double mass = 0.0;
            for (int j = 0; j < r; ++j) {
                const int i = b * r + j;
                mass += 0.5 * g.h() * (sol.h_hat[k](i) + sol.h_hat[k](i + 1));
            }
            em.counts[k * bins + b] = mass;
        }
    auto res = compare_mc_vs_oracle(em, sol);
    CHECK(res.l1_total < 1e-12);
}

TEST_CASE("oracle self-distance across refinements shrinks at order two") {
    auto bm = example_model(1.0, 1.0, 0.1, 0.5);
    const int bins = 50;
    auto grid = HistogramGrid::uniform_1d(-6.0, 6.0, bins);

    auto binned = [&](const StationarySolution& sol) {
        EmpiricalMeasure em = EmpiricalMeasure::zero(grid, 2);
        em.total_time = 1.0;
        const int r = (sol.grid.n - 1) / bins;
        for (int k = 0; k < 2; ++k)
            for (int b = 0; b < bins; ++b) {
                double mass = 0.0;
                for (int j = 0; j < r; ++j) {
                    const int i = b * r + j;
                    mass += 0.5 * sol.grid.h() * (sol.h_hat[k](i) + sol.h_hat[k](i + 1));
                }
                em.counts[k * bins + b] = mass;
            }
        return em;
    };

    Grid1D fine{-6.0, 6.0, 1601};
    auto ref = solve_stationary(bm.model, fine);
    double dist[2];
    int idx = 0;
    for (int n : {101, 201}) {
        Grid1D g{-6.0, 6.0, n};
        auto sol = solve_stationary(bm.model, g);
        dist[idx++] = compare_mc_vs_oracle(binned(sol), ref).l1_total;
    }
    CHECK(dist[0] / dist[1] == doctest::Approx(4.0).epsilon(0.35));
}

TEST_CASE("state relabeling permutes the solution") {
    auto bm = example_model(1.0, 2.0, 0.0, 0.0);
    // swap the two states: base Q rows/cols and the z list
    json swapped = bm.config;
    swapped["q"]["base"] = {{-2.0, 2.0}, {1.0, -1.0}};
    auto bm2 = model_from_json(swapped);

    Grid1D g{-7.0, 7.0, 201};
    auto s1 = solve_stationary(bm.model, g);
    auto s2 = solve_stationary(bm2.model, g);
    CHECK((s1.h_hat[0] - s2.h_hat[1]).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((s1.h_hat[1] - s2.h_hat[0]).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("grid mismatches are rejected") {
    auto bm = testing::two_state_const_q();
    Grid1D g{-6.0, 6.0, 201};
    auto sol = solve_stationary(bm.model, g);
    EmpiricalMeasure em = EmpiricalMeasure::zero(HistogramGrid::uniform_1d(-6.0, 6.0, 37), 2);
    em.total_time = 1.0;
    em.counts[0] = 1.0;
    CHECK_THROWS_AS(compare_mc_vs_oracle(em, sol), GridMismatch);  // 200 % 37 != 0
    EmpiricalMeasure em2 = EmpiricalMeasure::zero(HistogramGrid::uniform_1d(-5.0, 6.0, 50), 2);
    em2.total_time = 1.0;
    em2.counts[0] = 1.0;
    CHECK_THROWS_AS(compare_mc_vs_oracle(em2, sol), GridMismatch);  // box mismatch
}
