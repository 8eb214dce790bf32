#include <doctest.h>

#include "rsdiff/model.hpp"
#include "rsdiff/builtin.hpp"
#include "rsdiff/conditions.hpp"
#include "rsdiff/quadrature.hpp"
#include "test_helpers.hpp"

#include <cmath>

using namespace rsdiff;

namespace {

SwitchingModel raw_two_state(const Mat& q, bool degenerate_sigma1 = false) {
    SwitchingModel m;
    m.dim = 2;
    m.n_states = 2;
    m.sigma = [degenerate_sigma1](const Vec&, int k, Mat& s) {
        s.setIdentity();
        if (degenerate_sigma1 && k == 1) s(1, 1) = 0.0;
    };
    m.potential = [](const Vec& x) { return -std::log(2.0 * M_PI) - 0.5 * x.squaredNorm(); };
    m.grad_potential = [](const Vec& x, Vec& g) { g = -x; };
    m.z = [](const Vec&, int, Vec& z) { z.setZero(); };
    m.q_field = [q](const Vec&, Mat& out) { out = q; };
    return m;
}

std::vector<Vec> default_probes() {
    std::vector<Vec> probes;
    for (double c : {-1.0, 0.0, 2.0}) probes.push_back(Vec::Constant(2, c));
    return probes;
}

}  // namespace

TEST_CASE("validate_model passes the conservative constant-Q identity-sigma model") {
    Mat q(2, 2);
    q << -1.0, 1.0, 2.0, -2.0;
    auto report = validate_model(raw_two_state(q), default_probes());
    CHECK(report.passed);
    CHECK(report.issues.empty());
    CHECK(report.probes.size() == 3);
    CHECK(report.probes[0].min_eig_a.minCoeff() == doctest::Approx(1.0));
}

TEST_CASE("validate_model flags a non-conservative row") {
    Mat q(2, 2);
    q << -1.0, 0.5, 2.0, -2.0;  // row 1 sums to -0.5
    auto report = validate_model(raw_two_state(q), default_probes());
    CHECK_FALSE(report.passed);
    bool found = false;
    for (const auto& issue : report.issues)
        if (issue.kind == ValidationIssueKind::NonConservativeQ) found = true;
    CHECK(found);
}

TEST_CASE("validate_model flags a degenerate diffusion matrix") {
    Mat q(2, 2);
    q << -1.0, 1.0, 2.0, -2.0;
    auto report = validate_model(raw_two_state(q, /*degenerate_sigma1=*/true), default_probes());
    CHECK_FALSE(report.passed);
    bool found = false;
    for (const auto& issue : report.issues)
        if (issue.kind == ValidationIssueKind::DegenerateDiffusion) found = true;
    CHECK(found);
}

TEST_CASE("validate_model flags negative off-diagonal rates") {
    Mat q(2, 2);
    q << 1.0, -1.0, 2.0, -2.0;
    auto report = validate_model(raw_two_state(q), default_probes());
    CHECK_FALSE(report.passed);
    bool found = false;
    for (const auto& issue : report.issues)
        if (issue.kind == ValidationIssueKind::NegativeRate) found = true;
    CHECK(found);
}

TEST_CASE("validate_model is deterministic") {
    Mat q(2, 2);
    q << -1.0, 1.0, 2.0, -2.0;
    auto m = raw_two_state(q);
    auto r1 = validate_model(m, default_probes());
    auto r2 = validate_model(m, default_probes());
    REQUIRE(r1.probes.size() == r2.probes.size());
    for (std::size_t i = 0; i < r1.probes.size(); ++i) {
        CHECK(r1.probes[i].row_sum_defect == r2.probes[i].row_sum_defect);
        CHECK((r1.probes[i].min_eig_a - r2.probes[i].min_eig_a).norm() == 0.0);
    }
}

TEST_CASE("drift reproduces the benchmark state-1 OU drift") {
    // sigma = 1, V = c - x^2/2, Z_1 = 0  ->  b_1(x) = -x
    auto bm = example_model(1.0, 1.0, 0.0, 0.5);
    for (double xv : {-2.0, -0.3, 0.0, 1.7}) {
        Vec x = Vec::Constant(1, xv);
        CHECK(drift(bm.model, x, StateIndex{1})(0) == doctest::Approx(-xv).epsilon(1e-12));
    }
}

TEST_CASE("drift with Z = sqrt(2) delta x expands to -x + 2 delta x") {
    // decomposition oracle: b = a grad V + div a + sqrt(2) sigma Z with sigma = 1
    const double delta = 0.5;
    json cfg = example_config(1.0, 1.0, 0.0, 0.0);
    cfg["z"][1] = {{"family", "affine"},
                   {"params", {{"slope", std::sqrt(2.0) * delta}, {"offset", 0.0}}}};
    auto bm = model_from_json(cfg);
    Vec x = Vec::Constant(1, 1.0);
    // -1 + 2*0.5*1 = 0
    CHECK(drift(bm.model, x, StateIndex{2})(0) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("drift equals grad V for Z = 0 and sigma = I") {
    auto bm = testing::ou_model();
    Vec x = Vec::Constant(1, 0.7);
    Vec g(1);
    bm.model.grad_potential(x, g);
    CHECK(drift(bm.model, x, StateIndex{1})(0) == doctest::Approx(g(0)));
}

TEST_CASE("finite-difference div(a) matches the analytic derivative") {
    // sigma(x) = 1 + 0.1 sin x  ->  a = sigma^2, div a = 2 sigma sigma' = 0.2 sigma cos x
    SwitchingModel m;
    m.dim = 1;
    m.n_states = 1;
    m.sigma = [](const Vec& x, int, Mat& s) { s(0, 0) = 1.0 + 0.1 * std::sin(x(0)); };
    m.potential = [](const Vec& x) { return -0.5 * std::log(2.0 * M_PI) - 0.5 * x.squaredNorm(); };
    m.grad_potential = [](const Vec& x, Vec& g) { g = -x; };
    m.z = [](const Vec&, int, Vec& z) { z.setZero(); };
    m.q_field = [](const Vec&, Mat& q) { q(0, 0) = 0.0; };

    for (double xv : {-1.3, 0.2, 2.5}) {
        Vec x = Vec::Constant(1, xv);
        const double sig = 1.0 + 0.1 * std::sin(xv);
        const double expected = sig * sig * (-xv) + 0.2 * sig * std::cos(xv);
        CHECK(drift(m, x, StateIndex{1})(0) == doctest::Approx(expected).epsilon(1e-8));
    }
}

TEST_CASE("drift minus singular part matches the FD divergence-form operator on coordinates") {
    // Z0_k = e^{-V} div(e^V a_k grad .) applied to x, evaluated independently
    SwitchingModel m;
    m.dim = 1;
    m.n_states = 1;
    m.sigma = [](const Vec& x, int, Mat& s) { s(0, 0) = 1.0 + 0.2 * std::cos(x(0)); };
    m.potential = [](const Vec& x) { return -0.5 * std::log(2.0 * M_PI) - 0.5 * x.squaredNorm(); };
    m.grad_potential = [](const Vec& x, Vec& g) { g = -x; };
    m.z = [](const Vec& x, int, Vec& z) { z(0) = 0.3 * std::tanh(x(0)); };
    m.q_field = [](const Vec&, Mat& q) { q(0, 0) = 0.0; };

    auto flux = [&](double y) {
        Vec p = Vec::Constant(1, y);
        Mat s(1, 1);
        m.sigma(p, 1, s);
        return std::exp(m.potential(p)) * s(0, 0) * s(0, 0);
    };
    const double h = 1e-5;
    for (double xv : {-0.8, 0.1, 1.9}) {
        Vec x = Vec::Constant(1, xv);
        const double z0_fd = std::exp(-m.potential(x)) * (flux(xv + h) - flux(xv - h)) / (2.0 * h);
        Vec zv(1);
        m.z(x, 1, zv);
        Mat s(1, 1);
        m.sigma(x, 1, s);
        const double z0_drift = drift(m, x, StateIndex{1})(0) - std::sqrt(2.0) * s(0, 0) * zv(0);
        CHECK(z0_drift == doctest::Approx(z0_fd).epsilon(1e-6));
    }
}

TEST_CASE("drift rejects non-finite input") {
    auto bm = testing::ou_model();
    Vec x = Vec::Constant(1, std::numeric_limits<double>::infinity());
    CHECK_THROWS_AS(drift(bm.model, x, StateIndex{1}), NonFiniteCoefficient);
}

TEST_CASE("reference_density frozen values") {
    // pi = (1/2,1/2), standard Gaussian V, x = 0, k = 1 -> 0.5 / sqrt(2 pi)
    auto bm = testing::two_state_const_q(1.0, 1.0);
    ReferenceMeasure ref{Vec::Constant(2, 0.5), bm.model.potential};
    Vec x0 = Vec::Zero(1);
    CHECK(reference_density(ref, x0, StateIndex{1}) ==
          doctest::Approx(0.19947114020071634).epsilon(1e-12));

    // N = 1, V(x) = 0 at x -> 1
    ReferenceMeasure flat{Vec::Ones(1), [](const Vec&) { return 0.0; }};
    CHECK(reference_density(flat, x0, StateIndex{1}) == doctest::Approx(1.0));

    // pi = (2/3,1/3), k = 2, V = log g  ->  (1/3) g(x)
    const double gx = 0.25;
    ReferenceMeasure lg{Vec(2), [gx](const Vec&) { return std::log(gx); }};
    lg.pi << 2.0 / 3.0, 1.0 / 3.0;
    CHECK(reference_density(lg, x0, StateIndex{2}) == doctest::Approx(gx / 3.0).epsilon(1e-12));
}

TEST_CASE("reference densities integrate to one over states and space") {
    auto bm = testing::two_state_const_q();
    QuadRule rule = gauss_legendre(200, -10.0, 10.0);
    double total = 0.0;
    Vec x(1);
    for (int k = 1; k <= 2; ++k)
        for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
            x(0) = rule.nodes[i];
            total += rule.weights[i] * reference_density(bm.ref, x, StateIndex{k});
        }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("exp(V) normalization check via tensor quadrature") {
    auto bm = testing::ou_model();
    CHECK(integrate_exp_v(bm.model, -10.0, 10.0, 200) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("invariant_pi solves pi Q = 0") {
    Mat q(2, 2);
    q << -1.0, 1.0, 2.0, -2.0;
    Vec pi = invariant_pi(q);
    CHECK(pi(0) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(pi(1) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("builtin Q bounds for the trig-perturbed family are the closed-form envelopes") {
    auto bm = example_model(1.0, 2.0, 0.1, 0.0);
    CHECK(bm.bounds.exact);
    CHECK(bm.bounds.q_bar(0, 1) == doctest::Approx(1.1));
    CHECK(bm.bounds.q_bar(0, 0) == doctest::Approx(-0.9));
    CHECK(bm.bounds.q_bar(1, 0) == doctest::Approx(2.2));
    CHECK(bm.bounds.q_bar(1, 1) == doctest::Approx(-1.8));
    CHECK(bm.bounds.q_hat(0, 1) == doctest::Approx(0.9));
    CHECK(bm.bounds.c_q == doctest::Approx(2.2));
}

TEST_CASE("sampled Q bounds bracket the builtin envelopes") {
    auto bm = example_model(1.0, 2.0, 0.3, 0.0);
    auto sampled = sample_q_bounds(bm.model, -10.0, 10.0, 2001, 500, 9);
    CHECK_FALSE(sampled.exact);
    // sampled sup <= true sup, sampled inf >= true inf, and close on a dense grid
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            CHECK(sampled.q_bar(i, j) <= bm.bounds.q_bar(i, j) + 1e-12);
            CHECK(sampled.q_hat(i, j) >= bm.bounds.q_hat(i, j) - 1e-12);
            CHECK(sampled.q_bar(i, j) == doctest::Approx(bm.bounds.q_bar(i, j)).epsilon(1e-3));
        }
    CHECK(sampled.c_q <= bm.bounds.c_q + 1e-12);
}

TEST_CASE("config errors are reported") {
    json cfg = example_config(1.0, 1.0, 0.0, 0.5);
    cfg["q"]["base"] = {{-1.0, 1.0}};
    CHECK_THROWS_AS(model_from_json(cfg), ConfigError);

    json cfg2 = example_config(1.0, 1.0, 0.0, 0.5);
    cfg2["v"]["family"] = "unknown_potential";
    CHECK_THROWS_AS(model_from_json(cfg2), ConfigError);

    json cfg3 = example_config(1.0, 1.0, 0.0, 0.5);
    cfg3["pi"] = {0.5, 0.7};
    CHECK_THROWS_AS(model_from_json(cfg3), ConfigError);
}

TEST_CASE("model_hash is stable and sensitive") {
    json a = example_config(1.0, 1.0, 0.1, 0.5);
    json b = example_config(1.0, 1.0, 0.1, 0.5);
    json c = example_config(1.0, 1.0, 0.1, 0.6);
    CHECK(model_hash(a) == model_hash(b));
    CHECK(model_hash(a) != model_hash(c));
    CHECK(model_hash(a).size() == 16);
}

TEST_CASE("benchmark model reference pi is the base-Q invariant distribution") {
    auto bm = example_model(1.0, 2.0, 0.1, 0.5);
    CHECK(bm.ref.pi(0) == doctest::Approx(2.0 / 3.0));
    CHECK(bm.ref.pi(1) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("compiled plug-in families extend the config schema") {
    register_z_family("cubic_test", [](const json& p, int) {
        const double c = p.value("coeff", 1.0);
        return [c](const Vec& x, Vec& v) { v = c * x.array().pow(3); };
    });
    register_q_perturbation_family("rates_test", [](const json& p, int n) {
        const double amp = p.value("amp", 0.1);
        return [amp, n](const Vec& x, Mat& q) {
            q.setZero();
            const double bump = amp * std::sin(x(0)) * std::sin(x(0));
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) q(i, j) = (i == j) ? -(n - 1) * bump : bump;
        };
    });

    json cfg = testing::two_state_const_q().config;
    cfg["z"][1] = {{"family", "cubic_test"}, {"params", {{"coeff", 0.5}}}};
    cfg["q"]["perturbation"] = {{"family", "rates_test"}, {"params", {{"amp", 0.2}}}};
    auto bm = model_from_json(cfg);

    Vec x = Vec::Constant(1, 2.0);
    // b_2 = -x + sqrt(2) * 0.5 x^3 at x = 2
    CHECK(drift(bm.model, x, StateIndex{2})(0) ==
          doctest::Approx(-2.0 + std::sqrt(2.0) * 0.5 * 8.0).epsilon(1e-12));

    // black-box rates: sampled envelope, labeled uncertified in the report
    CHECK_FALSE(bm.bounds.exact);
    CHECK(bm.bounds.q_bar(0, 1) == doctest::Approx(1.2).epsilon(1e-3));
    auto rep = condition_report(bm);
    CHECK_FALSE(rep["h2"]["bounds_certified"].get<bool>());
    CHECK(rep["h2"]["bounds_note"].get<std::string>() == "sampled, not certified");
}
