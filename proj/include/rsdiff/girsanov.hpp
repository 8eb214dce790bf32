#pragma once

// Change-of-measure weights R_t = exp{ int <Z,dW> - 1/2 int |Z|^2 ds } along
// reference paths (Z = 0 dynamics, generator L^Q), realizing the drift
// perturbation +sqrt(2) sigma Z by importance sampling instead of
// re-simulation; plus the Feynman-Kac functional estimator
// (P_t^F f)(x,i) = E[f(X_t,Lambda_t) exp(int_0^t F(X_s,Lambda_s) ds)].

#include "rsdiff/conditions.hpp"
#include "rsdiff/simulate.hpp"

namespace rsdiff {

struct WeightAccumulator {
    double stoch_int_term = 0.0;  // running int <Z, dW>
    double quad_var_term = 0.0;   // running 1/2 int |Z|^2 ds
    double log_weight() const { return stoch_int_term - quad_var_term; }
};

/// One left-endpoint step: dW must be the same Gaussian increment the
/// simulator used (sqrt(dt) xi).
void accumulate_weight(WeightAccumulator& acc, const Vec& z_value, const Vec& dw, double dt);

/// Model with the singular drift part removed (reference dynamics L^Q).
SwitchingModel make_reference(const SwitchingModel& model);

using Observable = std::function<double(CVecRef x, int k)>;

struct WeightedEstimate {
    double estimate = 0.0;
    double std_error = 0.0;
    double ess = 0.0;          // (sum w)^2 / sum w^2
    double mean_weight = 0.0;  // unnormalized, martingale check target 1
    long n_paths = 0;
};

/// Self-normalized importance-sampling estimate of E f(X_T, Lambda_T) under
/// the Z-perturbed law, from reference paths carrying girsanov weights.
/// Throws DegenerateWeights when ESS < 10. Exploded paths are excluded.
WeightedEstimate weighted_expectation(const Observable& f, const std::vector<HybridPath>& ensemble,
                                      bool self_normalized = true);

struct FeynmanKacEstimate {
    double estimate = 0.0;
    double std_error = 0.0;
    double sup_f_abs = 0.0;  // sup |F| observed along the ensemble
};

/// Monte Carlo P_t^F f with the time integral accumulated by left-endpoint
/// quadrature; requires paths recorded at stride 1 up to time t.
FeynmanKacEstimate feynman_kac_estimate(const Observable& big_f, const Observable& f, double t,
                                        const std::vector<HybridPath>& ensemble);

}  // namespace rsdiff
