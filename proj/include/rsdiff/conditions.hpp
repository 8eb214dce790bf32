#pragma once

// Sufficient-condition checks for existence/uniqueness of the invariant
// probability measure: the exponential integrability of the singular drift
// parts, mu_V(e^{w_k |Z_k|^2}) < oo, and the M-matrix inequality
// -(K + Qbar) v >= 1 with K = Diag(1/(2 w_k) - 2/gamma_k), plus the a priori
// relative-entropy bound built from the same ingredients.

#include "rsdiff/builtin.hpp"
#include "rsdiff/model.hpp"

#include <json.hpp>

#include <optional>
#include <vector>

namespace rsdiff {

struct ConditionsError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NotZMatrix : ConditionsError {
    using ConditionsError::ConditionsError;
};
struct NonFiniteBound : ConditionsError {
    using ConditionsError::ConditionsError;
};
struct DegenerateWeights : ConditionsError {
    using ConditionsError::ConditionsError;
};

struct LogSobolevParams {
    Vec gamma;  // gamma_k > 0
    Vec beta;   // beta_k >= 0
};

struct IntegrabilityWeights {
    Vec w;        // w_k > 0
    Vec moments;  // mu_V(e^{w_k |Z_k|^2}); +inf marks divergence
};

struct MMatrixCertificate {
    Mat K;  // diagonal
    Mat A;  // -(K + Qbar)
    std::optional<Vec> v;
    std::vector<double> minors;
    bool verdict = false;
};

/// K = Diag(1/(2 w_k) - 2/gamma_k).
Mat build_K(const IntegrabilityWeights& weights, const LogSobolevParams& ls);

struct MinorTest {
    bool nonsingular_m_matrix = false;
    std::vector<double> minors;
};

/// Leading-principal-minor test; requires a Z-matrix (nonpositive off-diagonal).
MinorTest is_nonsingular_m_matrix(const Mat& a);

enum class ConditionSolveStatus { Feasible, Infeasible, Singular };

struct ConditionVector {
    ConditionSolveStatus status = ConditionSolveStatus::Singular;
    Vec v;  // valid iff Feasible
};

/// Solves -(K + Qbar) v = 1; Feasible iff the system is nonsingular and v > 0.
ConditionVector solve_condition_vector(const Mat& k_diag, const Mat& q_bar);

enum class MomentMethod { Quadrature, MonteCarlo };

struct MomentEstimate {
    double value = 1.0;
    double std_error = 0.0;  // MonteCarlo only
    bool divergent = false;
};

struct MomentOptions {
    MomentMethod method = MomentMethod::Quadrature;
    int quad_nodes = 200;
    long mc_samples = 100000;
    std::uint64_t seed = 1;
    bool sigma_inverse = false;  // integrate e^{w |sigma^{-1} Z|^2} instead
};

/// Per-state estimates of mu_V(e^{w_k |Z_k|^2}); affine Z under Gaussian V
/// uses the closed form (and detects divergence analytically).
std::vector<MomentEstimate> check_exp_moments(const BuiltinModel& bm, const Vec& w, const MomentOptions& opts = {});

/// Closed-form feasibility region of the two-state benchmark:
/// delta^2 < (1 + (1-theta)(a+b) - 4 theta a b) / (1 + (1-theta) a).
bool example_feasible(double a, double b, double theta, double delta);
double example_threshold(double a, double b, double theta);

struct EntropyBoundOptions {
    bool log_moment = true;     // M_k = log mu_V(e^{w|Z|^2}) (default) vs the raw moment
    bool sigma_inverse = false; // recorded only; moments are computed upstream
};

/// max_k[(v_k/w_k) M_k] - log pi_min + Ctilde_Q sum_k v_k + 2 max_k(v_k beta_k / gamma_k),
/// Ctilde_Q = C_Q log+ C_Q + 2 (C_Q + 1)/e - 2 C_Q log pi_min.
double entropy_bound(const ReferenceMeasure& ref, const QMatrixBounds& bounds,
                     const IntegrabilityWeights& weights, const LogSobolevParams& ls, const Vec& v,
                     const EntropyBoundOptions& opts = {});

struct WeightSearchOptions {
    int grid_min_exp = -10;
    int grid_max_exp = 10;
    int probe_max_exp = 16;  // "infinite w" probe when Z_k has no moment constraint
    bool minimize_bound = true;
    MomentOptions moments;
};

struct WeightSearchResult {
    bool feasible = false;
    Vec w;
    Vec moments;
    Mat K;
    Mat A;
    Vec v;  // empty when infeasible
    std::vector<double> minors;
    double bound = std::numeric_limits<double>::quiet_NaN();
};

/// Searches positive weights (w_1..w_N) subject to finite moments such that
/// -(K + Qbar) is a nonsingular M-matrix with -(K+Qbar)v = 1, v > 0.
/// Feasibility is monotone in each w_k, so the moment-boundary point decides;
/// the log grid is scanned to pick the weight vector minimizing the entropy bound.
WeightSearchResult search_condition_weights(const BuiltinModel& bm, const LogSobolevParams& ls,
                                            const QMatrixBounds& bounds,
                                            const WeightSearchOptions& opts = {});

struct ConditionReportOptions {
    LogSobolevParams ls;  // empty vectors -> model preset
    WeightSearchOptions search;
    EntropyBoundOptions bound;
    std::vector<double> probe_coords = {-4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0};
};

/// Structured verdicts - ellipticity, rate-field hypotheses, exponential
/// integrability, M-matrix certificate, entropy bound - plus the closed-form
/// feasibility region when the model is the two-state benchmark family.
json condition_report(const BuiltinModel& bm, const ConditionReportOptions& opts = {});

/// True iff the directed graph of positive off-diagonal entries is strongly connected.
bool irreducible(const Mat& q);

}  // namespace rsdiff
