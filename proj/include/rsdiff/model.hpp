#pragma once

// Problem objects for regime-switching diffusions
//   dX_t = b_k(X_t) dt + sqrt(2) sigma_k(X_t) dW_t,   k = current regime,
// with the drift stored in decomposed form
//   b_k = a_k grad(V) + div(a_k) + sqrt(2) sigma_k Z_k,   a_k = sigma_k sigma_k^T,
// a conservative rate matrix field Q(x), and the reference measure
// mu_{pi,V}(f) = sum_k int f_k(x) pi_k e^{V(x)} dx.

#include <Eigen/Dense>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace rsdiff {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using CVecRef = const Eigen::Ref<const Vec>&;  // binds VectorXd and Map alike

struct ModelError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NonFiniteCoefficient : ModelError {
    using ModelError::ModelError;
};
struct DimensionMismatch : ModelError {
    using ModelError::ModelError;
};

/// Regime label, 1-based: k in {1,...,N}.
struct StateIndex {
    int k = 1;
};

/// Pointwise rate matrix Q(x).
struct QMatrixSample {
    Mat entries;  // N x N
    Vec point;

    double max_abs_entry() const { return entries.cwiseAbs().maxCoeff(); }
    /// Largest |row sum| (conservative Q-matrices have zero row sums).
    double row_sum_defect() const { return entries.rowwise().sum().cwiseAbs().maxCoeff(); }
    /// Most negative off-diagonal entry (0 if none).
    double min_off_diagonal() const;
    /// q_i(x) = sum_{j != i} q_ij(x).
    Vec exit_rates() const;
};

/// Envelope of the rate field: entrywise sup/inf over x and C_Q = sup_x,k q_k(x).
struct QMatrixBounds {
    Mat q_bar;
    Mat q_hat;
    double c_q = 0.0;
    bool exact = false;  // closed form vs sampled estimate
};

struct SwitchingModel {
    int dim = 1;
    int n_states = 1;

    std::function<void(const Vec&, int, Mat&)> sigma;        // sigma_k(x), d x d
    std::function<double(const Vec&)> potential;             // V(x)
    std::function<void(const Vec&, Vec&)> grad_potential;    // grad V(x)
    std::function<void(const Vec&, int, Vec&)> z;            // Z_k(x)
    std::function<void(const Vec&, Mat&)> q_field;           // Q(x), N x N
    std::function<void(const Vec&, int, Vec&)> div_a;        // exact div(a_k); empty -> FD

    double fd_step_scale = 1e-5;  // h_fd = scale * max(1,|x|)
};

struct ReferenceMeasure {
    Vec pi;
    std::function<double(const Vec&)> potential;
};

/// Scratch buffers so the per-step drift evaluation allocates nothing.
struct ModelWorkspace {
    Mat sigma_m, a_m, a_plus, a_minus;
    Vec grad, z_v, diva, x_shift;

    void resize(int d) {
        sigma_m.resize(d, d);
        a_m.resize(d, d);
        a_plus.resize(d, d);
        a_minus.resize(d, d);
        grad.resize(d);
        z_v.resize(d);
        diva.resize(d);
        x_shift.resize(d);
    }
};

enum class ValidationIssueKind { NonConservativeQ, DegenerateDiffusion, NegativeRate };

struct ValidationIssue {
    ValidationIssueKind kind;
    int probe = -1;
    int state = 0;  // 0 when not state-specific
    double value = 0.0;
    std::string detail;
};

struct ProbeReport {
    Vec point;
    Vec min_eig_a;          // per state
    double row_sum_defect;  // of Q(point)
    double min_off_diag;
};

struct ValidationReport {
    bool passed = true;
    std::vector<ProbeReport> probes;
    std::vector<ValidationIssue> issues;
};

/// Checks (H1)-style ellipticity and conservativity of Q at each probe point.
ValidationReport validate_model(const SwitchingModel& model, const std::vector<Vec>& probes);

/// Full drift b_k(x); div(a_k) from the exact callback or central differences.
Vec drift(const SwitchingModel& model, const Vec& x, StateIndex k);

/// Allocation-free drift used by the simulator hot loop.
void drift_into(const SwitchingModel& model, ModelWorkspace& ws, const Vec& x, int k, Vec& out);

/// pi_k e^{V(x)}.
double reference_density(const ReferenceMeasure& ref, const Vec& x, StateIndex k);

/// Tensor-grid quadrature of e^V over [lo,hi]^d (d <= 2); used to verify normalization.
double integrate_exp_v(const SwitchingModel& model, double lo, double hi, int nodes_per_axis);

/// Samples q_field at grid + random probes to estimate QMatrixBounds (exact=false).
QMatrixBounds sample_q_bounds(const SwitchingModel& model, double lo, double hi, int grid_points,
                              int random_probes, std::uint64_t seed);

void check_state(const SwitchingModel& model, StateIndex k);

}  // namespace rsdiff
