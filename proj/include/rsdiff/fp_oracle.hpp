#pragma once

// Independent 1D finite-difference solver for the stationary weakly coupled
// system: per state k, in flux (conservative) form,
//   d/dx[ (a_k h_k)' - b_k h_k ] + sum_j q_jk(x) h_j = 0,
// zero-flux rows at the truncation boundary, centered two-point fluxes, the
// null vector extracted by a normalization-constrained least-squares solve.
// Used as ground truth for the Monte Carlo density estimates.

#include "rsdiff/estimate.hpp"
#include "rsdiff/model.hpp"

#include <Eigen/Sparse>

namespace rsdiff {

struct GridMismatch : ModelError {
    using ModelError::ModelError;
};
struct NullSpaceDimensionAmbiguous : ModelError {
    using ModelError::ModelError;
};

struct Grid1D {
    double x_min = -8.0;
    double x_max = 8.0;
    int n = 401;

    double h() const { return (x_max - x_min) / (n - 1); }
    double node(int i) const { return x_min + i * h(); }
};

using SpMat = Eigen::SparseMatrix<double>;

/// Discrete forward (Fokker-Planck) operator on the stacked node-major
/// unknowns (h_1(x_i),...,h_N(x_i)); its null vector is the stationary
/// density stack.
SpMat assemble_adjoint(const SwitchingModel& model, const Grid1D& grid);

struct StationarySolution {
    Grid1D grid;
    int n_states = 1;
    std::vector<Vec> h_hat;  // per-state node values, sum_k h * sum_i h_hat = 1
    double residual_norm = 0.0;  // |A h| / |h|
    bool normalized = true;
    double sigma_smallest = 0.0;   // |A h|/|h| at the solution
    double sigma_second = 0.0;     // deflated inverse-iteration estimate
};

/// Smallest-singular-direction solve, regularized by the normalization row
/// sum_k h sum_i h_hat = 1 (appended as an exact constraint). Throws
/// NullSpaceDimensionAmbiguous when the two smallest singular values are
/// within 1e3x of each other (reducible Q or a broken grid).
StationarySolution solve_null_space(const SpMat& a, const Grid1D& grid, int n_states);

/// Convenience: assemble + solve for a d=1 model.
StationarySolution solve_stationary(const SwitchingModel& model, const Grid1D& grid);

struct CompareResult {
    double l1_total = 0.0;
    std::vector<double> l1_per_state;
};

/// L1 distance between the normalized MC bin masses and the oracle solution
/// restricted to bin averages. Requires the oracle grid to subdivide the
/// histogram bins exactly.
CompareResult compare_mc_vs_oracle(const EmpiricalMeasure& em, const StationarySolution& sol);

/// Oracle density against the reference measure: rho_k = h_hat_k / (pi_k e^V).
Vec oracle_rho(const StationarySolution& sol, const ReferenceMeasure& ref, int state);

}  // namespace rsdiff
