#pragma once

// The switching construction: a family of disjoint half-open intervals
// Gamma_ij(x) on [0,inf) with |Gamma_ij| = q_ij(x), stacked row by row
// (row i occupies [sum_{m<i} q_m, sum_{m<=i} q_m)), the jump function
//   h(x,i,z) = j - i  when z in Gamma_ij(x), 0 otherwise,
// and a thinning sampler driving the regime component off a dominating
// constant rate c_q >= sup_x q_i(x).

#include "rsdiff/model.hpp"
#include "rsdiff/rng.hpp"

#include <optional>

namespace rsdiff {

struct BoundViolated : ModelError {
    using ModelError::ModelError;
};

struct GammaPartition {
    Mat lo;          // lo(i,j), meaningful for i != j with width > 0
    Mat hi;          // hi(i,j) = lo(i,j) + q_ij(x); empty interval when equal
    Vec row_offset;  // sum_{m<i} q_m(x)
    Vec exit_rate;   // q_i(x)
};

GammaPartition build_gamma(const QMatrixSample& q);

/// j - i when z lies in the row-i interval Gamma_ij, 0 otherwise
/// (z falling in another row's interval is irrelevant for state i).
int h_eval(const GammaPartition& partition, StateIndex i, double z);

struct JumpEvent {
    double time = 0.0;
    double mark_z = 0.0;
    int from_state = 0;
    int to_state = 0;
    bool accepted = false;
};

/// One thinning step over [t, t+dt) with rates frozen at x: proposes with
/// probability 1 - e^{-c_q dt}, draws the mark uniformly over the row's
/// c_q-wide band, accepts iff the mark lands in a Gamma_ij(x) interval.
/// Returns nullopt when nothing was proposed; rejected proposals are
/// returned with accepted=false for the audit log.
std::optional<JumpEvent> sample_switch_thinning(const Mat& q_at_x, int i, double c_q, double dt,
                                                Philox& rng);

}  // namespace rsdiff
