#pragma once

// Occupation-measure estimation of the invariant law, the empirical density
// rho_hat = d(mu_hat)/d(mu_{pi,V}) on a histogram grid, binned relative
// entropy sum_k,b (rho log rho) * pi_k int_bin e^V (with 0 log 0 = 0), a
// positivity diagnostic over a sub-box, and a windowed ergodicity monitor.

#include "rsdiff/model.hpp"
#include "rsdiff/simulate.hpp"

#include <vector>

namespace rsdiff {

struct AllPathsExploded : ModelError {
    using ModelError::ModelError;
};

struct HistogramGrid {
    Vec lo, hi;
    std::vector<int> bins;  // per axis

    static HistogramGrid uniform_1d(double lo, double hi, int n_bins);

    int dim() const { return static_cast<int>(bins.size()); }
    int n_bins_total() const;
    double bin_volume() const;
    /// Flat row-major bin index; -1 when x is outside the box.
    int flat_index(CVecRef x) const;
    Vec bin_center(int flat) const;
    /// Per-axis [lo,hi) of one bin.
    void bin_bounds(int flat, Vec& b_lo, Vec& b_hi) const;
    bool same_as(const HistogramGrid& other, double tol = 1e-12) const;
};

struct EmpiricalMeasure {
    HistogramGrid grid;
    int n_states = 1;
    std::vector<double> counts;  // [(k-1) * n_bins + bin], time-weighted
    double total_time = 0.0;
    double out_of_box_time = 0.0;
    double sample_dt = 0.0;  // recording weight of one sample
    long n_exploded_excluded = 0;

    static EmpiricalMeasure zero(const HistogramGrid& grid, int n_states);
    void add(CVecRef x, int k, double weight);
    EmpiricalMeasure& merge(const EmpiricalMeasure& other);
    double state_fraction(int k) const;
};

/// Streaming accumulator for long runs (memory-light alternative to storing paths).
class OccupationObserver : public StepObserver {
public:
    OccupationObserver(const HistogramGrid& grid, int n_states, double burn_in)
        : burn_in_(burn_in), em_(EmpiricalMeasure::zero(grid, n_states)) {}
    void on_state(double t, const Vec& x, int k, double dt_weight) override {
        if (t < burn_in_) return;
        if (em_.sample_dt == 0.0) em_.sample_dt = dt_weight;
        em_.add(x, k, dt_weight);
    }
    EmpiricalMeasure& measure() { return em_; }

private:
    double burn_in_;
    EmpiricalMeasure em_;
};

/// Windowed occupation histograms for the convergence diagnostic.
class WindowedOccupationObserver : public StepObserver {
public:
    WindowedOccupationObserver(const HistogramGrid& grid, int n_states, double burn_in,
                               double t_end, int window_count);
    void on_state(double t, const Vec& x, int k, double dt_weight) override;
    const std::vector<EmpiricalMeasure>& windows() const { return windows_; }

private:
    double burn_in_, window_len_;
    std::vector<EmpiricalMeasure> windows_;
};

/// Pools time-weighted bin counts of non-exploded paths after burn-in.
EmpiricalMeasure occupation_measure(const std::vector<HybridPath>& paths, double burn_in,
                                    const HistogramGrid& grid, int n_states);

struct DensityEstimate {
    HistogramGrid grid;
    int n_states = 1;
    std::vector<double> rho;       // rho_hat, same layout as counts
    std::vector<double> ref_mass;  // pi_k int_bin e^V
    std::vector<char> included;    // bins with reference mass >= 1e-30
    double in_box_fraction = 1.0;
    double sample_dt = 0.0;
    double total_time = 0.0;
};

/// rho_hat = (bin occupation fraction) / (pi_k int_bin e^V), per-bin reference
/// masses by Gauss-Legendre quadrature with >= 8 nodes per axis.
DensityEstimate density_vs_reference(const EmpiricalMeasure& em, const ReferenceMeasure& ref,
                                     int quad_nodes = 12);

/// sum_k,b rho log(rho) * ref_mass over included bins; when renormalize is set
/// both measures are first rescaled to total mass 1 over the included bins
/// (the Gibbs-nonnegative variant).
double relative_entropy(const DensityEstimate& de, bool renormalize = false);

enum class PositivityVerdict { Positive, NotPositive, InsufficientData };

struct PositivityResult {
    PositivityVerdict verdict = PositivityVerdict::InsufficientData;
    double min_rho = 0.0;
    int n_bins_checked = 0;
    double min_expected_hits = 0.0;
};

/// min_k min_b rho_hat over bins inside [box_lo, box_hi]; positive verdict iff
/// every such bin has >= min_hits expected reference hits and rho_hat > 0.
PositivityResult positivity_diagnostic(const DensityEstimate& de, const Vec& box_lo,
                                       const Vec& box_hi, double min_hits = 100.0);

/// L1 distances between successive normalized window histograms.
std::vector<double> window_l1_distances(const std::vector<EmpiricalMeasure>& windows);

/// Windowed diagnostic straight from a stored path.
std::vector<double> convergence_diagnostic(const HybridPath& path, int window_count,
                                           const HistogramGrid& grid, int n_states,
                                           double burn_in = 0.0);

}  // namespace rsdiff
