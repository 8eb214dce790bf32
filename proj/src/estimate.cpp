#include "rsdiff/estimate.hpp"

#include "rsdiff/quadrature.hpp"

#include <cmath>

namespace rsdiff {

HistogramGrid HistogramGrid::uniform_1d(double lo, double hi, int n_bins) {
    HistogramGrid g;
    g.lo = Vec::Constant(1, lo);
    g.hi = Vec::Constant(1, hi);
    g.bins = {n_bins};
    return g;
}

int HistogramGrid::n_bins_total() const {
    int n = 1;
    for (int b : bins) n *= b;
    return n;
}

double HistogramGrid::bin_volume() const {
    double v = 1.0;
    for (int a = 0; a < dim(); ++a) v *= (hi(a) - lo(a)) / bins[a];
    return v;
}

int HistogramGrid::flat_index(CVecRef x) const {
    int flat = 0;
    for (int a = 0; a < dim(); ++a) {
        if (x(a) < lo(a) || x(a) >= hi(a)) return -1;
        const double w = (hi(a) - lo(a)) / bins[a];
        int i = static_cast<int>((x(a) - lo(a)) / w);
        if (i >= bins[a]) i = bins[a] - 1;  // x == hi - eps rounding
        flat = flat * bins[a] + i;
    }
    return flat;
}

Vec HistogramGrid::bin_center(int flat) const {
    Vec c(dim());
    for (int a = dim() - 1; a >= 0; --a) {
        const int i = flat % bins[a];
        flat /= bins[a];
        const double w = (hi(a) - lo(a)) / bins[a];
        c(a) = lo(a) + (i + 0.5) * w;
    }
    return c;
}

void HistogramGrid::bin_bounds(int flat, Vec& b_lo, Vec& b_hi) const {
    b_lo.resize(dim());
    b_hi.resize(dim());
    for (int a = dim() - 1; a >= 0; --a) {
        const int i = flat % bins[a];
        flat /= bins[a];
        const double w = (hi(a) - lo(a)) / bins[a];
        b_lo(a) = lo(a) + i * w;
        b_hi(a) = b_lo(a) + w;
    }
}

bool HistogramGrid::same_as(const HistogramGrid& other, double tol) const {
    if (bins != other.bins) return false;
    return (lo - other.lo).cwiseAbs().maxCoeff() <= tol &&
           (hi - other.hi).cwiseAbs().maxCoeff() <= tol;
}

EmpiricalMeasure EmpiricalMeasure::zero(const HistogramGrid& grid, int n_states) {
    EmpiricalMeasure em;
    em.grid = grid;
    em.n_states = n_states;
    em.counts.assign(static_cast<std::size_t>(n_states) * grid.n_bins_total(), 0.0);
    return em;
}

void EmpiricalMeasure::add(CVecRef x, int k, double weight) {
    total_time += weight;
    const int b = grid.flat_index(x);
    if (b < 0) {
        out_of_box_time += weight;
        return;
    }
    counts[static_cast<std::size_t>(k - 1) * grid.n_bins_total() + b] += weight;
}

EmpiricalMeasure& EmpiricalMeasure::merge(const EmpiricalMeasure& other) {
    if (!grid.same_as(other.grid) || n_states != other.n_states)
        throw ModelError("EmpiricalMeasure::merge: incompatible grids");
    for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
    total_time += other.total_time;
    out_of_box_time += other.out_of_box_time;
    n_exploded_excluded += other.n_exploded_excluded;
    if (sample_dt == 0.0) sample_dt = other.sample_dt;
    return *this;
}

double EmpiricalMeasure::state_fraction(int k) const {
    const int nb = grid.n_bins_total();
    double s = 0.0;
    for (int b = 0; b < nb; ++b) s += counts[static_cast<std::size_t>(k - 1) * nb + b];
    return total_time > 0.0 ? s / total_time : 0.0;
}

WindowedOccupationObserver::WindowedOccupationObserver(const HistogramGrid& grid, int n_states,
                                                       double burn_in, double t_end,
                                                       int window_count)
    : burn_in_(burn_in) {
    if (window_count < 2) throw ModelError("windowed observer: window_count >= 2 required");
    window_len_ = (t_end - burn_in) / window_count;
    windows_.reserve(window_count);
    for (int i = 0; i < window_count; ++i) windows_.push_back(EmpiricalMeasure::zero(grid, n_states));
}

void WindowedOccupationObserver::on_state(double t, const Vec& x, int k, double dt_weight) {
    if (t < burn_in_) return;
    int w = static_cast<int>((t - burn_in_) / window_len_);
    if (w >= static_cast<int>(windows_.size())) w = static_cast<int>(windows_.size()) - 1;
    if (windows_[w].sample_dt == 0.0) windows_[w].sample_dt = dt_weight;
    windows_[w].add(x, k, dt_weight);
}

EmpiricalMeasure occupation_measure(const std::vector<HybridPath>& paths, double burn_in,
                                    const HistogramGrid& grid, int n_states) {
    EmpiricalMeasure em = EmpiricalMeasure::zero(grid, n_states);
    long usable = 0;
    for (const auto& p : paths) {
        if (p.exploded_at) {
            ++em.n_exploded_excluded;
            continue;
        }
        ++usable;
        const double w = p.record_stride > 0 ? p.record_stride * p.dt : p.dt;
        if (em.sample_dt == 0.0) em.sample_dt = w;
        // each recorded sample represents the stride interval to its right;
        // the final sample closes the horizon and carries no weight
        for (std::size_t s = 0; s + 1 < p.n_samples(); ++s) {
            const double t = p.time_of(s);
            if (t < burn_in) continue;
            em.add(p.x_at(s), p.lambda[s], w);
        }
    }
    if (usable == 0) throw AllPathsExploded("occupation_measure: all paths exploded");
    return em;
}

DensityEstimate density_vs_reference(const EmpiricalMeasure& em, const ReferenceMeasure& ref,
                                     int quad_nodes) {
    if (quad_nodes < 8) quad_nodes = 8;
    if (em.total_time <= 0.0) throw ModelError("density_vs_reference: empty measure");
    const int nb = em.grid.n_bins_total();
    const int d = em.grid.dim();
    if (d > 3) throw ModelError("density_vs_reference: d <= 3 supported");

    DensityEstimate de;
    de.grid = em.grid;
    de.n_states = em.n_states;
    de.rho.assign(em.counts.size(), 0.0);
    de.ref_mass.assign(em.counts.size(), 0.0);
    de.included.assign(em.counts.size(), 0);
    de.in_box_fraction = 1.0 - em.out_of_box_time / em.total_time;
    de.sample_dt = em.sample_dt;
    de.total_time = em.total_time;

    // int_bin e^V by tensor Gauss-Legendre, shared across states
    std::vector<double> exp_v_mass(nb, 0.0);
    Vec b_lo(d), b_hi(d), x(d);
    for (int b = 0; b < nb; ++b) {
        em.grid.bin_bounds(b, b_lo, b_hi);
        if (d == 1) {
            QuadRule r = gauss_legendre(quad_nodes, b_lo(0), b_hi(0));
            double s = 0.0;
            for (int i = 0; i < quad_nodes; ++i) {
                x(0) = r.nodes[i];
                s += r.weights[i] * std::exp(ref.potential(x));
            }
            exp_v_mass[b] = s;
        } else {
            std::vector<QuadRule> rules;
            for (int a = 0; a < d; ++a) rules.push_back(gauss_legendre(quad_nodes, b_lo(a), b_hi(a)));
            double s = 0.0;
            std::vector<int> idx(d, 0);
            for (;;) {
                double w = 1.0;
                for (int a = 0; a < d; ++a) {
                    x(a) = rules[a].nodes[idx[a]];
                    w *= rules[a].weights[idx[a]];
                }
                s += w * std::exp(ref.potential(x));
                int carry = 0;
                while (carry < d && ++idx[carry] == quad_nodes) idx[carry++] = 0;
                if (carry == d) break;
            }
            exp_v_mass[b] = s;
        }
    }

    for (int k = 0; k < em.n_states; ++k) {
        for (int b = 0; b < nb; ++b) {
            const std::size_t i = static_cast<std::size_t>(k) * nb + b;
            de.ref_mass[i] = ref.pi(k) * exp_v_mass[b];
            if (de.ref_mass[i] < 1e-30) continue;  // flagged excluded
            de.included[i] = 1;
            de.rho[i] = (em.counts[i] / em.total_time) / de.ref_mass[i];
        }
    }
    return de;
}

double relative_entropy(const DensityEstimate& de, bool renormalize) {
    double scale_p = 1.0, scale_q = 1.0;
    if (renormalize) {
        double mass_p = 0.0, mass_q = 0.0;
        for (std::size_t i = 0; i < de.rho.size(); ++i) {
            if (!de.included[i]) continue;
            mass_p += de.rho[i] * de.ref_mass[i];
            mass_q += de.ref_mass[i];
        }
        if (mass_p <= 0.0 || mass_q <= 0.0) return 0.0;
        scale_p = 1.0 / mass_p;
        scale_q = 1.0 / mass_q;
    }
    double h = 0.0;
    for (std::size_t i = 0; i < de.rho.size(); ++i) {
        if (!de.included[i]) continue;
        const double rho = de.rho[i] * scale_p / scale_q;
        if (rho <= 0.0) continue;  // x log x := 0 at 0
        h += rho * std::log(rho) * de.ref_mass[i] * scale_q;
    }
    return h;
}

PositivityResult positivity_diagnostic(const DensityEstimate& de, const Vec& box_lo,
                                       const Vec& box_hi, double min_hits) {
    PositivityResult res;
    res.min_expected_hits = std::numeric_limits<double>::infinity();
    res.min_rho = std::numeric_limits<double>::infinity();
    const int nb = de.grid.n_bins_total();
    const int d = de.grid.dim();
    Vec b_lo(d), b_hi(d);
    bool enough_data = true;

    for (int b = 0; b < nb; ++b) {
        de.grid.bin_bounds(b, b_lo, b_hi);
        bool inside = true;
        for (int a = 0; a < d; ++a)
            if (b_lo(a) < box_lo(a) - 1e-12 || b_hi(a) > box_hi(a) + 1e-12) inside = false;
        if (!inside) continue;
        for (int k = 0; k < de.n_states; ++k) {
            const std::size_t i = static_cast<std::size_t>(k) * nb + b;
            if (!de.included[i]) continue;
            const double expected_hits =
                de.sample_dt > 0.0 ? de.ref_mass[i] * de.total_time / de.sample_dt : 0.0;
            res.min_expected_hits = std::min(res.min_expected_hits, expected_hits);
            if (expected_hits < min_hits) enough_data = false;
            res.min_rho = std::min(res.min_rho, de.rho[i]);
            ++res.n_bins_checked;
        }
    }
    if (res.n_bins_checked == 0 || !enough_data) {
        res.verdict = PositivityVerdict::InsufficientData;
    } else {
        res.verdict = res.min_rho > 0.0 ? PositivityVerdict::Positive : PositivityVerdict::NotPositive;
    }
    return res;
}

std::vector<double> window_l1_distances(const std::vector<EmpiricalMeasure>& windows) {
    std::vector<double> out;
    for (std::size_t w = 1; w < windows.size(); ++w) {
        const auto& a = windows[w - 1];
        const auto& b = windows[w];
        if (a.total_time <= 0.0 || b.total_time <= 0.0) {
            out.push_back(2.0);  // max possible distance marks an empty window
            continue;
        }
        double dist = 0.0;
        for (std::size_t i = 0; i < a.counts.size(); ++i)
            dist += std::abs(a.counts[i] / a.total_time - b.counts[i] / b.total_time);
        // out-of-box fractions complete the normalized measures
        dist += std::abs(a.out_of_box_time / a.total_time - b.out_of_box_time / b.total_time);
        out.push_back(dist);
    }
    return out;
}

std::vector<double> convergence_diagnostic(const HybridPath& path, int window_count,
                                           const HistogramGrid& grid, int n_states,
                                           double burn_in) {
    if (window_count < 2) throw ModelError("convergence_diagnostic: window_count >= 2 required");
    if (path.exploded_at) throw ModelError("convergence_diagnostic: path exploded");
    WindowedOccupationObserver obs(grid, n_states, burn_in, path.t_final, window_count);
    const double w = path.record_stride > 0 ? path.record_stride * path.dt : path.dt;
    for (std::size_t s = 0; s + 1 < path.n_samples(); ++s)
        obs.on_state(path.time_of(s), path.x_at(s), path.lambda[s], w);
    return window_l1_distances(obs.windows());
}

}  // namespace rsdiff
