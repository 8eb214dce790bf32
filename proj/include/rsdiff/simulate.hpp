#pragma once

// Euler-Maruyama time stepping of the coupled pair (X_t, Lambda_t):
// diffusion sub-step with the regime-frozen coefficients, then the thinning
// switching sub-step with rates frozen at the left endpoint. Diffusion noise
// and jump marks use independent counter-based streams, so ensembles are
// reproducible under any worker count.

#include "rsdiff/jump.hpp"
#include "rsdiff/model.hpp"
#include "rsdiff/rng.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace rsdiff {

enum class SwitchScheme { Thinning, BernoulliPerStep };

struct SimConfig {
    double dt = 1e-3;
    double t_end = 1.0;
    double burn_in = 0.0;
    double explosion_radius = 1e6;
    std::uint64_t seed = 0;
    int n_paths = 1;
    SwitchScheme scheme = SwitchScheme::Thinning;
    int record_stride = 1;  // 0 records endpoints only
    bool log_jumps = false;
    int threads = 1;  // 0 = hardware concurrency
};

struct HybridPath {
    int dim = 1;
    double dt = 0.0;
    int record_stride = 1;
    long n_steps = 0;  // executed steps (shorter than planned iff exploded)

    std::vector<double> x;       // recorded samples, row-major [sample*dim + i]
    std::vector<int> lambda;     // recorded regimes, 1-based
    std::vector<long> steps;     // grid step index of each sample
    std::vector<JumpEvent> jumps;
    std::optional<double> exploded_at;

    double girsanov_log_weight = 0.0;
    double girsanov_stoch_int = 0.0;
    double girsanov_quad_var = 0.0;

    Vec x_final;
    int lambda_final = 1;
    double t_final = 0.0;

    std::size_t n_samples() const { return lambda.size(); }
    double time_of(std::size_t s) const { return steps[s] * dt; }
    Eigen::Map<const Vec> x_at(std::size_t s) const {
        return Eigen::Map<const Vec>(x.data() + s * dim, dim);
    }
};

/// Receives every grid state (t, x_t, k_t) with its dt weight before the step.
struct StepObserver {
    virtual ~StepObserver() = default;
    virtual void on_state(double t, const Vec& x, int k, double dt_weight) = 0;
};

using ZTarget = std::function<void(const Vec&, int, Vec&)>;

struct StepResult {
    bool exploded = false;
    std::optional<JumpEvent> jump;
};

/// One Euler + switching step. x and k are updated in place; the jump decision
/// uses the pre-move x (rates frozen at the left endpoint).
StepResult step(const SwitchingModel& model, Vec& x, int& k, double t, double dt, double c_q,
                double explosion_radius, SwitchScheme scheme, Philox& rng_diffusion,
                Philox& rng_jumps);

/// Full trajectory; reproducible from (model, cfg, path_index). The optional
/// observer streams states (memory-light long runs); the optional girsanov
/// target accumulates the change-of-measure weight for that Z along the path.
HybridPath simulate_path(const SwitchingModel& model, const QMatrixBounds& bounds, const Vec& x0,
                         int k0, const SimConfig& cfg, std::uint64_t path_index = 0,
                         StepObserver* observer = nullptr, const ZTarget* girsanov_z = nullptr);

/// Independent paths 0..n_paths-1 over a worker pool, merged by index.
std::vector<HybridPath> simulate_batch(const SwitchingModel& model, const QMatrixBounds& bounds,
                                       const Vec& x0, int k0, const SimConfig& cfg,
                                       const ZTarget* girsanov_z = nullptr);

/// Runs fn(0..n-1) over `threads` workers (deterministic output slots).
void parallel_for(long n, int threads, const std::function<void(long)>& fn);

}  // namespace rsdiff
