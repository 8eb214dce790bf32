#include "rsdiff/simulate.hpp"

#include <atomic>
#include <cmath>
#include <thread>

namespace rsdiff {

void parallel_for(long n, int threads, const std::function<void(long)>& fn) {
    if (threads == 0) threads = static_cast<int>(std::thread::hardware_concurrency());
    if (threads <= 1 || n <= 1) {
        for (long i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<long> next{0};
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (;;) {
                const long i = next.fetch_add(1);
                if (i >= n) return;
                fn(i);
            }
        });
    }
    for (auto& th : pool) th.join();
}

namespace {

// Owns all per-path scratch so the step loop never allocates.
struct Stepper {
    const SwitchingModel& model;
    ModelWorkspace ws;
    Vec b, dw, xn, zbuf;
    Mat q;

    explicit Stepper(const SwitchingModel& m) : model(m) {
        ws.resize(m.dim);
        b.resize(m.dim);
        dw.resize(m.dim);
        xn.resize(m.dim);
        zbuf.resize(m.dim);
        q.resize(m.n_states, m.n_states);
    }

    StepResult advance(Vec& x, int& k, double t, double dt, double c_q, double radius,
                       SwitchScheme scheme, Philox& rng_d, Philox& rng_j,
                       const ZTarget* girsanov_z, HybridPath* weight_sink) {
        StepResult res;

        // diffusion sub-step; drift_into leaves sigma(x,k) in ws.sigma_m
        drift_into(model, ws, x, k, b);
        const double sqdt = std::sqrt(dt);
        for (int i = 0; i < model.dim; ++i) dw(i) = sqdt * rng_d.gaussian();

        if (girsanov_z) {
            (*girsanov_z)(x, k, zbuf);
            weight_sink->girsanov_stoch_int += zbuf.dot(dw);
            weight_sink->girsanov_quad_var += 0.5 * zbuf.squaredNorm() * dt;
        }

        xn = x;
        xn.noalias() += b * dt;
        xn.noalias() += std::sqrt(2.0) * (ws.sigma_m * dw);

        // switching sub-step with rates frozen at the left endpoint
        if (model.n_states > 1) {
            model.q_field(x, q);
            if (scheme == SwitchScheme::Thinning) {
                res.jump = sample_switch_thinning(q, k, c_q, dt, rng_j);
            } else {
                // first-order per-step Bernoulli scheme: P(i -> j) = q_ij(x) dt
                const double u = rng_j.uniform();
                double cum = 0.0;
                for (int j = 1; j <= model.n_states; ++j) {
                    if (j == k) continue;
                    cum += q(k - 1, j - 1) * dt;
                    if (u < cum) {
                        res.jump = JumpEvent{0.0, u, k, j, true};
                        break;
                    }
                }
            }
            if (res.jump) {
                res.jump->time = t + dt;
                if (res.jump->accepted) k = res.jump->to_state;
            }
        }

        x = xn;
        if (!x.allFinite() || x.norm() >= radius) res.exploded = true;
        return res;
    }
};

}  // namespace

StepResult step(const SwitchingModel& model, Vec& x, int& k, double t, double dt, double c_q,
                double explosion_radius, SwitchScheme scheme, Philox& rng_diffusion,
                Philox& rng_jumps) {
    Stepper stepper(model);
    return stepper.advance(x, k, t, dt, c_q, explosion_radius, scheme, rng_diffusion, rng_jumps,
                           nullptr, nullptr);
}

HybridPath simulate_path(const SwitchingModel& model, const QMatrixBounds& bounds, const Vec& x0,
                         int k0, const SimConfig& cfg, std::uint64_t path_index,
                         StepObserver* observer, const ZTarget* girsanov_z) {
    if (static_cast<int>(x0.size()) != model.dim)
        throw DimensionMismatch("simulate_path: x0 has wrong dimension");
    check_state(model, StateIndex{k0});
    if (!(cfg.dt > 0.0) || cfg.dt >= cfg.t_end)
        throw ModelError("simulate_path: require 0 < dt < t_end");
    if (x0.norm() >= cfg.explosion_radius)
        throw ModelError("simulate_path: x0 already outside the explosion radius");

    const long n_steps = static_cast<long>(std::ceil(cfg.t_end / cfg.dt - 1e-9));
    const double c_q = bounds.c_q;

    Philox rng_d(cfg.seed, path_index, RngStream::Diffusion);
    Philox rng_j(cfg.seed, path_index, RngStream::Jumps);

    Stepper stepper(model);
    Vec x = x0;
    int k = k0;

    HybridPath path;
    path.dim = model.dim;
    path.dt = cfg.dt;
    path.record_stride = cfg.record_stride;

    const long est_samples = cfg.record_stride > 0 ? n_steps / cfg.record_stride + 2 : 2;
    path.x.reserve(est_samples * model.dim);
    path.lambda.reserve(est_samples);
    path.steps.reserve(est_samples);

    auto record = [&](long step_idx) {
        for (int i = 0; i < model.dim; ++i) path.x.push_back(x(i));
        path.lambda.push_back(k);
        path.steps.push_back(step_idx);
    };
    record(0);

    long executed = 0;
    for (long j = 0; j < n_steps; ++j) {
        const double t = j * cfg.dt;
        if (observer) observer->on_state(t, x, k, cfg.dt);

        StepResult res = stepper.advance(x, k, t, cfg.dt, c_q, cfg.explosion_radius, cfg.scheme,
                                         rng_d, rng_j, girsanov_z, &path);
        ++executed;

        if (res.jump && (cfg.log_jumps || res.jump->accepted)) path.jumps.push_back(*res.jump);

        if (res.exploded) {
            path.exploded_at = (j + 1) * cfg.dt;
            if (cfg.record_stride > 0) record(j + 1);
            break;
        }
        if (cfg.record_stride > 0 && ((j + 1) % cfg.record_stride == 0 || j + 1 == n_steps))
            record(j + 1);
    }
    if (cfg.record_stride == 0) record(executed);

    path.n_steps = executed;
    path.girsanov_log_weight = path.girsanov_stoch_int - path.girsanov_quad_var;
    path.x_final = x;
    path.lambda_final = k;
    path.t_final = executed * cfg.dt;
    return path;
}

std::vector<HybridPath> simulate_batch(const SwitchingModel& model, const QMatrixBounds& bounds,
                                       const Vec& x0, int k0, const SimConfig& cfg,
                                       const ZTarget* girsanov_z) {
    std::vector<HybridPath> paths(cfg.n_paths);
    parallel_for(cfg.n_paths, cfg.threads, [&](long i) {
        paths[i] = simulate_path(model, bounds, x0, k0, cfg, static_cast<std::uint64_t>(i),
                                 nullptr, girsanov_z);
    });
    return paths;
}

}  // namespace rsdiff
