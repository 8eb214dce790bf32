#include "rsdiff/girsanov.hpp"

#include <cmath>

namespace rsdiff {

void accumulate_weight(WeightAccumulator& acc, const Vec& z_value, const Vec& dw, double dt) {
    acc.stoch_int_term += z_value.dot(dw);
    acc.quad_var_term += 0.5 * z_value.squaredNorm() * dt;
}

SwitchingModel make_reference(const SwitchingModel& model) {
    SwitchingModel ref = model;
    ref.z = [](const Vec&, int, Vec& out) { out.setZero(); };
    return ref;
}

WeightedEstimate weighted_expectation(const Observable& f, const std::vector<HybridPath>& ensemble,
                                      bool self_normalized) {
    WeightedEstimate out;
    std::vector<double> logw, fv;
    logw.reserve(ensemble.size());
    fv.reserve(ensemble.size());
    double max_logw = -std::numeric_limits<double>::infinity();
    for (const auto& p : ensemble) {
        if (p.exploded_at) continue;
        logw.push_back(p.girsanov_log_weight);
        fv.push_back(f(p.x_final, p.lambda_final));
        max_logw = std::max(max_logw, logw.back());
    }
    const long n = static_cast<long>(logw.size());
    if (n == 0) throw DegenerateWeights("weighted_expectation: no usable paths");
    out.n_paths = n;

    double sum_w = 0.0, sum_w2 = 0.0, sum_wf = 0.0, sum_exp = 0.0;
    for (long i = 0; i < n; ++i) {
        const double w = std::exp(logw[i] - max_logw);  // shift-invariant for the ratio
        sum_w += w;
        sum_w2 += w * w;
        sum_wf += w * fv[i];
        sum_exp += std::exp(logw[i]);
    }
    out.ess = sum_w * sum_w / sum_w2;
    out.mean_weight = sum_exp / n;
    if (out.ess < 10.0) throw DegenerateWeights("weighted_expectation: effective sample size < 10");

    if (self_normalized) {
        out.estimate = sum_wf / sum_w;
        double var = 0.0;
        for (long i = 0; i < n; ++i) {
            const double w = std::exp(logw[i] - max_logw);
            const double d = fv[i] - out.estimate;
            var += w * w * d * d;
        }
        out.std_error = std::sqrt(var) / sum_w;
    } else {
        double sum = 0.0, sumsq = 0.0;
        for (long i = 0; i < n; ++i) {
            const double v = std::exp(logw[i]) * fv[i];
            sum += v;
            sumsq += v * v;
        }
        out.estimate = sum / n;
        const double var = std::max(0.0, sumsq / n - out.estimate * out.estimate);
        out.std_error = std::sqrt(var / n);
    }
    return out;
}

FeynmanKacEstimate feynman_kac_estimate(const Observable& big_f, const Observable& f, double t,
                                        const std::vector<HybridPath>& ensemble) {
    FeynmanKacEstimate out;
    double sum = 0.0, sumsq = 0.0;
    long n = 0;
    for (const auto& p : ensemble) {
        if (p.exploded_at && *p.exploded_at < t) continue;
        if (p.record_stride != 1)
            throw ModelError("feynman_kac_estimate: paths must be recorded at stride 1");
        const long target = std::lround(t / p.dt);
        if (target >= static_cast<long>(p.n_samples()))
            throw ModelError("feynman_kac_estimate: t beyond recorded horizon");
        double integral = 0.0;
        for (long s = 0; s < target; ++s) {
            const double fs = big_f(p.x_at(s), p.lambda[s]);
            out.sup_f_abs = std::max(out.sup_f_abs, std::abs(fs));
            integral += fs * p.dt;
        }
        const double val = f(p.x_at(target), p.lambda[target]) * std::exp(integral);
        sum += val;
        sumsq += val * val;
        ++n;
    }
    if (n == 0) throw ModelError("feynman_kac_estimate: no usable paths");
    out.estimate = sum / n;
    const double var = std::max(0.0, sumsq / n - out.estimate * out.estimate);
    out.std_error = std::sqrt(var / n);
    return out;
}

}  // namespace rsdiff
