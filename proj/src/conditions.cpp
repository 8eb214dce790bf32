#include "rsdiff/conditions.hpp"

#include "rsdiff/quadrature.hpp"
#include "rsdiff/rng.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>

namespace rsdiff {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

// mu_V(e^{t (o + s y)^2}) for y ~ N(0, 1/c) per axis, d independent axes.
MomentEstimate affine_gaussian_moment(double w, double slope, double offset, double curvature, int dim) {
    MomentEstimate m;
    const double var = 1.0 / curvature;
    const double t = w;
    const double denom = 1.0 - 2.0 * t * slope * slope * var;
    if (denom <= 0.0) {
        m.value = kInf;
        m.divergent = true;
        return m;
    }
    const double one_axis = std::exp(t * offset * offset / denom) / std::sqrt(denom);
    m.value = std::pow(one_axis, dim);
    return m;
}
}  // namespace

Mat build_K(const IntegrabilityWeights& weights, const LogSobolevParams& ls) {
    const int n = static_cast<int>(weights.w.size());
    if (static_cast<int>(ls.gamma.size()) != n)
        throw DimensionMismatch("build_K: w and gamma lengths differ");
    Mat k = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        if (weights.w(i) <= 0.0 || ls.gamma(i) <= 0.0)
            throw ConditionsError("build_K: w_k and gamma_k must be positive");
        k(i, i) = 1.0 / (2.0 * weights.w(i)) - 2.0 / ls.gamma(i);
    }
    return k;
}

MinorTest is_nonsingular_m_matrix(const Mat& a) {
    const int n = static_cast<int>(a.rows());
    if (a.cols() != n) throw DimensionMismatch("is_nonsingular_m_matrix: square matrix required");
    const double tol = 1e-12 * std::max(1.0, a.cwiseAbs().maxCoeff());
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (i != j && a(i, j) > tol)
                throw NotZMatrix("off-diagonal entry is positive: not a Z-matrix");

    MinorTest out;
    out.minors.reserve(n);
    out.nonsingular_m_matrix = true;
    for (int i = 1; i <= n; ++i) {
        const double det = a.topLeftCorner(i, i).determinant();
        out.minors.push_back(det);
        if (!(det > 0.0)) out.nonsingular_m_matrix = false;
    }
    return out;
}

ConditionVector solve_condition_vector(const Mat& k_diag, const Mat& q_bar) {
    const int n = static_cast<int>(k_diag.rows());
    if (q_bar.rows() != n || q_bar.cols() != n)
        throw DimensionMismatch("solve_condition_vector: K and Qbar sizes differ");
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (i != j && q_bar(i, j) < 0.0)
                throw ConditionsError("solve_condition_vector: Qbar off-diagonal must be >= 0");

    const Mat a = -(k_diag + q_bar);
    ConditionVector out;
    Eigen::FullPivLU<Mat> lu(a);
    if (!lu.isInvertible()) {
        out.status = ConditionSolveStatus::Singular;
        return out;
    }
    Vec v = lu.solve(Vec::Ones(n));
    if (v.minCoeff() > 0.0) {
        out.status = ConditionSolveStatus::Feasible;
        out.v = std::move(v);
    } else {
        out.status = ConditionSolveStatus::Infeasible;
    }
    return out;
}

std::vector<MomentEstimate> check_exp_moments(const BuiltinModel& bm, const Vec& w, const MomentOptions& opts) {
    const int n = bm.model.n_states;
    const int d = bm.model.dim;
    if (static_cast<int>(w.size()) != n) throw DimensionMismatch("check_exp_moments: w must have n_states entries");
    std::vector<MomentEstimate> out(n);

    // constant sigma lets the sigma^{-1} variant reuse the |Z|^2 machinery
    Mat sig(d, d);
    Vec origin = Vec::Zero(d);

    for (int k = 1; k <= n; ++k) {
        double w_eff = w(k - 1);
        if (w_eff <= 0.0) throw ConditionsError("check_exp_moments: w_k must be positive");
        if (opts.sigma_inverse) {
            bm.model.sigma(origin, k, sig);
            const double s00 = sig(0, 0);
            bool scalar = true;
            for (int i = 0; i < d && scalar; ++i)
                for (int j = 0; j < d && scalar; ++j)
                    if (std::abs(sig(i, j) - (i == j ? s00 : 0.0)) > 1e-14) scalar = false;
            if (!scalar)
                throw ConditionsError("check_exp_moments: sigma_inverse variant implemented for scalar sigma only");
            w_eff /= s00 * s00;
        }

        const AffineZInfo& az = k - 1 < static_cast<int>(bm.z_affine.size()) ? bm.z_affine[k - 1] : AffineZInfo{};
        if (bm.v_gaussian && az.is_affine) {
            out[k - 1] = affine_gaussian_moment(w_eff, az.slope, az.offset, bm.v_curvature, d);
            continue;
        }

        if (opts.method == MomentMethod::MonteCarlo) {
            if (!bm.v_gaussian)
                throw ConditionsError("check_exp_moments: Monte Carlo sampler requires the gaussian V family");
            Philox rng(opts.seed, static_cast<std::uint64_t>(k), RngStream::Aux);
            const double sd = 1.0 / std::sqrt(bm.v_curvature);
            Vec x(d), zv(d);
            double sum = 0.0, sumsq = 0.0;
            for (long i = 0; i < opts.mc_samples; ++i) {
                for (int j = 0; j < d; ++j) x(j) = sd * rng.gaussian();
                bm.model.z(x, k, zv);
                const double val = std::exp(w_eff * zv.squaredNorm());
                sum += val;
                sumsq += val * val;
            }
            const double mean = sum / opts.mc_samples;
            const double var = std::max(0.0, sumsq / opts.mc_samples - mean * mean);
            out[k - 1].value = mean;
            out[k - 1].std_error = std::sqrt(var / opts.mc_samples);
            continue;
        }

        if (d > 3) throw ConditionsError("check_exp_moments: quadrature supported for d <= 3");
        if (bm.v_gaussian) {
            // Gauss-Hermite in the standardized variable y = sqrt(c) x
            QuadRule gh = gauss_hermite(opts.quad_nodes);
            const double scale = std::sqrt(2.0 / bm.v_curvature);
            const double wnorm = 1.0 / std::pow(M_PI, d / 2.0);
            Vec x(d), zv(d);
            double total = 0.0, total_half = 0.0;
            auto eval = [&](int i0, int i1, int i2) {
                x(0) = scale * gh.nodes[i0];
                double wgt = gh.weights[i0];
                if (d > 1) {
                    x(1) = scale * gh.nodes[i1];
                    wgt *= gh.weights[i1];
                }
                if (d > 2) {
                    x(2) = scale * gh.nodes[i2];
                    wgt *= gh.weights[i2];
                }
                bm.model.z(x, k, zv);
                return wgt * std::exp(w_eff * zv.squaredNorm());
            };
            if (d == 1) {
                for (int i = 0; i < opts.quad_nodes; ++i) {
                    const double t = eval(i, 0, 0);
                    total += t;
                    if (i % 2 == 0) total_half += t;
                }
            } else if (d == 2) {
                for (int i = 0; i < opts.quad_nodes; ++i)
                    for (int j = 0; j < opts.quad_nodes; ++j) total += eval(i, j, 0);
            } else {
                for (int i = 0; i < opts.quad_nodes; ++i)
                    for (int j = 0; j < opts.quad_nodes; ++j)
                        for (int l = 0; l < opts.quad_nodes; ++l) total += eval(i, j, l);
            }
            out[k - 1].value = total * wnorm;
            // growth heuristic: a node-count-sensitive value signals divergence
            if (d == 1) {
                const double coarse = 2.0 * total_half * wnorm;  // odd-node subsampling proxy
                if (out[k - 1].value > 1e12 || out[k - 1].value > 4.0 * std::max(coarse, 1.0))
                    out[k - 1].divergent = true;
            } else if (out[k - 1].value > 1e12) {
                out[k - 1].divergent = true;
            }
            continue;
        }

        // non-Gaussian V: adaptive trapezoid on an expanding box (d == 1)
        if (d != 1) throw ConditionsError("check_exp_moments: non-Gaussian quadrature implemented for d == 1");
        double prev = -1.0, value = 0.0;
        double half_width = 8.0;
        int nodes = 1024;
        Vec x(1), zv(1);
        for (int iter = 0; iter < 12; ++iter) {
            const double h = 2.0 * half_width / nodes;
            double s = 0.0;
            for (int i = 0; i <= nodes; ++i) {
                x(0) = -half_width + i * h;
                bm.model.z(x, k, zv);
                const double f = std::exp(bm.model.potential(x) + w_eff * zv.squaredNorm());
                s += (i == 0 || i == nodes) ? 0.5 * f : f;
            }
            value = s * h;
            if (prev > 0.0 && std::abs(value - prev) <= 1e-10 * std::abs(value)) break;
            prev = value;
            if (iter % 2 == 0) half_width *= 1.5;
            else nodes *= 2;
            if (value > 1e12) {
                out[k - 1].divergent = true;
                break;
            }
        }
        out[k - 1].value = value;
    }
    // e^{w|Z|^2} >= 1 pointwise and mu_V is a probability measure, so any
    // deficit below 1 is quadrature noise
    for (auto& m : out)
        if (!m.divergent && m.value < 1.0) m.value = 1.0;
    return out;
}

double example_threshold(double a, double b, double theta) {
    if (a <= 0.0 || b <= 0.0) throw ConditionsError("example_threshold: a,b > 0 required");
    if (theta < 0.0 || theta >= 1.0) throw ConditionsError("example_threshold: theta in [0,1) required");
    return (1.0 + (1.0 - theta) * (a + b) - 4.0 * theta * a * b) / (1.0 + (1.0 - theta) * a);
}

bool example_feasible(double a, double b, double theta, double delta) {
    return delta * delta < example_threshold(a, b, theta);
}

double entropy_bound(const ReferenceMeasure& ref, const QMatrixBounds& bounds,
                     const IntegrabilityWeights& weights, const LogSobolevParams& ls, const Vec& v,
                     const EntropyBoundOptions& opts) {
    const int n = static_cast<int>(weights.w.size());
    if (static_cast<int>(v.size()) != n || static_cast<int>(ls.gamma.size()) != n)
        throw DimensionMismatch("entropy_bound: inconsistent lengths");
    for (int i = 0; i < n; ++i)
        if (!std::isfinite(weights.moments(i)) || !std::isfinite(v(i)))
            throw NonFiniteBound("entropy_bound: infinite moment or condition vector entry");

    const double pi_min = ref.pi.minCoeff();
    const double cq = bounds.c_q;
    if (!std::isfinite(cq)) throw NonFiniteBound("entropy_bound: C_Q is infinite");
    const double log_plus_cq = cq > 1.0 ? std::log(cq) : 0.0;
    const double c_tilde = cq * log_plus_cq + 2.0 * (cq + 1.0) * std::exp(-1.0) - 2.0 * cq * std::log(pi_min);

    double moment_term = -kInf;
    double beta_term = 0.0;
    for (int k = 0; k < n; ++k) {
        const double mk = opts.log_moment ? std::log(weights.moments(k)) : weights.moments(k);
        moment_term = std::max(moment_term, v(k) / weights.w(k) * mk);
        beta_term = std::max(beta_term, v(k) * ls.beta(k) / ls.gamma(k));
    }
    return moment_term - std::log(pi_min) + c_tilde * v.sum() + 2.0 * beta_term;
}

bool irreducible(const Mat& q) {
    const int n = static_cast<int>(q.rows());
    // reachability closure over positive off-diagonal entries
    std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) reach[i][j] = (i == j) || (i != j && q(i, j) > 0.0);
    for (int m = 0; m < n; ++m)
        for (int i = 0; i < n; ++i)
            if (reach[i][m])
                for (int j = 0; j < n; ++j)
                    if (reach[m][j]) reach[i][j] = true;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (!reach[i][j]) return false;
    return true;
}

namespace {

// Largest admissible w_k (moment finiteness); +inf when unconstrained.
double moment_w_sup(const BuiltinModel& bm, int k) {
    const AffineZInfo& az = bm.z_affine[k - 1];
    if (bm.v_gaussian && az.is_affine) {
        if (az.slope == 0.0) return kInf;
        return bm.v_curvature / (2.0 * az.slope * az.slope);
    }
    // bounded/unknown Z: treated as unconstrained; quadrature flags divergence later
    return kInf;
}

struct Candidate {
    Vec w;
    Vec moments;
    Vec v;
    Mat K, A;
    std::vector<double> minors;
    double bound = kInf;
};

bool evaluate_candidate(const BuiltinModel& bm, const LogSobolevParams& ls,
                        const QMatrixBounds& bounds, const Vec& w, const MomentOptions& ewz_opts,
                        Candidate& out) {
    auto moments = check_exp_moments(bm, w, ewz_opts);
    Vec mvec(w.size());
    for (int i = 0; i < w.size(); ++i) {
        if (moments[i].divergent) return false;
        mvec(i) = moments[i].value;
    }
    IntegrabilityWeights iw{w, mvec};
    Mat k_diag = build_K(iw, ls);
    ConditionVector cv = solve_condition_vector(k_diag, bounds.q_bar);
    if (cv.status != ConditionSolveStatus::Feasible) return false;
    out.w = w;
    out.moments = mvec;
    out.K = k_diag;
    out.A = -(k_diag + bounds.q_bar);
    out.v = cv.v;
    out.minors = is_nonsingular_m_matrix(out.A).minors;
    ReferenceMeasure ref_tmp{bm.ref.pi, nullptr};
    out.bound = entropy_bound(ref_tmp, bounds, iw, ls, cv.v);
    return true;
}

}  // namespace

WeightSearchResult search_condition_weights(const BuiltinModel& bm, const LogSobolevParams& ls,
                                            const QMatrixBounds& bounds,
                                            const WeightSearchOptions& opts) {
    const int n = bm.model.n_states;
    WeightSearchResult res;

    // decisive probe: per-state maximal admissible w (feasibility is monotone in w)
    const double hugs[] = {1e-3, 1e-6, 1e-9, 1e-12};
    std::vector<double> w_sup(n);
    for (int k = 1; k <= n; ++k) w_sup[k - 1] = moment_w_sup(bm, k);

    Candidate best;
    bool found = false;
    for (double hug : hugs) {
        Vec w(n);
        for (int k = 0; k < n; ++k) {
            const double cap = std::ldexp(ls.gamma(k) / 4.0, opts.probe_max_exp);
            w(k) = std::isfinite(w_sup[k]) ? w_sup[k] * (1.0 - hug) : cap;
        }
        Candidate cand;
        if (evaluate_candidate(bm, ls, bounds, w, opts.moments, cand)) {
            found = true;
            if (cand.bound < best.bound) best = cand;
            break;  // hugging tighter only helps feasibility, not the bound
        }
    }

    if (found && opts.minimize_bound && n <= 3) {
        // scan the log grid for a weight vector with a smaller entropy bound
        std::vector<std::vector<double>> grids(n);
        for (int k = 0; k < n; ++k) {
            for (int j = opts.grid_min_exp; j <= opts.grid_max_exp; ++j) {
                const double w = std::ldexp(ls.gamma(k) / 4.0, j);
                if (w < w_sup[k]) grids[k].push_back(w);
            }
            if (grids[k].empty()) grids[k].push_back(w_sup[k] * 0.5);
        }
        std::vector<std::size_t> idx(n, 0);
        Vec w(n);
        while (true) {
            for (int k = 0; k < n; ++k) w(k) = grids[k][idx[k]];
            Candidate cand;
            if (evaluate_candidate(bm, ls, bounds, w, opts.moments, cand) && cand.bound < best.bound)
                best = cand;
            int carry = 0;
            while (carry < n && ++idx[carry] == grids[carry].size()) idx[carry++] = 0;
            if (carry == n) break;
        }
    }

    if (found) {
        res.feasible = true;
        res.w = best.w;
        res.moments = best.moments;
        res.K = best.K;
        res.A = best.A;
        res.v = best.v;
        res.minors = best.minors;
        res.bound = best.bound;
    }
    return res;
}

json condition_report(const BuiltinModel& bm, const ConditionReportOptions& opts) {
    json rep;
    const int n = bm.model.n_states;

    LogSobolevParams ls = opts.ls;
    if (ls.gamma.size() == 0) ls.gamma = bm.gamma_preset;
    if (ls.beta.size() == 0) ls.beta = bm.beta_preset;

    // H1: uniform ellipticity at probes (+ e^V normalization in d <= 2)
    std::vector<Vec> probes;
    for (double c : opts.probe_coords) probes.push_back(Vec::Constant(bm.model.dim, c));
    ValidationReport vr = validate_model(bm.model, probes);
    double min_eig = kInf;
    for (const auto& pr : vr.probes) min_eig = std::min(min_eig, pr.min_eig_a.minCoeff());
    json h1;
    h1["min_eig_a"] = min_eig;
    h1["elliptic"] = min_eig > 0.0;
    if (bm.model.dim <= 2) {
        // quadrature box scaled to the potential width (12 sd for gaussian V)
        const double half_width =
            bm.v_gaussian ? 12.0 / std::sqrt(bm.v_curvature) : 12.0;
        const double mass = integrate_exp_v(bm.model, -half_width, half_width, 200);
        h1["exp_v_mass"] = mass;
        h1["normalized"] = std::abs(mass - 1.0) < 1e-6;
        h1["pass"] = h1["elliptic"].get<bool>() && h1["normalized"].get<bool>();
    } else {
        h1["normalized"] = "asserted";  // d >= 3: accepted on user assertion
        h1["pass"] = h1["elliptic"].get<bool>();
    }
    rep["h1"] = h1;

    // H2: conservative Q, C_Q < oo, full coupling, invariant pi
    json h2;
    double worst_defect = 0.0, worst_neg = 0.0;
    for (const auto& pr : vr.probes) {
        worst_defect = std::max(worst_defect, pr.row_sum_defect);
        worst_neg = std::min(worst_neg, pr.min_off_diag);
    }
    h2["row_sum_defect"] = worst_defect;
    h2["min_off_diagonal"] = worst_neg;
    h2["conservative"] = vr.passed;
    h2["c_q"] = bm.bounds.c_q;
    h2["bounds_certified"] = bm.bounds.exact;
    if (!bm.bounds.exact) h2["bounds_note"] = "sampled, not certified";
    h2["fully_coupled"] = irreducible(bm.bounds.q_bar);
    // inf_x q_i(x) > 0 certified from entrywise infima
    Vec inf_exit(n);
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int j = 0; j < n; ++j)
            if (i != j) s += std::max(0.0, bm.bounds.q_hat(i, j));
        inf_exit(i) = s;
    }
    h2["inf_exit_rates"] = std::vector<double>(inf_exit.data(), inf_exit.data() + n);
    h2["inf_exit_positive"] = inf_exit.minCoeff() > 0.0;
    h2["pi"] = std::vector<double>(bm.ref.pi.data(), bm.ref.pi.data() + n);
    h2["pass"] = h2["conservative"].get<bool>() && h2["fully_coupled"].get<bool>();
    rep["h2"] = h2;

    rep["h3"] = {{"gamma", std::vector<double>(ls.gamma.data(), ls.gamma.data() + n)},
                 {"beta", std::vector<double>(ls.beta.data(), ls.beta.data() + n)},
                 {"source", opts.ls.gamma.size() ? "user" : "preset"}};

    WeightSearchResult sr = search_condition_weights(bm, ls, bm.bounds, opts.search);
    json ewz;
    if (sr.feasible) {
        ewz["w"] = std::vector<double>(sr.w.data(), sr.w.data() + n);
        ewz["moments"] = std::vector<double>(sr.moments.data(), sr.moments.data() + n);
        ewz["finite"] = true;
    } else {
        ewz["finite"] = false;
    }
    rep["ewz"] = ewz;

    json mm;
    mm["verdict"] = sr.feasible;
    if (sr.feasible) {
        auto mat_to_json = [](const Mat& m) {
            json rows = json::array();
            for (int i = 0; i < m.rows(); ++i) {
                json row = json::array();
                for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
                rows.push_back(row);
            }
            return rows;
        };
        mm["K"] = mat_to_json(sr.K);
        mm["A"] = mat_to_json(sr.A);
        mm["v"] = std::vector<double>(sr.v.data(), sr.v.data() + n);
        mm["minors"] = sr.minors;
    }
    rep["m_matrix"] = mm;

    // closed-form region when the model is the two-state benchmark family
    if (n == 2 && bm.config.contains("q") && bm.config["q"].contains("perturbation") &&
        bm.config["q"]["perturbation"]["family"] == "example_trig" && bm.z_affine.size() == 2 &&
        bm.z_affine[0].is_affine && bm.z_affine[0].slope == 0.0 && bm.z_affine[1].is_affine) {
        const double a = bm.config["q"]["base"][0][1].get<double>();
        const double b = bm.config["q"]["base"][1][0].get<double>();
        const double theta = bm.config["q"]["perturbation"]["params"].value("theta", 0.0);
        const double delta = bm.z_affine[1].slope;
        json ex;
        ex["a"] = a;
        ex["b"] = b;
        ex["theta"] = theta;
        ex["delta"] = delta;
        ex["threshold"] = example_threshold(a, b, theta);
        ex["feasible"] = example_feasible(a, b, theta, delta);
        rep["example_region"] = ex;
    }

    if (sr.feasible) rep["entropy_bound"] = sr.bound;

    rep["pass"] = rep["h1"]["pass"].get<bool>() && rep["h2"]["pass"].get<bool>() && sr.feasible;
    return rep;
}

}  // namespace rsdiff
