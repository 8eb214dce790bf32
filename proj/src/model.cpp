#include "rsdiff/model.hpp"

#include "rsdiff/quadrature.hpp"
#include "rsdiff/rng.hpp"

#include <cmath>

namespace rsdiff {

namespace {
constexpr double kConservativityTol = 1e-10;

void require_finite(const Vec& v, const char* what) {
    if (!v.allFinite()) throw NonFiniteCoefficient(std::string(what) + " returned NaN/Inf");
}
void require_finite(const Mat& m, const char* what) {
    if (!m.allFinite()) throw NonFiniteCoefficient(std::string(what) + " returned NaN/Inf");
}
}  // namespace

double QMatrixSample::min_off_diagonal() const {
    const int n = static_cast<int>(entries.rows());
    double m = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (i != j) m = std::min(m, entries(i, j));
    return m;
}

Vec QMatrixSample::exit_rates() const {
    const int n = static_cast<int>(entries.rows());
    Vec q(n);
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int j = 0; j < n; ++j)
            if (i != j) s += entries(i, j);
        q(i) = s;
    }
    return q;
}

void check_state(const SwitchingModel& model, StateIndex k) {
    if (k.k < 1 || k.k > model.n_states)
        throw DimensionMismatch("state index " + std::to_string(k.k) + " outside {1,...," +
                                std::to_string(model.n_states) + "}");
}

ValidationReport validate_model(const SwitchingModel& model, const std::vector<Vec>& probes) {
    if (probes.empty()) throw ModelError("validate_model: probe_points must be non-empty");
    ValidationReport report;
    ModelWorkspace ws;
    ws.resize(model.dim);
    Mat q(model.n_states, model.n_states);

    for (int p = 0; p < static_cast<int>(probes.size()); ++p) {
        const Vec& x = probes[p];
        if (static_cast<int>(x.size()) != model.dim)
            throw DimensionMismatch("probe point has wrong dimension");

        ProbeReport pr;
        pr.point = x;
        pr.min_eig_a.resize(model.n_states);

        for (int k = 1; k <= model.n_states; ++k) {
            model.sigma(x, k, ws.sigma_m);
            require_finite(ws.sigma_m, "sigma");
            ws.a_m.noalias() = ws.sigma_m * ws.sigma_m.transpose();
            Eigen::SelfAdjointEigenSolver<Mat> es(ws.a_m);
            const double lmin = es.eigenvalues().minCoeff();
            pr.min_eig_a(k - 1) = lmin;
            if (lmin <= 0.0) {
                report.passed = false;
                report.issues.push_back({ValidationIssueKind::DegenerateDiffusion, p, k, lmin,
                                         "min eigenvalue of a_k is not positive"});
            }
        }

        model.q_field(x, q);
        require_finite(q, "q_field");
        QMatrixSample qs{q, x};
        pr.row_sum_defect = qs.row_sum_defect();
        pr.min_off_diag = qs.min_off_diagonal();

        const double tol = kConservativityTol * std::max(1.0, qs.max_abs_entry());
        if (pr.row_sum_defect > tol) {
            report.passed = false;
            report.issues.push_back({ValidationIssueKind::NonConservativeQ, p, 0,
                                     pr.row_sum_defect, "Q row sums exceed tolerance"});
        }
        if (pr.min_off_diag < -tol) {
            report.passed = false;
            report.issues.push_back({ValidationIssueKind::NegativeRate, p, 0, pr.min_off_diag,
                                     "negative off-diagonal rate"});
        }
        report.probes.push_back(std::move(pr));
    }
    return report;
}

void drift_into(const SwitchingModel& model, ModelWorkspace& ws, const Vec& x, int k, Vec& out) {
    model.sigma(x, k, ws.sigma_m);
    ws.a_m.noalias() = ws.sigma_m * ws.sigma_m.transpose();
    model.grad_potential(x, ws.grad);
    model.z(x, k, ws.z_v);

    if (model.div_a) {
        model.div_a(x, k, ws.diva);
    } else {
        // div(a_k)_l = sum_m d_m a^{ml}, central differences
        const double h = model.fd_step_scale * std::max(1.0, x.norm());
        ws.diva.setZero();
        for (int m = 0; m < model.dim; ++m) {
            ws.x_shift = x;
            ws.x_shift(m) = x(m) + h;
            model.sigma(ws.x_shift, k, ws.sigma_m);
            ws.a_plus.noalias() = ws.sigma_m * ws.sigma_m.transpose();
            ws.x_shift(m) = x(m) - h;
            model.sigma(ws.x_shift, k, ws.sigma_m);
            ws.a_minus.noalias() = ws.sigma_m * ws.sigma_m.transpose();
            for (int l = 0; l < model.dim; ++l)
                ws.diva(l) += (ws.a_plus(m, l) - ws.a_minus(m, l)) / (2.0 * h);
        }
        model.sigma(x, k, ws.sigma_m);  // restore sigma(x) clobbered by the FD sweep
    }

    out.noalias() = ws.a_m * ws.grad;
    out += ws.diva;
    out.noalias() += std::sqrt(2.0) * (ws.sigma_m * ws.z_v);
}

Vec drift(const SwitchingModel& model, const Vec& x, StateIndex k) {
    check_state(model, k);
    if (!x.allFinite()) throw NonFiniteCoefficient("drift: x is not finite");
    ModelWorkspace ws;
    ws.resize(model.dim);
    Vec out(model.dim);
    drift_into(model, ws, x, k.k, out);
    require_finite(out, "drift");
    return out;
}

double reference_density(const ReferenceMeasure& ref, const Vec& x, StateIndex k) {
    if (k.k < 1 || k.k > static_cast<int>(ref.pi.size()))
        throw DimensionMismatch("reference_density: bad state index");
    return ref.pi(k.k - 1) * std::exp(ref.potential(x));
}

double integrate_exp_v(const SwitchingModel& model, double lo, double hi, int nodes_per_axis) {
    if (model.dim > 2) throw ModelError("integrate_exp_v: quadrature supported for d <= 2 only");
    QuadRule rule = gauss_legendre(nodes_per_axis, lo, hi);
    Vec x(model.dim);
    double total = 0.0;
    if (model.dim == 1) {
        for (int i = 0; i < nodes_per_axis; ++i) {
            x(0) = rule.nodes[i];
            total += rule.weights[i] * std::exp(model.potential(x));
        }
    } else {
        for (int i = 0; i < nodes_per_axis; ++i)
            for (int j = 0; j < nodes_per_axis; ++j) {
                x(0) = rule.nodes[i];
                x(1) = rule.nodes[j];
                total += rule.weights[i] * rule.weights[j] * std::exp(model.potential(x));
            }
    }
    return total;
}

QMatrixBounds sample_q_bounds(const SwitchingModel& model, double lo, double hi, int grid_points,
                              int random_probes, std::uint64_t seed) {
    const int n = model.n_states;
    QMatrixBounds b;
    b.q_bar = Mat::Constant(n, n, -std::numeric_limits<double>::infinity());
    b.q_hat = Mat::Constant(n, n, std::numeric_limits<double>::infinity());
    b.exact = false;

    Mat q(n, n);
    Vec x(model.dim);
    Philox rng(seed, 0, RngStream::Aux);

    auto absorb = [&](const Vec& pt) {
        model.q_field(pt, q);
        b.q_bar = b.q_bar.cwiseMax(q);
        b.q_hat = b.q_hat.cwiseMin(q);
        QMatrixSample qs{q, pt};
        b.c_q = std::max(b.c_q, qs.exit_rates().maxCoeff());
    };

    for (int g = 0; g < grid_points; ++g) {
        const double t = grid_points == 1 ? 0.5 : static_cast<double>(g) / (grid_points - 1);
        x.setConstant(lo + t * (hi - lo));
        absorb(x);
    }
    for (int r = 0; r < random_probes; ++r) {
        for (int i = 0; i < model.dim; ++i) x(i) = lo + rng.uniform() * (hi - lo);
        absorb(x);
    }
    return b;
}

}  // namespace rsdiff
