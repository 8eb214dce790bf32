#include "rsdiff/fp_oracle.hpp"

#include "rsdiff/rng.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>
#include <cmath>

namespace rsdiff {

namespace {

struct Coef {
    std::vector<double> a_node;  // a_k(x_i), per state stacked
    std::vector<double> b_mid;   // b_k(x_{i+1/2})
};

Coef evaluate_coefficients(const SwitchingModel& model, const Grid1D& grid) {
    if (model.dim != 1) throw ModelError("fp_oracle: d = 1 required");
    const int n = grid.n;
    const int ns = model.n_states;
    Coef c;
    c.a_node.resize(static_cast<std::size_t>(ns) * n);
    c.b_mid.resize(static_cast<std::size_t>(ns) * (n - 1));

    ModelWorkspace ws;
    ws.resize(1);
    Vec x(1), b(1);
    Mat sig(1, 1);
    for (int k = 1; k <= ns; ++k) {
        for (int i = 0; i < n; ++i) {
            x(0) = grid.node(i);
            model.sigma(x, k, sig);
            c.a_node[(k - 1) * static_cast<std::size_t>(n) + i] = sig(0, 0) * sig(0, 0);
        }
        for (int i = 0; i + 1 < n; ++i) {
            x(0) = 0.5 * (grid.node(i) + grid.node(i + 1));
            drift_into(model, ws, x, k, b);
            c.b_mid[(k - 1) * static_cast<std::size_t>(n - 1) + i] = b(0);
        }
    }
    return c;
}

}  // namespace

SpMat assemble_adjoint(const SwitchingModel& model, const Grid1D& grid) {
    const int n = grid.n;
    const int ns = model.n_states;
    if (n < 16) throw ModelError("fp_oracle: n >= 16 required");
    const double h = grid.h();
    const Coef c = evaluate_coefficients(model, grid);

    // node-major layout: unknown (i,k) -> i*ns + k
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(ns) * n * (ns + 3));
    auto idx = [ns](int i, int k) { return i * ns + k; };

    Mat q(ns, ns);
    Vec x(1);

    for (int k = 0; k < ns; ++k) {
        const double* a = &c.a_node[static_cast<std::size_t>(k) * n];
        const double* bm = &c.b_mid[static_cast<std::size_t>(k) * (n - 1)];
        for (int i = 0; i < n; ++i) {
            // flux difference (F_{i+1/2} - F_{i-1/2}) / h, zero flux outside
            if (i + 1 < n) {
                const double b_half = bm[i];
                // F_{i+1/2} = (a_{i+1} h_{i+1} - a_i h_i)/h - b_half (h_i + h_{i+1})/2
                trip.emplace_back(idx(i, k), idx(i + 1, k), (a[i + 1] / h - 0.5 * b_half) / h);
                trip.emplace_back(idx(i, k), idx(i, k), (-a[i] / h - 0.5 * b_half) / h);
            }
            if (i > 0) {
                const double b_half = bm[i - 1];
                trip.emplace_back(idx(i, k), idx(i, k), -(a[i] / h - 0.5 * b_half) / h);
                trip.emplace_back(idx(i, k), idx(i - 1, k), -(-a[i - 1] / h - 0.5 * b_half) / h);
            }
        }
    }

    // zeroth-order coupling: + sum_j q_jk(x_i) h_j  (inflow into k)
    for (int i = 0; i < n; ++i) {
        x(0) = grid.node(i);
        model.q_field(x, q);
        for (int k = 0; k < ns; ++k)
            for (int j = 0; j < ns; ++j) trip.emplace_back(idx(i, k), idx(i, j), q(j, k));
    }

    SpMat a(n * ns, n * ns);
    a.setFromTriplets(trip.begin(), trip.end());
    a.makeCompressed();
    return a;
}

StationarySolution solve_null_space(const SpMat& a, const Grid1D& grid, int n_states) {
    const int m = static_cast<int>(a.rows());
    const double h = grid.h();

    // KKT system for min |A h|^2 subject to c^T h = 1, c = h * ones
    SpMat ata = SpMat(a.transpose()) * a;
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(ata.nonZeros() + 2 * m);
    for (int kcol = 0; kcol < ata.outerSize(); ++kcol)
        for (SpMat::InnerIterator it(ata, kcol); it; ++it)
            trip.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    for (int i = 0; i < m; ++i) {
        trip.emplace_back(i, m, h);
        trip.emplace_back(m, i, h);
    }
    SpMat kkt(m + 1, m + 1);
    kkt.setFromTriplets(trip.begin(), trip.end());
    kkt.makeCompressed();

    Eigen::SparseLU<SpMat> lu;
    lu.compute(kkt);
    if (lu.info() != Eigen::Success)
        throw ModelError("fp_oracle: KKT factorization failed");
    Vec rhs = Vec::Zero(m + 1);
    rhs(m) = 1.0;
    Vec sol = lu.solve(rhs);
    Vec hvec = sol.head(m);

    StationarySolution out;
    out.grid = grid;
    out.n_states = n_states;
    const double hnorm = hvec.norm();
    out.residual_norm = (a * hvec).norm() / hnorm;
    out.sigma_smallest = out.residual_norm;

    // second-smallest singular value by deflated inverse iteration on A^T A + eps I
    const double scale = (Eigen::RowVectorXd::Ones(m) * (a.cwiseAbs() * Vec::Ones(m))).value() / m;
    const double eps = std::max(1e-24, 1e-20 * scale * scale);
    SpMat reg = ata;
    for (int i = 0; i < m; ++i) reg.coeffRef(i, i) += eps;
    Eigen::SimplicialLDLT<SpMat> ldlt;
    ldlt.compute(reg);
    if (ldlt.info() == Eigen::Success) {
        Vec dir = hvec / hnorm;
        Philox rng(12345, 0, RngStream::Aux);
        Vec v(m);
        for (int i = 0; i < m; ++i) v(i) = rng.gaussian();
        v -= dir * dir.dot(v);
        v.normalize();
        for (int it = 0; it < 40; ++it) {
            v = ldlt.solve(v);
            v -= dir * dir.dot(v);
            const double nv = v.norm();
            if (nv == 0.0) break;
            v /= nv;
        }
        out.sigma_second = (a * v).norm();
        const double s1 = std::max(out.sigma_smallest, 1e-300);
        if (out.sigma_second < 1e3 * s1)
            throw NullSpaceDimensionAmbiguous(
                "two smallest singular values within 1e3x: reducible Q or bad grid");
    }

    // sign-fix to nonnegative total mass (the constraint already enforces +1)
    if (hvec.sum() < 0.0) hvec = -hvec;

    out.h_hat.resize(n_states);
    for (int k = 0; k < n_states; ++k) {
        out.h_hat[k].resize(grid.n);
        for (int i = 0; i < grid.n; ++i) out.h_hat[k](i) = hvec(i * n_states + k);
    }
    out.normalized = true;
    return out;
}

StationarySolution solve_stationary(const SwitchingModel& model, const Grid1D& grid) {
    return solve_null_space(assemble_adjoint(model, grid), grid, model.n_states);
}

CompareResult compare_mc_vs_oracle(const EmpiricalMeasure& em, const StationarySolution& sol) {
    if (em.grid.dim() != 1) throw GridMismatch("compare: 1D histograms only");
    const int bins = em.grid.bins[0];
    const int n = sol.grid.n;
    if ((n - 1) % bins != 0) throw GridMismatch("compare: oracle grid must subdivide the bins");
    if (std::abs(em.grid.lo(0) - sol.grid.x_min) > 1e-9 ||
        std::abs(em.grid.hi(0) - sol.grid.x_max) > 1e-9)
        throw GridMismatch("compare: box mismatch");
    if (em.n_states != sol.n_states) throw GridMismatch("compare: state count mismatch");

    const int r = (n - 1) / bins;
    const double h = sol.grid.h();
    const int ns = em.n_states;

    // oracle bin masses by composite trapezoid inside each bin
    std::vector<double> oracle_mass(static_cast<std::size_t>(ns) * bins, 0.0);
    double oracle_total = 0.0;
    for (int k = 0; k < ns; ++k)
        for (int b = 0; b < bins; ++b) {
            double s = 0.0;
            for (int j = 0; j < r; ++j) {
                const int i = b * r + j;
                s += 0.5 * h * (sol.h_hat[k](i) + sol.h_hat[k](i + 1));
            }
            oracle_mass[static_cast<std::size_t>(k) * bins + b] = s;
            oracle_total += s;
        }

    double mc_total = 0.0;
    for (double cnt : em.counts) mc_total += cnt;
    if (mc_total <= 0.0 || oracle_total <= 0.0)
        throw ModelError("compare: empty measure");

    CompareResult res;
    res.l1_per_state.assign(ns, 0.0);
    for (int k = 0; k < ns; ++k)
        for (int b = 0; b < bins; ++b) {
            const std::size_t i = static_cast<std::size_t>(k) * bins + b;
            const double d = std::abs(em.counts[i] / mc_total - oracle_mass[i] / oracle_total);
            res.l1_per_state[k] += d;
            res.l1_total += d;
        }
    return res;
}

Vec oracle_rho(const StationarySolution& sol, const ReferenceMeasure& ref, int state) {
    Vec rho(sol.grid.n);
    Vec x(1);
    for (int i = 0; i < sol.grid.n; ++i) {
        x(0) = sol.grid.node(i);
        rho(i) = sol.h_hat[state - 1](i) / (ref.pi(state - 1) * std::exp(ref.potential(x)));
    }
    return rho;
}

}  // namespace rsdiff
