#include "rsdiff/quadrature.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace rsdiff {

namespace {

// Golub-Welsch: nodes are eigenvalues of the Jacobi matrix, weights are
// mu0 * (first eigenvector component)^2.
QuadRule golub_welsch(const Eigen::VectorXd& diag, const Eigen::VectorXd& offdiag, double mu0) {
    const int n = static_cast<int>(diag.size());
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    J.diagonal() = diag;
    for (int i = 0; i + 1 < n; ++i) {
        J(i, i + 1) = offdiag(i);
        J(i + 1, i) = offdiag(i);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    if (es.info() != Eigen::Success) throw std::runtime_error("quadrature: eigensolver failed");
    QuadRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        rule.nodes[i] = es.eigenvalues()(i);
        const double v0 = es.eigenvectors()(0, i);
        rule.weights[i] = mu0 * v0 * v0;
    }
    return rule;
}

}  // namespace

QuadRule gauss_hermite(int n) {
    if (n < 1) throw std::invalid_argument("gauss_hermite: n >= 1 required");
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd off(n > 1 ? n - 1 : 0);
    for (int i = 1; i < n; ++i) off(i - 1) = std::sqrt(i / 2.0);
    QuadRule rule = golub_welsch(diag, off, std::sqrt(M_PI));

    // The Jacobi eigenvector tails underflow the achievable eigensolver
    // precision for large n, so the extreme weights come out as noise.
    // Recompute every weight from the Christoffel function with the
    // orthonormal Hermite-function recurrence (tail-stable):
    //   w_i = e^{-x_i^2} / sum_{k<n} psi_k(x_i)^2,  psi_k = h_k e^{-x^2/2}.
    for (int i = 0; i < n; ++i) {
        const double x = rule.nodes[i];
        double psi_prev = 0.0;
        double psi = std::pow(M_PI, -0.25) * std::exp(-0.5 * x * x);
        double sum = psi * psi;
        for (int k = 0; k + 1 < n; ++k) {
            const double psi_next =
                std::sqrt(2.0 / (k + 1)) * x * psi - std::sqrt(static_cast<double>(k) / (k + 1)) * psi_prev;
            psi_prev = psi;
            psi = psi_next;
            sum += psi * psi;
        }
        rule.weights[i] = std::exp(-x * x) / sum;
    }
    return rule;
}

QuadRule gauss_legendre(int n) {
    if (n < 1) throw std::invalid_argument("gauss_legendre: n >= 1 required");
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd off(n > 1 ? n - 1 : 0);
    for (int i = 1; i < n; ++i) {
        const double k = i;
        off(i - 1) = k / std::sqrt(4.0 * k * k - 1.0);
    }
    return golub_welsch(diag, off, 2.0);
}

QuadRule gauss_legendre(int n, double a, double b) {
    QuadRule base = gauss_legendre(n);
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    for (int i = 0; i < n; ++i) {
        base.nodes[i] = mid + half * base.nodes[i];
        base.weights[i] *= half;
    }
    return base;
}

}  // namespace rsdiff
