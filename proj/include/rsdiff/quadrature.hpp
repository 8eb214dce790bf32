#pragma once

#include <vector>

namespace rsdiff {

struct QuadRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// Gauss-Hermite rule: sum w_i f(x_i) ~ integral f(x) exp(-x^2) dx.
QuadRule gauss_hermite(int n);

/// Gauss-Legendre rule on [-1,1].
QuadRule gauss_legendre(int n);

/// Gauss-Legendre rule mapped to [a,b].
QuadRule gauss_legendre(int n, double a, double b);

}  // namespace rsdiff
