#pragma once

// Gauss-Hermite rule in physicists' convention:
//
//   integral e^{-t^2} f(t) dt  ~=  sum_j w_j f(t_j)
//
// exact for polynomials of degree <= 2n-1. Nodes are found by Newton
// iteration on the orthonormal Hermite recurrence, starting from the usual
// asymptotic guesses; weights follow from the derivative at the root.

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace scgrad {

struct QuadRule {
    std::vector<double> nodes;
    std::vector<double> weights;  // sums to sqrt(pi)
};

inline QuadRule compute_gauss_hermite(int n) {
    if (n < 1) throw std::invalid_argument("gauss_hermite: order must be >= 1");
    constexpr double kTol = 1e-15;
    constexpr int kMaxNewton = 64;
    const double pi_quarter = std::pow(std::numbers::pi, -0.25);

    QuadRule rule;
    rule.nodes.assign(n, 0.0);
    rule.weights.assign(n, 0.0);

    const int half = (n + 1) / 2;
    double z = 0.0;
    for (int i = 0; i < half; ++i) {
        if (i == 0) {
            z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -1.0 / 6.0);
        } else if (i == 1) {
            z -= 1.14 * std::pow(n, 0.426) / z;
        } else if (i == 2) {
            z = 1.86 * z - 0.86 * rule.nodes[0];
        } else if (i == 3) {
            z = 1.91 * z - 0.91 * rule.nodes[1];
        } else {
            z = 2.0 * z - rule.nodes[i - 2];
        }

        double pp = 0.0;
        for (int it = 0; it < kMaxNewton; ++it) {
            double p1 = pi_quarter;
            double p2 = 0.0;
            for (int j = 1; j <= n; ++j) {
                const double p3 = p2;
                p2 = p1;
                p1 = z * std::sqrt(2.0 / j) * p2 - std::sqrt((j - 1.0) / j) * p3;
            }
            pp = std::sqrt(2.0 * n) * p2;
            const double dz = p1 / pp;
            z -= dz;
            if (std::abs(dz) <= kTol) break;
        }

        rule.nodes[i] = z;
        rule.nodes[n - 1 - i] = -z;
        rule.weights[i] = 2.0 / (pp * pp);
        rule.weights[n - 1 - i] = rule.weights[i];
    }
    if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
    return rule;
}

inline const QuadRule& gauss_hermite(int n) {
    static std::mutex mu;
    static std::map<int, QuadRule> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, compute_gauss_hermite(n)).first;
    return it->second;
}

// Order used by the expectation oracle: exact for polynomial integrands up
// to degree 39 per Gaussian scalar.
inline constexpr int kGaussHermiteOrder = 20;

// Composite Simpson on [a, b] with n (even) intervals; the independent
// generic integrator used for density-normalization checks.
template <class F>
double simpson(F f, double a, double b, int n) {
    if (n < 2) throw std::invalid_argument("simpson: need at least 2 intervals");
    if (n % 2 != 0) ++n;
    const double h = (b - a) / n;
    double acc = f(a) + f(b);
    for (int i = 1; i < n; ++i) {
        acc += f(a + h * i) * (i % 2 == 1 ? 4.0 : 2.0);
    }
    return acc * h / 3.0;
}

}  // namespace scgrad
