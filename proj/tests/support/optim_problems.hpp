#pragma once

// Reference minimization problems with known solutions.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "symmlp/matrix.hpp"
#include "symmlp/mlp.hpp"
#include "symmlp/rng.hpp"
#include "symmlp/training.hpp"

namespace symmlp::testing {

/// Symmetric positive definite Q diag(1..n) Q^T, Q from Gram-Schmidt on Gaussian vectors.
inline Matrix spd_matrix(std::size_t n, Rng& rng) {
    std::vector<std::vector<double>> q;
    while (q.size() < n) {
        std::vector<double> v(n);
        for (auto& x : v) x = standard_normal(rng);
        for (const auto& u : q) {
            const double d = std::inner_product(v.begin(), v.end(), u.begin(), 0.0);
            for (std::size_t i = 0; i < n; ++i) v[i] -= d * u[i];
        }
        const double norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
        for (auto& x : v) x /= norm;
        q.push_back(v);
    }
    Matrix a(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t k = 0; k < n; ++k) a(i, j) += q[k][i] * static_cast<double>(k + 1) * q[k][j];
    return a;
}

/// Solution of A w = b by Gaussian elimination with partial pivoting.
inline std::vector<double> solve_linear(Matrix a, std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t pivot = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(a(i, k)) > std::abs(a(pivot, k))) pivot = i;
        for (std::size_t j = 0; j < n; ++j) std::swap(a(k, j), a(pivot, j));
        std::swap(b[k], b[pivot]);
        for (std::size_t i = k + 1; i < n; ++i) {
            const double f = a(i, k) / a(k, k);
            for (std::size_t j = k; j < n; ++j) a(i, j) -= f * a(k, j);
            b[i] -= f * b[k];
        }
    }
    std::vector<double> w(n);
    for (std::size_t k = n; k-- > 0;) {
        double s = b[k];
        for (std::size_t j = k + 1; j < n; ++j) s -= a(k, j) * w[j];
        w[k] = s / a(k, k);
    }
    return w;
}

struct QuadraticBowl {
    Matrix a;
    std::vector<double> b;

    /// 0.5 w'Aw - b'w
    double operator()(std::span<const double> w, std::span<double> g) const {
        double value = 0.0;
        for (std::size_t i = 0; i < b.size(); ++i) {
            double aw = 0.0;
            for (std::size_t j = 0; j < b.size(); ++j) aw += a(i, j) * w[j];
            g[i] = aw - b[i];
            value += 0.5 * w[i] * aw - b[i] * w[i];
        }
        return value;
    }

    /// max_i |w_i - w*_i| against a direct solve
    double solution_error(std::span<const double> w) const {
        const auto exact = solve_linear(a, b);
        double worst = 0.0;
        for (std::size_t i = 0; i < b.size(); ++i) worst = std::max(worst, std::abs(w[i] - exact[i]));
        return worst;
    }

    /// max_i |(Aw - b)_i|
    double residual(std::span<const double> w) const {
        std::vector<double> g(b.size());
        (*this)(w, g);
        double worst = 0.0;
        for (double x : g) worst = std::max(worst, std::abs(x));
        return worst;
    }
};

inline QuadraticBowl make_bowl(std::size_t n, Rng& rng) {
    QuadraticBowl q{spd_matrix(n, rng), std::vector<double>(n)};
    for (auto& x : q.b) x = standard_normal(rng);
    return q;
}

inline double rosenbrock(std::span<const double> w, std::span<double> g) {
    const double x = w[0], y = w[1];
    g[0] = -2.0 * (1.0 - x) - 400.0 * x * (y - x * x);
    g[1] = 200.0 * (y - x * x);
    return (1.0 - x) * (1.0 - x) + 100.0 * (y - x * x) * (y - x * x);
}

inline MlpArchitecture xor_architecture() {
    MlpArchitecture a;
    a.input_dim = 2;
    a.hidden = {{2, Activation::Tanh}};
    a.outputs = {{"y", 0, 1, BlockKind::LogisticIndependent, false}};
    return a;
}

/// Mean Bernoulli cross-entropy of a 2-2-1 tanh/logistic net on the four XOR patterns.
inline double xor_cross_entropy(const WeightVector& w, std::span<double> g) {
    static const double x[4][2] = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};
    static const double t[4] = {0, 1, 1, 0};
    const auto a = xor_architecture();
    std::fill(g.begin(), g.end(), 0.0);
    double total = 0.0;
    for (std::size_t r = 0; r < 4; ++r) {
        const auto trace = forward(a, w, std::vector<double>{x[r][0], x[r][1]});
        const double y = std::clamp(trace.output()[0], 1e-12, 1.0 - 1e-12);
        total -= t[r] * std::log(y) + (1 - t[r]) * std::log(1 - y);
        const std::vector<double> dy{(y - t[r]) / (y * (1 - y))};
        const auto gr = backward(a, w, trace, dy);
        for (std::size_t j = 0; j < g.size(); ++j) g[j] += gr[j] / 4.0;
    }
    return total / 4.0;
}

/// Best mean cross-entropy over `restarts` seeded starts; stops at the first below `target`.
inline double train_xor(std::size_t restarts, double target) {
    const auto a = xor_architecture();
    double best = std::numeric_limits<double>::infinity();
    for (std::uint64_t seed = 0; seed < restarts && best >= target; ++seed) {
        auto rng = make_rng(seed);
        WeightVector scratch = initialize_weights(a, rng);
        auto f = [&](std::span<const double> w, std::span<double> g) {
            std::copy(w.begin(), w.end(), scratch.values().begin());
            return xor_cross_entropy(scratch, g);
        };
        const auto r = minimize(f, scratch.values(), {Optimizer::ConjugateGradient, 2000, 1e-8});
        best = std::min(best, r.value);
    }
    return best;
}

}  // namespace symmlp::testing
