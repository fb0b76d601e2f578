#include "symmlp/imputation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace symmlp {

namespace {

std::vector<double> observed_means(const Matrix& m) {
    std::vector<double> means(m.cols(), 0.0);
    for (std::size_t c = 0; c < m.cols(); ++c) {
        double sum = 0.0;
        std::size_t n = 0;
        for (std::size_t r = 0; r < m.rows(); ++r)
            if (!is_missing(m(r, c))) {
                sum += m(r, c);
                ++n;
            }
        if (n == 0) throw ImputationError("column " + std::to_string(c) + " has no observed entries");
        means[c] = sum / static_cast<double>(n);
    }
    return means;
}

}  // namespace

Matrix impute_mean(const Matrix& m) {
    const auto means = observed_means(m);
    Matrix out = m;
    for (std::size_t r = 0; r < out.rows(); ++r)
        for (std::size_t c = 0; c < out.cols(); ++c)
            if (is_missing(out(r, c))) out(r, c) = means[c];
    return out;
}

Matrix impute_knn(const Matrix& m, std::size_t k, std::vector<std::string>* warnings) {
    if (k == 0) throw ImputationError("k must be at least 1");
    std::vector<double> means;
    Matrix out = m;
    for (std::size_t i = 0; i < m.rows(); ++i) {
        bool incomplete = false;
        for (std::size_t c = 0; c < m.cols(); ++c) incomplete = incomplete || is_missing(m(i, c));
        if (!incomplete) continue;

        // Distances from row i to every other row over shared observed coordinates.
        std::vector<double> dist(m.rows(), std::numeric_limits<double>::infinity());
        for (std::size_t j = 0; j < m.rows(); ++j) {
            if (j == i) continue;
            double ss = 0.0;
            std::size_t shared = 0;
            for (std::size_t c = 0; c < m.cols(); ++c) {
                if (is_missing(m(i, c)) || is_missing(m(j, c))) continue;
                const double d = m(i, c) - m(j, c);
                ss += d * d;
                ++shared;
            }
            if (shared > 0) dist[j] = std::sqrt(ss / static_cast<double>(shared));
        }

        for (std::size_t c = 0; c < m.cols(); ++c) {
            if (!is_missing(m(i, c))) continue;
            std::vector<std::size_t> donors;
            for (std::size_t j = 0; j < m.rows(); ++j)
                if (j != i && std::isfinite(dist[j]) && !is_missing(m(j, c))) donors.push_back(j);
            if (donors.size() < k) {
                if (means.empty()) means = observed_means(m);
                out(i, c) = means[c];
                if (warnings)
                    warnings->push_back("row " + std::to_string(i) + ", column " + std::to_string(c) + ": only " +
                                        std::to_string(donors.size()) + " donors for k = " + std::to_string(k) +
                                        "; used the column mean");
                continue;
            }
            std::stable_sort(donors.begin(), donors.end(),
                             [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });
            double sum = 0.0;
            for (std::size_t d = 0; d < k; ++d) sum += m(donors[d], c);
            out(i, c) = sum / static_cast<double>(k);
        }
    }
    return out;
}

std::string_view to_string(DegradationLevel level) {
    switch (level) {
        case DegradationLevel::None: return "none";
        case DegradationLevel::Half: return "half";
        case DegradationLevel::TwoThirds: return "two_thirds";
        case DegradationLevel::ThreeQuarters: return "three_quarters";
    }
    return "?";
}

DegradationLevel degradation_level_from_string(std::string_view name) {
    for (auto l : {DegradationLevel::None, DegradationLevel::Half, DegradationLevel::TwoThirds,
                   DegradationLevel::ThreeQuarters})
        if (to_string(l) == name) return l;
    throw ImputationError("unknown degradation level '" + std::string(name) + "'");
}

std::size_t degradation_stride(DegradationLevel level) {
    switch (level) {
        case DegradationLevel::None: return 1;
        case DegradationLevel::Half: return 2;
        case DegradationLevel::TwoThirds: return 3;
        case DegradationLevel::ThreeQuarters: return 4;
    }
    return 1;
}

std::vector<std::size_t> surviving_months(DegradationLevel level) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < 12; i += degradation_stride(level)) out.push_back(i);
    return out;
}

std::vector<std::size_t> missing_months(DegradationLevel level) {
    const std::size_t s = degradation_stride(level);
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < 12; ++i)
        if (i % s != 0) out.push_back(i);
    return out;
}

MonthlyVector interpolate_periodic(const MonthlyVector& v, DegradationLevel level) {
    const std::size_t s = degradation_stride(level);
    for (std::size_t i = 0; i < 12; ++i) {
        const bool should_miss = i % s != 0;
        if (should_miss != is_missing(v[i]))
            throw ImputationError("month " + std::to_string(i + 1) + " does not match the '" +
                                  std::string(to_string(level)) + "' degradation pattern");
    }
    MonthlyVector out = v;
    for (std::size_t start = 0; start < 12; start += s) {
        const double left = v[start];
        const double right = v[(start + s) % 12];
        for (std::size_t j = 1; j < s; ++j)
            out[start + j] = left == right ? left : (static_cast<double>(s - j) * left + static_cast<double>(j) * right) / static_cast<double>(s);
    }
    return out;
}

}  // namespace symmlp
