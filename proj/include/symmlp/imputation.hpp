#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "symmlp/matrix.hpp"

namespace symmlp {

class ImputationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Each missing (NaN) entry becomes the mean of its column's observed entries.
Matrix impute_mean(const Matrix& m);

/// Each missing entry becomes the average of that coordinate over the k nearest rows
/// observing it. Distance between rows is the root mean squared difference over the
/// coordinates both rows observe. Cells with fewer than k donors fall back to the
/// column mean and add a line to `warnings`.
Matrix impute_knn(const Matrix& m, std::size_t k, std::vector<std::string>* warnings = nullptr);

/// Regular removal of monthly coordinates: keep one month out of 2, 3 or 4.
enum class DegradationLevel { None, Half, TwoThirds, ThreeQuarters };

std::string_view to_string(DegradationLevel level);
DegradationLevel degradation_level_from_string(std::string_view name);
/// Distance between surviving months (1 for None).
std::size_t degradation_stride(DegradationLevel level);
/// 0-based indices of the months removed at a level.
std::vector<std::size_t> missing_months(DegradationLevel level);
/// 0-based indices of the months kept at a level.
std::vector<std::size_t> surviving_months(DegradationLevel level);

using MonthlyVector = std::array<double, 12>;

/// Fills the level's missing months by linear interpolation between the surviving
/// neighbours, wrapping December back to January. The NaN pattern must match the level.
MonthlyVector interpolate_periodic(const MonthlyVector& v, DegradationLevel level);

}  // namespace symmlp
