#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "symmlp/mlp.hpp"
#include "symmlp/objective.hpp"

namespace symmlp {

enum class Optimizer { ConjugateGradient, Bfgs, GradientDescent };

std::string_view to_string(Optimizer o);
Optimizer optimizer_from_string(std::string_view name);

enum class StopReason { GradientTolerance, MaxIterations, EarlyStopping, LineSearchFailure, NonFinite };

std::string_view to_string(StopReason r);

struct MinimizeOptions {
    Optimizer optimizer = Optimizer::ConjugateGradient;
    std::size_t max_iterations = 500;
    double gradient_tolerance = 1e-6;
    /// Armijo sufficient-decrease constant.
    double armijo_c = 1e-4;
};

/// Value at w; writes the gradient into grad (same size as w).
using ObjectiveFn = std::function<double(std::span<const double> w, std::span<double> grad)>;
/// Called after each accepted step with (iteration, w, value); return false to stop.
using IterationCallback = std::function<bool(std::size_t, std::span<const double>, double)>;

struct MinimizeResult {
    std::vector<double> w;
    double value = 0.0;
    double gradient_norm = 0.0;
    std::size_t iterations = 0;
    std::size_t evaluations = 0;
    StopReason reason = StopReason::MaxIterations;
    /// Objective after each accepted step; entry 0 is the starting value.
    std::vector<double> values;
};

class OptimizationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Line-search minimization. Polak-Ribiere CG restarts every dim iterations;
/// steps satisfy the Armijo condition and start from a quadratic-interpolation guess,
/// so quadratics are minimized exactly along each direction.
/// Throws OptimizationError if the objective is not finite at w0.
MinimizeResult minimize(const ObjectiveFn& f, std::vector<double> w0, const MinimizeOptions& options,
                        const IterationCallback& callback = {});

struct EarlyStoppingConfig {
    bool enabled = true;
    std::size_t patience = 50;
};

/// Tracks validation error per iteration and keeps the best snapshot.
class EarlyStoppingMonitor {
public:
    explicit EarlyStoppingMonitor(EarlyStoppingConfig config) : config_(config) {}

    /// Records a validation value; returns false once patience is exhausted.
    bool observe(std::size_t iteration, std::span<const double> w, double validation_error);

    double best_error() const { return best_error_; }
    std::size_t best_iteration() const { return best_iteration_; }
    const std::vector<double>& best_weights() const { return best_weights_; }
    const std::vector<double>& curve() const { return curve_; }
    bool exhausted() const { return exhausted_; }

private:
    EarlyStoppingConfig config_;
    double best_error_ = std::numeric_limits<double>::infinity();
    std::size_t best_iteration_ = 0;
    std::vector<double> best_weights_;
    std::vector<double> curve_;
    bool exhausted_ = false;
};

struct TrainConfig {
    Optimizer optimizer = Optimizer::ConjugateGradient;
    std::size_t max_iterations = 500;
    double gradient_tolerance = 1e-6;
    std::size_t restarts = 1;
    std::uint64_t seed = 0;
    DecayPolicy decay;
    /// Per-block loss weights; empty means all ones.
    std::vector<double> block_weights;
    EarlyStoppingConfig early_stopping;
    /// Worker threads for restarts; results do not depend on it.
    std::size_t jobs = 1;

    void validate() const;
    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);
};

struct RestartTrace {
    std::vector<double> train_curve;
    std::vector<double> validation_curve;
    std::size_t best_iteration = 0;
    double best_validation_error = 0.0;
    double final_train_error = 0.0;
    std::size_t iterations = 0;
    StopReason stop_reason = StopReason::MaxIterations;
    std::string diagnostic;
    bool failed = false;
};

struct FitReport {
    MlpArchitecture architecture;
    WeightVector best_weights;
    std::size_t best_restart = 0;
    double best_validation_error = 0.0;
    std::vector<RestartTrace> restarts;
    double wall_time_seconds = 0.0;

    /// Timing is left out unless requested so reports stay byte-reproducible.
    nlohmann::json to_json(bool include_timing = false) const;
};

/// Trains from config.restarts random starts, keeping per restart the weights with the
/// lowest validation error, and across restarts the best of those.
FitReport train(const MlpArchitecture& arch, const Dataset& train_set, const Dataset& validation_set,
                const TrainConfig& config);

/// Runs `count` independent jobs on up to `jobs` threads; job i writes only its own slot.
void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& body);

}  // namespace symmlp
