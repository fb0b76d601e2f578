#pragma once

#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "symmlp/matrix.hpp"
#include "symmlp/mlp.hpp"
#include "symmlp/recoding.hpp"

namespace symmlp {

/// Probabilities are clamped to this floor before taking logs.
inline constexpr double kProbabilityFloor = 1e-12;

struct LossValue {
    double value = 0.0;
    /// d value / d t
    std::vector<double> gradient;
};

/// sum (t_i - y_i)^2
LossValue quadratic_loss(std::span<const double> y, std::span<const double> t);
/// -sum y_i ln t_i
LossValue cross_entropy_loss(std::span<const double> y, std::span<const double> t);
/// -sum y_i ln t_i over independent per-category outputs. Absent categories
/// (y_i = 0) contribute nothing, which is the likelihood prod T_i^{Y_i} as stated
/// rather than the full Bernoulli one.
LossValue independent_cross_entropy_loss(std::span<const double> y, std::span<const double> t);
/// -l sum p_i ln t_i
LossValue weighted_multinomial_loss(std::span<const double> p, std::span<const double> t, double l);

/// Loss for one block given its targets and outputs.
LossValue block_loss(const OutputBlockSpec& block, std::span<const double> y, std::span<const double> t,
                     double micro_count = 1.0);

struct BlockLossReport {
    std::vector<double> block_losses;
    /// Weighted gradient w.r.t. the full output vector, blocks concatenated.
    std::vector<double> gradient;
    double decay_penalty = 0.0;
    double total = 0.0;
};

/// Weighted sum of block losses for one example. `y` and `t` cover all blocks.
/// Empty `block_weights` means all ones; empty `micro_counts` means l = 1.
BlockLossReport composite_loss(std::span<const OutputBlockSpec> blocks, std::span<const double> y,
                               std::span<const double> t, std::span<const double> block_weights = {},
                               std::span<const double> micro_counts = {});

/// Per-layer weight decay with the first layer's decay divided per input column.
struct DecayPolicy {
    std::vector<double> lambda_per_layer;
    /// One divisor per input column (category count for category-like groups, else 1).
    std::vector<double> first_layer_divisors;

    /// Single lambda for every layer, divisors taken from the encoded input groups.
    static DecayPolicy uniform(double lambda, std::size_t layers, const std::vector<ColumnGroup>& input_groups,
                               std::size_t input_dim);
    static DecayPolicy none() { return {}; }

    bool active() const;
    /// Effective coefficient on w_j^2 for every flat weight (0 for biases).
    std::vector<double> coefficients(const WeightVector& w) const;
    /// sum_j coef_j w_j^2
    double penalty(const WeightVector& w) const;
    /// Adds 2 coef_j w_j into grad.
    void add_gradient(const WeightVector& w, std::span<double> grad) const;

    nlohmann::json to_json() const;
    static DecayPolicy from_json(const nlohmann::json& j);
};

/// Encoded, standardized examples.
struct Dataset {
    Matrix inputs;
    Matrix targets;
    /// rows x blocks; empty means every l = 1.
    Matrix micro_counts;

    std::size_t size() const { return inputs.rows(); }
    Dataset subset(std::span<const std::size_t> rows) const;
};

struct ErrorValue {
    double value = 0.0;
    std::vector<double> gradient;
    double mean_loss = 0.0;
    double penalty = 0.0;
    /// Forward passes in which the exponential cap was hit.
    std::size_t capped_outputs = 0;
};

/// (1/N) sum composite_loss + decay penalty, with gradient w.r.t. all weights.
ErrorValue regularized_empirical_error(const MlpArchitecture& arch, const WeightVector& w, const Dataset& data,
                                       const DecayPolicy& decay, std::span<const double> block_weights = {});

/// (1/N) sum composite_loss, no gradient.
double empirical_error(const MlpArchitecture& arch, const WeightVector& w, const Dataset& data,
                       std::span<const double> block_weights = {});

}  // namespace symmlp
