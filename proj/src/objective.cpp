#include "symmlp/objective.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

namespace symmlp {

namespace {

void require_same_length(std::span<const double> y, std::span<const double> t, const char* what) {
    if (y.size() != t.size())
        throw DimensionError(std::string(what) + ": length mismatch (" + std::to_string(y.size()) + " vs " +
                             std::to_string(t.size()) + ")");
}

LossValue log_loss(std::span<const double> y, std::span<const double> t, double weight) {
    LossValue out{0.0, std::vector<double>(t.size(), 0.0)};
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (y[i] == 0.0) continue;
        const double ti = std::max(t[i], kProbabilityFloor);
        out.value -= weight * y[i] * std::log(ti);
        if (t[i] > kProbabilityFloor) out.gradient[i] = -weight * y[i] / t[i];
    }
    return out;
}

}  // namespace

LossValue quadratic_loss(std::span<const double> y, std::span<const double> t) {
    require_same_length(y, t, "quadratic_loss");
    LossValue out{0.0, std::vector<double>(t.size())};
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double d = t[i] - y[i];
        out.value += d * d;
        out.gradient[i] = 2.0 * d;
    }
    return out;
}

LossValue cross_entropy_loss(std::span<const double> y, std::span<const double> t) {
    require_same_length(y, t, "cross_entropy_loss");
    return log_loss(y, t, 1.0);
}

LossValue independent_cross_entropy_loss(std::span<const double> y, std::span<const double> t) {
    require_same_length(y, t, "independent_cross_entropy_loss");
    return log_loss(y, t, 1.0);
}

LossValue weighted_multinomial_loss(std::span<const double> p, std::span<const double> t, double l) {
    require_same_length(p, t, "weighted_multinomial_loss");
    if (!(l > 0.0)) throw DimensionError("weighted_multinomial_loss: weight l must be positive");
    return log_loss(p, t, l);
}

LossValue block_loss(const OutputBlockSpec& block, std::span<const double> y, std::span<const double> t,
                     double micro_count) {
    switch (block.kind) {
        case BlockKind::LinearQuadratic:
        case BlockKind::IntervalMeanLength:
        case BlockKind::IntervalMeanLogLength: return quadratic_loss(y, t);
        case BlockKind::SoftmaxCrossEntropy: return cross_entropy_loss(y, t);
        case BlockKind::LogisticIndependent: return independent_cross_entropy_loss(y, t);
        case BlockKind::ModalSoftmax:
            return weighted_multinomial_loss(y, t, block.micro_weighted ? micro_count : 1.0);
    }
    return {};
}

BlockLossReport composite_loss(std::span<const OutputBlockSpec> blocks, std::span<const double> y,
                               std::span<const double> t, std::span<const double> block_weights,
                               std::span<const double> micro_counts) {
    require_same_length(y, t, "composite_loss");
    if (!block_weights.empty() && block_weights.size() != blocks.size())
        throw DimensionError("composite_loss: one weight per block is required");
    BlockLossReport out;
    out.gradient.assign(t.size(), 0.0);
    for (std::size_t k = 0; k < blocks.size(); ++k) {
        const auto& b = blocks[k];
        if (b.end > t.size()) throw DimensionError("composite_loss: block exceeds output width");
        const double weight = block_weights.empty() ? 1.0 : block_weights[k];
        const double l = micro_counts.empty() ? 1.0 : micro_counts[k];
        auto loss = block_loss(b, y.subspan(b.begin, b.width()), t.subspan(b.begin, b.width()), l);
        out.block_losses.push_back(loss.value);
        out.total += weight * loss.value;
        for (std::size_t i = 0; i < b.width(); ++i) out.gradient[b.begin + i] += weight * loss.gradient[i];
    }
    return out;
}

DecayPolicy DecayPolicy::uniform(double lambda, std::size_t layers, const std::vector<ColumnGroup>& input_groups,
                                 std::size_t input_dim) {
    DecayPolicy d;
    d.lambda_per_layer.assign(layers, lambda);
    d.first_layer_divisors.assign(input_dim, 1.0);
    for (const auto& g : input_groups)
        for (std::size_t c = g.begin; c < g.end && c < input_dim; ++c) d.first_layer_divisors[c] = g.decay_divisor;
    return d;
}

bool DecayPolicy::active() const {
    return std::any_of(lambda_per_layer.begin(), lambda_per_layer.end(), [](double l) { return l != 0.0; });
}

std::vector<double> DecayPolicy::coefficients(const WeightVector& w) const {
    std::vector<double> coef(w.size(), 0.0);
    if (!active()) return coef;
    if (lambda_per_layer.size() != w.layer_count())
        throw DimensionError("decay policy needs one lambda per layer");
    if (!first_layer_divisors.empty() && first_layer_divisors.size() != w.layer_fan_in(0))
        throw DimensionError("decay policy needs one divisor per input column");
    for (std::size_t l = 0; l < w.layer_count(); ++l) {
        const std::size_t fin = w.layer_fan_in(l);
        for (std::size_t j = 0; j < w.layer_fan_out(l); ++j)
            for (std::size_t i = 1; i <= fin; ++i) {
                double divisor = 1.0;
                if (l == 0 && !first_layer_divisors.empty()) divisor = first_layer_divisors[i - 1];
                coef[w.index(l, j, i)] = lambda_per_layer[l] / divisor;
            }
    }
    return coef;
}

double DecayPolicy::penalty(const WeightVector& w) const {
    if (!active()) return 0.0;
    const auto coef = coefficients(w);
    double p = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) p += coef[j] * w[j] * w[j];
    return p;
}

void DecayPolicy::add_gradient(const WeightVector& w, std::span<double> grad) const {
    if (!active()) return;
    const auto coef = coefficients(w);
    for (std::size_t j = 0; j < w.size(); ++j) grad[j] += 2.0 * coef[j] * w[j];
}

nlohmann::json DecayPolicy::to_json() const {
    return {{"lambda_per_layer", lambda_per_layer}, {"first_layer_divisors", first_layer_divisors}};
}

DecayPolicy DecayPolicy::from_json(const nlohmann::json& j) {
    DecayPolicy d;
    d.lambda_per_layer = j.value("lambda_per_layer", std::vector<double>{});
    d.first_layer_divisors = j.value("first_layer_divisors", std::vector<double>{});
    for (double l : d.lambda_per_layer)
        if (l < 0.0) throw DimensionError("decay lambda must be non-negative");
    for (double v : d.first_layer_divisors)
        if (v < 1.0) throw DimensionError("decay divisors must be >= 1");
    return d;
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
    Dataset out;
    out.inputs = inputs.select_rows(rows);
    out.targets = targets.select_rows(rows);
    if (!micro_counts.empty()) out.micro_counts = micro_counts.select_rows(rows);
    return out;
}

ErrorValue regularized_empirical_error(const MlpArchitecture& arch, const WeightVector& w, const Dataset& data,
                                       const DecayPolicy& decay, std::span<const double> block_weights) {
    const std::size_t n = data.size();
    if (n == 0) throw DimensionError("empirical error over an empty dataset");
    if (data.targets.rows() != n || data.targets.cols() != arch.output_dim())
        throw DimensionError("dataset targets do not match the architecture's outputs");
    ErrorValue out;
    out.gradient.assign(w.size(), 0.0);
    ActivationTrace trace;
    std::vector<std::vector<double>> scratch;
    double sum = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        forward_into(arch, w, data.inputs.row(r), trace);
        if (trace.capped) ++out.capped_outputs;
        std::span<const double> micro =
            data.micro_counts.empty() ? std::span<const double>{} : data.micro_counts.row(r);
        auto loss = composite_loss(arch.outputs, data.targets.row(r), trace.output(), block_weights, micro);
        sum += loss.total;
        backward_accumulate(arch, w, trace, loss.gradient, out.gradient, scratch);
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    for (double& g : out.gradient) g *= inv_n;
    out.mean_loss = sum * inv_n;
    out.penalty = decay.penalty(w);
    decay.add_gradient(w, out.gradient);
    out.value = out.mean_loss + out.penalty;
    return out;
}

double empirical_error(const MlpArchitecture& arch, const WeightVector& w, const Dataset& data,
                       std::span<const double> block_weights) {
    const std::size_t n = data.size();
    if (n == 0) throw DimensionError("empirical error over an empty dataset");
    ActivationTrace trace;
    double sum = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        forward_into(arch, w, data.inputs.row(r), trace);
        std::span<const double> micro =
            data.micro_counts.empty() ? std::span<const double>{} : data.micro_counts.row(r);
        sum += composite_loss(arch.outputs, data.targets.row(r), trace.output(), block_weights, micro).total;
    }
    return sum / static_cast<double>(n);
}

}  // namespace symmlp
