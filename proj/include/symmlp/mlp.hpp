#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "symmlp/matrix.hpp"
#include "symmlp/recoding.hpp"
#include "symmlp/rng.hpp"

namespace symmlp {

enum class Activation { Identity, Tanh, Logistic, Exponential, Softmax };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view name);

/// Exponential outputs saturate here.
inline constexpr double kExponentialCap = 30.0;

/// Applies an activation to a whole vector (softmax normalizes across it).
/// Returns the number of entries where the exponential cap was hit.
std::size_t activation_apply(Activation kind, std::span<const double> u, std::span<double> out);
std::vector<double> activation_apply(Activation kind, std::span<const double> u);

struct HiddenLayer {
    std::size_t size = 1;
    Activation activation = Activation::Tanh;
    bool operator==(const HiddenLayer&) const = default;
};

/// A contiguous range of output units sharing one activation.
struct ActivationSegment {
    std::size_t begin;
    std::size_t end;
    Activation activation;
};

/// Output activations implied by a block: identity for linear/interval-mean units,
/// exponential for a plain interval length, softmax or logistic for categorical blocks.
std::vector<ActivationSegment> block_activations(const OutputBlockSpec& block);

struct MlpArchitecture {
    std::size_t input_dim = 1;
    std::vector<HiddenLayer> hidden;
    std::vector<OutputBlockSpec> outputs;

    std::size_t output_dim() const;
    std::size_t layer_count() const { return hidden.size() + 1; }
    std::size_t fan_in(std::size_t layer) const;
    std::size_t fan_out(std::size_t layer) const;
    std::vector<ActivationSegment> output_segments() const;

    /// Throws DimensionError when sizes are zero or output blocks do not partition the output layer.
    void validate() const;

    /// One hidden layer of `hidden_size` tanh units feeding a single linear output.
    static MlpArchitecture single_hidden_regression(std::size_t input_dim, std::size_t hidden_size,
                                                    std::size_t outputs = 1);

    bool operator==(const MlpArchitecture&) const = default;
};

/// Exact parameter count: sum over layers of (fan_in + 1) * fan_out.
std::size_t count_weights(const MlpArchitecture& arch);
/// Parameter count of a single-hidden-layer net with n inputs, q hidden and p outputs.
constexpr std::size_t count_weights(std::size_t n, std::size_t q, std::size_t p) {
    return (n + 1) * q + (q + 1) * p;
}

/// Flat parameter storage. For each layer, neuron-major rows of (bias, w_1..w_fan_in).
class WeightVector {
public:
    WeightVector() = default;
    explicit WeightVector(const MlpArchitecture& arch);
    WeightVector(const MlpArchitecture& arch, std::vector<double> values);

    std::size_t size() const { return values_.size(); }
    std::size_t layer_count() const { return offsets_.size(); }
    /// Flat position of (layer, neuron, input); input 0 is the bias, 1..fan_in the incoming weights.
    std::size_t index(std::size_t layer, std::size_t neuron, std::size_t input) const;
    std::size_t layer_offset(std::size_t layer) const { return offsets_[layer]; }
    std::size_t layer_fan_in(std::size_t layer) const { return fan_in_[layer]; }
    std::size_t layer_fan_out(std::size_t layer) const { return fan_out_[layer]; }
    bool is_bias(std::size_t flat) const;

    double operator[](std::size_t i) const { return values_[i]; }
    double& operator[](std::size_t i) { return values_[i]; }
    std::span<double> span() { return values_; }
    std::span<const double> span() const { return values_; }
    const std::vector<double>& values() const { return values_; }
    std::vector<double>& values() { return values_; }

    bool operator==(const WeightVector& o) const { return values_ == o.values_ && offsets_ == o.offsets_; }

private:
    std::vector<double> values_;
    std::vector<std::size_t> offsets_;
    std::vector<std::size_t> fan_in_;
    std::vector<std::size_t> fan_out_;
};

/// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] per layer.
WeightVector initialize_weights(const MlpArchitecture& arch, Rng& rng);

/// Pre-activations U and post-activations Z per layer; post[0] is the input.
struct ActivationTrace {
    std::vector<std::vector<double>> pre;
    std::vector<std::vector<double>> post;
    std::size_t capped = 0;

    std::span<const double> output() const { return post.back(); }
};

ActivationTrace forward(const MlpArchitecture& arch, const WeightVector& w, std::span<const double> x);
/// Same as forward() but reuses the trace's storage.
void forward_into(const MlpArchitecture& arch, const WeightVector& w, std::span<const double> x,
                  ActivationTrace& trace);

/// Gradient of a scalar loss w.r.t. the weights, given dLoss/dOutput.
std::vector<double> backward(const MlpArchitecture& arch, const WeightVector& w, const ActivationTrace& trace,
                             std::span<const double> output_gradient);
/// Adds the gradient into `gradient` (size = weight count). `scratch` holds per-layer deltas.
void backward_accumulate(const MlpArchitecture& arch, const WeightVector& w, const ActivationTrace& trace,
                         std::span<const double> output_gradient, std::span<double> gradient,
                         std::vector<std::vector<double>>& scratch);

/// Network outputs for every row of `inputs`.
Matrix predict(const MlpArchitecture& arch, const WeightVector& w, const Matrix& inputs);

nlohmann::json to_json(const MlpArchitecture& arch);
MlpArchitecture architecture_from_json(const nlohmann::json& j);
/// {"architecture": ..., "weights": [...]}; doubles round-trip bit-exactly.
nlohmann::json weights_to_json(const MlpArchitecture& arch, const WeightVector& w);
WeightVector weights_from_json(const nlohmann::json& j, MlpArchitecture* arch_out = nullptr);

}  // namespace symmlp
