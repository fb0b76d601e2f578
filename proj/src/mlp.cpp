#include "symmlp/mlp.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

namespace symmlp {

using nlohmann::json;

std::string_view to_string(Activation a) {
    switch (a) {
        case Activation::Identity: return "identity";
        case Activation::Tanh: return "tanh";
        case Activation::Logistic: return "logistic";
        case Activation::Exponential: return "exponential";
        case Activation::Softmax: return "softmax";
    }
    return "?";
}

Activation activation_from_string(std::string_view name) {
    for (auto a : {Activation::Identity, Activation::Tanh, Activation::Logistic, Activation::Exponential,
                   Activation::Softmax})
        if (to_string(a) == name) return a;
    throw DimensionError("unknown activation '" + std::string(name) + "'");
}

std::size_t activation_apply(Activation kind, std::span<const double> u, std::span<double> out) {
    std::size_t capped = 0;
    switch (kind) {
        case Activation::Identity: std::copy(u.begin(), u.end(), out.begin()); break;
        case Activation::Tanh:
            for (std::size_t i = 0; i < u.size(); ++i) out[i] = std::tanh(u[i]);
            break;
        case Activation::Logistic:
            for (std::size_t i = 0; i < u.size(); ++i)
                out[i] = u[i] >= 0.0 ? 1.0 / (1.0 + std::exp(-u[i])) : std::exp(u[i]) / (1.0 + std::exp(u[i]));
            break;
        case Activation::Exponential:
            for (std::size_t i = 0; i < u.size(); ++i) {
                if (u[i] > kExponentialCap) ++capped;
                out[i] = std::exp(std::min(u[i], kExponentialCap));
            }
            break;
        case Activation::Softmax: {
            if (u.empty()) break;
            const double top = *std::max_element(u.begin(), u.end());
            double sum = 0.0;
            for (std::size_t i = 0; i < u.size(); ++i) {
                out[i] = std::exp(u[i] - top);
                sum += out[i];
            }
            for (std::size_t i = 0; i < u.size(); ++i) out[i] /= sum;
            break;
        }
    }
    return capped;
}

std::vector<double> activation_apply(Activation kind, std::span<const double> u) {
    std::vector<double> out(u.size());
    activation_apply(kind, u, out);
    return out;
}

std::vector<ActivationSegment> block_activations(const OutputBlockSpec& b) {
    switch (b.kind) {
        case BlockKind::LinearQuadratic:
        case BlockKind::IntervalMeanLogLength: return {{b.begin, b.end, Activation::Identity}};
        case BlockKind::IntervalMeanLength:
            return {{b.begin, b.begin + 1, Activation::Identity}, {b.begin + 1, b.end, Activation::Exponential}};
        case BlockKind::SoftmaxCrossEntropy:
        case BlockKind::ModalSoftmax: return {{b.begin, b.end, Activation::Softmax}};
        case BlockKind::LogisticIndependent: return {{b.begin, b.end, Activation::Logistic}};
    }
    return {};
}

std::size_t MlpArchitecture::output_dim() const {
    std::size_t d = 0;
    for (const auto& b : outputs) d = std::max(d, b.end);
    return d;
}

std::size_t MlpArchitecture::fan_in(std::size_t layer) const {
    return layer == 0 ? input_dim : hidden[layer - 1].size;
}

std::size_t MlpArchitecture::fan_out(std::size_t layer) const {
    return layer < hidden.size() ? hidden[layer].size : output_dim();
}

std::vector<ActivationSegment> MlpArchitecture::output_segments() const {
    std::vector<ActivationSegment> out;
    for (const auto& b : outputs) {
        auto segs = block_activations(b);
        out.insert(out.end(), segs.begin(), segs.end());
    }
    return out;
}

void MlpArchitecture::validate() const {
    if (input_dim == 0) throw DimensionError("architecture: input dimension must be >= 1");
    for (const auto& h : hidden)
        if (h.size == 0) throw DimensionError("architecture: hidden layer size must be >= 1");
    if (outputs.empty()) throw DimensionError("architecture: at least one output block is required");
    std::vector<const OutputBlockSpec*> sorted;
    for (const auto& b : outputs) sorted.push_back(&b);
    std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->begin < b->begin; });
    std::size_t expect = 0;
    for (const auto* b : sorted) {
        if (b->begin != expect || b->end <= b->begin)
            throw DimensionError("architecture: output blocks must partition the output layer");
        if ((b->kind == BlockKind::IntervalMeanLength || b->kind == BlockKind::IntervalMeanLogLength) &&
            b->width() != 2)
            throw DimensionError("architecture: interval blocks need two outputs");
        if (b->kind == BlockKind::LinearQuadratic && b->width() != 1)
            throw DimensionError("architecture: linear blocks need one output");
        expect = b->end;
    }
}

MlpArchitecture MlpArchitecture::single_hidden_regression(std::size_t input_dim, std::size_t hidden_size,
                                                          std::size_t outputs) {
    MlpArchitecture a;
    a.input_dim = input_dim;
    a.hidden.push_back({hidden_size, Activation::Tanh});
    for (std::size_t i = 0; i < outputs; ++i)
        a.outputs.push_back({"y" + std::to_string(i), i, i + 1, BlockKind::LinearQuadratic, false});
    return a;
}

std::size_t count_weights(const MlpArchitecture& arch) {
    std::size_t total = 0;
    for (std::size_t l = 0; l < arch.layer_count(); ++l) total += (arch.fan_in(l) + 1) * arch.fan_out(l);
    return total;
}

WeightVector::WeightVector(const MlpArchitecture& arch) {
    arch.validate();
    std::size_t offset = 0;
    for (std::size_t l = 0; l < arch.layer_count(); ++l) {
        offsets_.push_back(offset);
        fan_in_.push_back(arch.fan_in(l));
        fan_out_.push_back(arch.fan_out(l));
        offset += (arch.fan_in(l) + 1) * arch.fan_out(l);
    }
    values_.assign(offset, 0.0);
}

WeightVector::WeightVector(const MlpArchitecture& arch, std::vector<double> values) : WeightVector(arch) {
    if (values.size() != values_.size())
        throw DimensionError("weight vector has " + std::to_string(values.size()) + " entries, architecture needs " +
                             std::to_string(values_.size()));
    values_ = std::move(values);
}

std::size_t WeightVector::index(std::size_t layer, std::size_t neuron, std::size_t input) const {
    return offsets_[layer] + neuron * (fan_in_[layer] + 1) + input;
}

bool WeightVector::is_bias(std::size_t flat) const {
    std::size_t l = offsets_.size();
    while (l > 0 && offsets_[l - 1] > flat) --l;
    const std::size_t local = flat - offsets_[l - 1];
    return local % (fan_in_[l - 1] + 1) == 0;
}

WeightVector initialize_weights(const MlpArchitecture& arch, Rng& rng) {
    WeightVector w(arch);
    for (std::size_t l = 0; l < w.layer_count(); ++l) {
        const double r = 1.0 / std::sqrt(static_cast<double>(w.layer_fan_in(l)));
        const std::size_t n = (w.layer_fan_in(l) + 1) * w.layer_fan_out(l);
        for (std::size_t i = 0; i < n; ++i) w[w.layer_offset(l) + i] = uniform(rng, -r, r);
    }
    return w;
}

void forward_into(const MlpArchitecture& arch, const WeightVector& w, std::span<const double> x,
                  ActivationTrace& trace) {
    if (x.size() != arch.input_dim)
        throw DimensionError("forward: input has " + std::to_string(x.size()) + " entries, expected " +
                             std::to_string(arch.input_dim));
    const std::size_t layers = arch.layer_count();
    if (w.layer_count() != layers) throw DimensionError("forward: weights do not match architecture");
    trace.pre.resize(layers);
    trace.post.resize(layers + 1);
    trace.post[0].assign(x.begin(), x.end());
    trace.capped = 0;
    const auto& values = w.values();
    for (std::size_t l = 0; l < layers; ++l) {
        const std::size_t fin = w.layer_fan_in(l), fout = w.layer_fan_out(l);
        const auto& in = trace.post[l];
        auto& u = trace.pre[l];
        u.resize(fout);
        const double* row = values.data() + w.layer_offset(l);
        for (std::size_t j = 0; j < fout; ++j, row += fin + 1) {
            double acc = row[0];
            for (std::size_t i = 0; i < fin; ++i) acc += row[i + 1] * in[i];
            u[j] = acc;
        }
        auto& z = trace.post[l + 1];
        z.resize(fout);
        if (l + 1 < layers) {
            activation_apply(arch.hidden[l].activation, u, z);
        } else {
            for (const auto& seg : arch.output_segments()) {
                std::span<const double> us(u.data() + seg.begin, seg.end - seg.begin);
                std::span<double> zs(z.data() + seg.begin, seg.end - seg.begin);
                trace.capped += activation_apply(seg.activation, us, zs);
            }
        }
    }
}

ActivationTrace forward(const MlpArchitecture& arch, const WeightVector& w, std::span<const double> x) {
    ActivationTrace t;
    forward_into(arch, w, x, t);
    return t;
}

namespace {

// delta = J^T g for an activation evaluated at (u, z).
void activation_backprop(Activation a, std::span<const double> u, std::span<const double> z,
                         std::span<const double> g, std::span<double> delta) {
    switch (a) {
        case Activation::Identity: std::copy(g.begin(), g.end(), delta.begin()); break;
        case Activation::Tanh:
            for (std::size_t i = 0; i < g.size(); ++i) delta[i] = (1.0 - z[i] * z[i]) * g[i];
            break;
        case Activation::Logistic:
            for (std::size_t i = 0; i < g.size(); ++i) delta[i] = z[i] * (1.0 - z[i]) * g[i];
            break;
        case Activation::Exponential:
            for (std::size_t i = 0; i < g.size(); ++i) delta[i] = u[i] > kExponentialCap ? 0.0 : z[i] * g[i];
            break;
        case Activation::Softmax: {
            double dot = 0.0;
            for (std::size_t i = 0; i < g.size(); ++i) dot += z[i] * g[i];
            for (std::size_t i = 0; i < g.size(); ++i) delta[i] = z[i] * (g[i] - dot);
            break;
        }
    }
}

}  // namespace

void backward_accumulate(const MlpArchitecture& arch, const WeightVector& w, const ActivationTrace& trace,
                         std::span<const double> output_gradient, std::span<double> gradient,
                         std::vector<std::vector<double>>& scratch) {
    const std::size_t layers = arch.layer_count();
    if (trace.pre.size() != layers || trace.post.size() != layers + 1)
        throw DimensionError("backward: trace does not match architecture");
    if (output_gradient.size() != arch.output_dim())
        throw DimensionError("backward: output gradient has wrong length");
    if (gradient.size() != w.size()) throw DimensionError("backward: gradient buffer has wrong length");
    scratch.resize(layers);

    auto& top = scratch[layers - 1];
    top.resize(arch.output_dim());
    for (const auto& seg : arch.output_segments()) {
        const std::size_t n = seg.end - seg.begin;
        activation_backprop(seg.activation, {trace.pre.back().data() + seg.begin, n},
                            {trace.post.back().data() + seg.begin, n}, output_gradient.subspan(seg.begin, n),
                            {top.data() + seg.begin, n});
    }

    const auto& values = w.values();
    for (std::size_t l = layers; l-- > 0;) {
        const std::size_t fin = w.layer_fan_in(l), fout = w.layer_fan_out(l);
        const auto& delta = scratch[l];
        const auto& in = trace.post[l];
        double* grow = gradient.data() + w.layer_offset(l);
        for (std::size_t j = 0; j < fout; ++j, grow += fin + 1) {
            const double d = delta[j];
            if (d == 0.0) continue;
            grow[0] += d;
            for (std::size_t i = 0; i < fin; ++i) grow[i + 1] += d * in[i];
        }
        if (l == 0) break;
        auto& below = scratch[l - 1];
        below.assign(fin, 0.0);
        const double* row = values.data() + w.layer_offset(l);
        for (std::size_t j = 0; j < fout; ++j, row += fin + 1) {
            const double d = delta[j];
            if (d == 0.0) continue;
            for (std::size_t i = 0; i < fin; ++i) below[i] += row[i + 1] * d;
        }
        std::vector<double> g = below;
        activation_backprop(arch.hidden[l - 1].activation, trace.pre[l - 1], trace.post[l], g, below);
    }
}

std::vector<double> backward(const MlpArchitecture& arch, const WeightVector& w, const ActivationTrace& trace,
                             std::span<const double> output_gradient) {
    std::vector<double> grad(w.size(), 0.0);
    std::vector<std::vector<double>> scratch;
    backward_accumulate(arch, w, trace, output_gradient, grad, scratch);
    return grad;
}

Matrix predict(const MlpArchitecture& arch, const WeightVector& w, const Matrix& inputs) {
    Matrix out(inputs.rows(), arch.output_dim());
    ActivationTrace trace;
    for (std::size_t r = 0; r < inputs.rows(); ++r) {
        forward_into(arch, w, inputs.row(r), trace);
        std::copy(trace.post.back().begin(), trace.post.back().end(), out.row(r).begin());
    }
    return out;
}

json to_json(const MlpArchitecture& arch) {
    json hidden = json::array();
    for (const auto& h : arch.hidden) hidden.push_back({{"size", h.size}, {"activation", to_string(h.activation)}});
    json outputs = json::array();
    for (const auto& b : arch.outputs) outputs.push_back(to_json(b));
    return json{{"input_dim", arch.input_dim}, {"hidden", std::move(hidden)}, {"outputs", std::move(outputs)}};
}

MlpArchitecture architecture_from_json(const json& j) {
    MlpArchitecture a;
    a.input_dim = j.at("input_dim").get<std::size_t>();
    for (const auto& h : j.at("hidden"))
        a.hidden.push_back({h.at("size").get<std::size_t>(),
                            activation_from_string(h.value("activation", std::string("tanh")))});
    for (const auto& b : j.at("outputs")) a.outputs.push_back(output_block_from_json(b));
    a.validate();
    return a;
}

json weights_to_json(const MlpArchitecture& arch, const WeightVector& w) {
    return json{{"architecture", to_json(arch)}, {"weights", w.values()}};
}

WeightVector weights_from_json(const json& j, MlpArchitecture* arch_out) {
    auto arch = architecture_from_json(j.at("architecture"));
    WeightVector w(arch, j.at("weights").get<std::vector<double>>());
    if (arch_out) *arch_out = std::move(arch);
    return w;
}

}  // namespace symmlp
