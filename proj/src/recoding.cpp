#include "symmlp/recoding.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

namespace symmlp {

using nlohmann::json;

namespace {

constexpr double kSoftmaxSumTolerance = 1e-6;

template <class T>
const T& expect(const VariableSpec& spec, const SymbolicValue& v, const char* what) {
    if (is_missing(v))
        throw EncodingError("variable '" + spec.name +
                            "' has a Missing cell; impute it before encoding (see impute_mean / impute_knn)");
    const T* p = std::get_if<T>(&v);
    if (!p) throw EncodingError("variable '" + spec.name + "': expected " + what + " value");
    return *p;
}

std::size_t argmax_lowest(std::span<const double> t) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < t.size(); ++i)
        if (t[i] > t[best]) best = i;
    return best;
}

}  // namespace

std::string_view to_string(CodingTag tag) {
    switch (tag) {
        case CodingTag::Identity: return "identity";
        case CodingTag::Disjunctive: return "disjunctive";
        case CodingTag::Rank: return "rank";
        case CodingTag::MeanLength: return "mean_length";
        case CodingTag::MeanLogLength: return "mean_log_length";
        case CodingTag::Bounds: return "bounds";
        case CodingTag::Multi01: return "multi01";
        case CodingTag::ModalProbs: return "modal_probs";
        case CodingTag::Taxonomy: return "taxonomy";
    }
    return "?";
}

CodingTag coding_tag_from_string(std::string_view name) {
    for (auto tag : {CodingTag::Identity, CodingTag::Disjunctive, CodingTag::Rank, CodingTag::MeanLength,
                     CodingTag::MeanLogLength, CodingTag::Bounds, CodingTag::Multi01, CodingTag::ModalProbs,
                     CodingTag::Taxonomy})
        if (to_string(tag) == name) return tag;
    throw EncodingError("unknown coding mode '" + std::string(name) + "'");
}

bool is_category_like(CodingTag tag) {
    return tag == CodingTag::Disjunctive || tag == CodingTag::Multi01 || tag == CodingTag::ModalProbs ||
           tag == CodingTag::Taxonomy;
}

std::vector<double> encode_quantitative(double x) {
    if (!std::isfinite(x)) throw EncodingError("quantitative value is not finite");
    return {x};
}

std::vector<double> encode_categorical_single(const VariableSpec& spec, const value::Category& v) {
    const std::size_t m = spec.category_count();
    if (v.index >= m)
        throw EncodingError("category index " + std::to_string(v.index) + " out of range for '" + spec.name + "'");
    if (spec.ordered) return {static_cast<double>(v.index + 1)};
    std::vector<double> out(m, 0.0);
    out[v.index] = 1.0;
    return out;
}

std::vector<double> encode_interval(const value::Interval& v, IntervalMode mode) {
    if (!(std::isfinite(v.a) && std::isfinite(v.b)) || v.a > v.b) throw EncodingError("invalid interval");
    const double mid = (v.a + v.b) / 2.0;
    const double length = v.b - v.a;
    switch (mode) {
        case IntervalMode::MeanLength: return {mid, length};
        case IntervalMode::Bounds: return {v.a, v.b};
        case IntervalMode::MeanLogLength:
            if (!(length > 0.0)) throw EncodingError("degenerate interval; use mean_length");
            return {mid, std::log(length)};
    }
    return {};
}

std::vector<double> encode_categorical_multi(const VariableSpec& spec, const value::CategorySet& v) {
    if (v.indices.empty()) throw EncodingError("category set for '" + spec.name + "' is empty");
    std::vector<double> out(spec.category_count(), 0.0);
    for (auto i : v.indices) {
        if (i >= out.size()) throw EncodingError("category index out of range for '" + spec.name + "'");
        out[i] = 1.0;
    }
    return out;
}

std::vector<double> encode_modal(const VariableSpec& spec, const value::Distribution& v) {
    auto check = validate_value(spec, v);
    if (!check) throw EncodingError("variable '" + spec.name + "': " + check.reasons.front());
    return v.p;
}

std::vector<double> encode_taxonomy(const VariableSpec& spec, std::string_view node) {
    if (!spec.taxonomy) throw EncodingError("variable '" + spec.name + "' has no taxonomy");
    const TaxonomyNode* hit = spec.taxonomy->find(node);
    if (!hit) throw EncodingError("unknown taxonomy node '" + std::string(node) + "'");
    std::vector<double> out(spec.category_count(), 0.0);
    for (const auto& leaf : hit->leaves()) out[*spec.category_index(leaf)] = 1.0;
    return out;
}

std::vector<double> EncodedMatrix::column_divisors() const {
    std::vector<double> out(values.cols(), 1.0);
    for (const auto& g : groups)
        for (std::size_t c = g.begin; c < g.end; ++c) out[c] = g.decay_divisor;
    return out;
}

CodingModes parse_coding_modes(const json& j) {
    if (!j.is_object()) throw EncodingError("coding modes must be a JSON object");
    CodingModes modes;
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!it.value().is_string()) throw EncodingError("coding mode for '" + it.key() + "' must be a string");
        modes[it.key()] = coding_tag_from_string(it.value().get<std::string>());
    }
    return modes;
}

json coding_modes_to_json(const CodingModes& modes) {
    json j = json::object();
    for (const auto& [name, tag] : modes) j[name] = to_string(tag);
    return j;
}

CodingTag default_coding(const VariableSpec& spec) {
    switch (spec.kind) {
        case VariableKind::Quantitative: return CodingTag::Identity;
        case VariableKind::CategoricalSingle:
            if (spec.ordered) return CodingTag::Rank;
            return spec.taxonomy ? CodingTag::Taxonomy : CodingTag::Disjunctive;
        case VariableKind::Interval: return CodingTag::MeanLength;
        case VariableKind::CategoricalMulti: return CodingTag::Multi01;
        case VariableKind::Modal: return CodingTag::ModalProbs;
    }
    return CodingTag::Identity;
}

void check_coding_compatible(const VariableSpec& spec, CodingTag tag) {
    bool ok = false;
    switch (spec.kind) {
        case VariableKind::Quantitative: ok = tag == CodingTag::Identity; break;
        case VariableKind::CategoricalSingle:
            ok = tag == CodingTag::Disjunctive || (tag == CodingTag::Rank && spec.ordered) ||
                 (tag == CodingTag::Taxonomy && spec.taxonomy.has_value());
            break;
        case VariableKind::Interval:
            ok = tag == CodingTag::MeanLength || tag == CodingTag::MeanLogLength || tag == CodingTag::Bounds;
            break;
        case VariableKind::CategoricalMulti: ok = tag == CodingTag::Multi01; break;
        case VariableKind::Modal: ok = tag == CodingTag::ModalProbs; break;
    }
    if (!ok)
        throw EncodingError("coding '" + std::string(to_string(tag)) + "' cannot encode " +
                            std::string(to_string(spec.kind)) + " variable '" + spec.name + "'");
}

std::size_t coded_width(const VariableSpec& spec, CodingTag tag) {
    switch (tag) {
        case CodingTag::Identity:
        case CodingTag::Rank: return 1;
        case CodingTag::MeanLength:
        case CodingTag::MeanLogLength:
        case CodingTag::Bounds: return 2;
        case CodingTag::Disjunctive:
        case CodingTag::Multi01:
        case CodingTag::ModalProbs:
        case CodingTag::Taxonomy: return spec.category_count();
    }
    return 0;
}

std::vector<double> encode_value(const VariableSpec& spec, CodingTag tag, const SymbolicValue& v) {
    switch (tag) {
        case CodingTag::Identity: return encode_quantitative(expect<value::Number>(spec, v, "a Number").x);
        case CodingTag::Rank:
        case CodingTag::Disjunctive: {
            VariableSpec s = spec;
            s.ordered = tag == CodingTag::Rank;
            return encode_categorical_single(s, expect<value::Category>(spec, v, "a Category"));
        }
        case CodingTag::Taxonomy: {
            if (const auto* ref = std::get_if<value::TaxonRef>(&v)) return encode_taxonomy(spec, ref->label);
            const auto& c = expect<value::Category>(spec, v, "a Category or taxonomy node");
            return encode_taxonomy(spec, spec.categories.at(c.index));
        }
        case CodingTag::MeanLength:
            return encode_interval(expect<value::Interval>(spec, v, "an Interval"), IntervalMode::MeanLength);
        case CodingTag::MeanLogLength:
            return encode_interval(expect<value::Interval>(spec, v, "an Interval"), IntervalMode::MeanLogLength);
        case CodingTag::Bounds:
            return encode_interval(expect<value::Interval>(spec, v, "an Interval"), IntervalMode::Bounds);
        case CodingTag::Multi01:
            return encode_categorical_multi(spec, expect<value::CategorySet>(spec, v, "a CategorySet"));
        case CodingTag::ModalProbs:
            return encode_modal(spec, expect<value::Distribution>(spec, v, "a Distribution"));
    }
    return {};
}

EncodedMatrix encode_table(const SymbolicTable& table, const CodingModes& modes,
                           const std::vector<std::size_t>& variables) {
    const auto vars = variables.empty() ? table.variables_with_role(Role::Input) : variables;
    EncodedMatrix out;
    std::size_t width = 0;
    std::vector<CodingTag> tags;
    for (auto v : vars) {
        const auto& spec = table.specs.at(v);
        auto it = modes.find(spec.name);
        const CodingTag tag = it == modes.end() ? default_coding(spec) : it->second;
        check_coding_compatible(spec, tag);
        const std::size_t w = coded_width(spec, tag);
        ColumnGroup g;
        g.source_variable = spec.name;
        g.begin = width;
        g.end = width + w;
        g.decay_divisor = is_category_like(tag) ? static_cast<double>(spec.category_count()) : 1.0;
        g.mean.assign(w, 0.0);
        g.scale.assign(w, 1.0);
        g.coding = tag;
        out.groups.push_back(std::move(g));
        tags.push_back(tag);
        width += w;
    }
    out.values = Matrix(table.row_count(), width);
    for (std::size_t r = 0; r < table.row_count(); ++r) {
        for (std::size_t k = 0; k < vars.size(); ++k) {
            const auto& spec = table.specs[vars[k]];
            std::vector<double> code;
            try {
                code = encode_value(spec, tags[k], table.rows[r][vars[k]]);
            } catch (const EncodingError& e) {
                throw EncodingError("row " + std::to_string(r) + ": " + e.what());
            }
            std::copy(code.begin(), code.end(), out.values.row(r).begin() + static_cast<std::ptrdiff_t>(out.groups[k].begin));
        }
    }
    return out;
}

Standardizer::Standardizer(std::vector<double> mean, std::vector<double> scale)
    : mean_(std::move(mean)), scale_(std::move(scale)) {
    if (mean_.size() != scale_.size()) throw DimensionError("standardizer mean/scale size mismatch");
    for (double s : scale_)
        if (!(s > 0.0)) throw DimensionError("standardizer scale must be positive");
}

Standardizer Standardizer::fit(const Matrix& m) {
    const std::size_t n = m.rows();
    if (n < 2) throw DimensionError("standardizer needs at least 2 rows");
    std::vector<double> mean(m.cols(), 0.0), scale(m.cols(), 1.0);
    for (std::size_t c = 0; c < m.cols(); ++c) {
        double sum = 0.0;
        for (std::size_t r = 0; r < n; ++r) sum += m(r, c);
        const double mu = sum / static_cast<double>(n);
        double ss = 0.0;
        for (std::size_t r = 0; r < n; ++r) ss += (m(r, c) - mu) * (m(r, c) - mu);
        const double sd = std::sqrt(ss / static_cast<double>(n - 1));
        mean[c] = mu;
        scale[c] = sd > 0.0 ? sd : 1.0;
    }
    return Standardizer(std::move(mean), std::move(scale));
}

Standardizer Standardizer::identity(std::size_t cols) {
    return Standardizer(std::vector<double>(cols, 0.0), std::vector<double>(cols, 1.0));
}

void Standardizer::transform_row(std::span<double> row) const {
    if (row.size() != mean_.size()) throw DimensionError("standardizer width mismatch");
    for (std::size_t c = 0; c < row.size(); ++c) row[c] = (row[c] - mean_[c]) / scale_[c];
}

void Standardizer::inverse_transform_row(std::span<double> row) const {
    if (row.size() != mean_.size()) throw DimensionError("standardizer width mismatch");
    for (std::size_t c = 0; c < row.size(); ++c) row[c] = row[c] * scale_[c] + mean_[c];
}

Matrix Standardizer::transform(const Matrix& m) const {
    Matrix out = m;
    for (std::size_t r = 0; r < out.rows(); ++r) transform_row(out.row(r));
    return out;
}

Matrix Standardizer::inverse_transform(const Matrix& m) const {
    Matrix out = m;
    for (std::size_t r = 0; r < out.rows(); ++r) inverse_transform_row(out.row(r));
    return out;
}

Standardizer Standardizer::only_columns(const std::vector<bool>& columns) const {
    if (columns.size() != mean_.size()) throw DimensionError("column mask width mismatch");
    auto mean = mean_;
    auto scale = scale_;
    for (std::size_t c = 0; c < columns.size(); ++c)
        if (!columns[c]) {
            mean[c] = 0.0;
            scale[c] = 1.0;
        }
    return Standardizer(std::move(mean), std::move(scale));
}

json Standardizer::to_json() const { return json{{"mean", mean_}, {"scale", scale_}}; }

Standardizer Standardizer::from_json(const json& j) {
    return Standardizer(j.at("mean").get<std::vector<double>>(), j.at("scale").get<std::vector<double>>());
}

EncodedMatrix fit_standardizer(const EncodedMatrix& m) {
    auto s = Standardizer::fit(m.values);
    EncodedMatrix out = m;
    for (auto& g : out.groups) {
        g.mean.assign(s.mean().begin() + static_cast<std::ptrdiff_t>(g.begin),
                      s.mean().begin() + static_cast<std::ptrdiff_t>(g.end));
        g.scale.assign(s.scale().begin() + static_cast<std::ptrdiff_t>(g.begin),
                       s.scale().begin() + static_cast<std::ptrdiff_t>(g.end));
    }
    return out;
}

Standardizer standardizer_of(const EncodedMatrix& m) {
    std::vector<double> mean(m.values.cols(), 0.0), scale(m.values.cols(), 1.0);
    for (const auto& g : m.groups)
        for (std::size_t c = g.begin; c < g.end; ++c) {
            mean[c] = g.mean.at(c - g.begin);
            scale[c] = g.scale.at(c - g.begin);
        }
    return Standardizer(std::move(mean), std::move(scale));
}

std::string_view to_string(BlockKind kind) {
    switch (kind) {
        case BlockKind::LinearQuadratic: return "linear_quadratic";
        case BlockKind::IntervalMeanLength: return "interval_mean_length";
        case BlockKind::IntervalMeanLogLength: return "interval_mean_log_length";
        case BlockKind::SoftmaxCrossEntropy: return "softmax_cross_entropy";
        case BlockKind::LogisticIndependent: return "logistic_independent";
        case BlockKind::ModalSoftmax: return "modal_softmax";
    }
    return "?";
}

BlockKind block_kind_from_string(std::string_view name) {
    for (auto k : {BlockKind::LinearQuadratic, BlockKind::IntervalMeanLength, BlockKind::IntervalMeanLogLength,
                   BlockKind::SoftmaxCrossEntropy, BlockKind::LogisticIndependent, BlockKind::ModalSoftmax})
        if (to_string(k) == name) return k;
    throw EncodingError("unknown output block kind '" + std::string(name) + "'");
}

json to_json(const OutputBlockSpec& b) {
    return json{{"source_variable", b.source_variable},
                {"begin", b.begin},
                {"end", b.end},
                {"kind", to_string(b.kind)},
                {"micro_weighted", b.micro_weighted}};
}

OutputBlockSpec output_block_from_json(const json& j) {
    OutputBlockSpec b;
    b.source_variable = j.at("source_variable").get<std::string>();
    b.begin = j.at("begin").get<std::size_t>();
    b.end = j.at("end").get<std::size_t>();
    b.kind = block_kind_from_string(j.at("kind").get<std::string>());
    b.micro_weighted = j.value("micro_weighted", false);
    return b;
}

BlockKind default_block_kind(const VariableSpec& spec, const std::vector<SymbolicValue>& training_values) {
    switch (spec.kind) {
        case VariableKind::Quantitative: return BlockKind::LinearQuadratic;
        case VariableKind::CategoricalSingle: return BlockKind::SoftmaxCrossEntropy;
        case VariableKind::CategoricalMulti: return BlockKind::LogisticIndependent;
        case VariableKind::Modal: return BlockKind::ModalSoftmax;
        case VariableKind::Interval: {
            bool all_positive = !training_values.empty();
            for (const auto& v : training_values) {
                const auto* iv = std::get_if<value::Interval>(&v);
                if (iv && !(iv->b - iv->a > 0.0)) all_positive = false;
            }
            return all_positive ? BlockKind::IntervalMeanLogLength : BlockKind::IntervalMeanLength;
        }
    }
    return BlockKind::LinearQuadratic;
}

void check_block_compatible(const VariableSpec& spec, BlockKind kind) {
    bool ok = false;
    switch (kind) {
        case BlockKind::LinearQuadratic: ok = spec.kind == VariableKind::Quantitative; break;
        case BlockKind::IntervalMeanLength:
        case BlockKind::IntervalMeanLogLength: ok = spec.kind == VariableKind::Interval; break;
        case BlockKind::SoftmaxCrossEntropy: ok = spec.kind == VariableKind::CategoricalSingle; break;
        case BlockKind::LogisticIndependent: ok = spec.kind == VariableKind::CategoricalMulti; break;
        case BlockKind::ModalSoftmax: ok = spec.kind == VariableKind::Modal; break;
    }
    if (!ok)
        throw EncodingError("output block '" + std::string(to_string(kind)) + "' is incompatible with " +
                            std::string(to_string(spec.kind)) + " variable '" + spec.name + "'");
}

std::vector<double> encode_target_value(const VariableSpec& spec, const OutputBlockSpec& block,
                                        const SymbolicValue& v) {
    switch (block.kind) {
        case BlockKind::LinearQuadratic: return encode_value(spec, CodingTag::Identity, v);
        case BlockKind::IntervalMeanLength: return encode_value(spec, CodingTag::MeanLength, v);
        case BlockKind::IntervalMeanLogLength: return encode_value(spec, CodingTag::MeanLogLength, v);
        case BlockKind::SoftmaxCrossEntropy: return encode_value(spec, CodingTag::Disjunctive, v);
        case BlockKind::LogisticIndependent: return encode_value(spec, CodingTag::Multi01, v);
        case BlockKind::ModalSoftmax: return encode_value(spec, CodingTag::ModalProbs, v);
    }
    return {};
}

TargetEncoding encode_targets(const SymbolicTable& table, const BlockKinds& kinds,
                              const std::vector<std::size_t>& variables) {
    const auto vars = variables.empty() ? table.variables_with_role(Role::Target) : variables;
    TargetEncoding out;
    std::size_t width = 0;
    for (auto v : vars) {
        const auto& spec = table.specs.at(v);
        std::vector<SymbolicValue> column;
        column.reserve(table.row_count());
        for (const auto& row : table.rows) column.push_back(row[v]);
        auto it = kinds.find(spec.name);
        const BlockKind kind = it == kinds.end() ? default_block_kind(spec, column) : it->second;
        check_block_compatible(spec, kind);
        OutputBlockSpec b;
        b.source_variable = spec.name;
        b.kind = kind;
        b.begin = width;
        const std::size_t w = kind == BlockKind::LinearQuadratic ? 1
                              : (kind == BlockKind::IntervalMeanLength || kind == BlockKind::IntervalMeanLogLength)
                                  ? 2
                                  : spec.category_count();
        b.end = width + w;
        if (kind == BlockKind::ModalSoftmax)
            b.micro_weighted = std::any_of(column.begin(), column.end(), [](const SymbolicValue& x) {
                const auto* d = std::get_if<value::Distribution>(&x);
                return d && d->micro_count.has_value();
            });
        out.blocks.push_back(b);
        width += w;
    }
    out.values = Matrix(table.row_count(), width);
    out.micro_counts = Matrix(table.row_count(), out.blocks.size(), 1.0);
    for (std::size_t r = 0; r < table.row_count(); ++r) {
        for (std::size_t k = 0; k < vars.size(); ++k) {
            const auto& spec = table.specs[vars[k]];
            const auto& cell = table.rows[r][vars[k]];
            std::vector<double> code;
            try {
                code = encode_target_value(spec, out.blocks[k], cell);
            } catch (const EncodingError& e) {
                throw EncodingError("row " + std::to_string(r) + ": " + e.what());
            }
            std::copy(code.begin(), code.end(),
                      out.values.row(r).begin() + static_cast<std::ptrdiff_t>(out.blocks[k].begin));
            if (out.blocks[k].micro_weighted) {
                const auto& d = std::get<value::Distribution>(cell);
                out.micro_counts(r, k) = d.micro_count ? static_cast<double>(*d.micro_count) : 1.0;
            }
        }
    }
    return out;
}

SymbolicValue decode_output_block(const OutputBlockSpec& block, std::span<const double> t,
                                  std::vector<std::string>* notes) {
    if (t.size() != block.width())
        throw DimensionError("decode: block '" + block.source_variable + "' expects " +
                             std::to_string(block.width()) + " values, got " + std::to_string(t.size()));
    auto check_simplex = [&] {
        double sum = 0.0;
        for (double x : t) sum += x;
        if (std::abs(sum - 1.0) > kSoftmaxSumTolerance)
            throw DimensionError("decode: softmax block '" + block.source_variable + "' does not sum to 1");
    };
    switch (block.kind) {
        case BlockKind::LinearQuadratic:
            if (t.size() != 1) throw DimensionError("decode: linear block must have width 1");
            return value::Number{t[0]};
        case BlockKind::IntervalMeanLength:
        case BlockKind::IntervalMeanLogLength: {
            if (t.size() != 2) throw DimensionError("decode: interval block must have width 2");
            double length = block.kind == BlockKind::IntervalMeanLogLength ? std::exp(t[1]) : t[1];
            if (length < 0.0) {
                if (notes) notes->push_back("negative interval length clamped to 0 for '" + block.source_variable + "'");
                length = 0.0;
            }
            return value::Interval{t[0] - length / 2.0, t[0] + length / 2.0};
        }
        case BlockKind::SoftmaxCrossEntropy:
            check_simplex();
            return value::Category{argmax_lowest(t)};
        case BlockKind::LogisticIndependent: {
            std::vector<std::size_t> members;
            for (std::size_t i = 0; i < t.size(); ++i)
                if (t[i] > 0.5) members.push_back(i);
            if (members.empty()) {
                members.push_back(argmax_lowest(t));
                if (notes)
                    notes->push_back("no output above 0.5 for '" + block.source_variable +
                                     "'; returned the singleton argmax set");
            }
            return value::CategorySet{std::move(members)};
        }
        case BlockKind::ModalSoftmax:
            check_simplex();
            return value::Distribution{std::vector<double>(t.begin(), t.end()), std::nullopt};
    }
    return value::Missing{};
}

}  // namespace symmlp
