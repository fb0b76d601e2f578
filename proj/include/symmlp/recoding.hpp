#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "symmlp/matrix.hpp"
#include "symmlp/symbolic_model.hpp"

namespace symmlp {

/// How a variable is turned into numeric columns.
enum class CodingTag {
    Identity,       // quantitative, one column
    Disjunctive,    // one-hot over m categories
    Rank,           // ordered category -> 1-based rank
    MeanLength,     // interval -> (mid, length)
    MeanLogLength,  // interval -> (mid, ln length)
    Bounds,         // interval -> (a, b)
    Multi01,        // category set -> 0/1 membership
    ModalProbs,     // distribution -> (p_1..p_m)
    Taxonomy,       // category or taxonomy node -> 0/1 over descendant leaves
};

std::string_view to_string(CodingTag tag);
CodingTag coding_tag_from_string(std::string_view name);
/// True for codings whose group shares one decay budget across m columns.
bool is_category_like(CodingTag tag);

enum class IntervalMode { MeanLength, MeanLogLength, Bounds };

class EncodingError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

std::vector<double> encode_quantitative(double x);
std::vector<double> encode_categorical_single(const VariableSpec& spec, const value::Category& v);
std::vector<double> encode_interval(const value::Interval& v, IntervalMode mode);
std::vector<double> encode_categorical_multi(const VariableSpec& spec, const value::CategorySet& v);
std::vector<double> encode_modal(const VariableSpec& spec, const value::Distribution& v);
/// `node` is a category label or an internal taxonomy node label.
std::vector<double> encode_taxonomy(const VariableSpec& spec, std::string_view node);

/// Columns produced by one source variable.
struct ColumnGroup {
    std::string source_variable;
    std::size_t begin = 0;
    std::size_t end = 0;
    double decay_divisor = 1.0;
    std::vector<double> mean;
    std::vector<double> scale;
    CodingTag coding = CodingTag::Identity;

    std::size_t width() const { return end - begin; }
    bool operator==(const ColumnGroup&) const = default;
};

struct EncodedMatrix {
    Matrix values;
    std::vector<ColumnGroup> groups;

    /// Per-column decay divisor, expanded from the groups.
    std::vector<double> column_divisors() const;
};

/// Variable name -> coding. Variables absent from the map get default_coding().
using CodingModes = std::map<std::string, CodingTag>;

CodingModes parse_coding_modes(const nlohmann::json& j);
nlohmann::json coding_modes_to_json(const CodingModes& modes);

/// Input-side default for a variable kind.
CodingTag default_coding(const VariableSpec& spec);
/// Throws EncodingError if `tag` cannot encode values of `spec`.
void check_coding_compatible(const VariableSpec& spec, CodingTag tag);
std::size_t coded_width(const VariableSpec& spec, CodingTag tag);

/// Encodes one value under a coding. Missing values throw.
std::vector<double> encode_value(const VariableSpec& spec, CodingTag tag, const SymbolicValue& v);

/// Encodes the given variables (all input-role variables when `variables` is empty).
EncodedMatrix encode_table(const SymbolicTable& table, const CodingModes& modes,
                           const std::vector<std::size_t>& variables = {});

/// Column means/scales; scale is the sample sd (N-1), 1 for constant columns.
class Standardizer {
public:
    Standardizer() = default;
    Standardizer(std::vector<double> mean, std::vector<double> scale);

    static Standardizer fit(const Matrix& m);
    /// Identity standardizer on `cols` columns.
    static Standardizer identity(std::size_t cols);

    Matrix transform(const Matrix& m) const;
    Matrix inverse_transform(const Matrix& m) const;
    void transform_row(std::span<double> row) const;
    void inverse_transform_row(std::span<double> row) const;

    const std::vector<double>& mean() const { return mean_; }
    const std::vector<double>& scale() const { return scale_; }
    std::size_t size() const { return mean_.size(); }

    /// Restricts standardization to `columns`; other columns pass through.
    Standardizer only_columns(const std::vector<bool>& columns) const;

    nlohmann::json to_json() const;
    static Standardizer from_json(const nlohmann::json& j);

    bool operator==(const Standardizer&) const = default;

private:
    std::vector<double> mean_;
    std::vector<double> scale_;
};

/// Fits column statistics and stores them in the groups. Requires N >= 2.
EncodedMatrix fit_standardizer(const EncodedMatrix& m);
Standardizer standardizer_of(const EncodedMatrix& m);

enum class BlockKind {
    LinearQuadratic,
    IntervalMeanLength,
    IntervalMeanLogLength,
    SoftmaxCrossEntropy,
    LogisticIndependent,
    ModalSoftmax,
};

std::string_view to_string(BlockKind kind);
BlockKind block_kind_from_string(std::string_view name);

/// Slice of the output layer tied to one target variable.
struct OutputBlockSpec {
    std::string source_variable;
    std::size_t begin = 0;
    std::size_t end = 0;
    BlockKind kind = BlockKind::LinearQuadratic;
    bool micro_weighted = false;

    std::size_t width() const { return end - begin; }
    bool operator==(const OutputBlockSpec&) const = default;
};

nlohmann::json to_json(const OutputBlockSpec& b);
OutputBlockSpec output_block_from_json(const nlohmann::json& j);

/// Block kind for a target variable; interval targets pick log-length when every
/// training interval has positive length.
BlockKind default_block_kind(const VariableSpec& spec, const std::vector<SymbolicValue>& training_values);
void check_block_compatible(const VariableSpec& spec, BlockKind kind);

struct TargetEncoding {
    Matrix values;
    std::vector<OutputBlockSpec> blocks;
    /// N x blocks; micro-observation weight l per row and block (1 when unused).
    Matrix micro_counts;
};

/// Block kinds by variable name; variables absent from the map use default_block_kind().
using BlockKinds = std::map<std::string, BlockKind>;

TargetEncoding encode_targets(const SymbolicTable& table, const BlockKinds& kinds = {},
                              const std::vector<std::size_t>& variables = {});
/// Encodes one target value into the block's columns.
std::vector<double> encode_target_value(const VariableSpec& spec, const OutputBlockSpec& block,
                                        const SymbolicValue& v);

/// Maps a block's output activations back to a symbolic value. `notes` receives
/// a message whenever the decoder has to coerce the output.
SymbolicValue decode_output_block(const OutputBlockSpec& block, std::span<const double> t,
                                  std::vector<std::string>* notes = nullptr);

}  // namespace symmlp
