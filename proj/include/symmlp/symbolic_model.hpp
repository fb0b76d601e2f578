#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace symmlp {

enum class VariableKind { Quantitative, CategoricalSingle, Interval, CategoricalMulti, Modal };
enum class Role { Input, Target };

std::string_view to_string(VariableKind kind);
VariableKind variable_kind_from_string(std::string_view name);
std::string_view to_string(Role role);
bool is_categorical(VariableKind kind);

/// Tree over category labels. Leaves must be exactly the variable's categories.
struct TaxonomyNode {
    std::string label;
    std::vector<TaxonomyNode> children;

    bool is_leaf() const { return children.empty(); }
    const TaxonomyNode* find(std::string_view name) const;
    /// Leaf labels below this node, in depth-first order.
    std::vector<std::string> leaves() const;

    bool operator==(const TaxonomyNode&) const = default;
};

struct VariableSpec {
    std::string name;
    VariableKind kind = VariableKind::Quantitative;
    std::vector<std::string> categories;
    bool ordered = false;
    std::optional<TaxonomyNode> taxonomy;

    std::size_t category_count() const { return categories.size(); }
    /// Index of a category label, or nullopt.
    std::optional<std::size_t> category_index(std::string_view label) const;

    bool operator==(const VariableSpec&) const = default;
};

namespace value {
struct Missing {
    bool operator==(const Missing&) const = default;
};
struct Number {
    double x = 0.0;
    bool operator==(const Number&) const = default;
};
struct Category {
    std::size_t index = 0;
    bool operator==(const Category&) const = default;
};
/// Reference to an internal taxonomy node (a generalized category).
struct TaxonRef {
    std::string label;
    bool operator==(const TaxonRef&) const = default;
};
struct Interval {
    double a = 0.0;
    double b = 0.0;
    bool operator==(const Interval&) const = default;
};
/// Sorted, duplicate-free category indices.
struct CategorySet {
    std::vector<std::size_t> indices;
    bool operator==(const CategorySet&) const = default;
};
struct Distribution {
    std::vector<double> p;
    std::optional<unsigned> micro_count;
    bool operator==(const Distribution&) const = default;
};
}  // namespace value

using SymbolicValue = std::variant<value::Missing, value::Number, value::Category, value::TaxonRef,
                                   value::Interval, value::CategorySet, value::Distribution>;

inline bool is_missing(const SymbolicValue& v) { return std::holds_alternative<value::Missing>(v); }

/// Builds a CategorySet, sorting and de-duplicating the indices.
value::CategorySet make_category_set(std::vector<std::size_t> indices);

struct ValidationResult {
    std::vector<std::string> reasons;
    bool ok() const { return reasons.empty(); }
    explicit operator bool() const { return ok(); }
};

/// Checks a variable spec's own invariants.
ValidationResult validate_spec(const VariableSpec& spec);
/// Checks a value against its spec; never throws.
ValidationResult validate_value(const VariableSpec& spec, const SymbolicValue& v);

struct SymbolicTable {
    std::vector<VariableSpec> specs;
    std::vector<Role> roles;
    std::vector<std::vector<SymbolicValue>> rows;

    std::size_t row_count() const { return rows.size(); }
    std::size_t variable_count() const { return specs.size(); }
    std::optional<std::size_t> variable_index(std::string_view name) const;
    std::vector<std::size_t> variables_with_role(Role role) const;
    SymbolicTable select_rows(const std::vector<std::size_t>& indices) const;

    bool operator==(const SymbolicTable&) const = default;
};

/// Thrown when a document does not match the dataset schema.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Thrown when a well-formed document violates a value or spec invariant.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Validates every spec and every cell; throws ValidationError naming row/column.
void validate_table(const SymbolicTable& table);

SymbolicTable parse_table(const nlohmann::json& document);
SymbolicTable parse_table(std::string_view text);
nlohmann::json serialize_table(const SymbolicTable& table);

nlohmann::json value_to_json(const VariableSpec& spec, const SymbolicValue& v);
SymbolicValue value_from_json(const VariableSpec& spec, const nlohmann::json& cell);

/// Reads a CSV with a header row into a table of Quantitative variables.
/// Empty cells and "NA" become Missing. Columns listed in target_names get Role::Target.
SymbolicTable parse_quantitative_csv(std::string_view text,
                                     const std::vector<std::string>& target_names = {});

std::string describe(const VariableSpec& spec, const SymbolicValue& v);

}  // namespace symmlp
