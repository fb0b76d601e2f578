#include "symmlp/symbolic_model.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace symmlp {

using nlohmann::json;

namespace {

constexpr double kDistributionSumTolerance = 1e-9;
constexpr double kMicroCountTolerance = 1e-6;

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

std::string_view tag_name(const SymbolicValue& v) {
    return std::visit(overloaded{
                          [](const value::Missing&) { return std::string_view("Missing"); },
                          [](const value::Number&) { return std::string_view("Number"); },
                          [](const value::Category&) { return std::string_view("Category"); },
                          [](const value::TaxonRef&) { return std::string_view("TaxonRef"); },
                          [](const value::Interval&) { return std::string_view("Interval"); },
                          [](const value::CategorySet&) { return std::string_view("CategorySet"); },
                          [](const value::Distribution&) { return std::string_view("Distribution"); },
                      },
                      v);
}

void collect_labels(const TaxonomyNode& node, std::vector<std::string>& all,
                    std::vector<std::string>& leaves) {
    all.push_back(node.label);
    if (node.is_leaf()) leaves.push_back(node.label);
    for (const auto& child : node.children) collect_labels(child, all, leaves);
}

std::string cell_location(std::size_t row, const VariableSpec& spec) {
    return "row " + std::to_string(row) + ", column '" + spec.name + "'";
}

TaxonomyNode taxonomy_from_json(const json& j) {
    TaxonomyNode node;
    if (j.is_string()) {
        node.label = j.get<std::string>();
        return node;
    }
    if (!j.is_object() || !j.contains("label") || !j["label"].is_string())
        throw ParseError("taxonomy node must be a string or an object with a 'label'");
    node.label = j["label"].get<std::string>();
    if (j.contains("children")) {
        if (!j["children"].is_array()) throw ParseError("taxonomy 'children' must be an array");
        for (const auto& c : j["children"]) node.children.push_back(taxonomy_from_json(c));
    }
    return node;
}

json taxonomy_to_json(const TaxonomyNode& node) {
    if (node.is_leaf()) return node.label;
    json children = json::array();
    for (const auto& c : node.children) children.push_back(taxonomy_to_json(c));
    return json{{"label", node.label}, {"children", std::move(children)}};
}

std::size_t lookup_category(const VariableSpec& spec, const json& label) {
    if (!label.is_string()) throw ParseError("category label must be a string");
    auto idx = spec.category_index(label.get<std::string>());
    if (!idx) throw ValidationError("unknown category '" + label.get<std::string>() + "'");
    return *idx;
}

double require_number(const json& j, const char* what) {
    if (!j.is_number()) throw ParseError(std::string(what) + " must be a number");
    return j.get<double>();
}

std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                field += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (c != '\r') {
            field += c;
        }
    }
    fields.push_back(std::move(field));
    return fields;
}

std::string trim(std::string s) {
    auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

}  // namespace

std::string_view to_string(VariableKind kind) {
    switch (kind) {
        case VariableKind::Quantitative: return "quantitative";
        case VariableKind::CategoricalSingle: return "categorical";
        case VariableKind::Interval: return "interval";
        case VariableKind::CategoricalMulti: return "multi";
        case VariableKind::Modal: return "modal";
    }
    return "?";
}

VariableKind variable_kind_from_string(std::string_view name) {
    if (name == "quantitative") return VariableKind::Quantitative;
    if (name == "categorical") return VariableKind::CategoricalSingle;
    if (name == "interval") return VariableKind::Interval;
    if (name == "multi") return VariableKind::CategoricalMulti;
    if (name == "modal") return VariableKind::Modal;
    throw ParseError("unknown variable kind '" + std::string(name) + "'");
}

std::string_view to_string(Role role) { return role == Role::Input ? "input" : "target"; }

bool is_categorical(VariableKind kind) {
    return kind == VariableKind::CategoricalSingle || kind == VariableKind::CategoricalMulti ||
           kind == VariableKind::Modal;
}

const TaxonomyNode* TaxonomyNode::find(std::string_view name) const {
    if (label == name) return this;
    for (const auto& c : children)
        if (const auto* hit = c.find(name)) return hit;
    return nullptr;
}

std::vector<std::string> TaxonomyNode::leaves() const {
    std::vector<std::string> all, out;
    collect_labels(*this, all, out);
    return out;
}

std::optional<std::size_t> VariableSpec::category_index(std::string_view label) const {
    auto it = std::find(categories.begin(), categories.end(), label);
    if (it == categories.end()) return std::nullopt;
    return static_cast<std::size_t>(it - categories.begin());
}

value::CategorySet make_category_set(std::vector<std::size_t> indices) {
    std::sort(indices.begin(), indices.end());
    indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
    return value::CategorySet{std::move(indices)};
}

ValidationResult validate_spec(const VariableSpec& spec) {
    ValidationResult r;
    if (spec.name.empty()) r.reasons.push_back("variable name is empty");
    if (is_categorical(spec.kind)) {
        if (spec.categories.empty()) r.reasons.push_back("categorical variable has no categories");
        std::set<std::string> seen;
        for (const auto& c : spec.categories) {
            if (c.empty()) r.reasons.push_back("empty category label");
            if (!seen.insert(c).second) r.reasons.push_back("duplicate category label '" + c + "'");
        }
    } else if (!spec.categories.empty()) {
        r.reasons.push_back("categories given for a non-categorical variable");
    }
    if (spec.ordered && spec.kind != VariableKind::CategoricalSingle)
        r.reasons.push_back("ordered flag is only allowed on single-valued categorical variables");
    if (spec.taxonomy) {
        if (spec.kind != VariableKind::CategoricalSingle)
            r.reasons.push_back("taxonomy is only allowed on single-valued categorical variables");
        std::vector<std::string> all, leaves;
        collect_labels(*spec.taxonomy, all, leaves);
        std::set<std::string> unique_all(all.begin(), all.end());
        if (unique_all.size() != all.size()) r.reasons.push_back("taxonomy labels are not unique");
        std::set<std::string> leaf_set(leaves.begin(), leaves.end());
        std::set<std::string> cat_set(spec.categories.begin(), spec.categories.end());
        if (leaf_set != cat_set || leaves.size() != spec.categories.size())
            r.reasons.push_back("taxonomy leaves must be exactly the categories, each once");
    }
    return r;
}

ValidationResult validate_value(const VariableSpec& spec, const SymbolicValue& v) {
    ValidationResult r;
    auto mismatch = [&] {
        r.reasons.push_back("kind mismatch: " + std::string(tag_name(v)) + " value for " +
                            std::string(to_string(spec.kind)) + " variable '" + spec.name + "'");
    };
    const std::size_t m = spec.category_count();
    std::visit(
        overloaded{
            [](const value::Missing&) {},
            [&](const value::Number& n) {
                if (spec.kind != VariableKind::Quantitative) return mismatch();
                if (!std::isfinite(n.x)) r.reasons.push_back("number is not finite");
            },
            [&](const value::Category& c) {
                if (spec.kind != VariableKind::CategoricalSingle) return mismatch();
                if (c.index >= m)
                    r.reasons.push_back("category index " + std::to_string(c.index) +
                                        " out of range for " + std::to_string(m) + " categories");
            },
            [&](const value::TaxonRef& t) {
                if (spec.kind != VariableKind::CategoricalSingle || !spec.taxonomy) return mismatch();
                if (!spec.taxonomy->find(t.label))
                    r.reasons.push_back("unknown taxonomy node '" + t.label + "'");
            },
            [&](const value::Interval& iv) {
                if (spec.kind != VariableKind::Interval) return mismatch();
                if (!std::isfinite(iv.a) || !std::isfinite(iv.b))
                    r.reasons.push_back("interval bound is not finite");
                else if (iv.a > iv.b)
                    r.reasons.push_back("interval lower bound exceeds upper bound (a > b)");
            },
            [&](const value::CategorySet& s) {
                if (spec.kind != VariableKind::CategoricalMulti) return mismatch();
                if (s.indices.empty()) r.reasons.push_back("category set is empty");
                for (std::size_t i = 0; i < s.indices.size(); ++i) {
                    if (s.indices[i] >= m)
                        r.reasons.push_back("category index " + std::to_string(s.indices[i]) +
                                            " out of range");
                    if (i > 0 && s.indices[i] <= s.indices[i - 1])
                        r.reasons.push_back("category set indices not sorted and unique");
                }
            },
            [&](const value::Distribution& d) {
                if (spec.kind != VariableKind::Modal) return mismatch();
                if (d.p.size() != m) {
                    r.reasons.push_back("distribution has " + std::to_string(d.p.size()) +
                                        " weights, expected " + std::to_string(m));
                    return;
                }
                double sum = 0.0;
                for (double p : d.p) {
                    if (!(p >= 0.0 && p <= 1.0)) r.reasons.push_back("weight outside [0,1]");
                    sum += p;
                }
                if (std::abs(sum - 1.0) > kDistributionSumTolerance)
                    r.reasons.push_back("sum ≠ 1 (sum = " + std::to_string(sum) + ")");
                if (d.micro_count) {
                    if (*d.micro_count == 0) {
                        r.reasons.push_back("micro-observation count must be positive");
                    } else {
                        for (double p : d.p) {
                            const double lp = *d.micro_count * p;
                            if (std::abs(lp - std::round(lp)) > kMicroCountTolerance) {
                                r.reasons.push_back("l·p is not an integer for l = " +
                                                    std::to_string(*d.micro_count));
                                break;
                            }
                        }
                    }
                }
            },
        },
        v);
    return r;
}

std::optional<std::size_t> SymbolicTable::variable_index(std::string_view name) const {
    for (std::size_t i = 0; i < specs.size(); ++i)
        if (specs[i].name == name) return i;
    return std::nullopt;
}

std::vector<std::size_t> SymbolicTable::variables_with_role(Role role) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < specs.size(); ++i)
        if (roles[i] == role) out.push_back(i);
    return out;
}

SymbolicTable SymbolicTable::select_rows(const std::vector<std::size_t>& indices) const {
    SymbolicTable out{specs, roles, {}};
    out.rows.reserve(indices.size());
    for (auto i : indices) out.rows.push_back(rows.at(i));
    return out;
}

void validate_table(const SymbolicTable& table) {
    if (table.roles.size() != table.specs.size())
        throw ValidationError("role count does not match variable count");
    std::set<std::string> names;
    for (const auto& spec : table.specs) {
        auto r = validate_spec(spec);
        if (!r) throw ValidationError("variable '" + spec.name + "': " + r.reasons.front());
        if (!names.insert(spec.name).second)
            throw ValidationError("duplicate variable name '" + spec.name + "'");
    }
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        if (row.size() != table.specs.size())
            throw ValidationError("row " + std::to_string(i) + " has " + std::to_string(row.size()) +
                                  " cells, expected " + std::to_string(table.specs.size()));
        for (std::size_t j = 0; j < row.size(); ++j) {
            auto r = validate_value(table.specs[j], row[j]);
            if (!r) throw ValidationError(cell_location(i, table.specs[j]) + ": " + r.reasons.front());
        }
    }
}

SymbolicValue value_from_json(const VariableSpec& spec, const json& cell) {
    if (cell.is_null()) return value::Missing{};
    if (cell.is_number()) {
        if (spec.kind != VariableKind::Quantitative)
            throw ValidationError("kind mismatch: number given for " + std::string(to_string(spec.kind)) +
                                  " variable");
        return value::Number{cell.get<double>()};
    }
    if (!cell.is_object()) throw ParseError("cell must be null, a number, or an object");
    if (cell.contains("a") || cell.contains("b")) {
        if (!cell.contains("a") || !cell.contains("b")) throw ParseError("interval needs both 'a' and 'b'");
        return value::Interval{require_number(cell["a"], "interval bound 'a'"),
                               require_number(cell["b"], "interval bound 'b'")};
    }
    if (cell.contains("cat")) {
        const auto& label = cell["cat"];
        if (!label.is_string()) throw ParseError("'cat' must be a string");
        const auto name = label.get<std::string>();
        if (auto idx = spec.category_index(name)) return value::Category{*idx};
        if (spec.taxonomy && spec.taxonomy->find(name)) return value::TaxonRef{name};
        throw ValidationError("unknown category '" + name + "'");
    }
    if (cell.contains("set")) {
        if (!cell["set"].is_array()) throw ParseError("'set' must be an array of labels");
        std::vector<std::size_t> idx;
        for (const auto& label : cell["set"]) idx.push_back(lookup_category(spec, label));
        const std::size_t n = idx.size();
        auto set = make_category_set(std::move(idx));
        if (set.indices.size() != n) throw ValidationError("duplicate label in category set");
        return set;
    }
    if (cell.contains("dist")) {
        if (!cell["dist"].is_array()) throw ParseError("'dist' must be an array of numbers");
        value::Distribution d;
        for (const auto& p : cell["dist"]) d.p.push_back(require_number(p, "distribution weight"));
        if (cell.contains("l") && !cell["l"].is_null()) {
            if (!cell["l"].is_number_integer() || cell["l"].get<long long>() <= 0)
                throw ParseError("'l' must be a positive integer");
            d.micro_count = cell["l"].get<unsigned>();
        }
        return d;
    }
    throw ParseError("unrecognized cell object");
}

json value_to_json(const VariableSpec& spec, const SymbolicValue& v) {
    return std::visit(overloaded{
                          [](const value::Missing&) { return json(nullptr); },
                          [](const value::Number& n) { return json(n.x); },
                          [&](const value::Category& c) { return json{{"cat", spec.categories.at(c.index)}}; },
                          [](const value::TaxonRef& t) { return json{{"cat", t.label}}; },
                          [](const value::Interval& iv) { return json{{"a", iv.a}, {"b", iv.b}}; },
                          [&](const value::CategorySet& s) {
                              json labels = json::array();
                              for (auto i : s.indices) labels.push_back(spec.categories.at(i));
                              return json{{"set", std::move(labels)}};
                          },
                          [](const value::Distribution& d) {
                              json j{{"dist", d.p}};
                              if (d.micro_count) j["l"] = *d.micro_count;
                              return j;
                          },
                      },
                      v);
}

SymbolicTable parse_table(const json& document) {
    if (!document.is_object()) throw ParseError("dataset document must be a JSON object");
    if (!document.contains("variables") || !document["variables"].is_array())
        throw ParseError("dataset document needs a 'variables' array");
    if (!document.contains("rows") || !document["rows"].is_array())
        throw ParseError("dataset document needs a 'rows' array");

    SymbolicTable table;
    std::size_t column = 0;
    for (const auto& var : document["variables"]) {
        const std::string where = "variable " + std::to_string(column);
        if (!var.is_object() || !var.contains("name") || !var["name"].is_string())
            throw ParseError(where + ": needs a string 'name'");
        if (!var.contains("kind") || !var["kind"].is_string())
            throw ParseError(where + ": needs a string 'kind'");
        VariableSpec spec;
        spec.name = var["name"].get<std::string>();
        spec.kind = variable_kind_from_string(var["kind"].get<std::string>());
        if (var.contains("categories")) {
            if (!var["categories"].is_array()) throw ParseError(where + ": 'categories' must be an array");
            for (const auto& c : var["categories"]) {
                if (!c.is_string()) throw ParseError(where + ": category labels must be strings");
                spec.categories.push_back(c.get<std::string>());
            }
        }
        if (var.contains("ordered")) {
            if (!var["ordered"].is_boolean()) throw ParseError(where + ": 'ordered' must be a boolean");
            spec.ordered = var["ordered"].get<bool>();
        }
        if (var.contains("taxonomy") && !var["taxonomy"].is_null())
            spec.taxonomy = taxonomy_from_json(var["taxonomy"]);
        Role role = Role::Input;
        if (var.contains("role")) {
            const auto& r = var["role"];
            if (r == "input") role = Role::Input;
            else if (r == "target") role = Role::Target;
            else throw ParseError(where + ": 'role' must be \"input\" or \"target\"");
        }
        auto check = validate_spec(spec);
        if (!check) throw ValidationError("variable '" + spec.name + "': " + check.reasons.front());
        table.specs.push_back(std::move(spec));
        table.roles.push_back(role);
        ++column;
    }

    std::size_t row_index = 0;
    for (const auto& row : document["rows"]) {
        if (!row.is_array() || row.size() != table.specs.size())
            throw ParseError("row " + std::to_string(row_index) + ": expected an array of " +
                             std::to_string(table.specs.size()) + " cells");
        std::vector<SymbolicValue> values;
        values.reserve(row.size());
        for (std::size_t j = 0; j < row.size(); ++j) {
            const auto& spec = table.specs[j];
            try {
                values.push_back(value_from_json(spec, row[j]));
            } catch (const ParseError& e) {
                throw ParseError(cell_location(row_index, spec) + ": " + e.what());
            } catch (const ValidationError& e) {
                throw ValidationError(cell_location(row_index, spec) + ": " + e.what());
            }
        }
        table.rows.push_back(std::move(values));
        ++row_index;
    }
    validate_table(table);
    return table;
}

SymbolicTable parse_table(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("malformed JSON: ") + e.what());
    }
    return parse_table(doc);
}

json serialize_table(const SymbolicTable& table) {
    json vars = json::array();
    for (std::size_t i = 0; i < table.specs.size(); ++i) {
        const auto& s = table.specs[i];
        json v{{"name", s.name}, {"kind", to_string(s.kind)}, {"role", to_string(table.roles[i])}};
        if (!s.categories.empty()) v["categories"] = s.categories;
        if (s.kind == VariableKind::CategoricalSingle) v["ordered"] = s.ordered;
        if (s.taxonomy) v["taxonomy"] = taxonomy_to_json(*s.taxonomy);
        vars.push_back(std::move(v));
    }
    json rows = json::array();
    for (const auto& row : table.rows) {
        json r = json::array();
        for (std::size_t j = 0; j < row.size(); ++j) r.push_back(value_to_json(table.specs[j], row[j]));
        rows.push_back(std::move(r));
    }
    return json{{"variables", std::move(vars)}, {"rows", std::move(rows)}};
}

SymbolicTable parse_quantitative_csv(std::string_view text, const std::vector<std::string>& target_names) {
    std::istringstream in{std::string(text)};
    std::string line;
    SymbolicTable table;
    if (!std::getline(in, line)) throw ParseError("CSV is empty");
    for (auto& name : split_csv_line(line)) {
        VariableSpec spec;
        spec.name = trim(name);
        table.specs.push_back(spec);
        const bool target = std::find(target_names.begin(), target_names.end(), spec.name) != target_names.end();
        table.roles.push_back(target ? Role::Target : Role::Input);
    }
    std::size_t row_index = 0;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        auto fields = split_csv_line(line);
        if (fields.size() != table.specs.size())
            throw ParseError("CSV row " + std::to_string(row_index) + ": expected " +
                             std::to_string(table.specs.size()) + " fields, got " +
                             std::to_string(fields.size()));
        std::vector<SymbolicValue> values;
        for (std::size_t j = 0; j < fields.size(); ++j) {
            auto f = trim(fields[j]);
            if (f.empty() || f == "NA") {
                values.emplace_back(value::Missing{});
                continue;
            }
            std::size_t consumed = 0;
            double x = 0.0;
            try {
                x = std::stod(f, &consumed);
            } catch (const std::exception&) {
                consumed = 0;
            }
            if (consumed != f.size())
                throw ParseError(cell_location(row_index, table.specs[j]) + ": '" + f + "' is not a number");
            values.emplace_back(value::Number{x});
        }
        table.rows.push_back(std::move(values));
        ++row_index;
    }
    validate_table(table);
    return table;
}

std::string describe(const VariableSpec& spec, const SymbolicValue& v) {
    return value_to_json(spec, v).dump();
}

}  // namespace symmlp
