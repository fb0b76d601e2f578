#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "symmlp/symbolic_model.hpp"
#include "symmlp/training.hpp"

namespace symmlp {

struct SplitCounts {
    std::size_t train = 0;
    std::size_t validation = 0;
    std::size_t test = 0;
    bool operator==(const SplitCounts&) const = default;
};

struct SplitRatios {
    double train = 0.0;
    double validation = 0.0;
    double test = 0.0;
};

using SplitRule = std::variant<SplitCounts, SplitRatios>;

struct SelectionPlan {
    std::vector<std::size_t> hidden_sizes{3, 5, 7, 10, 15, 20, 30, 40};
    SplitRule split = SplitCounts{140, 60, 60};
    std::optional<std::size_t> cv_folds;

    void validate() const;
    nlohmann::json to_json() const;
    static SelectionPlan from_json(const nlohmann::json& j);
};

class SelectionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Resolves a rule to counts for n rows. Ratios are floored and the remainder goes to
/// the parts with the largest fractional parts (earlier part on ties).
SplitCounts resolve_split(const SplitRule& rule, std::size_t n);

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
    std::vector<std::size_t> test;
};

/// Seeded uniform shuffle, then consecutive slices.
SplitIndices split_indices(std::size_t n, const SplitRule& rule, std::uint64_t seed);

struct TableSplit {
    SymbolicTable train;
    SymbolicTable validation;
    SymbolicTable test;
};

TableSplit split_dataset(const SymbolicTable& table, const SelectionPlan& plan, std::uint64_t seed);

struct CandidateResult {
    std::size_t hidden_size = 0;
    double validation_error = 0.0;
    double train_error = 0.0;
    std::size_t weight_count = 0;
    std::string error;
    bool ok() const { return error.empty(); }
};

struct SweepReport {
    std::vector<CandidateResult> candidates;
    std::size_t winner = 0;
    FitReport winner_fit;
    /// Composite loss on the test set, for the winner only.
    std::optional<double> test_error;

    const CandidateResult& winning() const { return candidates.at(winner); }
    nlohmann::json to_json() const;
};

/// Copy of `arch_template` with its (single) hidden layer resized.
MlpArchitecture with_hidden_size(const MlpArchitecture& arch_template, std::size_t hidden_size);

/// Validation errors closer than this (relative, floor 1) are treated as ties.
inline constexpr double kSelectionTieTolerance = 1e-9;

/// Trains one model per hidden size and keeps the lowest validation error
/// (ties go to the smaller size). Training failures are recorded and skipped.
SweepReport sweep(const MlpArchitecture& arch_template, const std::vector<std::size_t>& hidden_sizes,
                  const Dataset& train_set, const Dataset& validation_set, const TrainConfig& config,
                  const Dataset* test_set = nullptr);

/// Seeded partition of n rows into k folds whose sizes differ by at most one.
std::vector<std::vector<std::size_t>> make_folds(std::size_t n, std::size_t k, std::uint64_t seed);

struct CvReport {
    std::vector<double> fold_errors;
    double mean = 0.0;
    double sd = 0.0;
    nlohmann::json to_json() const;
};

/// Trains on k-1 folds and averages the held-out composite loss. The training folds
/// double as the early-stopping set so the held-out fold stays untouched.
CvReport k_fold_cv(const MlpArchitecture& arch, const Dataset& data, std::size_t k, const TrainConfig& config);

}  // namespace symmlp
