#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "symmlp/model_selection.hpp"
#include "symmlp/recoding.hpp"
#include "symmlp/symbolic_model.hpp"
#include "symmlp/training.hpp"

namespace symmlp {

/// Everything needed to go from a symbolic table to a trained network.
struct PipelineConfig {
    CodingModes coding;
    BlockKinds blocks;
    std::vector<std::size_t> hidden{5};
    Activation hidden_activation = Activation::Tanh;
    /// One lambda per layer; a single entry applies to every layer. Empty disables decay.
    std::vector<double> lambda;
    TrainConfig train;
    SelectionPlan plan{{5}, SplitRatios{0.6, 0.2, 0.2}, std::nullopt};

    nlohmann::json to_json() const;
    static PipelineConfig from_json(const nlohmann::json& j);
};

/// A trained network together with the recoding needed to apply it to new tables.
struct SymbolicModel {
    std::vector<VariableSpec> input_specs;
    std::vector<VariableSpec> target_specs;
    CodingModes coding;
    std::vector<ColumnGroup> input_groups;
    Standardizer input_standardizer;
    Standardizer target_standardizer;
    MlpArchitecture architecture;
    WeightVector weights;

    /// Encodes and standardizes a table whose variables include the model's, matched by name.
    Dataset encode(const SymbolicTable& table) const;
    /// Decoded target values, one vector per row. Coercions are appended to `notes`.
    std::vector<std::vector<SymbolicValue>> predict(const SymbolicTable& table,
                                                    std::vector<std::string>* notes = nullptr) const;
    /// Composite loss plus per-target metrics (MAE for numbers and interval bounds,
    /// accuracy for categories, Hamming accuracy for sets, mean L1 for distributions).
    nlohmann::json evaluate(const SymbolicTable& table) const;

    nlohmann::json to_json() const;
    static SymbolicModel from_json(const nlohmann::json& j);
};

/// Encoded design for a table plus the fitted standardizers.
struct PreparedTable {
    EncodedMatrix inputs;
    TargetEncoding targets;
    Standardizer input_standardizer;
    Standardizer target_standardizer;
    std::vector<VariableSpec> input_specs;
    std::vector<VariableSpec> target_specs;
};

/// Encodes inputs and targets and fits standardizers on `fit_rows` (all rows when empty).
/// Target standardization covers numeric outputs only: linear blocks, interval midpoints
/// and log-lengths.
PreparedTable prepare_table(const SymbolicTable& table, const PipelineConfig& config,
                            const std::vector<std::size_t>& fit_rows = {});

/// Column mask of target columns that are standardized.
std::vector<bool> standardized_target_columns(const std::vector<OutputBlockSpec>& blocks, std::size_t width);

struct PipelineFit {
    SymbolicModel model;
    FitReport fit;
    SplitIndices split;
    std::optional<double> test_error;
};

/// Splits, encodes, standardizes on the training rows, and trains the configured architecture.
PipelineFit fit_pipeline(const SymbolicTable& table, const PipelineConfig& config);

struct PipelineSelection {
    SweepReport sweep;
    std::optional<CvReport> cv;
    SymbolicModel model;
};

/// Hidden-size sweep on the configured split, plus k-fold CV of the winner when the plan asks for it.
PipelineSelection select_pipeline(const SymbolicTable& table, const PipelineConfig& config);

}  // namespace symmlp
