#include "symmlp/pipeline.hpp"

#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

namespace symmlp {

using nlohmann::json;

namespace {

json specs_to_json(const std::vector<VariableSpec>& specs, Role role) {
    SymbolicTable t;
    t.specs = specs;
    t.roles.assign(specs.size(), role);
    return serialize_table(t)["variables"];
}

std::vector<VariableSpec> specs_from_json(const json& j) {
    json doc{{"variables", j}, {"rows", json::array()}};
    return parse_table(doc).specs;
}

std::vector<std::size_t> resolve_variables(const SymbolicTable& table, const std::vector<VariableSpec>& specs) {
    std::vector<std::size_t> out;
    for (const auto& s : specs) {
        auto idx = table.variable_index(s.name);
        if (!idx) throw ValidationError("table has no variable named '" + s.name + "'");
        if (table.specs[*idx].kind != s.kind || table.specs[*idx].categories != s.categories)
            throw ValidationError("variable '" + s.name + "' does not match the model's definition");
        out.push_back(*idx);
    }
    return out;
}

DecayPolicy make_decay(const std::vector<double>& lambda, std::size_t layers,
                       const std::vector<ColumnGroup>& groups, std::size_t input_dim) {
    if (lambda.empty()) return DecayPolicy::none();
    DecayPolicy d = DecayPolicy::uniform(lambda.front(), layers, groups, input_dim);
    if (lambda.size() > 1) {
        if (lambda.size() != layers)
            throw ValidationError("lambda needs one entry or one per layer (" + std::to_string(layers) + ")");
        d.lambda_per_layer = lambda;
    }
    return d;
}

MlpArchitecture make_architecture(const PipelineConfig& config, std::size_t input_dim,
                                  const std::vector<OutputBlockSpec>& blocks) {
    MlpArchitecture arch;
    arch.input_dim = input_dim;
    for (auto h : config.hidden) arch.hidden.push_back({h, config.hidden_activation});
    arch.outputs = blocks;
    arch.validate();
    return arch;
}

}  // namespace

json PipelineConfig::to_json() const {
    json blocks_json = json::object();
    for (const auto& [name, kind] : blocks) blocks_json[name] = symmlp::to_string(kind);
    return json{{"coding", coding_modes_to_json(coding)},
                {"blocks", std::move(blocks_json)},
                {"hidden", hidden},
                {"hidden_activation", symmlp::to_string(hidden_activation)},
                {"lambda", lambda},
                {"train", train.to_json()},
                {"plan", plan.to_json()}};
}

PipelineConfig PipelineConfig::from_json(const json& j) {
    PipelineConfig c;
    if (j.contains("coding")) c.coding = parse_coding_modes(j["coding"]);
    if (j.contains("blocks"))
        for (auto it = j["blocks"].begin(); it != j["blocks"].end(); ++it)
            c.blocks[it.key()] = block_kind_from_string(it.value().get<std::string>());
    if (j.contains("hidden")) c.hidden = j["hidden"].get<std::vector<std::size_t>>();
    if (j.contains("hidden_activation"))
        c.hidden_activation = activation_from_string(j["hidden_activation"].get<std::string>());
    if (j.contains("lambda")) {
        if (j["lambda"].is_number()) c.lambda = {j["lambda"].get<double>()};
        else c.lambda = j["lambda"].get<std::vector<double>>();
    }
    if (j.contains("train")) c.train = TrainConfig::from_json(j["train"]);
    if (j.contains("plan")) c.plan = SelectionPlan::from_json(j["plan"]);
    for (double l : c.lambda)
        if (l < 0.0) throw ValidationError("lambda must be non-negative");
    return c;
}

std::vector<bool> standardized_target_columns(const std::vector<OutputBlockSpec>& blocks, std::size_t width) {
    std::vector<bool> mask(width, false);
    for (const auto& b : blocks) {
        switch (b.kind) {
            case BlockKind::LinearQuadratic: mask[b.begin] = true; break;
            case BlockKind::IntervalMeanLength: mask[b.begin] = true; break;
            case BlockKind::IntervalMeanLogLength:
                mask[b.begin] = true;
                mask[b.begin + 1] = true;
                break;
            default: break;
        }
    }
    return mask;
}

PreparedTable prepare_table(const SymbolicTable& table, const PipelineConfig& config,
                            const std::vector<std::size_t>& fit_rows) {
    PreparedTable out;
    const auto inputs = table.variables_with_role(Role::Input);
    const auto targets = table.variables_with_role(Role::Target);
    if (inputs.empty()) throw ValidationError("table has no input variables");
    if (targets.empty()) throw ValidationError("table has no target variables");
    for (auto i : inputs) out.input_specs.push_back(table.specs[i]);
    for (auto i : targets) out.target_specs.push_back(table.specs[i]);

    std::vector<std::size_t> rows = fit_rows;
    if (rows.empty()) {
        rows.resize(table.row_count());
        std::iota(rows.begin(), rows.end(), 0);
    }
    // Block kinds (interval log-length in particular) are decided on the fitting rows.
    BlockKinds kinds = config.blocks;
    const auto fit_table = table.select_rows(rows);
    for (auto t : targets) {
        const auto& spec = table.specs[t];
        if (kinds.count(spec.name)) continue;
        std::vector<SymbolicValue> column;
        for (const auto& r : fit_table.rows) column.push_back(r[t]);
        kinds[spec.name] = default_block_kind(spec, column);
    }

    out.inputs = encode_table(table, config.coding, inputs);
    out.targets = encode_targets(table, kinds, targets);

    const Matrix fit_inputs = out.inputs.values.select_rows(rows);
    out.input_standardizer = Standardizer::fit(fit_inputs);
    for (auto& g : out.inputs.groups) {
        for (std::size_t c = g.begin; c < g.end; ++c) {
            g.mean[c - g.begin] = out.input_standardizer.mean()[c];
            g.scale[c - g.begin] = out.input_standardizer.scale()[c];
        }
    }
    const auto mask = standardized_target_columns(out.targets.blocks, out.targets.values.cols());
    out.target_standardizer = Standardizer::fit(out.targets.values.select_rows(rows)).only_columns(mask);
    return out;
}

Dataset SymbolicModel::encode(const SymbolicTable& table) const {
    const auto in_vars = resolve_variables(table, input_specs);
    const auto out_vars = resolve_variables(table, target_specs);
    const auto inputs = encode_table(table, coding, in_vars);
    Dataset d;
    d.inputs = input_standardizer.transform(inputs.values);
    TargetEncoding targets;
    targets.values = Matrix(table.row_count(), architecture.output_dim());
    targets.micro_counts = Matrix(table.row_count(), architecture.outputs.size(), 1.0);
    for (std::size_t r = 0; r < table.row_count(); ++r)
        for (std::size_t k = 0; k < architecture.outputs.size(); ++k) {
            const auto& block = architecture.outputs[k];
            const auto& cell = table.rows[r][out_vars[k]];
            auto code = encode_target_value(target_specs[k], block, cell);
            std::copy(code.begin(), code.end(), targets.values.row(r).begin() + static_cast<std::ptrdiff_t>(block.begin));
            if (block.micro_weighted) {
                const auto& dist = std::get<value::Distribution>(cell);
                targets.micro_counts(r, k) = dist.micro_count ? static_cast<double>(*dist.micro_count) : 1.0;
            }
        }
    d.targets = target_standardizer.transform(targets.values);
    d.micro_counts = std::move(targets.micro_counts);
    return d;
}

std::vector<std::vector<SymbolicValue>> SymbolicModel::predict(const SymbolicTable& table,
                                                               std::vector<std::string>* notes) const {
    const auto in_vars = resolve_variables(table, input_specs);
    const Matrix x = input_standardizer.transform(encode_table(table, coding, in_vars).values);
    const Matrix out = target_standardizer.inverse_transform(symmlp::predict(architecture, weights, x));
    std::vector<std::vector<SymbolicValue>> rows(out.rows());
    for (std::size_t r = 0; r < out.rows(); ++r)
        for (const auto& block : architecture.outputs)
            rows[r].push_back(decode_output_block(block, out.row(r).subspan(block.begin, block.width()), notes));
    return rows;
}

json SymbolicModel::evaluate(const SymbolicTable& table) const {
    const Dataset d = encode(table);
    const auto out_vars = resolve_variables(table, target_specs);
    const auto predictions = predict(table);
    json metrics = json::array();
    for (std::size_t k = 0; k < target_specs.size(); ++k) {
        const auto& spec = target_specs[k];
        double sum = 0.0;
        std::size_t n = 0;
        std::string name;
        for (std::size_t r = 0; r < table.row_count(); ++r) {
            const auto& truth = table.rows[r][out_vars[k]];
            const auto& pred = predictions[r][k];
            switch (spec.kind) {
                case VariableKind::Quantitative:
                    name = "mae";
                    sum += std::abs(std::get<value::Number>(truth).x - std::get<value::Number>(pred).x);
                    break;
                case VariableKind::Interval: {
                    name = "mae_bounds";
                    const auto& a = std::get<value::Interval>(truth);
                    const auto& b = std::get<value::Interval>(pred);
                    sum += 0.5 * (std::abs(a.a - b.a) + std::abs(a.b - b.b));
                    break;
                }
                case VariableKind::CategoricalSingle:
                    name = "accuracy";
                    sum += std::get<value::Category>(truth) == std::get<value::Category>(pred) ? 1.0 : 0.0;
                    break;
                case VariableKind::CategoricalMulti: {
                    name = "hamming_accuracy";
                    const auto t = encode_categorical_multi(spec, std::get<value::CategorySet>(truth));
                    const auto p = encode_categorical_multi(spec, std::get<value::CategorySet>(pred));
                    double agree = 0.0;
                    for (std::size_t i = 0; i < t.size(); ++i) agree += t[i] == p[i] ? 1.0 : 0.0;
                    sum += agree / static_cast<double>(t.size());
                    break;
                }
                case VariableKind::Modal: {
                    name = "mean_l1";
                    const auto& t = std::get<value::Distribution>(truth).p;
                    const auto& p = std::get<value::Distribution>(pred).p;
                    for (std::size_t i = 0; i < t.size(); ++i) sum += std::abs(t[i] - p[i]);
                    break;
                }
            }
            ++n;
        }
        metrics.push_back({{"variable", spec.name}, {"metric", name}, {"value", n ? sum / static_cast<double>(n) : 0.0}});
    }
    return json{{"rows", table.row_count()},
                {"composite_loss", empirical_error(architecture, weights, d)},
                {"targets", std::move(metrics)}};
}

json SymbolicModel::to_json() const {
    json groups = json::array();
    for (const auto& g : input_groups)
        groups.push_back({{"source_variable", g.source_variable},
                          {"begin", g.begin},
                          {"end", g.end},
                          {"decay_divisor", g.decay_divisor},
                          {"coding", symmlp::to_string(g.coding)},
                          {"mean", g.mean},
                          {"scale", g.scale}});
    return json{{"inputs", specs_to_json(input_specs, Role::Input)},
                {"targets", specs_to_json(target_specs, Role::Target)},
                {"coding", coding_modes_to_json(coding)},
                {"groups", std::move(groups)},
                {"input_standardizer", input_standardizer.to_json()},
                {"target_standardizer", target_standardizer.to_json()},
                {"network", weights_to_json(architecture, weights)}};
}

SymbolicModel SymbolicModel::from_json(const json& j) {
    SymbolicModel m;
    m.input_specs = specs_from_json(j.at("inputs"));
    m.target_specs = specs_from_json(j.at("targets"));
    m.coding = parse_coding_modes(j.at("coding"));
    for (const auto& g : j.at("groups")) {
        ColumnGroup cg;
        cg.source_variable = g.at("source_variable").get<std::string>();
        cg.begin = g.at("begin").get<std::size_t>();
        cg.end = g.at("end").get<std::size_t>();
        cg.decay_divisor = g.at("decay_divisor").get<double>();
        cg.coding = coding_tag_from_string(g.at("coding").get<std::string>());
        cg.mean = g.at("mean").get<std::vector<double>>();
        cg.scale = g.at("scale").get<std::vector<double>>();
        m.input_groups.push_back(std::move(cg));
    }
    m.input_standardizer = Standardizer::from_json(j.at("input_standardizer"));
    m.target_standardizer = Standardizer::from_json(j.at("target_standardizer"));
    m.weights = weights_from_json(j.at("network"), &m.architecture);
    return m;
}

PipelineFit fit_pipeline(const SymbolicTable& table, const PipelineConfig& config) {
    PipelineFit out;
    out.split = split_indices(table.row_count(), config.plan.split, config.train.seed);
    if (out.split.validation.empty()) out.split.validation = out.split.train;
    auto prepared = prepare_table(table, config, out.split.train);

    const auto arch = make_architecture(config, prepared.inputs.values.cols(), prepared.targets.blocks);
    Dataset all{prepared.input_standardizer.transform(prepared.inputs.values),
                prepared.target_standardizer.transform(prepared.targets.values), prepared.targets.micro_counts};
    TrainConfig tc = config.train;
    tc.decay = make_decay(config.lambda, arch.layer_count(), prepared.inputs.groups, arch.input_dim);
    out.fit = train(arch, all.subset(out.split.train), all.subset(out.split.validation), tc);
    if (!out.split.test.empty())
        out.test_error = empirical_error(arch, out.fit.best_weights, all.subset(out.split.test),
                                         std::span<const double>(tc.block_weights));

    auto& m = out.model;
    m.input_specs = prepared.input_specs;
    m.target_specs = prepared.target_specs;
    for (const auto& g : prepared.inputs.groups) m.coding[g.source_variable] = g.coding;
    m.input_groups = prepared.inputs.groups;
    m.input_standardizer = prepared.input_standardizer;
    m.target_standardizer = prepared.target_standardizer;
    m.architecture = arch;
    m.weights = out.fit.best_weights;
    return out;
}

PipelineSelection select_pipeline(const SymbolicTable& table, const PipelineConfig& config) {
    const auto split = split_indices(table.row_count(), config.plan.split, config.train.seed);
    auto prepared = prepare_table(table, config, split.train);
    PipelineConfig single = config;
    if (single.hidden.empty()) single.hidden = {1};
    const auto arch = make_architecture(single, prepared.inputs.values.cols(), prepared.targets.blocks);
    Dataset all{prepared.input_standardizer.transform(prepared.inputs.values),
                prepared.target_standardizer.transform(prepared.targets.values), prepared.targets.micro_counts};
    TrainConfig tc = config.train;
    tc.decay = make_decay(config.lambda, arch.layer_count(), prepared.inputs.groups, arch.input_dim);
    const auto validation_rows = split.validation.empty() ? split.train : split.validation;
    const Dataset test = all.subset(split.test);

    PipelineSelection out;
    out.sweep = sweep(arch, config.plan.hidden_sizes, all.subset(split.train), all.subset(validation_rows), tc,
                      split.test.empty() ? nullptr : &test);
    if (config.plan.cv_folds) {
        std::vector<std::size_t> pool = split.train;
        pool.insert(pool.end(), split.validation.begin(), split.validation.end());
        std::sort(pool.begin(), pool.end());
        out.cv = k_fold_cv(out.sweep.winner_fit.architecture, all.subset(pool), *config.plan.cv_folds, tc);
    }
    auto& m = out.model;
    m.input_specs = prepared.input_specs;
    m.target_specs = prepared.target_specs;
    for (const auto& g : prepared.inputs.groups) m.coding[g.source_variable] = g.coding;
    m.input_groups = prepared.inputs.groups;
    m.input_standardizer = prepared.input_standardizer;
    m.target_standardizer = prepared.target_standardizer;
    m.architecture = out.sweep.winner_fit.architecture;
    m.weights = out.sweep.winner_fit.best_weights;
    return out;
}

}  // namespace symmlp
