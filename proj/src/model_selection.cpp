#include "symmlp/model_selection.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

namespace symmlp {

using nlohmann::json;

void SelectionPlan::validate() const {
    if (hidden_sizes.empty()) throw SelectionError("selection plan has no hidden sizes");
    for (auto h : hidden_sizes)
        if (h == 0) throw SelectionError("hidden sizes must be positive");
    if (cv_folds && *cv_folds < 2) throw SelectionError("cross-validation needs k >= 2");
    if (const auto* r = std::get_if<SplitRatios>(&split)) {
        const double sum = r->train + r->validation + r->test;
        if (r->train < 0 || r->validation < 0 || r->test < 0 || std::abs(sum - 1.0) > 1e-9)
            throw SelectionError("split ratios must be non-negative and sum to 1");
    }
}

json SelectionPlan::to_json() const {
    json j{{"hidden_sizes", hidden_sizes}};
    if (const auto* c = std::get_if<SplitCounts>(&split))
        j["split"] = {{"train", c->train}, {"validation", c->validation}, {"test", c->test}};
    else {
        const auto& r = std::get<SplitRatios>(split);
        j["split"] = {{"train_ratio", r.train}, {"validation_ratio", r.validation}, {"test_ratio", r.test}};
    }
    if (cv_folds) j["cv_folds"] = *cv_folds;
    return j;
}

SelectionPlan SelectionPlan::from_json(const json& j) {
    SelectionPlan p;
    if (j.contains("hidden_sizes")) p.hidden_sizes = j["hidden_sizes"].get<std::vector<std::size_t>>();
    if (j.contains("split")) {
        const auto& s = j["split"];
        if (s.contains("train_ratio"))
            p.split = SplitRatios{s.at("train_ratio").get<double>(), s.at("validation_ratio").get<double>(),
                                  s.at("test_ratio").get<double>()};
        else
            p.split = SplitCounts{s.at("train").get<std::size_t>(), s.at("validation").get<std::size_t>(),
                                  s.at("test").get<std::size_t>()};
    }
    if (j.contains("cv_folds") && !j["cv_folds"].is_null()) p.cv_folds = j["cv_folds"].get<std::size_t>();
    p.validate();
    return p;
}

SplitCounts resolve_split(const SplitRule& rule, std::size_t n) {
    if (const auto* c = std::get_if<SplitCounts>(&rule)) {
        if (c->train + c->validation + c->test != n)
            throw SelectionError("split counts (" + std::to_string(c->train) + ", " + std::to_string(c->validation) +
                                 ", " + std::to_string(c->test) + ") do not sum to " + std::to_string(n));
        if (c->train == 0) throw SelectionError("training split is empty");
        return *c;
    }
    const auto& r = std::get<SplitRatios>(rule);
    const std::array<double, 3> ratio{r.train, r.validation, r.test};
    std::array<std::size_t, 3> count{};
    std::array<double, 3> frac{};
    std::size_t assigned = 0;
    for (int i = 0; i < 3; ++i) {
        const double exact = ratio[i] * static_cast<double>(n);
        count[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
        frac[i] = exact - static_cast<double>(count[i]);
        assigned += count[i];
    }
    if (assigned > n) throw SelectionError("split ratios exceed the row count");
    std::array<int, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return frac[a] > frac[b]; });
    for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++count[order[k % 3]];
    if (count[0] == 0) throw SelectionError("training split is empty");
    return {count[0], count[1], count[2]};
}

SplitIndices split_indices(std::size_t n, const SplitRule& rule, std::uint64_t seed) {
    const auto counts = resolve_split(rule, n);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    auto rng = make_rng(seed, 0x5b1170);
    shuffle(std::span<std::size_t>(order), rng);
    SplitIndices out;
    auto it = order.begin();
    out.train.assign(it, it + static_cast<std::ptrdiff_t>(counts.train));
    it += static_cast<std::ptrdiff_t>(counts.train);
    out.validation.assign(it, it + static_cast<std::ptrdiff_t>(counts.validation));
    it += static_cast<std::ptrdiff_t>(counts.validation);
    out.test.assign(it, order.end());
    return out;
}

TableSplit split_dataset(const SymbolicTable& table, const SelectionPlan& plan, std::uint64_t seed) {
    plan.validate();
    const auto idx = split_indices(table.row_count(), plan.split, seed);
    return {table.select_rows(idx.train), table.select_rows(idx.validation), table.select_rows(idx.test)};
}

json SweepReport::to_json() const {
    json rows = json::array();
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const auto& c = candidates[i];
        json row{{"hidden_size", c.hidden_size},
                 {"weights", c.weight_count},
                 {"winner", i == winner}};
        if (c.ok()) {
            row["validation_error"] = c.validation_error;
            row["train_error"] = c.train_error;
        } else {
            row["error"] = c.error;
        }
        rows.push_back(std::move(row));
    }
    json j{{"candidates", std::move(rows)}, {"winner_hidden_size", candidates.at(winner).hidden_size}};
    if (test_error) j["test_error"] = *test_error;
    return j;
}

MlpArchitecture with_hidden_size(const MlpArchitecture& arch_template, std::size_t hidden_size) {
    MlpArchitecture a = arch_template;
    if (a.hidden.empty()) a.hidden.push_back({hidden_size, Activation::Tanh});
    else a.hidden.front().size = hidden_size;
    return a;
}

SweepReport sweep(const MlpArchitecture& arch_template, const std::vector<std::size_t>& hidden_sizes,
                  const Dataset& train_set, const Dataset& validation_set, const TrainConfig& config,
                  const Dataset* test_set) {
    if (hidden_sizes.empty()) throw SelectionError("sweep needs at least one hidden size");
    // Evaluate in ascending size so the report order and tie-break do not depend on input order.
    std::vector<std::size_t> sizes = hidden_sizes;
    std::sort(sizes.begin(), sizes.end());
    sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());

    SweepReport report;
    std::vector<FitReport> fits(sizes.size());
    report.candidates.resize(sizes.size());
    TrainConfig inner = config;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        auto& c = report.candidates[i];
        c.hidden_size = sizes[i];
        const auto arch = with_hidden_size(arch_template, sizes[i]);
        c.weight_count = count_weights(arch);
        try {
            fits[i] = train(arch, train_set, validation_set, inner);
            c.validation_error = fits[i].best_validation_error;
            c.train_error = empirical_error(arch, fits[i].best_weights, train_set,
                                            std::span<const double>(config.block_weights));
        } catch (const std::exception& e) {
            c.error = e.what();
        }
    }

    // Errors within kSelectionTieTolerance count as equal; the smaller size then wins.
    std::optional<std::size_t> winner;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        const auto& c = report.candidates[i];
        if (!c.ok()) continue;
        if (!winner) {
            winner = i;
            continue;
        }
        const double best = report.candidates[*winner].validation_error;
        if (c.validation_error < best - kSelectionTieTolerance * std::max(1.0, std::abs(best))) winner = i;
    }
    if (!winner) throw SelectionError("every candidate size failed to train");
    report.winner = *winner;
    report.winner_fit = std::move(fits[*winner]);
    if (test_set && test_set->size() > 0)
        report.test_error = empirical_error(report.winner_fit.architecture, report.winner_fit.best_weights,
                                            *test_set, std::span<const double>(config.block_weights));
    return report;
}

std::vector<std::vector<std::size_t>> make_folds(std::size_t n, std::size_t k, std::uint64_t seed) {
    if (k < 2) throw SelectionError("k-fold cross-validation needs k >= 2");
    if (k > n) throw SelectionError("k = " + std::to_string(k) + " exceeds the " + std::to_string(n) + " rows");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    auto rng = make_rng(seed, 0xf01d);
    shuffle(std::span<std::size_t>(order), rng);
    std::vector<std::vector<std::size_t>> folds(k);
    for (std::size_t i = 0; i < n; ++i) folds[i % k].push_back(order[i]);
    return folds;
}

json CvReport::to_json() const { return json{{"fold_errors", fold_errors}, {"mean", mean}, {"sd", sd}}; }

CvReport k_fold_cv(const MlpArchitecture& arch, const Dataset& data, std::size_t k, const TrainConfig& config) {
    const auto folds = make_folds(data.size(), k, config.seed);
    CvReport report;
    report.fold_errors.resize(k);
    for (std::size_t f = 0; f < k; ++f) {
        std::vector<std::size_t> train_rows;
        for (std::size_t g = 0; g < k; ++g)
            if (g != f) train_rows.insert(train_rows.end(), folds[g].begin(), folds[g].end());
        std::sort(train_rows.begin(), train_rows.end());
        auto held = folds[f];
        std::sort(held.begin(), held.end());
        const Dataset train_set = data.subset(train_rows);
        const Dataset held_out = data.subset(held);
        TrainConfig fold_config = config;
        fold_config.seed = config.seed + f;
        auto fit = train(arch, train_set, train_set, fold_config);
        report.fold_errors[f] =
            empirical_error(arch, fit.best_weights, held_out, std::span<const double>(config.block_weights));
    }
    double sum = 0.0;
    for (double e : report.fold_errors) sum += e;
    report.mean = sum / static_cast<double>(k);
    double ss = 0.0;
    for (double e : report.fold_errors) ss += (e - report.mean) * (e - report.mean);
    report.sd = std::sqrt(ss / static_cast<double>(k - 1));
    return report;
}

}  // namespace symmlp
