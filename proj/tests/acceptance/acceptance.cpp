// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "optim_problems.hpp"
#include "symmlp/experiments.hpp"
#include "symmlp/pipeline.hpp"
#include "test_support.hpp"

using namespace symmlp;
using V = std::vector<double>;

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

struct Check {
    bool ok = true;
    std::string first_failure;

    void expect(bool condition, const std::string& what) {
        if (!condition && ok) first_failure = what;
        ok = ok && condition;
    }
};

std::string fmt(double v, int digits = 3) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*g", digits, v);
    return buf;
}

int failures = 0;

void criterion(int id, const std::string& name, double limit_seconds, const std::function<Outcome()>& body) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (limit_seconds > 0 && elapsed >= limit_seconds) {
        o.pass = false;
        o.detail += "; exceeded " + fmt(limit_seconds) + " s";
    }
    if (!o.pass) ++failures;
    std::printf("%s %d %s (%.2f s): %s\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), elapsed, o.detail.c_str());
    std::fflush(stdout);
}

Outcome weight_counts() {
    struct Row {
        std::size_t n, h_long, h_lat, expected;
    };
    const Row rows[] = {{24, 3, 30, 860}, {2, 30, 17, 190}, {4, 20, 25, 272}, {4, 25, 40, 392}};
    Check c;
    std::string got;
    for (const auto& r : rows) {
        const auto total = count_weights(r.n, r.h_long, 1) + count_weights(r.n, r.h_lat, 1);
        // Independent count from an allocated weight vector.
        const auto allocated = WeightVector(MlpArchitecture::single_hidden_regression(r.n, r.h_long)).size() +
                               WeightVector(MlpArchitecture::single_hidden_regression(r.n, r.h_lat)).size();
        c.expect(total == r.expected && allocated == r.expected, "n=" + std::to_string(r.n));
        got += (got.empty() ? "" : ", ") + std::to_string(total);
    }
    return {c.ok, got + (c.ok ? "" : "; mismatch at " + c.first_failure)};
}

Outcome gradients() {
    auto rng = make_rng(2024);
    const auto& kinds = testing::all_block_kinds();
    const std::vector<Activation> hidden{Activation::Tanh, Activation::Logistic, Activation::Identity,
                                         Activation::Exponential, Activation::Softmax};
    double worst = 0.0;
    std::size_t nets = 0;
    std::vector<bool> kind_seen(kinds.size(), false), act_seen(hidden.size(), false);
    bool mixed_divisors = false;
    for (std::size_t trial = 0; trial < 120; ++trial) {
        const std::vector<BlockKind> picked{kinds[trial % kinds.size()], kinds[(trial / kinds.size()) % kinds.size()]};
        const auto arch = testing::random_architecture(rng, picked, hidden, trial);
        for (const auto& b : arch.outputs)
            for (std::size_t k = 0; k < kinds.size(); ++k) kind_seen[k] = kind_seen[k] || kinds[k] == b.kind;
        for (const auto& h : arch.hidden)
            for (std::size_t k = 0; k < hidden.size(); ++k) act_seen[k] = act_seen[k] || hidden[k] == h.activation;
        const auto data = testing::random_dataset(arch, 5, rng);
        const auto decay = testing::random_decay(arch, rng);
        for (double d : decay.first_layer_divisors) mixed_divisors = mixed_divisors || d != decay.first_layer_divisors[0];
        const auto w = initialize_weights(arch, rng);
        auto f = [&](std::span<const double> ws) {
            return regularized_empirical_error(arch, WeightVector(arch, V(ws.begin(), ws.end())), data, decay).value;
        };
        const auto analytic = regularized_empirical_error(arch, w, data, decay).gradient;
        worst = std::max(worst, testing::max_relative_error(analytic, testing::finite_difference_gradient(f, w.values())));
        ++nets;
    }
    bool coverage = mixed_divisors;
    for (bool s : kind_seen) coverage = coverage && s;
    for (bool s : act_seen) coverage = coverage && s;
    return {worst < 1e-5 && coverage,
            std::to_string(nets) + " nets, max relative error " + fmt(worst) + (coverage ? "" : ", coverage incomplete")};
}

Outcome loss_formulas() {
    const double ln2 = std::log(2.0);
    const double ce = cross_entropy_loss(V{1, 0}, V{0.5, 0.5}).value;
    const double ice = independent_cross_entropy_loss(V{1, 1}, V{0.5, 0.5}).value;
    const double wm = weighted_multinomial_loss(V{0.5, 0.5}, V{0.5, 0.5}, 4).value;
    const double wm5 = weighted_multinomial_loss(V{1, 0}, V{0.8, 0.2}, 5).value;
    const double errs[] = {std::abs(ce - ln2), std::abs(ice - 2 * ln2), std::abs(wm - 4 * ln2),
                           std::abs(wm5 + 5 * std::log(0.8))};
    double worst = 0.0;
    for (double e : errs) worst = std::max(worst, e);
    return {worst <= 1e-12, "max deviation " + fmt(worst)};
}

Outcome round_trips() {
    auto rng = make_rng(4);
    const std::size_t per_kind = 1000;
    Check c;
    auto cat_spec = [](std::size_t m, VariableKind kind) {
        VariableSpec s{"v", kind, {}, false, std::nullopt};
        for (std::size_t i = 0; i < m; ++i) s.categories.push_back("c" + std::to_string(i));
        return s;
    };
    double modal_worst = 0.0, log_worst = 0.0;
    for (std::size_t i = 0; i < per_kind; ++i) {
        // Quantitative: any finite double.
        const double x = standard_normal(rng) * std::exp(uniform(rng, -30, 30));
        c.expect(decode_output_block({"q", 0, 1, BlockKind::LinearQuadratic, false}, encode_quantitative(x)) ==
                     SymbolicValue{value::Number{x}},
                 "quantitative");

        const std::size_t m = 2 + uniform_index(rng, 8);
        const value::Category cat{uniform_index(rng, m)};
        c.expect(decode_output_block({"c", 0, m, BlockKind::SoftmaxCrossEntropy, false},
                                     encode_categorical_single(cat_spec(m, VariableKind::CategoricalSingle), cat)) ==
                     SymbolicValue{cat},
                 "categorical");

        std::vector<std::size_t> members;
        for (std::size_t k = 0; k < m; ++k)
            if (uniform01(rng) < 0.5) members.push_back(k);
        if (members.empty()) members.push_back(cat.index);
        const auto set = make_category_set(members);
        c.expect(decode_output_block({"s", 0, m, BlockKind::LogisticIndependent, false},
                                     encode_categorical_multi(cat_spec(m, VariableKind::CategoricalMulti), set)) ==
                     SymbolicValue{set},
                 "multi");

        // Intervals on a 2^-10 grid, where midpoint and half-length are exact in binary.
        const double a = static_cast<double>(static_cast<long>(uniform_index(rng, 1u << 24)) - (1 << 23)) / 1024.0;
        const double b = a + static_cast<double>(uniform_index(rng, 1u << 24)) / 1024.0;
        c.expect(decode_output_block({"i", 0, 2, BlockKind::IntervalMeanLength, false},
                                     encode_interval({a, b}, IntervalMode::MeanLength)) ==
                     SymbolicValue{value::Interval{a, b}},
                 "interval mean/length");
        if (b > a) {
            const auto back = std::get<value::Interval>(decode_output_block(
                {"i", 0, 2, BlockKind::IntervalMeanLogLength, false}, encode_interval({a, b}, IntervalMode::MeanLogLength)));
            const double scale = std::max({std::abs(a), std::abs(b), b - a});
            log_worst = std::max({log_worst, std::abs(back.a - a) / scale, std::abs(back.b - b) / scale});
        }

        V p(m);
        double sum = 0.0;
        for (auto& v : p) sum += (v = uniform(rng, 0.0, 1.0));
        for (auto& v : p) v /= sum;
        const auto back = std::get<value::Distribution>(
            decode_output_block({"d", 0, m, BlockKind::ModalSoftmax, false},
                                encode_modal(cat_spec(m, VariableKind::Modal), value::Distribution{p, std::nullopt})));
        for (std::size_t k = 0; k < m; ++k) modal_worst = std::max(modal_worst, std::abs(back.p[k] - p[k]));
    }
    c.expect(modal_worst <= 1e-12, "modal");
    c.expect(log_worst <= 1e-12, "interval mean/log-length");
    return {c.ok, std::to_string(per_kind) + " values per kind; exact for quantitative, categorical, multi and " +
                      "interval mean/length; modal max error " + fmt(modal_worst) + ", log-length relative error " +
                      fmt(log_worst) + (c.ok ? "" : "; failed: " + c.first_failure)};
}

Outcome degradation_exactness() {
    using L = DegradationLevel;
    using I = std::vector<std::size_t>;
    Check c;
    // 1-based lists as written for the three levels.
    const I half{2, 4, 6, 8, 10, 12}, two_thirds{2, 3, 5, 6, 8, 9, 11, 12}, three_quarters{2, 3, 4, 6, 7, 8, 10, 11, 12};
    auto one_based = [](I v) {
        for (auto& x : v) ++x;
        return v;
    };
    c.expect(one_based(missing_months(L::Half)) == half, "half pattern");
    c.expect(one_based(missing_months(L::TwoThirds)) == two_thirds, "two-thirds pattern");
    c.expect(one_based(missing_months(L::ThreeQuarters)) == three_quarters, "three-quarters pattern");
    Station s;
    for (std::size_t i = 0; i < 12; ++i) s.temperature[i] = s.precipitation[i] = static_cast<double>(i);
    for (auto l : {L::Half, L::TwoThirds, L::ThreeQuarters}) {
        const auto d = degrade(s, l);
        for (auto i : missing_months(l)) c.expect(std::isnan(d.temperature[i]) && std::isnan(d.precipitation[i]), "degrade");
    }

    auto rng = make_rng(5);
    double worst = 0.0;
    auto ulps = [](double got, double want) {
        return std::abs(got - want) / (std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(want)));
    };
    for (int trial = 0; trial < 1000; ++trial) {
        MonthlyVector v;
        for (auto& x : v) x = uniform(rng, -40, 40);
        auto cut = [&](L l) {
            MonthlyVector d = v;
            for (auto i : missing_months(l)) d[i] = std::numeric_limits<double>::quiet_NaN();
            return interpolate_periodic(d, l);
        };
        const auto h = cut(L::Half);
        for (std::size_t i = 1; i < 11; i += 2) worst = std::max(worst, ulps(h[i], (v[i - 1] + v[i + 1]) / 2));
        worst = std::max(worst, ulps(h[11], (v[0] + v[10]) / 2));
        const auto t = cut(L::TwoThirds);
        for (std::size_t g = 0; g < 12; g += 3) {
            const double a = v[g], b = v[(g + 3) % 12];
            worst = std::max({worst, ulps(t[g + 1], (2 * a + b) / 3), ulps(t[g + 2], (a + 2 * b) / 3)});
        }
        const auto q = cut(L::ThreeQuarters);
        for (std::size_t g = 0; g < 12; g += 4) {
            const double a = v[g], b = v[(g + 4) % 12];
            worst = std::max({worst, ulps(q[g + 1], (3 * a + b) / 4), ulps(q[g + 2], (a + b) / 2),
                              ulps(q[g + 3], (a + 3 * b) / 4)});
        }
    }
    c.expect(worst <= 4.0, "interpolation");
    return {c.ok, "patterns match; worst interpolation error " + fmt(worst) + " ulp" +
                      (c.ok ? "" : "; failed: " + c.first_failure)};
}

Outcome decay_normalization() {
    auto rng = make_rng(6);
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        // Five-category group in columns 0..4, interval (mean, length) in columns 5..6.
        const std::vector<ColumnGroup> groups{{"c", 0, 5, 5.0, {}, {}, CodingTag::Disjunctive},
                                              {"i", 5, 7, 1.0, {}, {}, CodingTag::MeanLength}};
        MlpArchitecture arch = MlpArchitecture::single_hidden_regression(7, 1 + uniform_index(rng, 6));
        const double lambda = uniform(rng, 1e-3, 1.0);
        // Decay on the first layer only, so the penalty splits into the two groups exactly.
        DecayPolicy decay = DecayPolicy::uniform(lambda, arch.layer_count(), groups, 7);
        decay.lambda_per_layer[1] = 0.0;
        auto w = initialize_weights(arch, rng);
        for (auto& x : w.values()) x = standard_normal(rng);
        double cat = 0.0, interval = 0.0;
        for (std::size_t k = 0; k < arch.hidden[0].size; ++k) {
            for (std::size_t i = 0; i < 5; ++i) cat += w[w.index(0, k, i + 1)] * w[w.index(0, k, i + 1)];
            for (std::size_t i = 5; i < 7; ++i) interval += w[w.index(0, k, i + 1)] * w[w.index(0, k, i + 1)];
        }
        // Each group alone: zero the other group's weights.
        auto only = [&](std::size_t lo, std::size_t hi) {
            auto v = w;
            for (std::size_t k = 0; k < arch.hidden[0].size; ++k)
                for (std::size_t i = 0; i < 7; ++i)
                    if (i < lo || i >= hi) v[v.index(0, k, i + 1)] = 0.0;
            return decay.penalty(v);
        };
        const double want_cat = lambda / 5.0 * cat, want_interval = lambda * interval;
        worst = std::max({worst, std::abs(only(0, 5) - want_cat) / std::max(1.0, want_cat),
                          std::abs(only(5, 7) - want_interval) / std::max(1.0, want_interval),
                          std::abs(decay.penalty(w) - want_cat - want_interval) / std::max(1.0, want_cat + want_interval)});
    }
    return {worst <= 1e-12, "200 random weight sets, max deviation " + fmt(worst)};
}

Outcome optimizer_sanity() {
    Check c;
    auto rng = make_rng(7);
    const std::size_t n = 10;
    const auto bowl = testing::make_bowl(n, rng);
    // At most dim + 1 iterations are allowed; the result must match a direct solve.
    const auto q = minimize(bowl, V(n, 0.0), {Optimizer::ConjugateGradient, n + 1, 1e-10});
    const double bowl_err = bowl.solution_error(q.w);
    c.expect(bowl_err < 1e-8, "quadratic bowl");
    const auto r = minimize(testing::rosenbrock, V{-1.2, 1.0}, {Optimizer::ConjugateGradient, 5000, 1e-10});
    const double rosen_err = std::max(std::abs(r.w[0] - 1.0), std::abs(r.w[1] - 1.0));
    c.expect(rosen_err < 1e-4, "Rosenbrock");
    const double xor_ce = testing::train_xor(10, 0.05);
    c.expect(xor_ce < 0.05, "XOR");
    return {c.ok, "bowl (dim " + std::to_string(n) + "): " + std::to_string(q.iterations) + " iterations, error " + fmt(bowl_err) +
                      "; Rosenbrock error " + fmt(rosen_err) + "; XOR cross-entropy " + fmt(xor_ce) +
                      (c.ok ? "" : "; failed: " + c.first_failure)};
}

struct ExperimentRun {
    std::string report_json, table, predictions, robustness;
    ExperimentReport report;
    DegradationReport study;
};

ExperimentRun run_climate(std::size_t jobs) {
    auto config = ExperimentConfig::desk_scale();
    config.train.jobs = jobs;
    const auto stations = generate_synthetic_stations(config.stations, config.seed, config.noise_level);
    ExperimentRun run;
    run.report = run_experiment(stations, config);
    std::vector<LocationModel> models;
    for (const auto& r : run.report.results) models.push_back(r.model);
    run.study = run_degradation_study(models, run.report.split.test, {DegradationLevel::None, DegradationLevel::Half});
    run.report_json = run.report.to_json().dump(2);
    run.table = run.report.to_table();
    run.predictions = run.report.predictions_csv();
    run.robustness = run.study.to_csv();
    return run;
}

ExperimentRun climate_run;

Outcome experiment_orderings() {
    climate_run = run_climate(std::max(1u, std::thread::hardware_concurrency()));
    const auto& results = climate_run.report.results;
    auto find = [&](CodingMethod m) -> const LocationResult& {
        for (const auto& r : results)
            if (r.method == m) return r;
        throw std::runtime_error("missing method");
    };
    const auto& mean2 = find(CodingMethod::Mean2);
    const auto& mean_sd = find(CodingMethod::MeanSd4);
    const auto& min_max = find(CodingMethod::MinMax4);
    Check c;
    c.expect(mean2.mae_longitude > mean_sd.mae_longitude && mean2.mae_longitude > min_max.mae_longitude,
             "(a) longitude");
    c.expect(mean2.mae_latitude > mean_sd.mae_latitude && mean2.mae_latitude > min_max.mae_latitude, "(a) latitude");
    for (const auto& r : results)
        c.expect(r.mae_latitude < r.mae_longitude, "(b) " + std::string(to_string(r.method)));
    const auto& full = climate_run.study.at(DegradationLevel::Half, CodingMethod::Full24);
    for (auto m : {CodingMethod::MeanSd4, CodingMethod::MinMax4}) {
        const auto& row = climate_run.study.at(DegradationLevel::Half, m);
        c.expect(full.relative_increase_longitude > row.relative_increase_longitude,
                 "(c) longitude vs " + std::string(to_string(m)));
        c.expect(full.relative_increase_latitude > row.relative_increase_latitude,
                 "(c) latitude vs " + std::string(to_string(m)));
    }
    std::string detail = "MAE lon/lat";
    for (const auto& r : results)
        detail += " " + std::string(to_string(r.method)) + "=" + fmt(r.mae_longitude) + "/" + fmt(r.mae_latitude);
    detail += "; half-level increase lon/lat";
    for (const auto& r : results) {
        const auto& row = climate_run.study.at(DegradationLevel::Half, r.method);
        detail += " " + std::string(to_string(r.method)) + "=" + fmt(row.relative_increase_longitude, 2) + "/" +
                  fmt(row.relative_increase_latitude, 2);
    }
    return {c.ok, detail + (c.ok ? "" : "; failed: " + c.first_failure)};
}

std::string five_categories() {
    std::ifstream in(SYMMLP_TEST_DATA_DIR "/five_categories.json");
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome determinism() {
    Check c;
    // Same seed and config on a single thread must reproduce the multi-threaded run byte for byte.
    const auto again = run_climate(1);
    c.expect(again.report_json == climate_run.report_json, "experiment report");
    c.expect(again.table == climate_run.table, "experiment table");
    c.expect(again.predictions == climate_run.predictions, "predictions");
    c.expect(again.robustness == climate_run.robustness, "robustness curves");

    const auto table = parse_table(std::string_view(five_categories()));
    PipelineConfig config;
    config.train.restarts = 3;
    config.lambda = {0.01};
    config.plan.hidden_sizes = {2, 5};
    config.plan.cv_folds = 4;
    auto dump = [&] {
        const auto fit = fit_pipeline(table, config);
        const auto sel = select_pipeline(table, config);
        return fit.fit.to_json().dump() + fit.model.to_json().dump() + sel.sweep.to_json().dump() +
               sel.cv->to_json().dump() + sel.model.evaluate(table).dump();
    };
    c.expect(dump() == dump(), "symbolic pipeline");
    return {c.ok, "experiment, robustness and symbolic pipeline reruns are byte-identical" +
                      std::string(c.ok ? "" : "; differs: " + c.first_failure)};
}

}  // namespace

int main() {
    criterion(1, "weight counts", 1.0, weight_counts);
    criterion(2, "gradient correctness", 30.0, gradients);
    criterion(3, "loss formulas", 0.0, loss_formulas);
    criterion(4, "encode/decode round trips", 5.0, round_trips);
    criterion(5, "degradation and interpolation", 0.0, degradation_exactness);
    criterion(6, "decay normalization", 0.0, decay_normalization);
    criterion(7, "optimizer sanity", 60.0, optimizer_sanity);
    criterion(8, "experiment orderings", 600.0, experiment_orderings);
    criterion(9, "determinism", 0.0, determinism);
    std::printf("%s: %d of 9 criteria failed\n", failures ? "FAIL" : "PASS", failures);
    return failures ? 1 : 0;
}
