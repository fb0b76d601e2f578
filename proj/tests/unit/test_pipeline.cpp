#include <doctest.h>

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "symmlp/pipeline.hpp"
#include "symmlp/rng.hpp"

using namespace symmlp;
using nlohmann::json;

namespace {

SymbolicTable five_categories() {
    std::ifstream in(SYMMLP_TEST_DATA_DIR "/five_categories.json");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_table(std::string_view(buffer.str()));
}

// Interval input, interval and categorical targets.
SymbolicTable mixed_targets(std::size_t n, std::uint64_t seed) {
    auto rng = make_rng(seed);
    json rows = json::array();
    for (std::size_t r = 0; r < n; ++r) {
        const double c = uniform(rng, -2, 2), w = uniform(rng, 0.1, 1.0);
        rows.push_back({{{"a", c - w}, {"b", c + w}}, {{"a", 2 * c - 0.5}, {"b", 2 * c + 0.5 + w}}, {{"cat", c > 0 ? "pos" : "neg"}}});
    }
    return parse_table(json{{"variables",
                             {{{"name", "i"}, {"kind", "interval"}},
                              {{"name", "o"}, {"kind", "interval"}, {"role", "target"}},
                              {{"name", "s"}, {"kind", "categorical"}, {"categories", {"neg", "pos"}}, {"role", "target"}}}},
                            {"rows", rows}});
}

PipelineConfig quick() {
    PipelineConfig c;
    c.hidden = {4};
    c.lambda = {0.001};
    c.train.max_iterations = 150;
    c.train.restarts = 2;
    c.train.seed = 2;
    return c;
}

}  // namespace

TEST_SUITE("pipeline") {
    TEST_CASE("five-category table trains and evaluates") {
        const auto t = five_categories();
        const auto fit = fit_pipeline(t, quick());
        CHECK(fit.split.train.size() == 24);
        CHECK(fit.split.validation.size() == 8);
        CHECK(fit.split.test.size() == 8);
        REQUIRE(fit.test_error.has_value());
        CHECK(std::isfinite(*fit.test_error));
        CHECK(fit.model.input_groups[0].decay_divisor == 5.0);
        const auto metrics = fit.model.evaluate(t);
        CHECK(metrics["rows"] == 40);
        CHECK(metrics["targets"][0]["metric"] == "mae");
        const auto predictions = fit.model.predict(t);
        CHECK(predictions.size() == 40);
        CHECK(std::holds_alternative<value::Number>(predictions[0][0]));
    }

    TEST_CASE("model JSON round trip preserves predictions") {
        const auto t = five_categories();
        const auto fit = fit_pipeline(t, quick());
        const auto back = SymbolicModel::from_json(json::parse(fit.model.to_json().dump()));
        CHECK(back.to_json() == fit.model.to_json());
        CHECK(back.predict(t) == fit.model.predict(t));
    }

    TEST_CASE("pipeline is reproducible") {
        const auto t = five_categories();
        CHECK(fit_pipeline(t, quick()).fit.to_json().dump() == fit_pipeline(t, quick()).fit.to_json().dump());
    }

    TEST_CASE("mixed symbolic targets decode to valid values") {
        const auto t = mixed_targets(60, 4);
        const auto fit = fit_pipeline(t, quick());
        CHECK(fit.model.architecture.outputs.size() == 2);
        CHECK(fit.model.architecture.outputs[1].kind == BlockKind::SoftmaxCrossEntropy);
        std::vector<std::string> notes;
        for (const auto& row : fit.model.predict(t, &notes)) {
            const auto& iv = std::get<value::Interval>(row[0]);
            CHECK(iv.a <= iv.b);
            CHECK(std::get<value::Category>(row[1]).index < 2);
        }
        const auto metrics = fit.model.evaluate(t);
        CHECK(metrics["targets"][0]["metric"] == "mae_bounds");
        CHECK(metrics["targets"][1]["metric"] == "accuracy");
        CHECK(metrics["targets"][1]["value"].get<double>() > 0.8);
    }

    TEST_CASE("target standardization covers numeric outputs only") {
        std::vector<OutputBlockSpec> blocks{{"q", 0, 1, BlockKind::LinearQuadratic, false},
                                            {"i", 1, 3, BlockKind::IntervalMeanLength, false},
                                            {"l", 3, 5, BlockKind::IntervalMeanLogLength, false},
                                            {"c", 5, 7, BlockKind::SoftmaxCrossEntropy, false}};
        CHECK(standardized_target_columns(blocks, 7) == std::vector<bool>{true, true, false, true, true, false, false});
    }

    TEST_CASE("selection sweeps and cross-validates") {
        const auto t = five_categories();
        auto c = quick();
        c.plan.hidden_sizes = {2, 4};
        c.plan.cv_folds = 3;
        const auto s = select_pipeline(t, c);
        CHECK(s.sweep.candidates.size() == 2);
        REQUIRE(s.cv.has_value());
        CHECK(s.cv->fold_errors.size() == 3);
        CHECK(s.model.architecture.hidden[0].size == s.sweep.winning().hidden_size);
    }

    TEST_CASE("config JSON") {
        auto c = quick();
        c.hidden_activation = Activation::Logistic;
        const auto back = PipelineConfig::from_json(json::parse(c.to_json().dump()));
        CHECK(back.to_json() == c.to_json());
        CHECK(PipelineConfig::from_json({{"lambda", 0.5}}).lambda == std::vector<double>{0.5});
        CHECK_THROWS(PipelineConfig::from_json({{"lambda", -1}}));
    }

    TEST_CASE("table without targets is rejected") {
        const auto t = parse_quantitative_csv("a,b\n1,2\n3,4\n5,6\n");
        CHECK_THROWS(fit_pipeline(t, quick()));
    }
}
