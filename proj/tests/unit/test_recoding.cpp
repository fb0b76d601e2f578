#include <doctest.h>

#include <cmath>

#include <nlohmann/json.hpp>

#include "symmlp/recoding.hpp"
#include "symmlp/rng.hpp"

using namespace symmlp;
using nlohmann::json;
using V = std::vector<double>;

namespace {

VariableSpec cat_spec(std::size_t m, bool ordered = false, VariableKind kind = VariableKind::CategoricalSingle) {
    VariableSpec s{"c", kind, {}, ordered, std::nullopt};
    for (std::size_t i = 0; i < m; ++i) s.categories.push_back("A" + std::to_string(i + 1));
    return s;
}

VariableSpec taxonomy_spec() {
    auto s = cat_spec(3);
    s.taxonomy = TaxonomyNode{"root", {{"AB", {{"A1", {}}, {"A2", {}}}}, {"A3", {}}}};
    return s;
}

OutputBlockSpec block(BlockKind kind, std::size_t width) { return {"y", 0, width, kind, false}; }

}  // namespace

TEST_SUITE("recoding") {
    TEST_CASE("quantitative") {
        CHECK(encode_quantitative(5.0) == V{5.0});
        CHECK(encode_quantitative(0.0) == V{0.0});
        CHECK(encode_quantitative(-3.2) == V{-3.2});
        CHECK_THROWS_AS(encode_quantitative(INFINITY), EncodingError);
        CHECK_THROWS_AS(encode_quantitative(NAN), EncodingError);
    }

    TEST_CASE("categorical single") {
        CHECK(encode_categorical_single(cat_spec(4), {1}) == V{0, 1, 0, 0});
        CHECK(encode_categorical_single(cat_spec(3, true), {2}) == V{3});
        CHECK(encode_categorical_single(cat_spec(1), {0}) == V{1});
        CHECK_THROWS_AS(encode_categorical_single(cat_spec(3), {3}), EncodingError);
    }

    TEST_CASE("disjunctive codes are orthogonal unit vectors") {
        const auto spec = cat_spec(6);
        for (std::size_t i = 0; i < 6; ++i)
            for (std::size_t j = 0; j < 6; ++j) {
                const auto a = encode_categorical_single(spec, {i});
                const auto b = encode_categorical_single(spec, {j});
                double dot = 0.0;
                for (std::size_t k = 0; k < 6; ++k) dot += a[k] * b[k];
                CHECK(dot == (i == j ? 1.0 : 0.0));
            }
    }

    TEST_CASE("interval") {
        CHECK(encode_interval({1, 3}, IntervalMode::MeanLength) == V{2, 2});
        CHECK(encode_interval({7, 7}, IntervalMode::MeanLength) == V{7, 0});
        CHECK(encode_interval({0, 1}, IntervalMode::MeanLogLength) == V{0.5, 0});
        CHECK(encode_interval({-1, 4}, IntervalMode::Bounds) == V{-1, 4});
        try {
            encode_interval({2, 2}, IntervalMode::MeanLogLength);
            FAIL("expected EncodingError");
        } catch (const EncodingError& e) {
            CHECK(std::string(e.what()) == "degenerate interval; use mean_length");
        }
        CHECK_THROWS_AS(encode_interval({3, 1}, IntervalMode::MeanLength), EncodingError);
    }

    TEST_CASE("categorical multi") {
        CHECK(encode_categorical_multi(cat_spec(5, false, VariableKind::CategoricalMulti), make_category_set({0, 2})) ==
              V{1, 0, 1, 0, 0});
        CHECK(encode_categorical_multi(cat_spec(3, false, VariableKind::CategoricalMulti), make_category_set({0, 1, 2})) ==
              V{1, 1, 1});
        CHECK(encode_categorical_multi(cat_spec(2, false, VariableKind::CategoricalMulti), make_category_set({1})) ==
              V{0, 1});
        CHECK_THROWS_AS(encode_categorical_multi(cat_spec(2, false, VariableKind::CategoricalMulti), {}), EncodingError);
    }

    TEST_CASE("modal") {
        const auto s2 = cat_spec(2, false, VariableKind::Modal);
        CHECK(encode_modal(s2, {{0.2, 0.8}, std::nullopt}) == V{0.2, 0.8});
        CHECK(encode_modal(s2, {{1, 0}, std::nullopt}) == V{1, 0});
        const double third = 1.0 / 3.0;
        CHECK(encode_modal(cat_spec(3, false, VariableKind::Modal), {{third, third, third}, std::nullopt}) ==
              V{third, third, third});
        CHECK_THROWS_AS(encode_modal(s2, {{0.7, 0.7}, std::nullopt}), EncodingError);
    }

    TEST_CASE("taxonomy") {
        const auto spec = taxonomy_spec();
        CHECK(encode_taxonomy(spec, "A2") == V{0, 1, 0});
        CHECK(encode_taxonomy(spec, "AB") == V{1, 1, 0});
        CHECK(encode_taxonomy(spec, "root") == V{1, 1, 1});
        CHECK_THROWS_AS(encode_taxonomy(spec, "nowhere"), EncodingError);
        CHECK_THROWS_AS(encode_taxonomy(cat_spec(3), "A1"), EncodingError);
        CHECK(encode_value(spec, CodingTag::Taxonomy, value::TaxonRef{"AB"}) == V{1, 1, 0});
        CHECK(encode_value(spec, CodingTag::Taxonomy, value::Category{2}) == V{0, 0, 1});
    }

    TEST_CASE("encode_table composition and divisors") {
        SymbolicTable t;
        t.specs = {{"q", VariableKind::Quantitative, {}, false, std::nullopt},
                   {"i", VariableKind::Interval, {}, false, std::nullopt}};
        t.roles = {Role::Input, Role::Input};
        t.rows = {{value::Number{1}, value::Interval{0, 2}}, {value::Number{2}, value::Interval{1, 5}}};
        auto m = encode_table(t, {});
        CHECK(m.values.cols() == 3);
        REQUIRE(m.groups.size() == 2);
        CHECK(m.groups[0].width() == 1);
        CHECK(m.groups[1].width() == 2);
        CHECK(m.groups[0].decay_divisor == 1.0);
        CHECK(m.groups[1].decay_divisor == 1.0);
        CHECK(m.values.row(1)[1] == 3.0);
        CHECK(m.values.row(1)[2] == 4.0);
        CHECK(m.groups[0].mean == V{0});
        CHECK(m.groups[0].scale == V{1});

        SymbolicTable five{{cat_spec(5)}, {Role::Input}, {{value::Category{0}}, {value::Category{4}}}};
        auto f = encode_table(five, {});
        CHECK(f.values.cols() == 5);
        CHECK(f.groups[0].decay_divisor == 5.0);
        CHECK(f.column_divisors() == V{5, 5, 5, 5, 5});

        SymbolicTable mq{{cat_spec(3, false, VariableKind::Modal), {"q", VariableKind::Quantitative, {}, false, std::nullopt}},
                         {Role::Input, Role::Input},
                         {{value::Distribution{{0.2, 0.3, 0.5}, std::nullopt}, value::Number{4}}}};
        auto e = encode_table(mq, {});
        CHECK(e.values.cols() == 4);
        CHECK(e.column_divisors() == V{3, 3, 3, 1});
        const auto modal_alone = encode_modal(mq.specs[0], std::get<value::Distribution>(mq.rows[0][0]));
        CHECK(V(e.values.row(0).begin(), e.values.row(0).begin() + 3) == modal_alone);
        CHECK(e.values(0, 3) == 4.0);
    }

    TEST_CASE("decay divisor equals group width for category-like codings") {
        auto rng = make_rng(3);
        for (int trial = 0; trial < 50; ++trial) {
            const std::size_t m = 1 + uniform_index(rng, 8);
            const auto kind_pick = uniform_index(rng, 4);
            SymbolicTable t;
            t.roles = {Role::Input};
            if (kind_pick == 0) {
                t.specs = {cat_spec(m)};
                t.rows = {{value::Category{uniform_index(rng, m)}}};
            } else if (kind_pick == 1) {
                t.specs = {cat_spec(m, false, VariableKind::CategoricalMulti)};
                t.rows = {{make_category_set({uniform_index(rng, m)})}};
            } else if (kind_pick == 2) {
                t.specs = {cat_spec(m, false, VariableKind::Modal)};
                std::vector<double> p(m, 0.0);
                p[uniform_index(rng, m)] = 1.0;
                t.rows = {{value::Distribution{p, std::nullopt}}};
            } else {
                t.specs = {{"i", VariableKind::Interval, {}, false, std::nullopt}};
                t.rows = {{value::Interval{0, 1}}};
            }
            const auto e = encode_table(t, {});
            const auto& g = e.groups[0];
            if (is_category_like(g.coding)) CHECK(g.decay_divisor == static_cast<double>(g.width()));
            else CHECK(g.decay_divisor == 1.0);
        }
    }

    TEST_CASE("missing cells point to imputation") {
        SymbolicTable t{{{"q", VariableKind::Quantitative, {}, false, std::nullopt}}, {Role::Input},
                        {{value::Number{1}}, {value::Missing{}}}};
        try {
            encode_table(t, {});
            FAIL("expected EncodingError");
        } catch (const EncodingError& e) {
            CHECK(std::string(e.what()).find("imput") != std::string::npos);
        }
    }

    TEST_CASE("coding modes") {
        const auto modes = parse_coding_modes(json{{"i", "bounds"}, {"c", "rank"}});
        CHECK(modes.at("i") == CodingTag::Bounds);
        CHECK(coding_modes_to_json(modes) == json{{"c", "rank"}, {"i", "bounds"}});
        CHECK_THROWS_AS(parse_coding_modes(json{{"i", "sideways"}}), EncodingError);
        CHECK_THROWS_AS(check_coding_compatible(cat_spec(2), CodingTag::Bounds), EncodingError);
        CHECK(default_coding(cat_spec(3, true)) == CodingTag::Rank);
        CHECK(default_coding(taxonomy_spec()) == CodingTag::Taxonomy);
        CHECK(default_coding(cat_spec(3)) == CodingTag::Disjunctive);
    }

    TEST_CASE("standardizer examples") {
        const auto col = Matrix::from_rows({{1}, {2}, {3}});
        const auto s = Standardizer::fit(col);
        CHECK(s.mean() == V{2});
        CHECK(s.scale() == V{1});
        CHECK(s.transform(col) == Matrix::from_rows({{-1}, {0}, {1}}));

        const auto constant = Matrix::from_rows({{4}, {4}});
        const auto c = Standardizer::fit(constant);
        CHECK(c.scale() == V{1});
        CHECK(c.transform(constant) == Matrix::from_rows({{0}, {0}}));

        CHECK_THROWS_AS(Standardizer::fit(Matrix::from_rows({{1}})), DimensionError);
    }

    TEST_CASE("standardizer round trip within 1e-12") {
        auto rng = make_rng(9);
        Matrix m(40, 6);
        for (auto& v : m.data()) v = uniform(rng, -1e3, 1e3);
        const auto s = Standardizer::fit(m);
        const auto back = s.inverse_transform(s.transform(m));
        for (std::size_t i = 0; i < m.data().size(); ++i)
            CHECK(std::abs(back.data()[i] - m.data()[i]) <= 1e-12 * std::max(1.0, std::abs(m.data()[i])));
        CHECK(Standardizer::from_json(s.to_json()) == s);
    }

    TEST_CASE("only_columns leaves other columns untouched") {
        const auto m = Matrix::from_rows({{1, 10}, {3, 30}});
        const auto s = Standardizer::fit(m).only_columns({true, false});
        const auto t = s.transform(m);
        CHECK(t(0, 1) == 10.0);
        CHECK(t(1, 1) == 30.0);
        CHECK(t(0, 0) < 0.0);
    }

    TEST_CASE("fit_standardizer stores stats in the groups") {
        SymbolicTable t{{{"q", VariableKind::Quantitative, {}, false, std::nullopt}}, {Role::Input},
                        {{value::Number{1}}, {value::Number{2}}, {value::Number{3}}}};
        const auto e = fit_standardizer(encode_table(t, {}));
        CHECK(e.groups[0].mean == V{2});
        CHECK(e.groups[0].scale == V{1});
        CHECK(standardizer_of(e).mean() == V{2});
    }

    TEST_CASE("decode examples") {
        const double soft[] = {0.2, 0.7, 0.1};
        CHECK(decode_output_block(block(BlockKind::SoftmaxCrossEntropy, 3), soft) == SymbolicValue{value::Category{1}});
        const double logi[] = {0.6, 0.4, 0.9};
        CHECK(decode_output_block(block(BlockKind::LogisticIndependent, 3), logi) ==
              SymbolicValue{make_category_set({0, 2})});
        const double loglen[] = {2, 0};
        CHECK(decode_output_block(block(BlockKind::IntervalMeanLogLength, 2), loglen) ==
              SymbolicValue{value::Interval{1.5, 2.5}});
        const double lin[] = {4.25};
        CHECK(decode_output_block(block(BlockKind::LinearQuadratic, 1), lin) == SymbolicValue{value::Number{4.25}});
        const double modal[] = {0.25, 0.75};
        CHECK(decode_output_block(block(BlockKind::ModalSoftmax, 2), modal) ==
              SymbolicValue{value::Distribution{{0.25, 0.75}, std::nullopt}});
    }

    TEST_CASE("decoder coercions and errors") {
        std::vector<std::string> notes;
        const double tie[] = {0.4, 0.4, 0.2};
        CHECK(decode_output_block(block(BlockKind::SoftmaxCrossEntropy, 3), tie) == SymbolicValue{value::Category{0}});
        const double none_above[] = {0.1, 0.3, 0.2};
        CHECK(decode_output_block(block(BlockKind::LogisticIndependent, 3), none_above, &notes) ==
              SymbolicValue{make_category_set({1})});
        CHECK(notes.size() == 1);
        const double negative[] = {1.0, -2.0};
        CHECK(decode_output_block(block(BlockKind::IntervalMeanLength, 2), negative, &notes) ==
              SymbolicValue{value::Interval{1.0, 1.0}});
        CHECK(notes.size() == 2);
        const double short_t[] = {0.5};
        CHECK_THROWS(decode_output_block(block(BlockKind::SoftmaxCrossEntropy, 3), short_t));
        const double unnormalized[] = {0.5, 0.6};
        CHECK_THROWS(decode_output_block(block(BlockKind::SoftmaxCrossEntropy, 2), unnormalized));
    }

    TEST_CASE("target block defaults") {
        VariableSpec i{"i", VariableKind::Interval, {}, false, std::nullopt};
        CHECK(default_block_kind(i, {value::Interval{0, 1}, value::Interval{2, 5}}) == BlockKind::IntervalMeanLogLength);
        CHECK(default_block_kind(i, {value::Interval{0, 1}, value::Interval{2, 2}}) == BlockKind::IntervalMeanLength);
        CHECK(default_block_kind(cat_spec(3), {}) == BlockKind::SoftmaxCrossEntropy);
        CHECK(default_block_kind(cat_spec(3, false, VariableKind::CategoricalMulti), {}) == BlockKind::LogisticIndependent);
        CHECK(default_block_kind(cat_spec(3, false, VariableKind::Modal), {}) == BlockKind::ModalSoftmax);
        CHECK_THROWS(check_block_compatible(cat_spec(3, false, VariableKind::Modal), BlockKind::LinearQuadratic));
    }

    TEST_CASE("encode_targets carries micro counts") {
        SymbolicTable t{{cat_spec(2, false, VariableKind::Modal)}, {Role::Target},
                        {{value::Distribution{{0.5, 0.5}, 4}}, {value::Distribution{{1, 0}, std::nullopt}}}};
        const auto e = encode_targets(t);
        REQUIRE(e.blocks.size() == 1);
        CHECK(e.blocks[0].kind == BlockKind::ModalSoftmax);
        CHECK(e.blocks[0].micro_weighted);
        CHECK(e.micro_counts(0, 0) == 4.0);
        CHECK(e.micro_counts(1, 0) == 1.0);
        CHECK(output_block_from_json(to_json(e.blocks[0])) == e.blocks[0]);
    }

    TEST_CASE("decode(encode(v)) on random values") {
        auto rng = make_rng(17);
        for (int trial = 0; trial < 200; ++trial) {
            const std::size_t m = 1 + uniform_index(rng, 6);
            const std::size_t c = uniform_index(rng, m);
            const auto code = encode_categorical_single(cat_spec(m), {c});
            CHECK(decode_output_block(block(BlockKind::SoftmaxCrossEntropy, m), code) == SymbolicValue{value::Category{c}});

            std::vector<std::size_t> members;
            for (std::size_t i = 0; i < m; ++i)
                if (uniform01(rng) < 0.5) members.push_back(i);
            if (members.empty()) members.push_back(c);
            const auto set = make_category_set(members);
            const auto multi = encode_categorical_multi(cat_spec(m, false, VariableKind::CategoricalMulti), set);
            CHECK(decode_output_block(block(BlockKind::LogisticIndependent, m), multi) == SymbolicValue{set});

            // Grid values keep midpoint and half-length arithmetic exact.
            const double a = static_cast<double>(static_cast<long>(uniform_index(rng, 1u << 20)) - (1 << 19)) / 1024.0;
            const double b = a + static_cast<double>(uniform_index(rng, 1u << 20)) / 1024.0;
            const auto ml = encode_interval({a, b}, IntervalMode::MeanLength);
            CHECK(decode_output_block(block(BlockKind::IntervalMeanLength, 2), ml) == SymbolicValue{value::Interval{a, b}});
        }
    }
}
