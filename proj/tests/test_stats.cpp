#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "recdiff/discrete.hpp"
#include "recdiff/stats.hpp"
#include "recdiff/vocab.hpp"

using namespace recdiff;

namespace {

Recipe make_recipe(const std::string& name, const BitMask& mask, double grams = 10.0) {
    Recipe r;
    r.name = name;
    r.mask = mask;
    r.weights_grams.assign(mask.size(), 0.0);
    for (size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) r.weights_grams[i] = grams;
    return r;
}

}  // namespace

TEST_CASE("fixture summary: marginals, count histogram") {
    const Dataset ds = three_ingredient_fixture();
    const auto s = summarize(ds.recipes, ds.n());
    CHECK(s.marginals[0] == doctest::Approx(1.0));
    CHECK(s.marginals[1] == doctest::Approx(1.0));
    CHECK(s.marginals[2] == doctest::Approx(0.5));
    CHECK(s.count_histogram[3] == doctest::Approx(0.5));
    CHECK(s.count_histogram[2] == doctest::Approx(0.5));
    CHECK(s.support == 2);
    // bun and patty have zero variance: all their correlations are undefined
    CHECK(std::isnan(s.corr_at(0, 1)));
    CHECK(std::isnan(s.corr_at(0, 2)));
    CHECK(std::isnan(s.corr_at(1, 2)));
    CHECK_THROWS_AS(summarize(std::span<const Recipe>{}, 3), std::runtime_error);
}

TEST_CASE("identical recipes: single count spike, undefined correlations") {
    std::vector<Recipe> recipes(5, make_recipe("r", {1, 1, 0, 0}));
    const auto s = summarize(recipes, 4);
    CHECK(s.count_histogram[2] == doctest::Approx(1.0));
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) CHECK(std::isnan(s.corr_at(i, j)));
}

TEST_CASE("anti-correlated pair gives phi = -1") {
    std::vector<Recipe> recipes = {make_recipe("a", {1, 0}), make_recipe("b", {0, 1})};
    const auto s = summarize(recipes, 2);
    CHECK(s.corr_at(0, 1) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(s.corr_at(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("phi matches a direct Pearson computation on random binary data") {
    rng::Stream stream(21);
    const int n = 4, rows = 200;
    std::vector<Recipe> recipes;
    for (int r = 0; r < rows; ++r) {
        BitMask m(n);
        for (int i = 0; i < n; ++i) m[i] = stream.bernoulli(0.3 + 0.1 * i) ? 1 : 0;
        recipes.push_back(make_recipe("r" + std::to_string(r), m));
    }
    const auto s = summarize(recipes, n);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            double mi = 0, mj = 0;
            for (const auto& r : recipes) {
                mi += r.mask[i];
                mj += r.mask[j];
            }
            mi /= rows;
            mj /= rows;
            double sij = 0, sii = 0, sjj = 0;
            for (const auto& r : recipes) {
                sij += (r.mask[i] - mi) * (r.mask[j] - mj);
                sii += (r.mask[i] - mi) * (r.mask[i] - mi);
                sjj += (r.mask[j] - mj) * (r.mask[j] - mj);
            }
            const double pearson = sij / std::sqrt(sii * sjj);
            CHECK(s.corr_at(i, j) == doctest::Approx(pearson).epsilon(1e-12));
            CHECK(s.corr_at(i, j) >= -1.0);
            CHECK(s.corr_at(i, j) <= 1.0);
        }
    }
}

TEST_CASE("summarize is permutation invariant") {
    rng::Stream stream(8);
    std::vector<Recipe> recipes;
    for (int r = 0; r < 40; ++r) {
        BitMask m(5);
        for (auto& b : m) b = stream.bernoulli(0.5) ? 1 : 0;
        recipes.push_back(make_recipe("r" + std::to_string(r), m, 5.0 + r));
    }
    auto shuffled = recipes;
    std::reverse(shuffled.begin(), shuffled.end());
    const auto a = summarize(recipes, 5);
    const auto b = summarize(shuffled, 5);
    for (int i = 0; i < 5; ++i) {
        CHECK(a.marginals[i] == b.marginals[i]);
        CHECK((std::isnan(a.mean_weights[i]) ||
               a.mean_weights[i] == doctest::Approx(b.mean_weights[i]).epsilon(1e-12)));
    }
    for (size_t k = 0; k < a.corr.size(); ++k)
        CHECK((std::isnan(a.corr[k]) ? std::isnan(b.corr[k])
                                     : a.corr[k] == doctest::Approx(b.corr[k]).epsilon(1e-12)));
}

TEST_CASE("compare(a, a) is the identity report") {
    rng::Stream stream(12);
    std::vector<Recipe> recipes;
    for (int r = 0; r < 30; ++r) {
        BitMask m(6);
        for (auto& b : m) b = stream.bernoulli(0.4) ? 1 : 0;
        recipes.push_back(make_recipe("r" + std::to_string(r), m, 3.0 + r));
    }
    const auto s = summarize(recipes, 6);
    const auto rep = compare(s, s);
    CHECK(rep.max_marginal_gap == 0.0);
    CHECK(rep.corr_pearson_r == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rep.max_rel_mean_weight_err == 0.0);
    for (const auto& [id, gap] : rep.rare_marginal_gaps) CHECK(gap == 0.0);
}

TEST_CASE("a constructed +0.1 marginal shift is reported exactly") {
    std::vector<Recipe> train, generated;
    for (int r = 0; r < 10; ++r) {
        train.push_back(make_recipe("t", {r < 5, 1}));
        generated.push_back(make_recipe("g", {r < 6, 1}));
    }
    const auto rep = compare(summarize(train, 2), summarize(generated, 2));
    CHECK(rep.max_marginal_gap == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(rep.max_marginal_gap_id == 0);
}

TEST_CASE("vocabulary mismatch is rejected") {
    const auto a = summarize(std::vector<Recipe>{make_recipe("a", {1, 0})}, 2);
    const auto b = summarize(std::vector<Recipe>{make_recipe("b", {1, 0, 1})}, 3);
    CHECK_THROWS_AS(compare(a, b), std::runtime_error);
}

TEST_CASE("exact-tier reverse samples stay within 0.05 marginal gap of the fixture") {
    const Dataset ds = three_ingredient_fixture();
    const ProbabilityTable p0 = empirical_table(ds);
    DiscreteReversePass pass({0.05, 100}, p0);
    std::vector<Recipe> samples;
    for (int i = 0; i < 10000; ++i) {
        rng::Stream stream = rng::Stream::derive(2024, "stats-exact-tier", uint64_t(i));
        const uint32_t xT = uint32_t(stream.categorical(stationary(3).probs));
        const BitMask mask = index_to_mask(pass.sample_terminal(xT, stream), 3);
        Recipe r = make_recipe("s" + std::to_string(i), mask);
        for (int k = 0; k < 3; ++k)
            if (mask[k]) r.weights_grams[k] = ds.recipes[0].weights_grams[k];
        samples.push_back(std::move(r));
    }
    const auto rep = compare(summarize(ds.recipes, 3), summarize(samples, 3));
    CHECK(rep.max_marginal_gap < 0.05);
}
