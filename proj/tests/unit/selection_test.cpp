#include <gtest/gtest.h>

#include <random>

#include "requal/selection.hpp"
#include "support/helpers.hpp"
#include "support/oracle.hpp"

using namespace requal;
using testing_support::kind_of;

namespace {

// Nine outputs in (content, style, male, female) coordinates. The male-leaning
// ones spread along the style axis so that they cancel in the plain mean,
// which lands next to a mildly biased output. A balanced output is the
// runner-up.
const std::vector<oracle::Vec> kLeaningSet = {
    {1, 0.8, 0.6, 0},   {1, -0.8, 0.6, 0.05}, {1, 0, 0.35, 0.1},  {1, 0.7, 0.5, 0.1}, {1, -0.7, 0.55, 0},
    {1, 0, 0.2, 0.2},   {1, 0.6, 0, 0.3},     {1, -0.6, 0.05, 0.25}, {1, 0, 0.6, 0},
};
const std::vector<oracle::Vec> kLeaningGroups = {{0, 0, 1, 0}, {0, 0, 0, 1}};

std::vector<EmbeddingVector> to_ev(const std::vector<oracle::Vec>& raw) {
    std::vector<EmbeddingVector> out;
    for (const auto& v : raw) out.emplace_back(v);
    return out;
}

GroupSet leaning_groups() {
    return testing_support::binary_groups(EmbeddingVector(kLeaningGroups[0]), EmbeddingVector(kLeaningGroups[1]));
}

// (content, male, female)
GroupSet gender3() { return testing_support::binary_groups({0, 1, 0}, {0, 0, 1}); }

}  // namespace

TEST(Selection, LeaningSetMatchesOracle) {
    // Oracle: straight-line evaluation of the plain mean, weights and the
    // weighted mean.
    oracle::Vec betas;
    for (const auto& v : kLeaningSet) betas.push_back(oracle::bias(v, kLeaningGroups));
    const auto w = oracle::weights(betas);
    const std::size_t plain_pick = oracle::argmax_cosine(kLeaningSet, oracle::mean(kLeaningSet));
    const std::size_t weighted_pick = oracle::argmax_cosine(kLeaningSet, oracle::weighted_mean(kLeaningSet, w));
    ASSERT_EQ(plain_pick, 2u);     // a biased output
    ASSERT_EQ(weighted_pick, 5u);  // the balanced output
    ASSERT_GT(betas[2], 0.2);
    ASSERT_NEAR(betas[5], 0.0, 1e-15);

    // The balanced output is second-nearest to the plain centroid.
    std::vector<oracle::Vec> rest = kLeaningSet;
    rest.erase(rest.begin() + 2);
    ASSERT_EQ(oracle::argmax_cosine(rest, oracle::mean(kLeaningSet)), 4u);

    const auto r = select_vectors(to_ev(kLeaningSet), leaning_groups(), BiasMode::absolute);
    EXPECT_EQ(r.unweighted_index, plain_pick);
    EXPECT_EQ(r.weighted_index, weighted_pick);
    EXPECT_EQ(r.minbias_index, 5u);
    EXPECT_GT(r.bias_unweighted, r.bias_weighted);
    EXPECT_NEAR(r.reliability_unweighted, oracle::cosine(kLeaningSet[2], oracle::mean(kLeaningSet)), 1e-12);
    EXPECT_NEAR(r.reliability_weighted, oracle::cosine(kLeaningSet[5], oracle::mean(kLeaningSet)), 1e-12);
    const auto cw = oracle::weighted_mean(kLeaningSet, w);
    for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(r.centroid_weighted[k], cw[k], 1e-12);
    for (std::size_t i = 0; i < kLeaningSet.size(); ++i) {
        EXPECT_NEAR(r.bias_report.beta[i], betas[i], 1e-12);
        EXPECT_NEAR(r.bias_report.weights[i], w[i], 1e-12);
    }
}

TEST(Selection, SingleSample) {
    std::vector<EmbeddingVector> one{{0.3, 0.4, 0.5}};
    const auto r = select_vectors(one, gender3(), BiasMode::absolute);
    EXPECT_EQ(r.weighted_index, 0u);
    EXPECT_EQ(r.unweighted_index, 0u);
    EXPECT_EQ(r.minbias_index, 0u);
    EXPECT_NEAR(r.reliability_unweighted, 1.0, 1e-15);
}

TEST(Selection, EqualBiasCollapsesToUnweighted) {
    std::mt19937_64 g(1);
    const auto gs = testing_support::binary_groups({0, 1, 0}, {0, 0, 1});
    for (int t = 0; t < 200; ++t) {
        // Equal male and female coordinates give zero bias everywhere.
        std::vector<EmbeddingVector> vs;
        for (int i = 0; i < 2 + t % 7; ++i) {
            const auto v = oracle::random_vec(g, 2, 0.1, 1.0);
            vs.push_back(EmbeddingVector{v[0], v[1], v[1]});
        }
        const auto r = select_vectors(vs, gs, BiasMode::absolute);
        EXPECT_EQ(r.weighted_index, r.unweighted_index);
        for (double w : r.bias_report.weights.values()) EXPECT_EQ(w, 1.0);
    }
}

TEST(Selection, DegenerateCentroid) {
    std::vector<EmbeddingVector> sym{{1, 0, 0}, {-1, 0, 0}};
    EXPECT_EQ(kind_of([&] { (void)select_vectors(sym, gender3(), BiasMode::absolute); }),
              ErrorKind::DegenerateCentroid);
    std::vector<EmbeddingVector> none;
    EXPECT_EQ(kind_of([&] { (void)select_vectors(none, gender3(), BiasMode::absolute); }),
              ErrorKind::EmptySampleSet);
}

TEST(Selection, ArgmaxAndArgminOnFuzz) {
    std::mt19937_64 g(99);
    for (int t = 0; t < 300; ++t) {
        const std::size_t d = 3 + t % 5, m = 1 + t % 12;
        std::vector<oracle::Vec> raw;
        for (std::size_t i = 0; i < m; ++i) raw.push_back(oracle::random_vec(g, d));
        const auto gs = testing_support::binary_groups(EmbeddingVector(oracle::random_vec(g, d)),
                                                       EmbeddingVector(oracle::random_vec(g, d)));
        const auto vs = to_ev(raw);
        SelectionResult r;
        try {
            r = select_vectors(vs, gs, t % 2 ? BiasMode::signed_disparity : BiasMode::absolute);
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::DegenerateCentroid);
            continue;
        }
        for (std::size_t i = 0; i < m; ++i) {
            EXPECT_LE(cosine_similarity(vs[i], r.centroid_plain), r.reliability_unweighted);
            EXPECT_LE(cosine_similarity(vs[i], r.centroid_weighted),
                      cosine_similarity(vs[r.weighted_index], r.centroid_weighted));
            EXPECT_GE(r.bias_report.beta[i], r.bias_minbias);
        }
        EXPECT_EQ(r.unweighted_index, oracle::argmax_cosine(raw, oracle::mean(raw)));
    }
}

TEST(Selection, MinBiasTieGoesToLowestIndex) {
    std::vector<EmbeddingVector> vs{{1, 0.5, 0}, {1, 0.1, 0.1}, {1, 0.2, 0.2}};
    const auto r = select_vectors(vs, gender3(), BiasMode::absolute);
    EXPECT_EQ(r.minbias_index, 1u);
}

TEST(Selection, DropsInvalidSamples) {
    std::vector<OutputSample> samples(4);
    const std::vector<EmbeddingVector> vs{{1, 0.5, 0}, {1, 0.1, 0.1}, {1, 0.4, 0}, {1, 0, 0.3}};
    for (std::size_t i = 0; i < 4; ++i) {
        samples[i].index = i;
        samples[i].text = "t" + std::to_string(i);
        samples[i].embedding = vs[i];
    }
    samples[1].valid = false;
    samples[1].embedding.reset();
    const auto r = select(std::span<const OutputSample>(samples), gender3(), BiasMode::absolute);
    EXPECT_EQ(r.excluded_invalid, 1u);
    EXPECT_EQ(r.sample_ids, (std::vector<std::size_t>{0, 2, 3}));
    const std::vector<EmbeddingVector> kept{vs[0], vs[2], vs[3]};
    const auto direct = select_vectors(kept, gender3(), BiasMode::absolute);
    EXPECT_EQ(r.weighted_index, direct.weighted_index);
    EXPECT_EQ(r.unweighted_index, direct.unweighted_index);

    for (auto& s : samples) s.valid = false;
    EXPECT_EQ(kind_of([&] { (void)select(std::span<const OutputSample>(samples), gender3(), BiasMode::absolute); }),
              ErrorKind::EmptySampleSet);
}

TEST(ExpectedReliability, Examples) {
    EXPECT_NEAR(expected_reliability(EmbeddingVector{2, 2}, EmbeddingVector{1, 1}), 1.0, 1e-15);
    EXPECT_NEAR(expected_reliability(EmbeddingVector{1, -1}, EmbeddingVector{1, 1}), 0.0, 1e-15);
    std::vector<EmbeddingVector> two{{1, 0}, {0, 1}};
    const auto c = centroid(two);
    EXPECT_NEAR(expected_reliability(two[0], c), std::sqrt(0.5), 1e-12);
    EXPECT_NEAR(expected_reliability(two[1], c), std::sqrt(0.5), 1e-12);
    OutputSample s;
    s.embedding = EmbeddingVector{0, 0};
    EXPECT_EQ(kind_of([&] { (void)expected_reliability(s, c); }), ErrorKind::ZeroNormVector);
}

TEST(Selection, SignedModeUsesSignedWeights) {
    // Female-leaning output gets weight 1 in signed mode even though its
    // absolute bias is large.
    std::vector<EmbeddingVector> vs{{1, 0.6, 0}, {1, 0, 0.6}, {1, 0.2, 0.2}};
    const auto r = select_vectors(vs, gender3(), BiasMode::signed_disparity);
    EXPECT_EQ(r.bias_report.weights[1], 1.0);
    EXPECT_EQ(r.bias_report.weights[0], 0.0);
    EXPECT_LT(r.mode_bias(1), 0.0);
    const auto inv = select_vectors(vs, gender3(), BiasMode::signed_disparity, true);
    EXPECT_EQ(inv.bias_report.weights[0], 1.0);
}
