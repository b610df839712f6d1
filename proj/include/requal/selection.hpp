#pragma once

// Equity-aware aggregation: embed, score, weight, and pick the sample
// nearest the equitable centroid next to the plain-centroid and min-bias
// picks.

#include <algorithm>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "requal/equity.hpp"
#include "requal/error.hpp"
#include "requal/sampling.hpp"
#include "requal/vectorspace.hpp"

namespace requal {

struct SelectionResult {
    // Positions within the evaluated (valid) sample list.
    std::size_t weighted_index = 0;
    std::size_t unweighted_index = 0;
    std::size_t minbias_index = 0;

    // Reliability is measured against the plain centroid for all three.
    double reliability_weighted = 0.0;
    double reliability_unweighted = 0.0;
    double reliability_minbias = 0.0;

    // Absolute bias of each pick.
    double bias_weighted = 0.0;
    double bias_unweighted = 0.0;
    double bias_minbias = 0.0;

    EmbeddingVector centroid_plain;
    EmbeddingVector centroid_weighted;  // as computed, with the 1/m factor
    std::vector<double> reliabilities;  // per evaluated sample
    BiasReport bias_report;
    std::optional<SampleStats> stats;
    /// Issue-order index of each evaluated sample.
    std::vector<std::size_t> sample_ids;
    std::size_t excluded_invalid = 0;

    /// Bias value driving the weights for a pick (signed in signed mode).
    [[nodiscard]] double mode_bias(std::size_t pos) const { return bias_report.weighting_scores.at(pos); }
};

/// Expected reliability: cosine similarity to the plain centroid.
inline double expected_reliability(const EmbeddingVector& sample, const EmbeddingVector& centroid_plain) {
    return cosine_similarity(sample, centroid_plain);
}

inline double expected_reliability(const OutputSample& sample, const EmbeddingVector& centroid_plain) {
    if (!sample.embedding) throw Error(ErrorKind::ZeroNormVector, "sample has no embedding");
    return expected_reliability(*sample.embedding, centroid_plain);
}

/// Core selection over embedding vectors.
inline SelectionResult select_vectors(std::span<const EmbeddingVector> vs, const GroupSet& gs, BiasMode mode,
                                      bool invert_signed = false) {
    if (vs.empty()) throw Error(ErrorKind::EmptySampleSet, "no valid samples to select from");
    detail::require_uniform(vs);

    SelectionResult r;
    r.bias_report = score_bias(vs, gs, mode, invert_signed);

    r.centroid_plain = centroid(vs);
    if (r.centroid_plain.norm() < kDegenerateNorm) {
        throw Error(ErrorKind::DegenerateCentroid, "sample centroid has zero norm");
    }
    r.centroid_weighted = weighted_centroid(vs, r.bias_report.weights);

    r.unweighted_index = nearest_to(vs, r.centroid_plain);
    r.weighted_index = nearest_to(vs, r.centroid_weighted);
    const auto& beta = r.bias_report.beta;
    r.minbias_index = static_cast<std::size_t>(std::min_element(beta.begin(), beta.end()) - beta.begin());

    r.reliabilities.reserve(vs.size());
    for (const auto& v : vs) r.reliabilities.push_back(expected_reliability(v, r.centroid_plain));
    r.reliability_weighted = r.reliabilities[r.weighted_index];
    r.reliability_unweighted = r.reliabilities[r.unweighted_index];
    r.reliability_minbias = r.reliabilities[r.minbias_index];
    r.bias_weighted = beta[r.weighted_index];
    r.bias_unweighted = beta[r.unweighted_index];
    r.bias_minbias = beta[r.minbias_index];

    r.sample_ids.resize(vs.size());
    for (std::size_t i = 0; i < vs.size(); ++i) r.sample_ids[i] = i;
    return r;
}

/// Selection over sampled outputs; invalid samples are dropped first.
inline SelectionResult select(std::span<const OutputSample> samples, const GroupSet& gs, BiasMode mode,
                              bool invert_signed = false) {
    std::vector<EmbeddingVector> vs;
    std::vector<std::size_t> ids;
    std::size_t excluded = 0;
    for (const auto& s : samples) {
        if (!s.valid) {
            ++excluded;
            continue;
        }
        if (!s.embedding) throw Error(ErrorKind::ZeroNormVector, "valid sample without embedding");
        vs.push_back(*s.embedding);
        ids.push_back(s.index);
    }
    auto r = select_vectors(vs, gs, mode, invert_signed);
    r.sample_ids = std::move(ids);
    r.excluded_invalid = excluded;
    return r;
}

inline SelectionResult select(const SampleCollection& collection, const GroupSet& gs, BiasMode mode,
                              bool invert_signed = false) {
    auto r = select(std::span<const OutputSample>(collection.samples), gs, mode, invert_signed);
    r.stats = collection.stats;
    return r;
}

}  // namespace requal
