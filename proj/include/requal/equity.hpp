#pragma once

// Demographic-group vectors, bias scores and equity weights.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "json.hpp"
#include "requal/error.hpp"
#include "requal/provider.hpp"
#include "requal/vectorspace.hpp"

namespace requal {

struct DemographicGroup {
    std::string name;
    std::vector<std::string> seed_sentences;
    EmbeddingVector vector;  // unit norm once estimated
};

class GroupSet {
public:
    GroupSet() = default;

    explicit GroupSet(std::vector<DemographicGroup> groups,
                      std::optional<std::size_t> majority = std::nullopt,
                      std::optional<std::size_t> minority = std::nullopt)
        : groups_(std::move(groups)), majority_(majority), minority_(minority) {
        if (groups_.size() < 2) {
            throw Error(ErrorKind::InvalidGroupSet, "need at least two demographic groups");
        }
        std::unordered_set<std::string> names;
        for (const auto& g : groups_) {
            if (!names.insert(g.name).second) {
                throw Error(ErrorKind::InvalidGroupSet, "duplicate group name '" + g.name + "'");
            }
            if (g.vector.empty()) {
                throw Error(ErrorKind::InvalidGroupSet, "group '" + g.name + "' has no vector");
            }
            detail::require_same_dim(groups_.front().vector, g.vector);
        }
        if (majority_.has_value() != minority_.has_value()) {
            throw Error(ErrorKind::InvalidGroupSet, "majority and minority must be set together");
        }
        if (majority_) {
            if (*majority_ >= groups_.size() || *minority_ >= groups_.size()) {
                throw Error(ErrorKind::InvalidGroupSet, "majority/minority index out of range");
            }
            if (*majority_ == *minority_) {
                throw Error(ErrorKind::InvalidGroupSet, "majority and minority must differ");
            }
        }
    }

    [[nodiscard]] std::size_t size() const noexcept { return groups_.size(); }
    [[nodiscard]] const std::vector<DemographicGroup>& groups() const noexcept { return groups_; }
    [[nodiscard]] const DemographicGroup& operator[](std::size_t i) const { return groups_[i]; }
    [[nodiscard]] std::optional<std::size_t> majority() const noexcept { return majority_; }
    [[nodiscard]] std::optional<std::size_t> minority() const noexcept { return minority_; }
    [[nodiscard]] bool supports_signed() const noexcept { return groups_.size() == 2 && majority_; }

private:
    std::vector<DemographicGroup> groups_;
    std::optional<std::size_t> majority_;
    std::optional<std::size_t> minority_;
};

enum class BiasMode { absolute, signed_disparity };

inline std::string_view to_string(BiasMode m) {
    return m == BiasMode::absolute ? "absolute" : "signed";
}

/// Averages the seed-sentence embeddings and normalizes to unit length.
inline EmbeddingVector estimate_group_vector(std::span<const std::string> seed_sentences,
                                             EmbeddingProvider& embedder) {
    if (seed_sentences.empty()) {
        throw Error(ErrorKind::EmptySeedSet, "group has no seed sentences");
    }
    const auto vs = embedder.embed(seed_sentences);
    if (vs.size() != seed_sentences.size()) {
        throw Error(ErrorKind::MalformedResponse, "embedder returned wrong number of vectors");
    }
    const EmbeddingVector mean = centroid(vs);
    if (mean.norm() < kDegenerateNorm) {
        throw Error(ErrorKind::DegenerateCentroid, "seed sentence embeddings cancel out");
    }
    return mean.normalized();
}

inline std::vector<double> group_similarities(const EmbeddingVector& v, const GroupSet& gs) {
    std::vector<double> sims;
    sims.reserve(gs.size());
    for (const auto& g : gs.groups()) sims.push_back(cosine_similarity(v, g.vector));
    return sims;
}

/// Largest disparity between group similarities, i.e. max(sim) - min(sim).
inline double bias(const EmbeddingVector& v, const GroupSet& gs) {
    const auto sims = group_similarities(v, gs);
    const auto [lo, hi] = std::minmax_element(sims.begin(), sims.end());
    return *hi - *lo;
}

/// Majority similarity minus minority similarity; binary group sets only.
inline double signed_bias(const EmbeddingVector& v, const GroupSet& gs) {
    if (!gs.supports_signed()) {
        throw Error(ErrorKind::SignedModeRequiresBinaryGroups,
                    "signed bias needs exactly two groups with majority and minority set");
    }
    return cosine_similarity(v, gs[*gs.majority()].vector) -
           cosine_similarity(v, gs[*gs.minority()].vector);
}

/// beta_i - min(beta). The sample minimum stands in for the inevitable bias.
inline std::vector<double> harmful_bias(std::span<const double> betas) {
    if (betas.empty()) throw Error(ErrorKind::EmptySampleSet, "no bias values");
    const double lo = *std::min_element(betas.begin(), betas.end());
    std::vector<double> out;
    out.reserve(betas.size());
    for (double b : betas) out.push_back(b - lo);
    return out;
}

/// w_i = 1 - (b_i - min b) / (max b - min b); all ones when the range is zero.
inline WeightVector equity_weights(std::span<const double> scores) {
    if (scores.empty()) throw Error(ErrorKind::EmptySampleSet, "no bias values");
    const auto [lo_it, hi_it] = std::minmax_element(scores.begin(), scores.end());
    const double lo = *lo_it;
    const double range = *hi_it - lo;
    std::vector<double> w(scores.size(), 1.0);
    if (range > 0.0) {
        for (std::size_t i = 0; i < scores.size(); ++i) {
            w[i] = std::clamp(1.0 - (scores[i] - lo) / range, 0.0, 1.0);
        }
    }
    return WeightVector(std::move(w));
}

struct BiasReport {
    BiasMode mode = BiasMode::absolute;
    bool inverted = false;
    std::vector<double> beta;
    std::optional<std::vector<double>> signed_beta;
    std::vector<double> harmful_beta;
    std::vector<std::vector<double>> group_similarities;
    double beta_min = 0.0;  // estimated inevitable bias
    double beta_max = 0.0;
    /// Values fed to the weighting: beta, signed_beta, or -signed_beta.
    std::vector<double> weighting_scores;
    WeightVector weights;
};

/// Scores every vector against the groups and derives the equity weights.
/// In signed mode the weights follow the signed disparity (negated when
/// `invert_signed` is set, for tasks whose stereotype favours the minority).
inline BiasReport score_bias(std::span<const EmbeddingVector> vs, const GroupSet& gs,
                             BiasMode mode, bool invert_signed = false) {
    if (vs.empty()) throw Error(ErrorKind::EmptySampleSet, "no samples to score");
    if (mode == BiasMode::signed_disparity && !gs.supports_signed()) {
        throw Error(ErrorKind::SignedModeRequiresBinaryGroups,
                    "signed bias needs exactly two groups with majority and minority set");
    }
    BiasReport r;
    r.mode = mode;
    r.inverted = mode == BiasMode::signed_disparity && invert_signed;
    for (const auto& v : vs) {
        auto sims = group_similarities(v, gs);
        const auto [lo, hi] = std::minmax_element(sims.begin(), sims.end());
        r.beta.push_back(*hi - *lo);
        r.group_similarities.push_back(std::move(sims));
    }
    r.harmful_beta = harmful_bias(r.beta);
    r.beta_min = *std::min_element(r.beta.begin(), r.beta.end());
    r.beta_max = *std::max_element(r.beta.begin(), r.beta.end());
    if (mode == BiasMode::signed_disparity) {
        std::vector<double> sb;
        for (std::size_t i = 0; i < vs.size(); ++i) {
            const auto& sims = r.group_similarities[i];
            sb.push_back(sims[*gs.majority()] - sims[*gs.minority()]);
        }
        r.weighting_scores = sb;
        if (r.inverted) {
            for (double& s : r.weighting_scores) s = -s;
        }
        r.signed_beta = std::move(sb);
    } else {
        r.weighting_scores = r.beta;
    }
    r.weights = equity_weights(r.weighting_scores);
    return r;
}

// ---------------------------------------------------------------------------
// Group definition files and the estimated-vector cache.

struct GroupDefinition {
    struct Entry {
        std::string name;
        std::vector<std::string> seed_sentences;
    };
    std::vector<Entry> groups;
    std::optional<std::string> majority;
    std::optional<std::string> minority;
};

inline GroupDefinition parse_group_definition(const nlohmann::json& j) {
    GroupDefinition def;
    if (!j.is_object() || !j.contains("groups") || !j["groups"].is_array()) {
        throw Error(ErrorKind::ConfigError, "group file needs a \"groups\" array");
    }
    for (const auto& g : j["groups"]) {
        GroupDefinition::Entry e;
        e.name = g.at("name").get<std::string>();
        e.seed_sentences = g.value("seed_sentences", std::vector<std::string>{});
        if (e.seed_sentences.empty()) {
            throw Error(ErrorKind::EmptySeedSet, "group '" + e.name + "' has no seed sentences");
        }
        def.groups.push_back(std::move(e));
    }
    if (def.groups.size() < 2) {
        throw Error(ErrorKind::InvalidGroupSet, "need at least two demographic groups");
    }
    if (j.contains("majority") && !j["majority"].is_null()) def.majority = j["majority"].get<std::string>();
    if (j.contains("minority") && !j["minority"].is_null()) def.minority = j["minority"].get<std::string>();
    return def;
}

inline GroupDefinition load_group_definition(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoError, "cannot open group file " + path.string());
    try {
        return parse_group_definition(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ConfigError, "group file " + path.string() + ": " + e.what());
    }
}

/// FNV-1a over group names and sentences; part of the cache key.
inline std::uint64_t definition_hash(const GroupDefinition& def) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](std::string_view s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
        h ^= 0xff;
        h *= 0x100000001b3ULL;
    };
    for (const auto& g : def.groups) {
        mix(g.name);
        for (const auto& s : g.seed_sentences) mix(s);
        mix("\x1e");
    }
    return h;
}

inline std::string group_cache_key(const GroupDefinition& def, const std::string& embedder_identity) {
    std::ostringstream os;
    os << embedder_identity << '#' << std::hex << definition_hash(def);
    return os.str();
}

inline std::optional<std::size_t> index_of(const GroupDefinition& def, const std::optional<std::string>& name) {
    if (!name) return std::nullopt;
    for (std::size_t i = 0; i < def.groups.size(); ++i) {
        if (def.groups[i].name == *name) return i;
    }
    throw Error(ErrorKind::InvalidGroupSet, "unknown group '" + *name + "'");
}

struct GroupEstimate {
    GroupSet groups;
    bool cache_hit = false;
};

/// Estimates group vectors, reading and updating the JSON cache at
/// `cache_path` when given. A hit performs no provider calls.
inline GroupEstimate estimate_groups(const GroupDefinition& def, EmbeddingProvider& embedder,
                                     const std::optional<std::filesystem::path>& cache_path = std::nullopt) {
    const std::string key = group_cache_key(def, embedder.identity());
    nlohmann::json cache = nlohmann::json::object();
    if (cache_path && std::filesystem::exists(*cache_path)) {
        std::ifstream in(*cache_path);
        try {
            cache = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception&) {
            cache = nlohmann::json::object();  // corrupt cache is rebuilt
        }
    }
    auto build = [&](std::vector<EmbeddingVector> vectors) {
        std::vector<DemographicGroup> groups;
        for (std::size_t i = 0; i < def.groups.size(); ++i) {
            groups.push_back({def.groups[i].name, def.groups[i].seed_sentences, std::move(vectors[i])});
        }
        return GroupSet(std::move(groups), index_of(def, def.majority), index_of(def, def.minority));
    };

    if (cache.contains("entries") && cache["entries"].contains(key)) {
        const auto& entry = cache["entries"][key];
        std::vector<EmbeddingVector> vectors;
        for (const auto& g : entry.at("groups")) {
            vectors.emplace_back(g.at("vector").get<std::vector<double>>());
        }
        if (vectors.size() == def.groups.size()) return {build(std::move(vectors)), true};
    }

    std::vector<EmbeddingVector> vectors;
    for (const auto& g : def.groups) vectors.push_back(estimate_group_vector(g.seed_sentences, embedder));

    if (cache_path) {
        nlohmann::json entry;
        entry["embedder"] = embedder.identity();
        entry["groups"] = nlohmann::json::array();
        for (std::size_t i = 0; i < def.groups.size(); ++i) {
            const auto vals = vectors[i].values();
            entry["groups"].push_back({{"name", def.groups[i].name},
                                       {"vector", std::vector<double>(vals.begin(), vals.end())}});
        }
        cache["schema_version"] = 1;
        cache["entries"][key] = std::move(entry);
        if (cache_path->has_parent_path()) std::filesystem::create_directories(cache_path->parent_path());
        std::ofstream out(*cache_path);
        if (!out) throw Error(ErrorKind::IoError, "cannot write group cache " + cache_path->string());
        out << cache.dump(2) << '\n';
    }
    return {build(std::move(vectors)), false};
}

}  // namespace requal
