#pragma once

// Deterministic offline providers with analytically known behaviour.

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"
#include "requal/error.hpp"
#include "requal/provider.hpp"
#include "requal/text.hpp"

namespace requal {

struct SimulatedOutcome {
    std::string text;
    double probability = 0.0;
    std::optional<EmbeddingVector> embedding;
};

/// A finite output universe with its probability distribution.
class SimulatedDistribution {
public:
    explicit SimulatedDistribution(std::vector<SimulatedOutcome> outcomes)
        : outcomes_(std::move(outcomes)) {
        if (outcomes_.empty()) throw Error(ErrorKind::InvalidDistribution, "no outcomes");
        std::set<std::string> texts;
        double total = 0.0;
        std::size_t dim = 0;
        for (const auto& o : outcomes_) {
            if (!(o.probability > 0.0)) {
                throw Error(ErrorKind::InvalidDistribution, "non-positive probability for '" + o.text + "'");
            }
            if (!texts.insert(o.text).second) {
                throw Error(ErrorKind::InvalidDistribution, "duplicate outcome '" + o.text + "'");
            }
            if (o.embedding) {
                if (dim == 0) dim = o.embedding->dim();
                if (o.embedding->dim() != dim) {
                    throw Error(ErrorKind::DimensionMismatch, "outcome embeddings differ in dimension");
                }
            }
            total += o.probability;
        }
        if (std::abs(total - 1.0) > 1e-9) {
            throw Error(ErrorKind::InvalidDistribution,
                        "probabilities sum to " + std::to_string(total) + ", expected 1");
        }
    }

    [[nodiscard]] const std::vector<SimulatedOutcome>& outcomes() const noexcept { return outcomes_; }

    /// sum_i p_i v_i; requires every outcome to carry an embedding.
    [[nodiscard]] EmbeddingVector mean_embedding() const {
        const auto& first = outcomes_.front().embedding;
        if (!first) throw Error(ErrorKind::InvalidDistribution, "outcomes carry no embeddings");
        std::vector<CompensatedSum> acc(first->dim());
        for (const auto& o : outcomes_) {
            if (!o.embedding) throw Error(ErrorKind::InvalidDistribution, "outcome without embedding");
            for (std::size_t k = 0; k < acc.size(); ++k) acc[k].add(o.probability * (*o.embedding)[k]);
        }
        std::vector<double> out;
        for (const auto& a : acc) out.push_back(a.value());
        return EmbeddingVector(std::move(out));
    }

    /// Per-dimension population standard deviation of the embedding.
    [[nodiscard]] EmbeddingVector std_embedding() const {
        const EmbeddingVector mu = mean_embedding();
        std::vector<double> out(mu.dim());
        for (std::size_t k = 0; k < mu.dim(); ++k) {
            CompensatedSum s;
            for (const auto& o : outcomes_) {
                const double d = (*o.embedding)[k] - mu[k];
                s.add(o.probability * d * d);
            }
            out[k] = std::sqrt(s.value());
        }
        return EmbeddingVector(std::move(out));
    }

private:
    std::vector<SimulatedOutcome> outcomes_;
};

/// Draws outcomes by probability from the sampler's stream. With
/// `temperature_sharpening` the probabilities become p^(1/T), renormalized.
class SimulatedGenerator final : public GenerationProvider {
public:
    explicit SimulatedGenerator(SimulatedDistribution dist, bool temperature_sharpening = false)
        : dist_(std::move(dist)), sharpening_(temperature_sharpening) {}

    Generation generate(const std::string& /*prompt*/, const GenerationParams& params, Rng& stream) override {
        const auto& outs = dist_.outcomes();
        std::vector<double> p;
        p.reserve(outs.size());
        for (const auto& o : outs) {
            p.push_back(sharpening_ ? std::pow(o.probability, 1.0 / params.temperature) : o.probability);
        }
        double total = 0.0;
        for (double x : p) total += x;
        const double u = stream.uniform01() * total;
        double cum = 0.0;
        for (std::size_t i = 0; i < outs.size(); ++i) {
            cum += p[i];
            if (u < cum) return {outs[i].text, std::nullopt};
        }
        return {outs.back().text, std::nullopt};
    }

    [[nodiscard]] ProviderCapabilities capabilities() const override { return {false, false, true}; }

    [[nodiscard]] const SimulatedDistribution& distribution() const noexcept { return dist_; }

private:
    SimulatedDistribution dist_;
    bool sharpening_;
};

/// Position-dependent stub: answers with the first k pool items in the order
/// they appear in the prompt, joined by ", ".
class EchoPrefixGenerator final : public GenerationProvider {
public:
    EchoPrefixGenerator(std::vector<std::string> pool, std::size_t k) : pool_(std::move(pool)), k_(k) {}

    Generation generate(const std::string& prompt, const GenerationParams&, Rng&) override {
        std::vector<std::pair<std::size_t, const std::string*>> found;
        for (const auto& item : pool_) {
            const auto pos = detail::find_word(prompt, item);
            if (pos != std::string_view::npos) found.emplace_back(pos, &item);
        }
        std::sort(found.begin(), found.end());
        std::string out;
        for (std::size_t i = 0; i < found.size() && i < k_; ++i) {
            if (i) out += ", ";
            out += *found[i].second;
        }
        return {out, std::nullopt};
    }

    [[nodiscard]] ProviderCapabilities capabilities() const override { return {false, false, true}; }

private:
    std::vector<std::string> pool_;
    std::size_t k_;
};

/// Lookup-table embedder with an optional hashed bag-of-words fallback.
class SimulatedEmbedder final : public EmbeddingProvider {
public:
    SimulatedEmbedder(std::unordered_map<std::string, EmbeddingVector> lookup, std::size_t dimension,
                      bool fallback_hashing, std::string name = "simulated")
        : lookup_(std::move(lookup)), dim_(dimension), fallback_(fallback_hashing), name_(std::move(name)) {
        for (const auto& [text, v] : lookup_) {
            if (dim_ == 0) dim_ = v.dim();
            if (v.dim() != dim_) {
                throw Error(ErrorKind::DimensionMismatch, "lookup vector for '" + text + "' has wrong dimension");
            }
        }
        if (dim_ == 0) throw Error(ErrorKind::ConfigError, "simulated embedder needs a dimension");
    }

    std::vector<EmbeddingVector> embed(std::span<const std::string> texts) override {
        calls_.fetch_add(1, std::memory_order_relaxed);
        std::vector<EmbeddingVector> out;
        out.reserve(texts.size());
        for (const auto& t : texts) out.push_back(embed_one(t));
        return out;
    }

    [[nodiscard]] EmbeddingVector embed_one(const std::string& text) const {
        if (auto it = lookup_.find(text); it != lookup_.end()) return it->second;
        if (!fallback_) throw Error(ErrorKind::UnknownText, "no embedding configured for '" + text + "'");
        return hashed(text);
    }

    [[nodiscard]] std::string identity() const override {
        // Content hash so that editing the table invalidates group caches.
        std::uint64_t h = 0xcbf29ce484222325ULL;
        std::map<std::string, const EmbeddingVector*> sorted;
        for (const auto& [k, v] : lookup_) sorted.emplace(k, &v);
        auto mix = [&h](const void* p, std::size_t n) {
            const auto* b = static_cast<const unsigned char*>(p);
            for (std::size_t i = 0; i < n; ++i) {
                h ^= b[i];
                h *= 0x100000001b3ULL;
            }
        };
        for (const auto& [k, v] : sorted) {
            mix(k.data(), k.size());
            for (double x : v->values()) mix(&x, sizeof x);
        }
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
        return name_ + "/d" + std::to_string(dim_) + (fallback_ ? "/hash/" : "/nohash/") + buf;
    }

    [[nodiscard]] std::size_t dimension() const override { return dim_; }
    [[nodiscard]] std::size_t call_count() const noexcept { return calls_.load(); }

private:
    [[nodiscard]] EmbeddingVector hashed(const std::string& text) const {
        auto fnv = [](std::string_view s) {
            std::uint64_t h = 0xcbf29ce484222325ULL;
            for (unsigned char c : s) {
                h ^= c;
                h *= 0x100000001b3ULL;
            }
            return h;
        };
        std::vector<double> v(dim_, 0.0);
        std::string token;
        bool any = false;
        auto flush = [&] {
            if (token.empty()) return;
            const std::uint64_t h = splitmix64(fnv(token));
            v[h % dim_] += (h >> 63) ? -1.0 : 1.0;
            any = true;
            token.clear();
        };
        for (char c : text) {
            if (detail::is_word_char(c)) {
                token += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
            } else {
                flush();
            }
        }
        flush();
        if (!any || std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; })) {
            // Empty text, or tokens that cancel: fall back to the whole string.
            const std::uint64_t h = splitmix64(fnv(text) ^ 0x5bd1e995ULL);
            v.assign(dim_, 0.0);
            v[h % dim_] = 1.0;
        }
        return EmbeddingVector(std::move(v)).normalized();
    }

    std::unordered_map<std::string, EmbeddingVector> lookup_;
    std::size_t dim_;
    bool fallback_;
    std::string name_;
    mutable std::atomic<std::size_t> calls_{0};
};

// ---------------------------------------------------------------------------
// Simulation files:
// {
//   "generation": {"kind": "distribution", "temperature_sharpening": false,
//                  "outcomes": [{"text": "...", "probability": 0.5, "embedding": [..]}]}
//              or {"kind": "echo_prefix", "k": 3},
//   "embedding": {"name": "...", "dimension": 8, "fallback_hashing": true,
//                 "lookup": {"text": [..]}}
// }
// Outcome embeddings are added to the embedder lookup.

struct SimulationSpec {
    nlohmann::json generation;
    nlohmann::json embedding;
};

inline SimulationSpec load_simulation_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoError, "cannot open simulation file " + path.string());
    try {
        auto j = nlohmann::json::parse(in);
        return {j.value("generation", nlohmann::json::object()), j.value("embedding", nlohmann::json::object())};
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ConfigError, "simulation file " + path.string() + ": " + e.what());
    }
}

inline std::vector<SimulatedOutcome> parse_outcomes(const nlohmann::json& gen) {
    std::vector<SimulatedOutcome> outs;
    for (const auto& o : gen.at("outcomes")) {
        SimulatedOutcome so;
        so.text = o.at("text").get<std::string>();
        so.probability = o.at("probability").get<double>();
        if (o.contains("embedding")) so.embedding = EmbeddingVector(o["embedding"].get<std::vector<double>>());
        outs.push_back(std::move(so));
    }
    return outs;
}

/// `pool` feeds the echo_prefix generator (the task's item list).
inline std::unique_ptr<GenerationProvider> make_simulated_generator(const SimulationSpec& spec,
                                                                    const std::vector<std::string>& pool) {
    try {
        const std::string kind = spec.generation.value("kind", std::string("distribution"));
        if (kind == "distribution") {
            return std::make_unique<SimulatedGenerator>(SimulatedDistribution(parse_outcomes(spec.generation)),
                                                        spec.generation.value("temperature_sharpening", false));
        }
        if (kind == "echo_prefix") {
            return std::make_unique<EchoPrefixGenerator>(pool, spec.generation.at("k").get<std::size_t>());
        }
        throw Error(ErrorKind::ConfigError, "unknown simulated generation kind '" + kind + "'");
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ConfigError, std::string("simulated generation: ") + e.what());
    }
}

inline std::unique_ptr<SimulatedEmbedder> make_simulated_embedder(const SimulationSpec& spec) {
    try {
        std::unordered_map<std::string, EmbeddingVector> lookup;
        if (spec.embedding.contains("lookup")) {
            for (const auto& [text, v] : spec.embedding["lookup"].items()) {
                lookup.emplace(text, EmbeddingVector(v.get<std::vector<double>>()));
            }
        }
        if (spec.generation.contains("outcomes")) {
            for (auto& o : parse_outcomes(spec.generation)) {
                if (o.embedding) lookup.emplace(o.text, std::move(*o.embedding));
            }
        }
        return std::make_unique<SimulatedEmbedder>(std::move(lookup),
                                                   spec.embedding.value("dimension", std::size_t{0}),
                                                   spec.embedding.value("fallback_hashing", true),
                                                   spec.embedding.value("name", std::string("simulated")));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ConfigError, std::string("simulated embedding: ") + e.what());
    }
}

}  // namespace requal
