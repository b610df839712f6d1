#pragma once

// Black-box provider interfaces. Nothing outside the provider
// implementations builds requests or parses responses.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "requal/random.hpp"
#include "requal/vectorspace.hpp"

namespace requal {

struct GenerationParams {
    double temperature = 1.0;
    double frequency_penalty = 0.0;
    double presence_penalty = 0.0;

    friend bool operator==(const GenerationParams&, const GenerationParams&) = default;
};

struct Generation {
    std::string text;
    /// Per-token probabilities in (0,1]; nullopt when the provider has none.
    std::optional<std::vector<double>> token_probs;
};

struct ProviderCapabilities {
    bool returns_token_probs = false;
    bool supports_penalties = false;
    bool supports_seed = false;
};

/// A text-generation model treated as a black-box oracle. Implementations
/// must be safe to call concurrently. `stream` is the per-query random
/// stream owned by the sampler; remote providers ignore it.
class GenerationProvider {
public:
    virtual ~GenerationProvider() = default;
    virtual Generation generate(const std::string& prompt, const GenerationParams& params,
                                Rng& stream) = 0;
    [[nodiscard]] virtual ProviderCapabilities capabilities() const = 0;
};

/// Maps text to embedding vectors. Same text yields the same vector within
/// one instance; implementations must be safe to call concurrently.
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual std::vector<EmbeddingVector> embed(std::span<const std::string> texts) = 0;
    /// Model name and version; used as a cache key.
    [[nodiscard]] virtual std::string identity() const = 0;
    /// Output dimension, or 0 if not known before the first call.
    [[nodiscard]] virtual std::size_t dimension() const = 0;
};

}  // namespace requal
