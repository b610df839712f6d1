#pragma once

// HTTP-backed generation and embedding providers.
//
// Default dialect wire format:
//   POST {endpoint}/v1/completions
//     {"prompt", "temperature", "frequency_penalty", "presence_penalty", "max_tokens", "logprobs"}
//     -> {"text": string, "token_logprobs": [number] | null}
//   POST {endpoint}/v1/embeddings
//     {"input": [string], "instruction": string | null}
//     -> {"embeddings": [[number]], "dimension": integer, "model": string}
// The "openai" dialect speaks the choices[] / data[] response shapes instead.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "httplib.h"
#include "json.hpp"
#include "requal/error.hpp"
#include "requal/provider.hpp"

namespace requal {

enum class Dialect { requal, openai };

inline Dialect parse_dialect(const std::string& s) {
    if (s.empty() || s == "requal" || s == "default") return Dialect::requal;
    if (s == "openai") return Dialect::openai;
    throw Error(ErrorKind::ConfigError, "unknown dialect '" + s + "'");
}

inline constexpr const char* kDefaultInstruction = "Represent the sentence for semantic similarity";

struct HttpOptions {
    std::string endpoint;  // scheme://host[:port][/prefix]
    std::string api_key;   // sent as a bearer token when non-empty
    std::chrono::milliseconds timeout{30000};
    int max_attempts = 3;
    std::chrono::milliseconds initial_backoff{200};
    Dialect dialect = Dialect::requal;
    std::string model;  // forwarded in the openai dialect; part of the identity
};

/// API key from REQUAL_API_KEY, empty if unset.
inline std::string api_key_from_env() {
    const char* k = std::getenv("REQUAL_API_KEY");
    return k ? std::string(k) : std::string();
}

namespace detail {

struct ParsedEndpoint {
    std::string scheme_host_port;
    std::string prefix;
};

inline ParsedEndpoint parse_endpoint(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw Error(ErrorKind::ConfigError, "endpoint '" + url + "' needs an http:// or https:// scheme");
    }
    const std::string scheme = url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https") {
        throw Error(ErrorKind::ConfigError, "unsupported scheme in endpoint '" + url + "'");
    }
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (scheme == "https") {
        throw Error(ErrorKind::ConfigError, "https endpoints need a build with OpenSSL");
    }
#endif
    const auto path_start = url.find('/', scheme_end + 3);
    ParsedEndpoint p;
    p.scheme_host_port = url.substr(0, path_start);
    if (path_start != std::string::npos) {
        p.prefix = url.substr(path_start);
        while (!p.prefix.empty() && p.prefix.back() == '/') p.prefix.pop_back();
    }
    return p;
}

inline bool is_timeout(httplib::Error e) {
    return e == httplib::Error::Read || e == httplib::Error::ConnectionTimeout;
}

inline bool is_transient_status(int status) {
    return status == 429 || status == 500 || status == 502 || status == 503 || status == 504;
}

/// POSTs JSON with retry and exponential backoff on transient failures.
/// Connection errors, timeouts, 429 and 5xx gateway statuses are retried;
/// other non-2xx statuses fail immediately.
class JsonPoster {
public:
    explicit JsonPoster(HttpOptions opts) : opts_(std::move(opts)), ep_(parse_endpoint(opts_.endpoint)) {}

    nlohmann::json post(const std::string& path, const nlohmann::json& body) const {
        const std::string payload = body.dump();
        const std::string full_path = ep_.prefix + path;
        ErrorKind last_kind = ErrorKind::ProviderUnavailable;
        std::string last_msg = "no attempt made";
        int last_status = 0;
        auto backoff = opts_.initial_backoff;
        for (int attempt = 1; attempt <= std::max(1, opts_.max_attempts); ++attempt) {
            if (attempt > 1) {
                std::this_thread::sleep_for(backoff);
                backoff *= 2;
            }
            requests_.fetch_add(1, std::memory_order_relaxed);
            httplib::Client cli(ep_.scheme_host_port);
            const auto secs = std::chrono::duration_cast<std::chrono::seconds>(opts_.timeout);
            const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(opts_.timeout - secs);
            cli.set_connection_timeout(secs.count(), usecs.count());
            cli.set_read_timeout(secs.count(), usecs.count());
            cli.set_write_timeout(secs.count(), usecs.count());
            httplib::Headers headers;
            if (!opts_.api_key.empty()) headers.emplace("Authorization", "Bearer " + opts_.api_key);
            auto res = cli.Post(full_path, headers, payload, "application/json");
            if (!res) {
                const auto err = res.error();
                last_kind = is_timeout(err) ? ErrorKind::Timeout : ErrorKind::ProviderUnavailable;
                last_msg = opts_.endpoint + full_path + ": " + httplib::to_string(err);
                last_status = 0;
                continue;
            }
            if (res->status >= 200 && res->status < 300) {
                try {
                    return nlohmann::json::parse(res->body);
                } catch (const nlohmann::json::exception& e) {
                    throw Error(ErrorKind::MalformedResponse, std::string("invalid JSON: ") + e.what());
                }
            }
            if (is_transient_status(res->status)) {
                last_kind = ErrorKind::ProviderUnavailable;
                last_msg = opts_.endpoint + full_path + " returned HTTP " + std::to_string(res->status);
                last_status = res->status;
                continue;
            }
            throw Error(ErrorKind::HttpStatus,
                        opts_.endpoint + full_path + " returned HTTP " + std::to_string(res->status), res->status);
        }
        throw Error(last_kind, last_msg + " after " + std::to_string(opts_.max_attempts) + " attempts",
                    last_status);
    }

    [[nodiscard]] const HttpOptions& options() const noexcept { return opts_; }
    [[nodiscard]] std::size_t request_count() const noexcept { return requests_.load(); }

private:
    HttpOptions opts_;
    ParsedEndpoint ep_;
    mutable std::atomic<std::size_t> requests_{0};
};

template <typename F>
auto malformed_guard(F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::MalformedResponse, e.what());
    }
}

}  // namespace detail

class HttpGenerationProvider final : public GenerationProvider {
public:
    HttpGenerationProvider(HttpOptions opts, int max_tokens = 256, bool logprobs = true)
        : poster_(std::move(opts)), max_tokens_(max_tokens), logprobs_(logprobs) {}

    Generation generate(const std::string& prompt, const GenerationParams& params, Rng&) override {
        nlohmann::json body = {{"prompt", prompt},
                               {"temperature", params.temperature},
                               {"frequency_penalty", params.frequency_penalty},
                               {"presence_penalty", params.presence_penalty},
                               {"max_tokens", max_tokens_},
                               {"logprobs", logprobs_}};
        const bool openai = poster_.options().dialect == Dialect::openai;
        if (openai) {
            body["model"] = poster_.options().model;
            if (logprobs_) body["logprobs"] = 1;
            else body.erase("logprobs");
        }
        const auto resp = poster_.post("/v1/completions", body);
        return detail::malformed_guard([&] {
            const nlohmann::json& node = openai ? resp.at("choices").at(0) : resp;
            Generation g;
            g.text = node.at("text").get<std::string>();
            const nlohmann::json* lps = nullptr;
            if (openai) {
                if (node.contains("logprobs") && node["logprobs"].is_object() &&
                    node["logprobs"].contains("token_logprobs")) {
                    lps = &node["logprobs"]["token_logprobs"];
                }
            } else if (node.contains("token_logprobs")) {
                lps = &node["token_logprobs"];
            }
            if (lps && !lps->is_null()) {
                std::vector<double> probs;
                for (const auto& lp : *lps) {
                    const double x = lp.get<double>();
                    if (!std::isfinite(x) || x > 0.0) {
                        throw Error(ErrorKind::MalformedResponse, "log-probability out of range");
                    }
                    probs.push_back(std::exp(x));
                }
                g.token_probs = std::move(probs);
            }
            return g;
        });
    }

    [[nodiscard]] ProviderCapabilities capabilities() const override { return {logprobs_, true, false}; }
    [[nodiscard]] std::size_t request_count() const noexcept { return poster_.request_count(); }

private:
    detail::JsonPoster poster_;
    int max_tokens_;
    bool logprobs_;
};

class HttpEmbeddingProvider final : public EmbeddingProvider {
public:
    static constexpr std::size_t kBatchSize = 64;

    explicit HttpEmbeddingProvider(HttpOptions opts, std::optional<std::string> instruction = kDefaultInstruction)
        : poster_(std::move(opts)), instruction_(std::move(instruction)) {}

    std::vector<EmbeddingVector> embed(std::span<const std::string> texts) override {
        std::vector<EmbeddingVector> out;
        out.reserve(texts.size());
        for (std::size_t start = 0; start < texts.size(); start += kBatchSize) {
            const auto batch = texts.subspan(start, std::min(kBatchSize, texts.size() - start));
            for (auto& v : embed_batch(batch)) out.push_back(std::move(v));
        }
        return out;
    }

    [[nodiscard]] std::string identity() const override {
        const auto& o = poster_.options();
        return "http:" + o.endpoint + "|model=" + o.model + "|instruction=" + instruction_.value_or("");
    }

    [[nodiscard]] std::size_t dimension() const override { return dim_.load(); }
    [[nodiscard]] std::size_t request_count() const noexcept { return poster_.request_count(); }

private:
    std::vector<EmbeddingVector> embed_batch(std::span<const std::string> batch) {
        const bool openai = poster_.options().dialect == Dialect::openai;
        nlohmann::json body;
        body["input"] = std::vector<std::string>(batch.begin(), batch.end());
        if (openai) {
            body["model"] = poster_.options().model;
        } else {
            body["instruction"] = instruction_ ? nlohmann::json(*instruction_) : nlohmann::json(nullptr);
        }
        const auto resp = poster_.post("/v1/embeddings", body);
        auto rows = detail::malformed_guard([&] {
            std::vector<std::vector<double>> r;
            if (openai) {
                r.resize(batch.size());
                std::vector<bool> seen(batch.size(), false);
                std::size_t pos = 0;
                for (const auto& item : resp.at("data")) {
                    const std::size_t idx = item.value("index", pos);
                    if (idx >= batch.size() || seen[idx]) {
                        throw Error(ErrorKind::MalformedResponse, "bad embedding index");
                    }
                    seen[idx] = true;
                    r[idx] = item.at("embedding").get<std::vector<double>>();
                    ++pos;
                }
                if (pos != batch.size()) throw Error(ErrorKind::MalformedResponse, "missing embeddings");
            } else {
                r = resp.at("embeddings").get<std::vector<std::vector<double>>>();
                if (resp.contains("dimension")) {
                    const auto d = resp["dimension"].get<std::size_t>();
                    for (const auto& row : r) {
                        if (row.size() != d) {
                            throw Error(ErrorKind::MalformedResponse, "row length disagrees with dimension field");
                        }
                    }
                }
            }
            return r;
        });
        if (rows.size() != batch.size()) {
            throw Error(ErrorKind::MalformedResponse, "expected " + std::to_string(batch.size()) +
                                                          " embeddings, got " + std::to_string(rows.size()));
        }
        std::vector<EmbeddingVector> out;
        for (auto& row : rows) {
            if (row.empty()) throw Error(ErrorKind::MalformedResponse, "empty embedding");
            std::size_t expected = 0;
            if (!dim_.compare_exchange_strong(expected, row.size()) && expected != row.size()) {
                throw Error(ErrorKind::DimensionMismatch, "embedding dimension changed from " +
                                                              std::to_string(expected) + " to " +
                                                              std::to_string(row.size()));
            }
            EmbeddingVector v(std::move(row));
            if (v.norm() == 0.0) throw Error(ErrorKind::ZeroNormVector, "service returned a zero vector");
            out.push_back(std::move(v));
        }
        return out;
    }

    detail::JsonPoster poster_;
    std::optional<std::string> instruction_;
    std::atomic<std::size_t> dim_{0};
};

}  // namespace requal
