#pragma once

// Run configuration (JSON) and provider construction.
//
// {
//   "task": {"template": "...{items}...", "items": [...] | "items_file": "names.csv",
//            "name_column": "name", "gender_column": "gender",
//            "task_kind": "subset_selection", "validator": "subset_of_pool"},
//   "plan": {"mode": "fixed_budget", "budget": 5, "cost": 1, "alpha": 0.95,
//            "target_error": 0.1, "warmup": 5, "max_samples": 100, "seed": 42,
//            "parallelism": 1, "error_reduction": "l2", "strict": false},
//   "providers": {"generation": "simulated:sim.json" | "http://host:port" | {...},
//                 "embedding": "simulated:sim.json" | {"endpoint": ..., "instruction": ...}},
//   "groups": "groups.json", "group_cache": "cache.json",
//   "bias_mode": "absolute" | "signed", "invert_signed_bias": false,
//   "report": {"path": "report.json", "include_timings": false},
//   "eval": {"trials": 200, "out": "series.csv", "lexicon": "lexicon.json",
//            "expected_stereotype_gender": "female"}
// }
// Relative paths resolve against the config file's directory.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "requal/equity.hpp"
#include "requal/error.hpp"
#include "requal/evalkit.hpp"
#include "requal/http.hpp"
#include "requal/sampling.hpp"
#include "requal/simulated.hpp"

#ifndef REQUAL_DATA_DIR
#define REQUAL_DATA_DIR "data"
#endif

namespace requal {

inline std::filesystem::path bundled_data_dir() { return std::filesystem::path(REQUAL_DATA_DIR); }

struct ProviderRef {
    std::string spec;  // as written: "simulated:PATH" or an endpoint URL
    bool simulated = false;
    std::filesystem::path simulation_file;
    HttpOptions http;
    int max_tokens = 256;
    bool logprobs = true;
    std::optional<std::string> instruction = std::string(kDefaultInstruction);
};

struct EvalSettings {
    std::size_t trials = 0;
    std::optional<std::filesystem::path> out;
    std::optional<std::filesystem::path> lexicon;
    std::optional<Gender> expected_stereotype_gender;
};

struct RunConfig {
    TaskSpec task;
    std::string items_file_spec;  // as written, for the echo
    std::unordered_map<std::string, Gender> gender_of;
    SamplingPlan plan;
    bool seed_given = false;
    ProviderRef generation;
    ProviderRef embedding;
    std::string groups_spec;
    std::filesystem::path groups_file;
    std::optional<std::filesystem::path> group_cache;
    BiasMode bias_mode = BiasMode::absolute;
    bool invert_signed_bias = false;
    std::optional<std::filesystem::path> report_path;
    bool include_timings = false;
    EvalSettings eval;
};

namespace detail {

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

inline ProviderRef parse_provider_ref(const nlohmann::json& j, const std::filesystem::path& base) {
    ProviderRef r;
    std::string endpoint;
    if (j.is_string()) {
        endpoint = j.get<std::string>();
    } else if (j.is_object()) {
        endpoint = j.value("endpoint", std::string());
        if (j.contains("simulated")) endpoint = "simulated:" + j["simulated"].get<std::string>();
        r.max_tokens = j.value("max_tokens", r.max_tokens);
        r.logprobs = j.value("logprobs", r.logprobs);
        if (j.contains("instruction")) {
            r.instruction = j["instruction"].is_null() ? std::nullopt
                                                       : std::optional<std::string>(j["instruction"].get<std::string>());
        }
        r.http.timeout = std::chrono::milliseconds(j.value("timeout_ms", static_cast<long>(r.http.timeout.count())));
        r.http.max_attempts = j.value("max_attempts", r.http.max_attempts);
        r.http.initial_backoff =
            std::chrono::milliseconds(j.value("backoff_ms", static_cast<long>(r.http.initial_backoff.count())));
        r.http.dialect = parse_dialect(j.value("dialect", std::string()));
        r.http.model = j.value("model", std::string());
    } else {
        throw Error(ErrorKind::ConfigError, "provider must be a string or an object");
    }
    if (endpoint.empty()) throw Error(ErrorKind::ConfigError, "provider has no endpoint");
    r.spec = endpoint;
    if (endpoint.rfind("simulated:", 0) == 0) {
        r.simulated = true;
        r.simulation_file = resolve(base, endpoint.substr(10));
    } else {
        r.http.endpoint = endpoint;
        (void)parse_endpoint(endpoint);
    }
    return r;
}

}  // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir) {
    RunConfig c;
    try {
        const auto& t = j.at("task");
        c.task.prompt_template = t.at("template").get<std::string>();
        c.task.kind = parse_task_kind(t.value("task_kind", std::string("freeform")));
        c.task.validator = parse_validator(t.value("validator", std::string("none")));
        c.task.shuffle = t.value("shuffle", true);
        if (t.contains("items")) c.task.items = t["items"].get<std::vector<std::string>>();
        if (t.contains("items_file")) {
            c.items_file_spec = t["items_file"].get<std::string>();
            std::optional<std::string> name_col, gender_col;
            if (t.contains("name_column")) name_col = t["name_column"].get<std::string>();
            if (t.contains("gender_column")) gender_col = t["gender_column"].get<std::string>();
            auto table = load_entities(detail::resolve(base_dir, c.items_file_spec), name_col, gender_col);
            c.task.items = std::move(table.names);
            c.gender_of = std::move(table.gender_of);
        }
        if (t.contains("genders")) {
            for (const auto& [name, g] : t["genders"].items()) {
                if (auto parsed = parse_gender(g.get<std::string>())) c.gender_of[name] = *parsed;
            }
        }

        const auto p = j.value("plan", nlohmann::json::object());
        const std::string mode = p.value("mode", std::string("fixed_budget"));
        if (mode == "fixed_budget") c.plan.mode = PlanMode::fixed_budget;
        else if (mode == "fixed_error") c.plan.mode = PlanMode::fixed_error;
        else throw Error(ErrorKind::ConfigError, "unknown plan mode '" + mode + "'");
        c.plan.budget = p.value("budget", c.plan.budget);
        c.plan.cost = p.value("cost", c.plan.cost);
        c.plan.alpha = p.value("alpha", c.plan.alpha);
        c.plan.target_error = p.value("target_error", c.plan.target_error);
        c.plan.warmup = p.value("warmup", c.plan.warmup);
        c.plan.max_samples = p.value("max_samples", c.plan.max_samples);
        c.plan.parallelism = p.value("parallelism", c.plan.parallelism);
        c.plan.strict = p.value("strict", c.plan.strict);
        c.plan.retry_factor = p.value("retry_factor", c.plan.retry_factor);
        const std::string red = p.value("error_reduction", std::string("l2"));
        if (red == "l2") c.plan.reduction = ErrorReduction::l2;
        else if (red == "max_dimension") c.plan.reduction = ErrorReduction::max_dimension;
        else throw Error(ErrorKind::ConfigError, "unknown error_reduction '" + red + "'");
        if (p.contains("seed") && !p["seed"].is_null()) {
            c.plan.seed = p["seed"].get<std::uint64_t>();
            c.seed_given = true;
        }

        const auto prov = j.value("providers", nlohmann::json::object());
        if (j.contains("provider")) {
            c.generation = detail::parse_provider_ref(j["provider"], base_dir);
            c.embedding = c.generation;
        }
        if (prov.contains("generation")) c.generation = detail::parse_provider_ref(prov["generation"], base_dir);
        if (prov.contains("embedding")) c.embedding = detail::parse_provider_ref(prov["embedding"], base_dir);

        c.groups_spec = j.value("groups", std::string());
        c.groups_file = c.groups_spec.empty() ? bundled_data_dir() / "groups" / "gender.json"
                                              : detail::resolve(base_dir, c.groups_spec);
        if (j.contains("group_cache") && !j["group_cache"].is_null()) {
            c.group_cache = detail::resolve(base_dir, j["group_cache"].get<std::string>());
        }
        const std::string bm = j.value("bias_mode", std::string("absolute"));
        if (bm == "absolute") c.bias_mode = BiasMode::absolute;
        else if (bm == "signed") c.bias_mode = BiasMode::signed_disparity;
        else throw Error(ErrorKind::ConfigError, "unknown bias_mode '" + bm + "'");
        c.invert_signed_bias = j.value("invert_signed_bias", false);

        const auto rep = j.value("report", nlohmann::json::object());
        if (rep.contains("path")) c.report_path = detail::resolve(base_dir, rep["path"].get<std::string>());
        c.include_timings = rep.value("include_timings", false);

        const auto ev = j.value("eval", nlohmann::json::object());
        c.eval.trials = ev.value("trials", std::size_t{0});
        if (ev.contains("out")) c.eval.out = detail::resolve(base_dir, ev["out"].get<std::string>());
        if (ev.contains("lexicon")) c.eval.lexicon = detail::resolve(base_dir, ev["lexicon"].get<std::string>());
        if (ev.contains("expected_stereotype_gender")) {
            c.eval.expected_stereotype_gender = parse_gender(ev["expected_stereotype_gender"].get<std::string>());
            if (!c.eval.expected_stereotype_gender) {
                throw Error(ErrorKind::ConfigError, "expected_stereotype_gender must be female or male");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ConfigError, e.what());
    }
    return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::ConfigError, "cannot open config file " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ConfigError, path.string() + ": " + e.what());
    }
    return parse_run_config(j, path.has_parent_path() ? path.parent_path() : std::filesystem::path("."));
}

/// Checks cross-field invariants once overrides have been applied.
inline void validate_run_config(const RunConfig& c) {
    c.task.validate();
    c.plan.validate();
    if (c.generation.spec.empty()) throw Error(ErrorKind::ConfigError, "no generation provider configured");
    if (c.embedding.spec.empty()) throw Error(ErrorKind::ConfigError, "no embedding provider configured");
}

/// Effective configuration as echoed into reports. Output locations and
/// parallelism are left out: they do not influence results.
inline nlohmann::ordered_json echo_config(const RunConfig& c) {
    nlohmann::ordered_json j;
    j["task"]["template"] = c.task.prompt_template;
    j["task"]["task_kind"] = std::string(to_string(c.task.kind));
    j["task"]["validator"] = std::string(to_string(c.task.validator));
    j["task"]["shuffle"] = c.task.shuffle;
    if (!c.items_file_spec.empty()) j["task"]["items_file"] = c.items_file_spec;
    j["task"]["items"] = c.task.items;
    auto& p = j["plan"];
    p["mode"] = c.plan.mode == PlanMode::fixed_budget ? "fixed_budget" : "fixed_error";
    if (c.plan.mode == PlanMode::fixed_budget) {
        p["budget"] = c.plan.budget;
        p["cost"] = c.plan.cost;
    } else {
        p["alpha"] = c.plan.alpha;
        p["target_error"] = c.plan.target_error;
        p["warmup"] = c.plan.warmup;
        p["max_samples"] = c.plan.max_samples;
        p["error_reduction"] = c.plan.reduction == ErrorReduction::l2 ? "l2" : "max_dimension";
    }
    p["seed"] = c.plan.seed;
    p["strict"] = c.plan.strict;
    j["providers"]["generation"] = c.generation.spec;
    j["providers"]["embedding"] = c.embedding.spec;
    if (!c.embedding.simulated) {
        j["providers"]["instruction"] = c.embedding.instruction ? nlohmann::ordered_json(*c.embedding.instruction)
                                                                : nlohmann::ordered_json(nullptr);
    }
    j["groups"] = c.groups_spec.empty() ? std::string("<bundled gender groups>") : c.groups_spec;
    j["bias_mode"] = std::string(to_string(c.bias_mode));
    j["invert_signed_bias"] = c.invert_signed_bias;
    return j;
}

inline std::uint64_t generated_seed() {
    std::random_device rd;
    return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

struct Providers {
    std::unique_ptr<GenerationProvider> generation;
    std::unique_ptr<EmbeddingProvider> embedding;
};

inline Providers make_providers(const RunConfig& c) {
    Providers p;
    if (c.generation.simulated) {
        p.generation = make_simulated_generator(load_simulation_spec(c.generation.simulation_file), c.task.items);
    } else {
        auto opts = c.generation.http;
        opts.api_key = api_key_from_env();
        p.generation = std::make_unique<HttpGenerationProvider>(opts, c.generation.max_tokens, c.generation.logprobs);
    }
    if (c.embedding.simulated) {
        p.embedding = make_simulated_embedder(load_simulation_spec(c.embedding.simulation_file));
    } else {
        auto opts = c.embedding.http;
        opts.api_key = api_key_from_env();
        p.embedding = std::make_unique<HttpEmbeddingProvider>(opts, c.embedding.instruction);
    }
    return p;
}

}  // namespace requal
