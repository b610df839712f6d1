#pragma once

// Command-line frontend. `run_cli` is the whole program; tools/requal.cpp
// only forwards argv and the standard streams.
//
// Exit codes: 0 success, 1 internal failure, 2 configuration error,
// 3 provider failure, 4 too many failed evaluation trials.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "requal/config.hpp"
#include "requal/equity.hpp"
#include "requal/error.hpp"
#include "requal/evalkit.hpp"
#include "requal/report.hpp"
#include "requal/sampling.hpp"
#include "requal/selection.hpp"

namespace requal::cli {

enum ExitCode : int { kOk = 0, kInternal = 1, kConfig = 2, kProvider = 3, kTrialFailures = 4 };

struct Options {
    std::optional<std::string> config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::size_t> samples;
    std::optional<std::string> provider;
    std::optional<std::size_t> parallelism;
    std::optional<std::size_t> trials;
    std::optional<std::string> groups;
    std::optional<std::string> cache;
    bool quiet = false;
};

inline int exit_code_for(const Error& e) {
    switch (e.kind()) {
        case ErrorKind::ProviderUnavailable:
        case ErrorKind::Timeout:
        case ErrorKind::HttpStatus:
        case ErrorKind::MalformedResponse:
        case ErrorKind::RetryExhausted:
        case ErrorKind::InvalidOutput:
        case ErrorKind::UnknownText:
            return kProvider;
        case ErrorKind::ConfigError:
        case ErrorKind::IoError:
        case ErrorKind::InvalidPlan:
        case ErrorKind::InvalidTask:
        case ErrorKind::InvalidGroupSet:
        case ErrorKind::EmptySeedSet:
        case ErrorKind::SignedModeRequiresBinaryGroups:
        case ErrorKind::BudgetBelowSingleQuery:
        case ErrorKind::InvalidDistribution:
        case ErrorKind::InvalidLexicon:
            return kConfig;
        default:
            return kInternal;
    }
}

namespace detail {

class Diagnostics {
public:
    Diagnostics(std::ostream& err, bool quiet) : err_(err), quiet_(quiet) {}
    void info(const std::string& msg) const {
        if (!quiet_) err_ << "requal: " << msg << '\n';
    }
    void error(const std::string& msg) const { err_ << "requal: error: " << msg << '\n'; }

private:
    std::ostream& err_;
    bool quiet_;
};

/// Loads the config and applies command-line overrides. Throws ConfigError.
inline RunConfig effective_config(const Options& opt, bool require_seed = false) {
    if (!opt.config) throw Error(ErrorKind::ConfigError, "--config is required");
    RunConfig c = load_run_config(*opt.config);
    if (opt.seed) {
        c.plan.seed = *opt.seed;
        c.seed_given = true;
    }
    if (opt.samples) {
        c.plan.mode = PlanMode::fixed_budget;
        c.plan.cost = 1.0;
        c.plan.budget = static_cast<double>(*opt.samples);
    }
    if (opt.parallelism) c.plan.parallelism = *opt.parallelism;
    if (opt.provider) {
        c.generation = requal::detail::parse_provider_ref(nlohmann::json(*opt.provider), std::filesystem::current_path());
        c.embedding = c.generation;
    }
    if (opt.groups) {
        c.groups_spec = *opt.groups;
        c.groups_file = *opt.groups;
    }
    if (opt.cache) c.group_cache = *opt.cache;
    if (require_seed && !c.seed_given) {
        throw Error(ErrorKind::ConfigError, "a seed is required (plan.seed or --seed)");
    }
    if (!c.seed_given) c.plan.seed = generated_seed();
    validate_run_config(c);
    return c;
}

inline GroupDefinition load_groups_or_config_error(const RunConfig& c) {
    try {
        return load_group_definition(c.groups_file);
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::IoError) {
            throw Error(ErrorKind::ConfigError, "group file not found: " + c.groups_file.string());
        }
        throw;
    }
}

inline Providers providers_or_config_error(const RunConfig& c) {
    try {
        return make_providers(c);
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::IoError) throw Error(ErrorKind::ConfigError, e.what());
        throw;
    }
}

inline double ms_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

inline std::string one_line(std::string s) {
    for (char& ch : s) {
        if (ch == '\n' || ch == '\r') ch = ' ';
    }
    return s;
}

}  // namespace detail

/// Sample, select, write the report; prints the weighted output on stdout.
inline int cmd_run(const Options& opt, std::ostream& out, std::ostream& err) {
    detail::Diagnostics diag(err, opt.quiet);
    RunConfig cfg;
    GroupDefinition def;
    Providers providers;
    try {
        cfg = detail::effective_config(opt);
        if (opt.out) cfg.report_path = *opt.out;
        def = detail::load_groups_or_config_error(cfg);
        providers = detail::providers_or_config_error(cfg);
    } catch (const Error& e) {
        diag.error(detail::one_line(e.what()));
        return exit_code_for(e) == kProvider ? kProvider : kConfig;
    }
    diag.info("seed " + std::to_string(cfg.plan.seed));

    try {
        const auto t_groups = std::chrono::steady_clock::now();
        const auto groups = estimate_groups(def, *providers.embedding, cfg.group_cache).groups;
        RunTimings timings;
        timings.groups_ms = detail::ms_since(t_groups);
        if (cfg.bias_mode == BiasMode::signed_disparity && !groups.supports_signed()) {
            throw Error(ErrorKind::SignedModeRequiresBinaryGroups,
                        "signed bias mode needs two groups with majority and minority");
        }

        const auto t_sample = std::chrono::steady_clock::now();
        const auto collection = collect_samples(cfg.task, cfg.plan, *providers.generation, *providers.embedding);
        timings.sampling_ms = detail::ms_since(t_sample);

        const auto t_select = std::chrono::steady_clock::now();
        const auto sel = select(collection, groups, cfg.bias_mode, cfg.invert_signed_bias);
        timings.selection_ms = detail::ms_since(t_select);

        const auto report = build_report(echo_config(cfg), collection, sel, groups,
                                         cfg.include_timings ? std::optional<RunTimings>(timings) : std::nullopt);
        if (cfg.report_path) {
            if (cfg.report_path->has_parent_path()) std::filesystem::create_directories(cfg.report_path->parent_path());
            std::ofstream f(*cfg.report_path, std::ios::binary);
            if (!f) {
                diag.error("cannot write report " + cfg.report_path->string());
                return kInternal;
            }
            f << report.dump(2) << '\n';
            diag.info("report written to " + cfg.report_path->string());
        }
        if (collection.stats.invalid) diag.info(std::to_string(collection.stats.invalid) + " invalid outputs excluded");
        if (collection.stats.error_target_met && !*collection.stats.error_target_met) {
            diag.info("target error not reached within max_samples");
        }
        out << report["selection"]["weighted"]["text"].get<std::string>() << '\n';
        return kOk;
    } catch (const Error& e) {
        diag.error(detail::one_line(e.what()));
        return exit_code_for(e);
    }
}

/// Estimates group vectors and stores them in the cache file.
inline int cmd_groups_estimate(const Options& opt, std::ostream& out, std::ostream& err) {
    detail::Diagnostics diag(err, opt.quiet);
    GroupDefinition def;
    std::unique_ptr<EmbeddingProvider> embedder;
    std::optional<std::filesystem::path> cache;
    try {
        RunConfig cfg;
        if (opt.config) {
            cfg = load_run_config(*opt.config);
        } else {
            cfg.groups_file = bundled_data_dir() / "groups" / "gender.json";
        }
        if (opt.groups) cfg.groups_file = *opt.groups;
        if (opt.cache) cfg.group_cache = *opt.cache;
        if (opt.provider) {
            cfg.embedding = requal::detail::parse_provider_ref(nlohmann::json(*opt.provider), std::filesystem::current_path());
        }
        if (cfg.embedding.spec.empty()) throw Error(ErrorKind::ConfigError, "no embedding provider configured");
        if (!cfg.group_cache) throw Error(ErrorKind::ConfigError, "--cache (or group_cache) is required");
        def = detail::load_groups_or_config_error(cfg);
        cfg.generation = cfg.embedding;
        cfg.generation.simulated = false;
        if (cfg.embedding.simulated) {
            embedder = make_simulated_embedder(load_simulation_spec(cfg.embedding.simulation_file));
        } else {
            auto o = cfg.embedding.http;
            o.api_key = api_key_from_env();
            embedder = std::make_unique<HttpEmbeddingProvider>(o, cfg.embedding.instruction);
        }
        cache = cfg.group_cache;
    } catch (const Error& e) {
        diag.error(detail::one_line(e.what()));
        return kConfig;
    }
    try {
        const auto est = estimate_groups(def, *embedder, cache);
        diag.info(std::string(est.cache_hit ? "cache hit" : "estimated") + " for " + embedder->identity());
        for (const auto& g : est.groups.groups()) diag.info(g.name + ": dimension " + std::to_string(g.vector.dim()));
        out << cache->string() << '\n';
        return kOk;
    } catch (const Error& e) {
        diag.error(detail::one_line(e.what()));
        return exit_code_for(e);
    }
}

/// Runs seeded independent trials and exports the three-way series.
inline int cmd_eval(const Options& opt, std::ostream& out, std::ostream& err) {
    detail::Diagnostics diag(err, opt.quiet);
    RunConfig cfg;
    GroupDefinition def;
    Providers providers;
    std::optional<GenderLexicon> lexicon;
    std::filesystem::path series_path;
    std::size_t trials = 0;
    try {
        cfg = detail::effective_config(opt, /*require_seed=*/true);
        trials = opt.trials ? *opt.trials : cfg.eval.trials;
        if (trials == 0) throw Error(ErrorKind::ConfigError, "number of trials must be positive");
        if (opt.out) series_path = *opt.out;
        else if (cfg.eval.out) series_path = *cfg.eval.out;
        else throw Error(ErrorKind::ConfigError, "no output path for the trial series (--out or eval.out)");
        def = detail::load_groups_or_config_error(cfg);
        providers = detail::providers_or_config_error(cfg);
        if (cfg.eval.lexicon) lexicon = load_lexicon(*cfg.eval.lexicon);
        else if (cfg.eval.expected_stereotype_gender) lexicon = load_lexicon(bundled_data_dir() / "lexicon" / "gender.json");
        if (lexicon && !cfg.eval.expected_stereotype_gender) {
            throw Error(ErrorKind::ConfigError, "eval.lexicon needs eval.expected_stereotype_gender");
        }
    } catch (const Error& e) {
        diag.error(detail::one_line(e.what()));
        return kConfig;
    }

    GroupSet groups;
    try {
        groups = estimate_groups(def, *providers.embedding, cfg.group_cache).groups;
    } catch (const Error& e) {
        diag.error(detail::one_line(e.what()));
        return exit_code_for(e);
    }

    const bool track_genders = cfg.task.kind == TaskKind::subset_selection && !cfg.gender_of.empty();
    const std::uint64_t base_seed = cfg.plan.seed;
    TrialSeries series;
    StereotypeCounts st_weighted, st_unweighted, st_minbias;
    nlohmann::json failed = nlohmann::json::array();
    for (std::size_t i = 0; i < trials; ++i) {
        SamplingPlan plan = cfg.plan;
        plan.seed = base_seed ^ static_cast<std::uint64_t>(i);
        try {
            const auto collection = collect_samples(cfg.task, plan, *providers.generation, *providers.embedding);
            const auto sel = select(collection, groups, cfg.bias_mode, cfg.invert_signed_bias);
            TrialRecord rec;
            rec.trial_id = i;
            rec.seed = plan.seed;
            rec.m = sel.sample_ids.size();
            rec.bias_weighted = sel.mode_bias(sel.weighted_index);
            rec.bias_unweighted = sel.mode_bias(sel.unweighted_index);
            rec.bias_minbias = sel.mode_bias(sel.minbias_index);
            rec.reliability_weighted = sel.reliability_weighted;
            rec.reliability_unweighted = sel.reliability_unweighted;
            rec.reliability_minbias = sel.reliability_minbias;
            auto text_of = [&](std::size_t pos) -> const std::string& {
                for (const auto& s : collection.samples) {
                    if (s.index == sel.sample_ids[pos]) return s.text;
                }
                throw Error(ErrorKind::EmptySampleSet, "selected sample missing");
            };
            if (track_genders) {
                auto counts = [&](std::size_t pos) {
                    const std::vector<std::vector<std::string>> one = {parse_subset(text_of(pos))};
                    return count_genders(one, cfg.gender_of);
                };
                rec.genders_weighted = counts(sel.weighted_index);
                rec.genders_unweighted = counts(sel.unweighted_index);
                rec.genders_minbias = counts(sel.minbias_index);
            }
            if (lexicon) {
                const Gender g = *cfg.eval.expected_stereotype_gender;
                st_weighted.add(classify_stereotype(text_of(sel.weighted_index), g, *lexicon));
                st_unweighted.add(classify_stereotype(text_of(sel.unweighted_index), g, *lexicon));
                st_minbias.add(classify_stereotype(text_of(sel.minbias_index), g, *lexicon));
            }
            series.add(std::move(rec));
        } catch (const Error& e) {
            if (exit_code_for(e) == kConfig) {
                diag.error(detail::one_line(e.what()));
                return kConfig;
            }
            failed.push_back({{"trial_id", i}, {"seed", plan.seed}, {"error", detail::one_line(e.what())}});
            diag.info("trial " + std::to_string(i) + " failed: " + detail::one_line(e.what()));
        }
    }

    if (series.records.empty()) {
        diag.error("all " + std::to_string(trials) + " trials failed");
        return kTrialFailures;
    }
    nlohmann::json extra;
    extra["base_seed"] = base_seed;
    extra["requested_trials"] = trials;
    extra["failed_trials"] = failed;
    extra["bias_mode"] = std::string(to_string(cfg.bias_mode));
    if (lexicon) {
        auto j = [](const StereotypeCounts& c) {
            return nlohmann::json{{"pro", c.pro}, {"anti", c.anti}, {"neutral", c.neutral}, {"no_match", c.no_match}};
        };
        extra["stereotype"] = {{"weighted", j(st_weighted)}, {"unweighted", j(st_unweighted)}, {"minbias", j(st_minbias)}};
    }
    try {
        const auto summary = export_distributions(series, series_path, extra);
        diag.info("series written to " + series_path.string() + ", summary to " + summary.string());
    } catch (const Error& e) {
        diag.error(detail::one_line(e.what()));
        return kInternal;
    }
    out << series_path.string() << '\n';
    if (failed.size() * 10 > trials) {
        diag.error(std::to_string(failed.size()) + " of " + std::to_string(trials) + " trials failed");
        return kTrialFailures;
    }
    return kOk;
}

/// Mean pairwise Jaccard of answers with and without per-query shuffling.
inline int cmd_order_sensitivity(const Options& opt, std::ostream& out, std::ostream& err) {
    detail::Diagnostics diag(err, opt.quiet);
    RunConfig cfg;
    Providers providers;
    try {
        cfg = detail::effective_config(opt);
        providers = detail::providers_or_config_error(cfg);
    } catch (const Error& e) {
        diag.error(detail::one_line(e.what()));
        return kConfig;
    }
    const std::size_t trials = opt.trials ? *opt.trials : (cfg.eval.trials ? cfg.eval.trials : 10);
    try {
        const auto r = order_sensitivity(cfg.task, *providers.generation, trials, cfg.plan.seed, cfg.plan.parallelism);
        char buf[128];
        std::snprintf(buf, sizeof buf, "unshuffled_mean_jaccard %.6f\nshuffled_mean_jaccard %.6f\n",
                      r.mean_jaccard_unshuffled, r.mean_jaccard_shuffled);
        out << buf;
        if (r.empty_pairs) diag.info(std::to_string(r.empty_pairs) + " answer pairs were both empty");
        return kOk;
    } catch (const Error& e) {
        diag.error(detail::one_line(e.what()));
        const int code = exit_code_for(e);
        return code == kInternal ? kConfig : code;
    }
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Reliable, equity-aware aggregation of sampled model outputs", "requal"};
    app.require_subcommand(1);
    app.fallthrough();
    Options opt;
    app.add_option("--config", opt.config, "Run configuration (JSON)");
    app.add_option("--seed", opt.seed, "Base random seed");
    app.add_option("--out", opt.out, "Output path (report for run, series CSV for eval)");
    app.add_option("--samples", opt.samples, "Fixed-budget plan with cost 1 and this budget");
    app.add_option("--provider", opt.provider, "Endpoint URL or simulated:PATH for both providers");
    app.add_option("--parallelism", opt.parallelism, "Queries in flight at once");
    app.add_flag("--quiet", opt.quiet, "Suppress informational messages");

    auto* run = app.add_subcommand("run", "Sample, score and select one output");
    auto* groups = app.add_subcommand("groups", "Demographic group vectors");
    groups->require_subcommand(1);
    auto* estimate = groups->add_subcommand("estimate", "Estimate and cache group vectors");
    estimate->add_option("--groups", opt.groups, "Group definition file");
    estimate->add_option("--cache", opt.cache, "Cache file to create or reuse");
    auto* eval = app.add_subcommand("eval", "Run a seeded evaluation campaign");
    eval->add_option("--trials", opt.trials, "Number of trials");
    auto* order = app.add_subcommand("order-sensitivity", "Compare answers with and without shuffling");
    order->add_option("--trials", opt.trials, "Queries per condition");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kConfig;
    }
    if (run->parsed()) return cmd_run(opt, out, err);
    if (estimate->parsed()) return cmd_groups_estimate(opt, out, err);
    if (eval->parsed()) return cmd_eval(opt, out, err);
    if (order->parsed()) return cmd_order_sensitivity(opt, out, err);
    return kConfig;
}

}  // namespace requal::cli
