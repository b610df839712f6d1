#pragma once

// Repeated sampling of a black-box model: prompt rendering with per-query
// shuffling, generation-parameter randomization, fixed-budget and
// fixed-error sampling plans, and output validation.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <future>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "requal/error.hpp"
#include "requal/provider.hpp"
#include "requal/random.hpp"
#include "requal/text.hpp"
#include "requal/vectorspace.hpp"

namespace requal {

// ---------------------------------------------------------------------------
// Task description

enum class TaskKind { subset_selection, masked_prediction, chat_completion, freeform };
enum class ValidatorKind { none, non_empty, subset_of_pool, masked_token_present };

inline TaskKind parse_task_kind(std::string_view s) {
    if (s == "subset_selection") return TaskKind::subset_selection;
    if (s == "masked_prediction") return TaskKind::masked_prediction;
    if (s == "chat_completion") return TaskKind::chat_completion;
    if (s == "freeform") return TaskKind::freeform;
    throw Error(ErrorKind::ConfigError, "unknown task_kind '" + std::string(s) + "'");
}

inline std::string_view to_string(TaskKind k) {
    switch (k) {
        case TaskKind::subset_selection: return "subset_selection";
        case TaskKind::masked_prediction: return "masked_prediction";
        case TaskKind::chat_completion: return "chat_completion";
        case TaskKind::freeform: return "freeform";
    }
    return "freeform";
}

inline ValidatorKind parse_validator(std::string_view s) {
    if (s.empty() || s == "none") return ValidatorKind::none;
    if (s == "non_empty") return ValidatorKind::non_empty;
    if (s == "subset_of_pool") return ValidatorKind::subset_of_pool;
    if (s == "masked_token_present") return ValidatorKind::masked_token_present;
    throw Error(ErrorKind::ConfigError, "unknown validator '" + std::string(s) + "'");
}

inline std::string_view to_string(ValidatorKind v) {
    switch (v) {
        case ValidatorKind::none: return "none";
        case ValidatorKind::non_empty: return "non_empty";
        case ValidatorKind::subset_of_pool: return "subset_of_pool";
        case ValidatorKind::masked_token_present: return "masked_token_present";
    }
    return "none";
}

inline constexpr std::string_view kItemsPlaceholder = "{items}";
inline constexpr std::string_view kMaskToken = "<masked>";

struct TaskSpec {
    std::string prompt_template;
    std::vector<std::string> items;  // symmetric input pool, shuffled per query
    ValidatorKind validator = ValidatorKind::none;
    TaskKind kind = TaskKind::freeform;
    bool shuffle = true;

    [[nodiscard]] bool has_placeholder() const {
        return prompt_template.find(kItemsPlaceholder) != std::string::npos;
    }

    void validate() const {
        if (has_placeholder() && items.empty()) {
            throw Error(ErrorKind::InvalidTask, "template uses {items} but the item list is empty");
        }
        if (validator == ValidatorKind::subset_of_pool &&
            (kind != TaskKind::subset_selection || items.empty())) {
            throw Error(ErrorKind::InvalidTask, "subset_of_pool needs a subset_selection task with items");
        }
        if (validator == ValidatorKind::masked_token_present && kind != TaskKind::masked_prediction) {
            throw Error(ErrorKind::InvalidTask, "masked_token_present needs a masked_prediction task");
        }
    }
};

/// Substitutes the item list, one item per line, for {items}.
inline std::string render_prompt(const TaskSpec& task, std::span<const std::string> order) {
    std::string out = task.prompt_template;
    const auto pos = out.find(kItemsPlaceholder);
    if (pos == std::string::npos) return out;
    std::string joined;
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (i) joined += '\n';
        joined += order[i];
    }
    out.replace(pos, kItemsPlaceholder.size(), joined);
    return out;
}

/// Splits a subset answer on commas, semicolons and newlines; strips list
/// bullets ("-", "*") and enumerators ("1.", "2)").
inline std::vector<std::string> parse_subset(std::string_view text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    auto emit = [&](std::string_view piece) {
        piece = detail::trim(piece);
        if (!piece.empty() && (piece.front() == '-' || piece.front() == '*')) piece = detail::trim(piece.substr(1));
        std::size_t digits = 0;
        while (digits < piece.size() && std::isdigit(static_cast<unsigned char>(piece[digits]))) ++digits;
        if (digits > 0 && digits < piece.size() && (piece[digits] == '.' || piece[digits] == ')')) {
            piece = detail::trim(piece.substr(digits + 1));
        }
        if (!piece.empty()) out.emplace_back(piece);
    };
    for (std::size_t i = 0; i <= text.size(); ++i) {
        if (i == text.size() || text[i] == ',' || text[i] == ';' || text[i] == '\n') {
            emit(text.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

struct Validation {
    bool valid = true;
    std::string reason;
};

inline Validation validate_output(const TaskSpec& task, std::string_view text) {
    switch (task.validator) {
        case ValidatorKind::none:
            return {};
        case ValidatorKind::non_empty:
            if (detail::trim(text).empty()) return {false, "empty output"};
            return {};
        case ValidatorKind::masked_token_present: {
            const auto t = detail::trim(text);
            if (t.empty()) return {false, "no prediction for the masked token"};
            if (t.find(kMaskToken) != std::string_view::npos) return {false, "mask token left unfilled"};
            return {};
        }
        case ValidatorKind::subset_of_pool: {
            const std::unordered_set<std::string> pool(task.items.begin(), task.items.end());
            const auto picked = parse_subset(text);
            if (picked.empty()) return {false, "empty selection"};
            for (const auto& p : picked) {
                if (!pool.contains(p)) return {false, "'" + p + "' is not in the candidate pool"};
            }
            return {};
        }
    }
    return {};
}

// ---------------------------------------------------------------------------
// Plans and statistics

enum class PlanMode { fixed_budget, fixed_error };
enum class ErrorReduction { l2, max_dimension };

struct SamplingPlan {
    PlanMode mode = PlanMode::fixed_budget;
    double budget = 5.0;
    double cost = 1.0;
    double alpha = 0.95;  // confidence level
    double target_error = 0.1;
    std::size_t warmup = 5;
    std::size_t max_samples = 100;
    std::uint64_t seed = 0;
    std::size_t parallelism = 1;
    ErrorReduction reduction = ErrorReduction::l2;
    bool strict = false;           // fail on the first invalid output
    std::size_t retry_factor = 3;  // invalid outputs tolerated per requested sample

    void validate() const;
};

/// floor(B / c).
inline std::size_t plan_sample_count(const SamplingPlan& plan) {
    if (!(plan.cost > 0.0) || !std::isfinite(plan.cost) || !std::isfinite(plan.budget)) {
        throw Error(ErrorKind::InvalidPlan, "per-query cost must be positive and finite");
    }
    if (plan.budget < plan.cost) {
        throw Error(ErrorKind::BudgetBelowSingleQuery, "budget " + std::to_string(plan.budget) +
                                                           " is below the cost of one query " +
                                                           std::to_string(plan.cost));
    }
    return static_cast<std::size_t>(std::floor(plan.budget / plan.cost));
}

inline void SamplingPlan::validate() const {
    if (parallelism == 0) throw Error(ErrorKind::InvalidPlan, "parallelism must be positive");
    if (mode == PlanMode::fixed_budget) {
        (void)plan_sample_count(*this);
        return;
    }
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorKind::InvalidPlan, "alpha must lie in (0,1)");
    if (!(target_error > 0.0)) throw Error(ErrorKind::InvalidPlan, "target_error must be positive");
    if (warmup < 2) throw Error(ErrorKind::InvalidPlan, "warmup must be at least 2");
    if (warmup > max_samples) throw Error(ErrorKind::InvalidPlan, "warmup exceeds max_samples");
}

/// Standard normal inverse CDF. Acklam's rational approximation followed by
/// one Halley step against erfc; absolute error well below 1e-9.
inline double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw Error(ErrorKind::OutOfDomain, "quantile probability must lie in (0,1)");
    }
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                   1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                   6.680131188771972e+01,  -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                   -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                   3.754408661907416e+00};
    constexpr double p_low = 0.02425;
    double x;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log1p(-p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
    const double u = e * std::sqrt(2.0 * 3.14159265358979323846) * std::exp(x * x / 2.0);
    return x - u / (1.0 + x * u / 2.0);
}

/// Z((1+alpha)/2) * ||sigma|| / sqrt(m), with ||.|| the L2 norm or the
/// largest coordinate.
inline double confidence_error(const EmbeddingVector& sigma, std::size_t m, double alpha,
                               ErrorReduction reduction = ErrorReduction::l2) {
    if (m < 2) throw Error(ErrorKind::InsufficientSamples, "confidence error needs at least 2 samples");
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorKind::OutOfDomain, "alpha must lie in (0,1)");
    const double z = normal_quantile(0.5 + alpha / 2.0);
    double spread = sigma.norm();
    if (reduction == ErrorReduction::max_dimension) {
        spread = 0.0;
        for (double s : sigma.values()) spread = std::max(spread, std::abs(s));
    }
    return z * spread / std::sqrt(static_cast<double>(m));
}

template <typename T>
std::vector<T> shuffle_items(std::vector<T> items, Rng& rng) {
    rng.shuffle(items);
    return items;
}

/// Temperature ~ U[0.5, 1]; frequency and presence penalties ~ U[0.5, 2],
/// drawn in that order.
inline GenerationParams draw_generation_params(Rng& rng) {
    GenerationParams p;
    p.temperature = rng.uniform(0.5, 1.0);
    p.frequency_penalty = rng.uniform(0.5, 2.0);
    p.presence_penalty = rng.uniform(0.5, 2.0);
    return p;
}

/// Product of token probabilities. The binary exponent is tracked separately
/// so long sequences neither underflow nor lose relative precision.
inline double sequence_probability(std::span<const double> token_probs) {
    double mantissa = 1.0;
    long exponent = 0;
    for (double p : token_probs) {
        if (!(p > 0.0 && p <= 1.0)) {
            throw Error(ErrorKind::InvalidTokenProbability, "token probability " + std::to_string(p) +
                                                                " outside (0,1]");
        }
        int k = 0;
        mantissa = std::frexp(mantissa * p, &k);
        exponent += k;
    }
    if (exponent < std::numeric_limits<double>::min_exponent - 60) return 0.0;
    return std::ldexp(mantissa, static_cast<int>(exponent));
}

struct OutputSample {
    std::size_t index = 0;  // issue order
    std::string text;
    std::optional<EmbeddingVector> embedding;  // present for valid samples
    GenerationParams params;
    std::vector<std::string> permutation;
    std::optional<std::vector<double>> token_probs;
    bool valid = true;
    std::string invalid_reason;

    [[nodiscard]] std::optional<double> probability() const {
        if (!token_probs) return std::nullopt;
        return sequence_probability(*token_probs);
    }
};

struct SampleStats {
    PlanMode mode = PlanMode::fixed_budget;
    std::size_t m = 0;  // valid samples kept
    std::optional<EmbeddingVector> sigma;
    std::optional<double> confidence_error;
    double alpha = 0.95;
    std::optional<bool> error_target_met;  // fixed-error plans only
    std::size_t issued = 0;
    std::size_t invalid = 0;
    std::size_t surplus_discarded = 0;  // issued in the stopping batch after the target was met
};

struct SampleCollection {
    std::vector<OutputSample> samples;  // issue order, invalid ones included
    SampleStats stats;

    [[nodiscard]] std::vector<OutputSample> valid_samples() const {
        std::vector<OutputSample> out;
        for (const auto& s : samples) {
            if (s.valid) out.push_back(s);
        }
        return out;
    }
};

/// One query: fresh shuffle and parameter draws from the query's own stream.
inline OutputSample issue_query(const TaskSpec& task, std::uint64_t seed, std::size_t index,
                                GenerationProvider& llm) {
    Rng stream = Rng::stream(seed, index);
    OutputSample s;
    s.index = index;
    s.permutation = task.items;
    if (task.shuffle) stream.shuffle(s.permutation);
    s.params = draw_generation_params(stream);
    auto gen = llm.generate(render_prompt(task, s.permutation), s.params, stream);
    s.text = std::move(gen.text);
    if (gen.token_probs) {
        for (double p : *gen.token_probs) {
            if (!(p > 0.0 && p <= 1.0)) {
                throw Error(ErrorKind::InvalidTokenProbability, "provider returned a probability outside (0,1]");
            }
        }
    }
    s.token_probs = std::move(gen.token_probs);
    const auto v = validate_output(task, s.text);
    s.valid = v.valid;
    s.invalid_reason = v.reason;
    return s;
}

namespace detail {

/// Issues queries [first, first+count) with up to `count` in flight.
inline std::vector<OutputSample> issue_batch(const TaskSpec& task, std::uint64_t seed, std::size_t first,
                                             std::size_t count, GenerationProvider& llm) {
    std::vector<OutputSample> out;
    out.reserve(count);
    if (count == 1) {
        out.push_back(issue_query(task, seed, first, llm));
        return out;
    }
    std::vector<std::future<OutputSample>> futs;
    futs.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        futs.push_back(std::async(std::launch::async, [&task, seed, idx = first + i, &llm] {
            return issue_query(task, seed, idx, llm);
        }));
    }
    std::exception_ptr first_error;
    for (auto& f : futs) {
        try {
            out.push_back(f.get());
        } catch (...) {
            if (!first_error) first_error = std::current_exception();
        }
    }
    if (first_error) std::rethrow_exception(first_error);
    return out;
}

inline void embed_valid(std::vector<OutputSample>& batch, EmbeddingProvider& embedder) {
    std::vector<std::string> texts;
    for (const auto& s : batch) {
        if (s.valid) texts.push_back(s.text);
    }
    if (texts.empty()) return;
    auto vs = embedder.embed(texts);
    if (vs.size() != texts.size()) {
        throw Error(ErrorKind::MalformedResponse, "embedder returned wrong number of vectors");
    }
    std::size_t k = 0;
    for (auto& s : batch) {
        if (!s.valid) continue;
        if (vs[k].norm() == 0.0) throw Error(ErrorKind::ZeroNormVector, "embedder returned a zero vector");
        s.embedding = std::move(vs[k++]);
    }
}

}  // namespace detail

/// Draws samples according to the plan.
///
/// Queries are issued in batches of `parallelism`. The result depends only on
/// the seed and the query indices: fixed-budget batches never exceed the
/// number of samples still needed, and the fixed-error rule is evaluated
/// sample by sample in index order within each completed batch, discarding
/// whatever the batch produced after the stopping point.
inline SampleCollection collect_samples(const TaskSpec& task, const SamplingPlan& plan, GenerationProvider& llm,
                                        EmbeddingProvider& embedder) {
    task.validate();
    plan.validate();

    SampleCollection result;
    auto& stats = result.stats;
    stats.mode = plan.mode;
    stats.alpha = plan.alpha;

    const bool budget_mode = plan.mode == PlanMode::fixed_budget;
    const std::size_t target = budget_mode ? plan_sample_count(plan) : plan.max_samples;
    const std::size_t max_invalid = plan.retry_factor * target;
    std::vector<EmbeddingVector> kept;
    std::size_t next_index = 0;
    bool stop = false;

    while (!stop && kept.size() < target) {
        const std::size_t count = std::min(plan.parallelism, target - kept.size());
        auto batch = detail::issue_batch(task, plan.seed, next_index, count, llm);
        next_index += count;
        detail::embed_valid(batch, embedder);

        for (std::size_t i = 0; i < batch.size(); ++i) {
            auto& s = batch[i];
            if (stop) {
                ++stats.surplus_discarded;
                continue;
            }
            ++stats.issued;
            if (!s.valid) {
                ++stats.invalid;
                if (plan.strict) {
                    throw Error(ErrorKind::InvalidOutput, "query " + std::to_string(s.index) + ": " + s.invalid_reason);
                }
                if (stats.invalid > max_invalid) {
                    throw Error(ErrorKind::RetryExhausted, std::to_string(stats.invalid) +
                                                               " invalid outputs; last: " + s.invalid_reason);
                }
                result.samples.push_back(std::move(s));
                continue;
            }
            if (s.embedding->dim() != (kept.empty() ? s.embedding->dim() : kept.front().dim())) {
                throw Error(ErrorKind::DimensionMismatch, "embedding dimension changed during the run");
            }
            kept.push_back(*s.embedding);
            result.samples.push_back(std::move(s));
            if (!budget_mode && kept.size() >= plan.warmup) {
                const double e = confidence_error(per_dim_std(kept), kept.size(), plan.alpha, plan.reduction);
                if (e <= plan.target_error) stop = true;
            }
        }
    }

    stats.m = kept.size();
    if (kept.size() >= 2) {
        stats.sigma = per_dim_std(kept);
        stats.confidence_error = confidence_error(*stats.sigma, kept.size(), plan.alpha, plan.reduction);
    }
    if (!budget_mode) stats.error_target_met = stop;
    return result;
}

}  // namespace requal
