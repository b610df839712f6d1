#pragma once

// Run reports: JSON emission and a forward-compatible reader.

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "requal/equity.hpp"
#include "requal/error.hpp"
#include "requal/sampling.hpp"
#include "requal/selection.hpp"

namespace requal {

inline constexpr int kReportSchemaVersion = 1;

namespace detail {

inline nlohmann::ordered_json to_json(const EmbeddingVector& v) {
    return std::vector<double>(v.values().begin(), v.values().end());
}

inline nlohmann::ordered_json unit_json(const EmbeddingVector& v) {
    if (v.norm() < kDegenerateNorm) return nullptr;
    return to_json(v.normalized());
}

}  // namespace detail

struct RunTimings {
    double sampling_ms = 0.0;
    double groups_ms = 0.0;
    double selection_ms = 0.0;
};

/// Builds the report document. `samples` is the full collection, invalid
/// samples included; `sel` refers to the valid subset.
inline nlohmann::ordered_json build_report(const nlohmann::ordered_json& config_echo, const SampleCollection& collection,
                                           const SelectionResult& sel, const GroupSet& groups,
                                           const std::optional<RunTimings>& timings = std::nullopt) {
    nlohmann::ordered_json r;
    r["schema_version"] = kReportSchemaVersion;
    r["config"] = config_echo;

    // Map issue index -> position in the evaluated list.
    std::vector<std::optional<std::size_t>> pos_of(collection.samples.empty() ? 0 : collection.samples.back().index + 1);
    for (std::size_t p = 0; p < sel.sample_ids.size(); ++p) {
        if (sel.sample_ids[p] >= pos_of.size()) pos_of.resize(sel.sample_ids[p] + 1);
        pos_of[sel.sample_ids[p]] = p;
    }
    const auto& br = sel.bias_report;
    auto text_at = [&](std::size_t pos) -> const std::string& {
        const std::size_t id = sel.sample_ids[pos];
        for (const auto& s : collection.samples) {
            if (s.index == id) return s.text;
        }
        throw Error(ErrorKind::EmptySampleSet, "selected sample missing from collection");
    };
    auto pick = [&](std::size_t pos, double reliability, double beta) {
        nlohmann::ordered_json j;
        j["sample"] = sel.sample_ids[pos];
        j["text"] = text_at(pos);
        j["reliability"] = reliability;
        j["bias"] = beta;
        if (br.signed_beta) j["signed_bias"] = (*br.signed_beta)[pos];
        j["harmful_bias"] = br.harmful_beta[pos];
        j["weight"] = br.weights[pos];
        return j;
    };
    auto& s = r["selection"];
    s["weighted"] = pick(sel.weighted_index, sel.reliability_weighted, sel.bias_weighted);
    s["unweighted"] = pick(sel.unweighted_index, sel.reliability_unweighted, sel.bias_unweighted);
    s["minbias"] = pick(sel.minbias_index, sel.reliability_minbias, sel.bias_minbias);
    s["centroid_plain"] = detail::to_json(sel.centroid_plain);
    s["centroid_plain_unit"] = detail::unit_json(sel.centroid_plain);
    s["centroid_weighted"] = detail::to_json(sel.centroid_weighted);
    s["centroid_weighted_unit"] = detail::unit_json(sel.centroid_weighted);

    auto& b = r["bias"];
    b["mode"] = std::string(to_string(br.mode));
    b["inverted"] = br.inverted;
    b["groups"] = nlohmann::ordered_json::array();
    for (const auto& g : groups.groups()) b["groups"].push_back(g.name);
    if (groups.majority()) b["majority"] = groups[*groups.majority()].name;
    if (groups.minority()) b["minority"] = groups[*groups.minority()].name;
    b["inevitable_bias_estimated"] = br.beta_min;
    b["beta_max"] = br.beta_max;

    const auto& st = collection.stats;
    auto& js = r["stats"];
    js["mode"] = st.mode == PlanMode::fixed_budget ? "fixed_budget" : "fixed_error";
    js["m"] = st.m;
    js["issued"] = st.issued;
    js["invalid"] = st.invalid;
    if (st.surplus_discarded) js["surplus_discarded"] = st.surplus_discarded;
    js["alpha"] = st.alpha;
    js["sigma"] = st.sigma ? detail::to_json(*st.sigma) : nlohmann::ordered_json(nullptr);
    js["confidence_error"] = st.confidence_error ? nlohmann::ordered_json(*st.confidence_error) : nullptr;
    if (st.error_target_met) js["error_target_met"] = *st.error_target_met;

    auto& samples = r["samples"];
    samples = nlohmann::ordered_json::array();
    for (const auto& smp : collection.samples) {
        nlohmann::ordered_json j;
        j["index"] = smp.index;
        j["text"] = smp.text;
        j["valid"] = smp.valid;
        if (!smp.valid) j["invalid_reason"] = smp.invalid_reason;
        j["permutation"] = smp.permutation;
        j["params"] = {{"temperature", smp.params.temperature},
                       {"frequency_penalty", smp.params.frequency_penalty},
                       {"presence_penalty", smp.params.presence_penalty}};
        const auto prob = smp.probability();
        j["probability"] = prob ? nlohmann::ordered_json(*prob) : nullptr;
        if (smp.index < pos_of.size() && pos_of[smp.index]) {
            const std::size_t p = *pos_of[smp.index];
            j["beta"] = br.beta[p];
            if (br.signed_beta) j["signed_beta"] = (*br.signed_beta)[p];
            j["harmful_beta"] = br.harmful_beta[p];
            j["weight"] = br.weights[p];
            j["reliability"] = sel.reliabilities[p];
            j["group_similarities"] = br.group_similarities[p];
        }
        samples.push_back(std::move(j));
    }
    r["exclusions"] = {{"invalid", sel.excluded_invalid}};
    if (timings) {
        r["timings_ms"] = {{"sampling", timings->sampling_ms},
                           {"groups", timings->groups_ms},
                           {"selection", timings->selection_ms}};
    }
    return r;
}

/// The parts of a report most consumers need. Unknown fields are ignored.
struct ReportView {
    int schema_version = 0;
    std::uint64_t seed = 0;
    std::string weighted_text;
    std::string unweighted_text;
    std::string minbias_text;
    std::size_t weighted_sample = 0;
    std::size_t unweighted_sample = 0;
    std::size_t minbias_sample = 0;
    double reliability_weighted = 0.0;
    double reliability_unweighted = 0.0;
    double bias_weighted = 0.0;
    double bias_unweighted = 0.0;
    double bias_minbias = 0.0;
    std::size_t m = 0;
    std::size_t invalid = 0;
};

inline ReportView parse_report(const nlohmann::json& j) {
    try {
        ReportView v;
        v.schema_version = j.at("schema_version").get<int>();
        if (v.schema_version < 1) throw Error(ErrorKind::ParseError, "unsupported report schema");
        v.seed = j.at("config").at("plan").at("seed").get<std::uint64_t>();
        const auto& s = j.at("selection");
        v.weighted_text = s.at("weighted").at("text").get<std::string>();
        v.unweighted_text = s.at("unweighted").at("text").get<std::string>();
        v.minbias_text = s.at("minbias").at("text").get<std::string>();
        v.weighted_sample = s.at("weighted").at("sample").get<std::size_t>();
        v.unweighted_sample = s.at("unweighted").at("sample").get<std::size_t>();
        v.minbias_sample = s.at("minbias").at("sample").get<std::size_t>();
        v.reliability_weighted = s.at("weighted").at("reliability").get<double>();
        v.reliability_unweighted = s.at("unweighted").at("reliability").get<double>();
        v.bias_weighted = s.at("weighted").at("bias").get<double>();
        v.bias_unweighted = s.at("unweighted").at("bias").get<double>();
        v.bias_minbias = s.at("minbias").at("bias").get<double>();
        v.m = j.at("stats").at("m").get<std::size_t>();
        v.invalid = j.at("stats").at("invalid").get<std::size_t>();
        return v;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ParseError, std::string("report: ") + e.what());
    }
}

inline ReportView read_report(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoError, "cannot open report " + path.string());
    try {
        return parse_report(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::ParseError, path.string() + ": " + e.what());
    }
}

}  // namespace requal
