#pragma once

// Evaluation metrics and distribution exports: female-to-male ratio,
// stereotype classification, Jaccard order sensitivity, trial series.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "json.hpp"
#include "requal/csv.hpp"
#include "requal/error.hpp"
#include "requal/provider.hpp"
#include "requal/sampling.hpp"

namespace requal {

enum class Gender { female, male };

inline std::optional<Gender> parse_gender(std::string_view s) {
    std::string t;
    for (char c : detail::trim(s)) t += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (t == "f" || t == "female" || t == "woman" || t == "w") return Gender::female;
    if (t == "m" || t == "male" || t == "man") return Gender::male;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Set metrics

/// |a ∩ b| / |a ∪ b|; two empty sets give 1.0 and set `both_empty`.
template <typename T>
double jaccard(const std::set<T>& a, const std::set<T>& b, bool* both_empty = nullptr) {
    if (both_empty) *both_empty = a.empty() && b.empty();
    if (a.empty() && b.empty()) return 1.0;
    std::size_t inter = 0;
    for (const auto& x : a) inter += b.count(x);
    const std::size_t uni = a.size() + b.size() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

struct GenderCounts {
    std::size_t females = 0;
    std::size_t males = 0;

    /// +inf when there are females but no males; NaN when both are zero.
    [[nodiscard]] double ratio() const {
        if (males == 0) return females == 0 ? std::numeric_limits<double>::quiet_NaN()
                                            : std::numeric_limits<double>::infinity();
        return static_cast<double>(females) / static_cast<double>(males);
    }
};

inline GenderCounts count_genders(std::span<const std::vector<std::string>> selections,
                                  const std::unordered_map<std::string, Gender>& gender_of) {
    GenderCounts c;
    for (const auto& sel : selections) {
        for (const auto& name : sel) {
            const auto it = gender_of.find(name);
            if (it == gender_of.end()) {
                throw Error(ErrorKind::UnknownEntityGender, "no gender recorded for '" + name + "'");
            }
            (it->second == Gender::female ? c.females : c.males) += 1;
        }
    }
    return c;
}

/// Pooled female count over pooled male count across all selections.
inline double female_to_male_ratio(std::span<const std::vector<std::string>> selections,
                                   const std::unordered_map<std::string, Gender>& gender_of) {
    const auto c = count_genders(selections, gender_of);
    if (c.males == 0) throw Error(ErrorKind::DivisionByZeroMales, "no male candidates selected");
    return c.ratio();
}

// ---------------------------------------------------------------------------
// Stereotype classification

struct GenderLexicon {
    std::vector<std::string> male_terms;
    std::vector<std::string> female_terms;
    std::vector<std::string> neutral_terms;

    void validate() const {
        if (male_terms.empty() || female_terms.empty()) {
            throw Error(ErrorKind::InvalidLexicon, "male and female term lists must be non-empty");
        }
        std::unordered_set<std::string> seen;
        for (const auto* list : {&male_terms, &female_terms, &neutral_terms}) {
            for (const auto& t : *list) {
                if (!seen.insert(lower(t)).second) {
                    throw Error(ErrorKind::InvalidLexicon, "term '" + t + "' appears in more than one list");
                }
            }
        }
    }

    static std::string lower(std::string_view s) {
        std::string out;
        for (char c : s) out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        return out;
    }
};

inline GenderLexicon parse_lexicon(const nlohmann::json& j) {
    GenderLexicon lex;
    try {
        lex.male_terms = j.at("male").get<std::vector<std::string>>();
        lex.female_terms = j.at("female").get<std::vector<std::string>>();
        lex.neutral_terms = j.value("neutral", std::vector<std::string>{});
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::InvalidLexicon, e.what());
    }
    lex.validate();
    return lex;
}

inline GenderLexicon load_lexicon(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoError, "cannot open lexicon " + path.string());
    try {
        return parse_lexicon(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::InvalidLexicon, path.string() + ": " + e.what());
    }
}

enum class StereotypeLabel { pro, anti, neutral };

inline std::string_view to_string(StereotypeLabel l) {
    switch (l) {
        case StereotypeLabel::pro: return "pro";
        case StereotypeLabel::anti: return "anti";
        case StereotypeLabel::neutral: return "neutral";
    }
    return "neutral";
}

struct StereotypeClassification {
    StereotypeLabel label = StereotypeLabel::neutral;
    std::optional<std::string> matched_term;  // nullopt: no lexicon hit
};

/// Finds the earliest whole-word lexicon hit (longest on ties), case
/// insensitive. A hit of the expected gender is pro, of the other gender
/// anti; neutral terms and misses are neutral.
inline StereotypeClassification classify_stereotype(std::string_view predicted, Gender expected,
                                                    const GenderLexicon& lexicon) {
    const std::string text = GenderLexicon::lower(predicted);
    struct Hit {
        std::size_t pos;
        std::size_t len;
        int list;  // 0 male, 1 female, 2 neutral
        std::string term;
    };
    std::optional<Hit> best;
    const std::vector<std::string>* lists[] = {&lexicon.male_terms, &lexicon.female_terms, &lexicon.neutral_terms};
    for (int li = 0; li < 3; ++li) {
        for (const auto& term : *lists[li]) {
            const std::string t = GenderLexicon::lower(term);
            const auto pos = detail::find_word(text, t);
            if (pos == std::string::npos) continue;
            if (!best || pos < best->pos || (pos == best->pos && t.size() > best->len)) {
                best = Hit{pos, t.size(), li, t};
            }
        }
    }
    if (!best) return {StereotypeLabel::neutral, std::nullopt};
    if (best->list == 2) return {StereotypeLabel::neutral, best->term};
    const Gender hit = best->list == 0 ? Gender::male : Gender::female;
    return {hit == expected ? StereotypeLabel::pro : StereotypeLabel::anti, best->term};
}

struct StereotypeCounts {
    std::size_t pro = 0;
    std::size_t anti = 0;
    std::size_t neutral = 0;
    std::size_t no_match = 0;  // subset of neutral

    void add(const StereotypeClassification& c) {
        switch (c.label) {
            case StereotypeLabel::pro: ++pro; break;
            case StereotypeLabel::anti: ++anti; break;
            case StereotypeLabel::neutral:
                ++neutral;
                if (!c.matched_term) ++no_match;
                break;
        }
    }
};

// ---------------------------------------------------------------------------
// Order sensitivity

struct OrderSensitivity {
    double mean_jaccard_shuffled = 0.0;
    double mean_jaccard_unshuffled = 0.0;
    std::size_t empty_pairs = 0;  // pairs where both answers were empty
};

inline double mean_pairwise_jaccard(const std::vector<std::set<std::string>>& answers, std::size_t* empty_pairs) {
    double total = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < answers.size(); ++i) {
        for (std::size_t j = i + 1; j < answers.size(); ++j) {
            bool both_empty = false;
            total += jaccard(answers[i], answers[j], &both_empty);
            if (both_empty && empty_pairs) ++*empty_pairs;
            ++pairs;
        }
    }
    return pairs ? total / static_cast<double>(pairs) : 1.0;
}

/// Runs `trials` queries in the given order and `trials` with per-query
/// shuffling; reports the mean pairwise Jaccard similarity of the answer
/// sets within each condition.
inline OrderSensitivity order_sensitivity(const TaskSpec& task, GenerationProvider& llm, std::size_t trials,
                                          std::uint64_t seed, std::size_t parallelism = 1) {
    if (task.kind != TaskKind::subset_selection) {
        throw Error(ErrorKind::InvalidTask, "order sensitivity needs a subset_selection task");
    }
    if (trials < 2) throw Error(ErrorKind::InvalidPlan, "order sensitivity needs at least 2 trials");
    if (parallelism == 0) parallelism = 1;
    task.validate();

    auto run = [&](bool shuffle, std::uint64_t run_seed) {
        TaskSpec t = task;
        t.shuffle = shuffle;
        std::vector<std::set<std::string>> answers;
        for (std::size_t first = 0; first < trials; first += parallelism) {
            const std::size_t count = std::min(parallelism, trials - first);
            for (auto& s : detail::issue_batch(t, run_seed, first, count, llm)) {
                const auto picked = parse_subset(s.text);
                answers.emplace_back(picked.begin(), picked.end());
            }
        }
        return answers;
    };
    OrderSensitivity r;
    r.mean_jaccard_unshuffled = mean_pairwise_jaccard(run(false, seed), &r.empty_pairs);
    r.mean_jaccard_shuffled = mean_pairwise_jaccard(run(true, splitmix64(seed) ^ 0x5a5a5a5aULL), &r.empty_pairs);
    return r;
}

// ---------------------------------------------------------------------------
// Trial series

struct TrialRecord {
    std::size_t trial_id = 0;
    std::uint64_t seed = 0;
    std::size_t m = 0;
    double bias_weighted = 0.0;
    double bias_unweighted = 0.0;
    double bias_minbias = 0.0;
    double reliability_weighted = 0.0;
    double reliability_unweighted = 0.0;
    double reliability_minbias = 0.0;
    // Gender counts of the selected subsets, subset-selection tasks only.
    std::optional<GenderCounts> genders_weighted;
    std::optional<GenderCounts> genders_unweighted;
    std::optional<GenderCounts> genders_minbias;

    friend bool operator==(const TrialRecord& a, const TrialRecord& b) {
        auto eq = [](const std::optional<GenderCounts>& x, const std::optional<GenderCounts>& y) {
            if (x.has_value() != y.has_value()) return false;
            return !x || (x->females == y->females && x->males == y->males);
        };
        return a.trial_id == b.trial_id && a.seed == b.seed && a.m == b.m && a.bias_weighted == b.bias_weighted &&
               a.bias_unweighted == b.bias_unweighted && a.bias_minbias == b.bias_minbias &&
               a.reliability_weighted == b.reliability_weighted &&
               a.reliability_unweighted == b.reliability_unweighted &&
               a.reliability_minbias == b.reliability_minbias && eq(a.genders_weighted, b.genders_weighted) &&
               eq(a.genders_unweighted, b.genders_unweighted) && eq(a.genders_minbias, b.genders_minbias);
    }
};

struct TrialSeries {
    std::vector<TrialRecord> records;

    void add(TrialRecord r) {
        for (const auto& x : records) {
            if (x.trial_id == r.trial_id) {
                throw Error(ErrorKind::ConfigError, "duplicate trial id " + std::to_string(r.trial_id));
            }
        }
        records.push_back(std::move(r));
    }
};

inline const std::vector<std::string>& trial_csv_header() {
    static const std::vector<std::string> h = {
        "trial_id",           "seed",
        "m",                  "bias_weighted",
        "bias_unweighted",    "bias_minbias",
        "reliability_weighted", "reliability_unweighted",
        "reliability_minbias", "females_weighted",
        "males_weighted",     "females_unweighted",
        "males_unweighted",   "females_minbias",
        "males_minbias"};
    return h;
}

namespace detail {

inline std::string format_double(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline double parse_double(const std::string& s) {
    if (s.empty()) throw Error(ErrorKind::ParseError, "empty numeric field");
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size()) throw Error(ErrorKind::ParseError, "bad number '" + s + "'");
    return v;
}

inline std::uint64_t parse_u64(const std::string& s) {
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw Error(ErrorKind::ParseError, "bad integer '" + s + "'");
    return v;
}

/// Linear-interpolation quantile of sorted data.
inline double quantile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.size() == 1) return sorted.front();
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace detail

inline void write_trial_csv(std::ostream& os, const TrialSeries& series) {
    csv::write_row(os, trial_csv_header());
    auto counts = [](const std::optional<GenderCounts>& c, csv::Row& row) {
        row.push_back(c ? std::to_string(c->females) : "");
        row.push_back(c ? std::to_string(c->males) : "");
    };
    for (const auto& r : series.records) {
        csv::Row row = {std::to_string(r.trial_id),
                        std::to_string(r.seed),
                        std::to_string(r.m),
                        detail::format_double(r.bias_weighted),
                        detail::format_double(r.bias_unweighted),
                        detail::format_double(r.bias_minbias),
                        detail::format_double(r.reliability_weighted),
                        detail::format_double(r.reliability_unweighted),
                        detail::format_double(r.reliability_minbias)};
        counts(r.genders_weighted, row);
        counts(r.genders_unweighted, row);
        counts(r.genders_minbias, row);
        csv::write_row(os, row);
    }
}

inline TrialSeries read_trial_csv(std::istream& is) {
    const auto rows = csv::read_all(is);
    if (rows.empty()) throw Error(ErrorKind::ParseError, "empty trial CSV");
    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < rows[0].size(); ++i) col[rows[0][i]] = i;
    for (const auto& name : trial_csv_header()) {
        if (!col.contains(name)) throw Error(ErrorKind::ParseError, "trial CSV lacks column " + name);
    }
    TrialSeries series;
    for (std::size_t ri = 1; ri < rows.size(); ++ri) {
        const auto& row = rows[ri];
        if (row.size() == 1 && row[0].empty()) continue;
        if (row.size() < rows[0].size()) throw Error(ErrorKind::ParseError, "short CSV row " + std::to_string(ri));
        auto f = [&](const char* name) -> const std::string& { return row[col[name]]; };
        auto counts = [&](const char* fem, const char* mal) -> std::optional<GenderCounts> {
            if (f(fem).empty() && f(mal).empty()) return std::nullopt;
            return GenderCounts{detail::parse_u64(f(fem)), detail::parse_u64(f(mal))};
        };
        TrialRecord r;
        r.trial_id = detail::parse_u64(f("trial_id"));
        r.seed = detail::parse_u64(f("seed"));
        r.m = detail::parse_u64(f("m"));
        r.bias_weighted = detail::parse_double(f("bias_weighted"));
        r.bias_unweighted = detail::parse_double(f("bias_unweighted"));
        r.bias_minbias = detail::parse_double(f("bias_minbias"));
        r.reliability_weighted = detail::parse_double(f("reliability_weighted"));
        r.reliability_unweighted = detail::parse_double(f("reliability_unweighted"));
        r.reliability_minbias = detail::parse_double(f("reliability_minbias"));
        r.genders_weighted = counts("females_weighted", "males_weighted");
        r.genders_unweighted = counts("females_unweighted", "males_unweighted");
        r.genders_minbias = counts("females_minbias", "males_minbias");
        series.add(std::move(r));
    }
    return series;
}

struct MetricSummary {
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation; 0 for a single value
    std::vector<double> deciles;  // 10th .. 90th percentiles
};

inline MetricSummary summarize(std::span<const double> values) {
    if (values.empty()) throw Error(ErrorKind::EmptySampleSet, "no values to summarize");
    MetricSummary s;
    CompensatedSum sum;
    for (double v : values) sum.add(v);
    const double n = static_cast<double>(values.size());
    s.mean = sum.value() / n;
    if (values.size() > 1) {
        CompensatedSum sq;
        for (double v : values) sq.add((v - s.mean) * (v - s.mean));
        s.std = std::sqrt(sq.value() / (n - 1.0));
    }
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    for (int k = 1; k <= 9; ++k) s.deciles.push_back(detail::quantile_sorted(sorted, k / 10.0));
    return s;
}

/// One-sided Mann-Whitney U test of "x tends to be smaller than y", normal
/// approximation with tie and continuity corrections.
struct MannWhitney {
    double u = 0.0;  // pairs with x < y, ties counted one half
    double z = 0.0;
    double p_value = 1.0;
};

inline MannWhitney mann_whitney_less(std::span<const double> x, std::span<const double> y) {
    if (x.empty() || y.empty()) throw Error(ErrorKind::EmptySampleSet, "Mann-Whitney needs two samples");
    struct Obs {
        double v;
        bool from_x;
    };
    std::vector<Obs> all;
    for (double v : x) all.push_back({v, true});
    for (double v : y) all.push_back({v, false});
    std::sort(all.begin(), all.end(), [](const Obs& a, const Obs& b) { return a.v < b.v; });
    const double n1 = static_cast<double>(x.size());
    const double n2 = static_cast<double>(y.size());
    const double n = n1 + n2;
    double rank_sum_y = 0.0;
    double tie_term = 0.0;
    for (std::size_t i = 0; i < all.size();) {
        std::size_t j = i;
        while (j < all.size() && all[j].v == all[i].v) ++j;
        const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        const double t = static_cast<double>(j - i);
        tie_term += t * t * t - t;
        for (std::size_t k = i; k < j; ++k) {
            if (!all[k].from_x) rank_sum_y += avg_rank;
        }
        i = j;
    }
    MannWhitney r;
    r.u = rank_sum_y - n2 * (n2 + 1.0) / 2.0;  // count of (x<y) pairs
    const double mu = n1 * n2 / 2.0;
    const double var = n1 * n2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if (var <= 0.0) {
        r.z = 0.0;
        r.p_value = r.u > mu ? 0.0 : 1.0;
        return r;
    }
    r.z = (r.u - mu - 0.5) / std::sqrt(var);
    r.p_value = 0.5 * std::erfc(r.z / std::sqrt(2.0));
    return r;
}

inline nlohmann::json summary_json(const TrialSeries& series) {
    if (series.records.empty()) throw Error(ErrorKind::EmptySampleSet, "empty trial series");
    nlohmann::ordered_json out;
    auto metric = [&](const char* name, auto getter) {
        std::vector<double> v;
        for (const auto& r : series.records) v.push_back(getter(r));
        const auto s = summarize(v);
        out["metrics"][name] = {{"mean", s.mean}, {"std", s.std}, {"deciles", s.deciles}};
    };
    out["trials"] = series.records.size();
    metric("m", [](const TrialRecord& r) { return static_cast<double>(r.m); });
    metric("bias_weighted", [](const TrialRecord& r) { return r.bias_weighted; });
    metric("bias_unweighted", [](const TrialRecord& r) { return r.bias_unweighted; });
    metric("bias_minbias", [](const TrialRecord& r) { return r.bias_minbias; });
    metric("reliability_weighted", [](const TrialRecord& r) { return r.reliability_weighted; });
    metric("reliability_unweighted", [](const TrialRecord& r) { return r.reliability_unweighted; });
    metric("reliability_minbias", [](const TrialRecord& r) { return r.reliability_minbias; });

    auto ratio = [&](const char* name, std::optional<GenderCounts> TrialRecord::*field) {
        GenderCounts pooled;
        std::vector<double> per_trial;
        bool any = false;
        for (const auto& r : series.records) {
            const auto& c = r.*field;
            if (!c) continue;
            any = true;
            pooled.females += c->females;
            pooled.males += c->males;
            if (c->males > 0) per_trial.push_back(c->ratio());
        }
        if (!any) return;
        nlohmann::ordered_json j;
        j["females"] = pooled.females;
        j["males"] = pooled.males;
        j["pooled"] = pooled.males > 0 ? nlohmann::ordered_json(pooled.ratio()) : nlohmann::ordered_json(nullptr);
        j["division_by_zero_males"] = pooled.males == 0;
        if (!per_trial.empty()) {
            CompensatedSum s;
            for (double v : per_trial) s.add(v);
            j["per_trial_mean"] = s.value() / static_cast<double>(per_trial.size());
        } else {
            j["per_trial_mean"] = nullptr;
        }
        j["trials_without_males"] = series.records.size() - per_trial.size();
        out["female_to_male_ratio"][name] = std::move(j);
    };
    ratio("weighted", &TrialRecord::genders_weighted);
    ratio("unweighted", &TrialRecord::genders_unweighted);
    ratio("minbias", &TrialRecord::genders_minbias);

    std::vector<double> bw, bu;
    for (const auto& r : series.records) {
        bw.push_back(r.bias_weighted);
        bu.push_back(r.bias_unweighted);
    }
    const auto mw = mann_whitney_less(bw, bu);
    out["mann_whitney_bias_weighted_lt_unweighted"] = {{"u", mw.u}, {"z", mw.z}, {"p_value", mw.p_value}};
    return nlohmann::json(out);
}

/// Writes `<path>` (CSV, one row per trial) and `<path stem>.summary.json`;
/// top-level keys of `extra` are merged into the summary. Returns the
/// summary path.
inline std::filesystem::path export_distributions(const TrialSeries& series, const std::filesystem::path& path,
                                                  const nlohmann::json& extra = nlohmann::json::object()) {
    if (series.records.empty()) throw Error(ErrorKind::EmptySampleSet, "empty trial series");
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
        write_trial_csv(out, series);
        if (!out) throw Error(ErrorKind::IoError, "write failed for " + path.string());
    }
    auto summary_path = path;
    summary_path.replace_extension(".summary.json");
    std::ofstream out(summary_path);
    if (!out) throw Error(ErrorKind::IoError, "cannot write " + summary_path.string());
    auto summary = summary_json(series);
    for (const auto& [k, v] : extra.items()) summary[k] = v;
    out << summary.dump(2) << '\n';
    if (!out) throw Error(ErrorKind::IoError, "write failed for " + summary_path.string());
    return summary_path;
}

// ---------------------------------------------------------------------------
// Entity files

struct EntityTable {
    std::vector<std::string> names;
    std::unordered_map<std::string, Gender> gender_of;
};

/// One entity per line, or a CSV (header row) when `name_column` is given.
inline EntityTable load_entities(const std::filesystem::path& path, const std::optional<std::string>& name_column,
                                 const std::optional<std::string>& gender_column = std::nullopt) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::IoError, "cannot open items file " + path.string());
    EntityTable t;
    if (!name_column) {
        std::string line;
        while (std::getline(in, line)) {
            const auto s = detail::trim(line);
            if (!s.empty()) t.names.emplace_back(s);
        }
        if (!t.names.empty() && t.names.front().rfind("\xEF\xBB\xBF", 0) == 0) t.names.front().erase(0, 3);
        return t;
    }
    const auto rows = csv::read_all(in);
    if (rows.empty()) throw Error(ErrorKind::ParseError, "empty CSV " + path.string());
    auto find_col = [&](const std::string& name) {
        for (std::size_t i = 0; i < rows[0].size(); ++i) {
            if (detail::trim(rows[0][i]) == name) return i;
        }
        throw Error(ErrorKind::ConfigError, "column '" + name + "' not found in " + path.string());
    };
    const std::size_t name_idx = find_col(*name_column);
    const std::optional<std::size_t> gender_idx =
        gender_column ? std::optional<std::size_t>(find_col(*gender_column)) : std::nullopt;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() <= name_idx) continue;
        const std::string name(detail::trim(row[name_idx]));
        if (name.empty()) continue;
        t.names.push_back(name);
        if (gender_idx && row.size() > *gender_idx) {
            if (auto g = parse_gender(row[*gender_idx])) t.gender_of[name] = *g;
        }
    }
    return t;
}

}  // namespace requal
