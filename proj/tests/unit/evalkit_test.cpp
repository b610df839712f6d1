#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "requal/config.hpp"
#include "requal/evalkit.hpp"
#include "requal/simulated.hpp"
#include "support/helpers.hpp"

using namespace requal;
using testing_support::kind_of;

namespace {

using Sel = std::vector<std::vector<std::string>>;

const std::unordered_map<std::string, Gender> kGenders = {
    {"F1", Gender::female}, {"F2", Gender::female}, {"F3", Gender::female},
    {"M1", Gender::male},   {"M2", Gender::male},   {"M3", Gender::male}};

GenderLexicon bundled_lexicon() { return load_lexicon(bundled_data_dir() / "lexicon" / "gender.json"); }

TrialRecord record(std::size_t id, double bw, double bu) {
    TrialRecord r;
    r.trial_id = id;
    r.seed = 1000 + id;
    r.m = 5;
    r.bias_weighted = bw;
    r.bias_unweighted = bu;
    r.bias_minbias = std::min(bw, bu) / 3.0;
    r.reliability_weighted = 0.9 + bw / 10;
    r.reliability_unweighted = 0.95 - bu / 7;
    r.reliability_minbias = 1.0 / 3.0;
    return r;
}

// Pair-counting U: pairs with x < y, ties one half.
double pair_count_u(const std::vector<double>& x, const std::vector<double>& y) {
    double u = 0.0;
    for (double a : x)
        for (double b : y) u += a < b ? 1.0 : (a == b ? 0.5 : 0.0);
    return u;
}

}  // namespace

TEST(Jaccard, Examples) {
    using S = std::set<std::string>;
    EXPECT_DOUBLE_EQ(jaccard(S{"A", "B", "C"}, S{"B", "C", "D"}), 0.5);
    EXPECT_DOUBLE_EQ(jaccard(S{"A", "B"}, S{"A", "B"}), 1.0);
    EXPECT_DOUBLE_EQ(jaccard(S{"A"}, S{"B"}), 0.0);
    bool both_empty = false;
    EXPECT_DOUBLE_EQ(jaccard(S{}, S{}, &both_empty), 1.0);
    EXPECT_TRUE(both_empty);
    jaccard(S{"A"}, S{}, &both_empty);
    EXPECT_FALSE(both_empty);
}

TEST(Jaccard, SymmetricAndOneIffEqual) {
    std::mt19937_64 g(4);
    for (int t = 0; t < 500; ++t) {
        std::set<int> a, b;
        for (int k = 0; k < 6; ++k) {
            if (g() % 2) a.insert(k);
            if (g() % 2) b.insert(k);
        }
        EXPECT_EQ(jaccard(a, b), jaccard(b, a));
        if (!a.empty() || !b.empty()) EXPECT_EQ(jaccard(a, b) == 1.0, a == b);
    }
}

TEST(FemaleToMaleRatio, Examples) {
    const Sel a = {{"F1", "F2", "M1"}, {"F3", "M2", "M3"}};
    EXPECT_DOUBLE_EQ(female_to_male_ratio(a, kGenders), 1.0);
    const Sel b = {{"M1", "M2"}};
    EXPECT_DOUBLE_EQ(female_to_male_ratio(b, kGenders), 0.0);
    const Sel c = {{"F1", "F2", "M1"}, {"F3"}, {"M2", "F1"}};
    EXPECT_DOUBLE_EQ(female_to_male_ratio(c, kGenders), 4.0 / 2.0);
    const Sel d = {{"F1"}};
    EXPECT_EQ(kind_of([&] { (void)female_to_male_ratio(d, kGenders); }), ErrorKind::DivisionByZeroMales);
    const Sel e = {{"Zed"}};
    EXPECT_EQ(kind_of([&] { (void)female_to_male_ratio(e, kGenders); }), ErrorKind::UnknownEntityGender);
    EXPECT_EQ((GenderCounts{2, 0}).ratio(), std::numeric_limits<double>::infinity());
}

TEST(FemaleToMaleRatio, PermutationInvariant) {
    Sel s = {{"F1", "M1"}, {"M2"}, {"F2", "F3", "M3"}, {"M1"}};
    const double r = female_to_male_ratio(s, kGenders);
    std::sort(s.begin(), s.end());
    do {
        EXPECT_EQ(female_to_male_ratio(s, kGenders), r);
    } while (std::next_permutation(s.begin(), s.end()));
}

TEST(Stereotype, TableRowsWithBundledLexicon) {
    const auto lex = bundled_lexicon();
    // CEO row: stereotype male.
    EXPECT_EQ(classify_stereotype("she", Gender::male, lex).label, StereotypeLabel::anti);
    EXPECT_EQ(classify_stereotype("he", Gender::male, lex).label, StereotypeLabel::pro);
    // Librarian row: stereotype female.
    const auto patron = classify_stereotype("the patron", Gender::female, lex);
    EXPECT_EQ(patron.label, StereotypeLabel::neutral);
    ASSERT_TRUE(patron.matched_term.has_value());
    EXPECT_EQ(*patron.matched_term, "the patron");
    EXPECT_EQ(classify_stereotype("she", Gender::female, lex).label, StereotypeLabel::pro);
    // Hairdresser row: stereotype female.
    EXPECT_EQ(classify_stereotype("she", Gender::female, lex).label, StereotypeLabel::pro);
    EXPECT_EQ(classify_stereotype("he", Gender::female, lex).label, StereotypeLabel::anti);
}

TEST(Stereotype, MatchingRules) {
    const auto lex = bundled_lexicon();
    EXPECT_EQ(classify_stereotype("SHE", Gender::male, lex).label, StereotypeLabel::anti);
    // Whole words only: "the" contains "he", "shell" contains "she".
    const auto none = classify_stereotype("the shell", Gender::male, lex);
    EXPECT_EQ(none.label, StereotypeLabel::neutral);
    EXPECT_FALSE(none.matched_term.has_value());
    // Earliest hit wins.
    EXPECT_EQ(classify_stereotype("she told him", Gender::male, lex).label, StereotypeLabel::anti);
    EXPECT_EQ(classify_stereotype("they", Gender::male, lex).label, StereotypeLabel::neutral);

    StereotypeCounts c;
    for (const char* p : {"he", "she", "they", "xyz"}) c.add(classify_stereotype(p, Gender::male, lex));
    EXPECT_EQ(c.pro, 1u);
    EXPECT_EQ(c.anti, 1u);
    EXPECT_EQ(c.neutral, 2u);
    EXPECT_EQ(c.no_match, 1u);
}

TEST(Stereotype, LexiconValidation) {
    EXPECT_EQ(kind_of([] { (void)parse_lexicon(nlohmann::json{{"male", {"he"}}, {"female", {"He"}}}); }),
              ErrorKind::InvalidLexicon);
    EXPECT_EQ(kind_of([] { (void)parse_lexicon(nlohmann::json{{"male", nlohmann::json::array()}, {"female", {"she"}}}); }),
              ErrorKind::InvalidLexicon);
    EXPECT_EQ(kind_of([] { (void)parse_lexicon(nlohmann::json{{"female", {"she"}}}); }), ErrorKind::InvalidLexicon);
}

TEST(OrderSensitivity, EchoStubAndConstantProvider) {
    TaskSpec t;
    t.prompt_template = "Pick:\n{items}";
    t.items = {"A", "B", "C", "D", "E"};
    t.kind = TaskKind::subset_selection;
    EchoPrefixGenerator echo(t.items, 2);
    const auto r = order_sensitivity(t, echo, 30, 5);
    EXPECT_EQ(r.mean_jaccard_unshuffled, 1.0);
    EXPECT_LT(r.mean_jaccard_shuffled, 1.0);

    SimulatedGenerator same(SimulatedDistribution({{"A, B", 1.0, std::nullopt}}));
    const auto s = order_sensitivity(t, same, 10, 5, 3);
    EXPECT_EQ(s.mean_jaccard_unshuffled, 1.0);
    EXPECT_EQ(s.mean_jaccard_shuffled, 1.0);

    TaskSpec freeform;
    freeform.prompt_template = "x";
    EXPECT_EQ(kind_of([&] { (void)order_sensitivity(freeform, same, 10, 1); }), ErrorKind::InvalidTask);
    EXPECT_EQ(kind_of([&] { (void)order_sensitivity(t, same, 1, 1); }), ErrorKind::InvalidPlan);
}

TEST(OrderSensitivity, ParallelismDoesNotChangeResult) {
    TaskSpec t;
    t.prompt_template = "{items}";
    t.items = {"A", "B", "C", "D", "E", "F"};
    t.kind = TaskKind::subset_selection;
    EchoPrefixGenerator echo(t.items, 3);
    const auto a = order_sensitivity(t, echo, 40, 11, 1);
    const auto b = order_sensitivity(t, echo, 40, 11, 8);
    EXPECT_EQ(a.mean_jaccard_shuffled, b.mean_jaccard_shuffled);
}

TEST(TrialSeries, RejectsDuplicateIds) {
    TrialSeries s;
    s.add(record(1, 0.1, 0.2));
    EXPECT_EQ(kind_of([&] { s.add(record(1, 0.3, 0.4)); }), ErrorKind::ConfigError);
}

TEST(TrialSeries, CsvRoundTripIsExact) {
    std::mt19937_64 g(8);
    std::uniform_real_distribution<double> u(-1, 1);
    TrialSeries s;
    for (std::size_t i = 0; i < 50; ++i) {
        auto r = record(i, u(g), u(g));
        r.seed = g();
        r.reliability_minbias = u(g) * 1e-300;
        if (i % 3 == 0) {
            r.genders_weighted = GenderCounts{i, 2};
            r.genders_unweighted = GenderCounts{0, i};
            r.genders_minbias = GenderCounts{1, 1};
        }
        s.add(r);
    }
    std::stringstream ss;
    write_trial_csv(ss, s);
    const auto back = read_trial_csv(ss);
    ASSERT_EQ(back.records.size(), s.records.size());
    for (std::size_t i = 0; i < s.records.size(); ++i) EXPECT_TRUE(back.records[i] == s.records[i]) << i;
}

TEST(Csv, QuotingAndParsing) {
    std::stringstream ss;
    csv::write_row(ss, {"plain", "with,comma", "with \"quote\"", "multi\nline", ""});
    const auto rows = csv::read_all(ss);
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0], (csv::Row{"plain", "with,comma", "with \"quote\"", "multi\nline", ""}));

    std::stringstream lf("\xEF\xBB\xBF" "a,b\n1,2\n");
    const auto r2 = csv::read_all(lf);
    ASSERT_EQ(r2.size(), 2u);
    EXPECT_EQ(r2[0][0], "a");
    std::stringstream bad("\"open,1\n");
    EXPECT_EQ(kind_of([&] { (void)csv::read_all(bad); }), ErrorKind::ParseError);
}

TEST(Summary, Examples) {
    const std::vector<double> one{0.7};
    const auto s1 = summarize(one);
    EXPECT_EQ(s1.mean, 0.7);
    EXPECT_EQ(s1.std, 0.0);
    ASSERT_EQ(s1.deciles.size(), 9u);
    for (double d : s1.deciles) EXPECT_EQ(d, 0.7);

    const std::vector<double> two{0.0, 1.0};
    const auto s2 = summarize(two);
    EXPECT_EQ(s2.mean, 0.5);
    EXPECT_NEAR(s2.deciles[4], 0.5, 1e-15);
    EXPECT_NEAR(s2.deciles[0], 0.1, 1e-15);
}

TEST(MannWhitney, MatchesPairCountAndReference) {
    const std::vector<double> x{0.1, 0.2, 0.2, 0.3, 0.5, 0.05, 0.4};
    const std::vector<double> y{0.3, 0.6, 0.7, 0.2, 0.9, 0.8};
    const auto r = mann_whitney_less(x, y);
    EXPECT_EQ(r.u, pair_count_u(x, y));
    // Asymptotic one-sided p with tie and continuity corrections, computed
    // with an independent statistics package.
    EXPECT_NEAR(r.p_value, 0.022011097520835028, 1e-12);

    const std::vector<double> same{1, 2, 3};
    EXPECT_NEAR(mann_whitney_less(same, same).p_value, 0.5902615116112394, 1e-12);

    std::mt19937_64 g(6);
    std::uniform_int_distribution<int> k(0, 9);
    for (int t = 0; t < 100; ++t) {
        std::vector<double> a(3 + t % 20), b(2 + t % 17);
        for (auto& v : a) v = k(g);
        for (auto& v : b) v = k(g);
        EXPECT_EQ(mann_whitney_less(a, b).u, pair_count_u(a, b));
    }
}

TEST(ExportDistributions, WritesCsvAndSummary) {
    testing_support::TempDir dir;
    TrialSeries s;
    for (std::size_t i = 0; i < 400; ++i) s.add(record(i, 0.1 * (i % 3), 0.2 + 0.1 * (i % 5)));
    const auto summary_path = export_distributions(s, dir / "out" / "series.csv", {{"note", "x"}});
    EXPECT_EQ(summary_path, dir / "out" / "series.summary.json");
    std::ifstream in(dir / "out" / "series.csv");
    const auto rows = csv::read_all(in);
    EXPECT_EQ(rows.size(), 401u);
    EXPECT_EQ(rows[0], trial_csv_header());
    const auto j = nlohmann::json::parse(testing_support::slurp(summary_path));
    EXPECT_EQ(j["trials"], 400);
    EXPECT_EQ(j["note"], "x");
    EXPECT_TRUE(j["metrics"].contains("bias_weighted"));
    EXPECT_LT(j["mann_whitney_bias_weighted_lt_unweighted"]["p_value"].get<double>(), 0.01);

    TrialSeries two;
    auto a = record(0, 0.0, 0.0), b = record(1, 1.0, 0.0);
    two.add(a);
    two.add(b);
    const auto j2 = summary_json(two);
    EXPECT_EQ(j2["metrics"]["bias_weighted"]["mean"], 0.5);
    EXPECT_EQ(kind_of([] { (void)export_distributions(TrialSeries{}, "/tmp/never.csv"); }), ErrorKind::EmptySampleSet);
}

TEST(ExportDistributions, RatioPooledAndPerTrial) {
    TrialSeries s;
    auto a = record(0, 0.1, 0.2), b = record(1, 0.1, 0.2);
    a.genders_weighted = GenderCounts{1, 1};
    b.genders_weighted = GenderCounts{3, 1};
    a.genders_unweighted = b.genders_unweighted = GenderCounts{0, 2};
    a.genders_minbias = b.genders_minbias = GenderCounts{2, 0};
    s.add(a);
    s.add(b);
    const auto j = summary_json(s);
    EXPECT_EQ(j["female_to_male_ratio"]["weighted"]["pooled"], 2.0);
    EXPECT_EQ(j["female_to_male_ratio"]["weighted"]["per_trial_mean"], 2.0);
    EXPECT_EQ(j["female_to_male_ratio"]["unweighted"]["pooled"], 0.0);
    EXPECT_TRUE(j["female_to_male_ratio"]["minbias"]["pooled"].is_null());
    EXPECT_TRUE(j["female_to_male_ratio"]["minbias"]["division_by_zero_males"].get<bool>());
}

TEST(Entities, PlainAndCsv) {
    testing_support::TempDir dir;
    const auto plain = dir.write("names.txt", "\xEF\xBB\xBF" "Ann\n\n Bob \r\nCat\n");
    EXPECT_EQ(load_entities(plain, std::nullopt).names, (std::vector<std::string>{"Ann", "Bob", "Cat"}));
    const auto table = dir.write("people.csv", "id,full name,gender\r\n1,\"Smith, Ann\",F\r\n2,Bob Jones,male\r\n3,Kim,\r\n");
    const auto t = load_entities(table, "full name", "gender");
    EXPECT_EQ(t.names, (std::vector<std::string>{"Smith, Ann", "Bob Jones", "Kim"}));
    EXPECT_EQ(t.gender_of.at("Smith, Ann"), Gender::female);
    EXPECT_EQ(t.gender_of.at("Bob Jones"), Gender::male);
    EXPECT_FALSE(t.gender_of.contains("Kim"));
    EXPECT_EQ(kind_of([&] { (void)load_entities(table, "nope"); }), ErrorKind::ConfigError);
    EXPECT_EQ(kind_of([&] { (void)load_entities(dir / "missing.csv", std::nullopt); }), ErrorKind::IoError);
}
