#include <gtest/gtest.h>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <cmath>

#include "ssilex/lexicon.hpp"
#include "ssilex/rng.hpp"
#include "test_support.hpp"

namespace ssilex {
namespace {

using Big = boost::multiprecision::cpp_bin_float_50;

// Independent evaluation: the inner ratios are exact integers combined into a
// single rational before one high-precision logarithm.
double oracle_score(std::uint64_t n, std::uint64_t c, std::uint64_t o, std::uint64_t co) {
  const Big ln2 = boost::multiprecision::log(Big(2));
  const Big num = Big(100 * co + 1) * Big(n);
  const Big den = Big(100) * Big(o) * Big(c);
  const Big bracket = boost::multiprecision::log(num / den) / ln2;
  const Big factor = boost::multiprecision::log(Big(co)) / ln2;
  return static_cast<double>(factor * bracket);
}

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return static_cast<std::size_t>(rng.between(static_cast<long long>(lo), static_cast<long long>(hi)));
}

ContingencyCounts counts(std::size_t n, std::size_t c, std::size_t o, std::size_t co, std::string id = "x") {
  return ContingencyCounts{std::move(id), n, c, o, co};
}

TEST(InequalityScore, FrozenOracleValues) {
  // 50-digit references computed offline
  EXPECT_NEAR(inequality_score(counts(100, 10, 20, 8)), 6.0054067279019562663933575239707854, 1e-9);
  EXPECT_NEAR(inequality_score(counts(1000, 100, 50, 5)), 0.0066929775468070502083705509426, 1e-9);
  EXPECT_GT(inequality_score(counts(1000, 100, 50, 5)), 0.0);
}

TEST(InequalityScore, MatchesOracleOnRandomTuples) {
  Rng rng(2024);
  for (int i = 0; i < 1000; ++i) {
    const auto n = pick(rng, 1, 5000);
    const auto c = pick(rng, 1, n);
    const auto o = pick(rng, 1, n);
    const auto co = pick(rng, 1, std::min(c, o));
    const double got = inequality_score(counts(n, c, o, co));
    EXPECT_NEAR(got, oracle_score(n, c, o, co), 1e-9) << n << " " << c << " " << o << " " << co;
  }
}

TEST(InequalityScore, SingleCooccurrenceIsExactlyZero) {
  for (auto [n, c, o] : {std::tuple{100, 10, 20}, {5, 5, 5}, {1178, 80, 1}, {1, 1, 1}})
    EXPECT_EQ(inequality_score(counts(n, c, o, 1)), 0.0);
}

TEST(InequalityScore, RejectsZeroCounts) {
  EXPECT_THROW(inequality_score(counts(100, 10, 20, 0)), std::domain_error);
  EXPECT_THROW(inequality_score(counts(100, 0, 20, 1)), std::domain_error);
}

TEST(InequalityScore, IncreasingInCooccurrenceWhenAboveBaseline) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = pick(rng, 50, 2000), c = pick(rng, 5, n / 2), o = pick(rng, 5, n / 2);
    const double base = static_cast<double>(c) / static_cast<double>(n);
    for (std::size_t co = 1; co < std::min(c, o); ++co) {
      if ((co + kScoreSmoothing) / static_cast<double>(o) <= base) continue;
      EXPECT_LT(inequality_score(counts(n, c, o, co)), inequality_score(counts(n, c, o, co + 1)));
    }
  }
}

// Scaling every count by k leaves log2(n_c/N) exact; the smoothing constant
// does not scale, so the bracket moves by exactly
// log2((k*n_co + 0.01) / (k*(n_co + 0.01))).
TEST(InequalityScore, ScalingChangesBracketOnlyThroughSmoothing) {
  Rng rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = pick(rng, 1, 400), c = pick(rng, 1, n), o = pick(rng, 1, n),
                      co = pick(rng, 1, std::min(c, o)), k = pick(rng, 2, 50);
    const auto base = counts(n, c, o, co), scaled = counts(k * n, k * c, k * o, k * co);
    const double baseline = std::log2(static_cast<double>(c) / n);
    EXPECT_NEAR(std::log2(static_cast<double>(k * c) / (k * n)), baseline, 1e-12);
    const double shift = std::log2((k * co + kScoreSmoothing) / (k * (co + kScoreSmoothing)));
    EXPECT_NEAR(inequality_bracket(scaled) - inequality_bracket(base), shift, 1e-9);
    EXPECT_LE(std::abs(shift), std::log2(1.0 + kScoreSmoothing));
    EXPECT_NEAR(inequality_score(scaled), std::log2(static_cast<double>(k * co)) * inequality_bracket(scaled), 1e-9);
  }
}

Cohort labeled_cohort() {
  using testing::make_case;
  using testing::make_note;
  Cohort c;
  c.cases = {make_case("C1", Label::SSI), make_case("C2", Label::SSI), make_case("C3", Label::NonSSI),
             make_case("C4", Label::NonSSI)};
  c.notes = {make_note("N1", "C1", 1, {{"Diagnosis", "x"}}), make_note("N2", "C1", 2, {{"Diagnosis", "x"}}),
             make_note("N3", "C1", 3, {{"Diagnosis", "x"}}), make_note("N4", "C3", 3, {{"Diagnosis", "x"}})};
  return c;
}

ConceptMention mention(std::string concept_id, std::string note, std::string cse) {
  ConceptMention m;
  m.concept_id = std::move(concept_id);
  m.note_id = std::move(note);
  m.case_id = std::move(cse);
  return m;
}

TEST(CountContingency, CaseLevelPresence) {
  auto c = labeled_cohort();
  std::vector<ConceptMention> ms{mention("wound", "N1", "C1"), mention("wound", "N2", "C1"),
                                 mention("wound", "N3", "C1"), mention("incision", "N4", "C3")};
  auto cc = count_contingency(ms, c);
  ASSERT_EQ(cc.size(), 2u);
  EXPECT_EQ(cc[0], counts(4, 2, 1, 0, "incision"));
  EXPECT_EQ(cc[1], counts(4, 2, 1, 1, "wound"));
  auto ranked = rank_concepts(cc);
  ASSERT_EQ(ranked.size(), 1u);
  EXPECT_EQ(ranked[0].concept_id, "wound");
  EXPECT_EQ(ranked[0].rank, 1u);
  EXPECT_THROW(count_contingency({mention("wound", "N9", "C9")}, c), DataError);
}

TEST(RankConcepts, TiesBreakLexicographically) {
  std::vector<RankedConcept> r{{"a", 2.0, 0, {}}, {"c", 5.0, 0, {}}, {"b", 5.0, 0, {}}};
  assign_ranks(r);
  ASSERT_EQ(r.size(), 3u);
  EXPECT_EQ(r[0].concept_id, "b");
  EXPECT_EQ(r[1].concept_id, "c");
  EXPECT_EQ(r[2].concept_id, "a");
  for (std::size_t i = 0; i < r.size(); ++i) EXPECT_EQ(r[i].rank, i + 1);
}

TEST(RankConcepts, OutputInvariants) {
  Rng rng(8);
  std::vector<ContingencyCounts> cc;
  for (int i = 0; i < 300; ++i) {
    const std::size_t o = pick(rng, 1, 200);
    cc.push_back(counts(1000, 80, o, pick(rng, 0, std::min<std::size_t>(o, 80)), "k" + std::to_string(i % 97) +
                                                                                      "_" + std::to_string(i)));
  }
  auto r = rank_concepts(cc);
  for (std::size_t i = 0; i < r.size(); ++i) {
    EXPECT_EQ(r[i].rank, i + 1);
    EXPECT_GE(r[i].counts->n_co, 1u);
    if (i > 0) {
      EXPECT_GE(r[i - 1].score, r[i].score);
      if (r[i - 1].score == r[i].score) {
        EXPECT_LT(r[i - 1].concept_id, r[i].concept_id);
      }
    }
  }
  auto back = parse_ranking_csv(write_ranking_csv(r));
  ASSERT_EQ(back.size(), r.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    EXPECT_EQ(back[i].concept_id, r[i].concept_id);
    EXPECT_EQ(back[i].counts, r[i].counts);
  }
}

TEST(RankingCsv, ValidatesRanksAndOrder) {
  EXPECT_THROW(parse_ranking_csv("rank,concept_id,score\n1,a,2.0\n3,b,1.0\n"), DataError);
  EXPECT_THROW(parse_ranking_csv("rank,concept_id,score\n1,a,1.0\n2,b,2.0\n"), DataError);
  EXPECT_THROW(parse_ranking_csv("rank,concept_id\n1,a\n"), DataError);
  EXPECT_EQ(parse_ranking_csv("rank,concept_id,score\n1,a,2.0\n2,b,2.0\n").size(), 2u);
}

class PublishedRanking : public ::testing::Test {
 protected:
  std::vector<RankedConcept> ranking = load_ranking_csv(testing::data_path("published_ranking.csv"));
  Judgments judgments = load_judgments_csv(testing::data_path("published_judgments.csv"));
};

TEST_F(PublishedRanking, FixtureShape) {
  ASSERT_EQ(ranking.size(), 30u);
  EXPECT_EQ(judgments.size(), 30u);
  EXPECT_EQ(ranking[0].concept_id, "wound infection");
  EXPECT_DOUBLE_EQ(ranking[0].score, 19.37);
  EXPECT_EQ(ranking[1].concept_id, "cellulitis");
  EXPECT_DOUBLE_EQ(ranking[1].score, 18.62);
}

TEST_F(PublishedRanking, PrecisionTableMatchesPublishedValues) {
  auto rows = precision_table(ranking, judgments);
  ASSERT_EQ(rows.size(), 3u);
  const double expected[3][3] = {{0.40, 0.60, 0.90}, {0.45, 0.65, 0.85}, {0.53, 0.67, 0.80}};
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(rows[i].k, 10 * (i + 1));
    EXPECT_EQ(csv::format_fixed(rows[i].high, 2), csv::format_fixed(expected[i][0], 2));
    EXPECT_EQ(csv::format_fixed(rows[i].high_or_medium, 2), csv::format_fixed(expected[i][1], 2));
    EXPECT_EQ(csv::format_fixed(rows[i].any, 2), csv::format_fixed(expected[i][2], 2));
  }
  EXPECT_EQ(write_precision_csv(rows),
            "k,high,high_or_medium,any\n10,0.40,0.60,0.90\n20,0.45,0.65,0.85\n30,0.53,0.67,0.80\n");
}

TEST_F(PublishedRanking, PrecisionMonotoneInAcceptedSet) {
  const std::set<Degree> all{Degree::High, Degree::Medium, Degree::Low, Degree::None};
  for (std::size_t k = 1; k <= ranking.size(); ++k) {
    const double h = precision_at_k(ranking, judgments, k, degrees_high());
    const double hm = precision_at_k(ranking, judgments, k, degrees_high_medium());
    const double any = precision_at_k(ranking, judgments, k, degrees_any_relation());
    EXPECT_LE(h, hm);
    EXPECT_LE(hm, any);
    EXPECT_LE(any, precision_at_k(ranking, judgments, k, all));
    EXPECT_EQ(precision_at_k(ranking, judgments, k, all), 1.0);
  }
}

TEST_F(PublishedRanking, MissingJudgmentAndBadK) {
  Judgments partial = judgments;
  partial.erase("cellulitis");
  EXPECT_THROW(precision_at_k(ranking, partial, 10, degrees_high()), DataError);
  EXPECT_NO_THROW(precision_at_k(ranking, partial, 1, degrees_high()));
  EXPECT_THROW(precision_at_k(ranking, judgments, 0, degrees_high()), DataError);
  EXPECT_THROW(precision_at_k(ranking, judgments, 31, degrees_high()), DataError);
}

TEST(Judgments, FileErrors) {
  EXPECT_THROW(parse_judgments_csv("concept_id,degree\na,x\n"), DataError);
  EXPECT_THROW(parse_judgments_csv("concept_id,degree\na,H\n"), DataError);
  EXPECT_THROW(parse_judgments_csv("concept_id,degree\na,h\na,m\n"), DataError);
  EXPECT_EQ(parse_judgments_csv("concept_id,degree\na,h\n").at("a"), Degree::High);
}

}  // namespace
}  // namespace ssilex
