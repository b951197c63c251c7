#include <gtest/gtest.h>

#include <sstream>

#include "ssilex/corpus.hpp"
#include "ssilex/rng.hpp"
#include "ssilex/synthetic.hpp"
#include "test_support.hpp"

namespace ssilex {
namespace {

using testing::day0;
using testing::make_case;
using testing::make_note;

const char* kTwoCases = R"({"kind":"note","note_id":"N1","case_id":"C1","note_date":"2015-03-11","sections":[{"heading":"Subjective","text":"Wound looks fine."}]}
{"kind":"case","case_id":"C1","surgery_date":"2015-03-10","label":"SSI"}
{"kind":"case","case_id":"C2","surgery_date":"2015-04-01","label":"NonSSI"}

{"kind":"note","note_id":"N2","case_id":"C1","note_date":"2015-03-20","sections":[{"heading":"Diagnosis","text":"cellulitis"}]}
{"kind":"note","note_id":"N3","case_id":"C2","note_date":"2015-04-02","sections":[{"heading":"Hospital Summary","text":"ok"},{"heading":"Family History","text":"mother had diabetes"}]}
)";

TEST(LoadCohort, HandWrittenFixture) {
  auto c = parse_cohort(std::string(kTwoCases));
  ASSERT_EQ(c.cases.size(), 2u);
  ASSERT_EQ(c.notes.size(), 3u);
  EXPECT_EQ(c.cases[0].case_id, "C1");
  EXPECT_EQ(c.cases[0].label, Label::SSI);
  EXPECT_EQ(c.notes[2].sections[1].heading, "Family History");
  EXPECT_EQ(c.notes[2].sections[1].text, "mother had diabetes");
}

TEST(LoadCohort, EmptyFile) {
  auto c = parse_cohort(std::string());
  EXPECT_TRUE(c.cases.empty());
  EXPECT_TRUE(c.notes.empty());
}

TEST(LoadCohort, DanglingReferenceNamesCase) {
  std::string text = R"({"kind":"case","case_id":"C1","surgery_date":"2015-03-10","label":"SSI"}
{"kind":"note","note_id":"N1","case_id":"X9","note_date":"2015-03-11","sections":[{"heading":"a","text":"b"}]}
)";
  try {
    parse_cohort(text);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("X9"), std::string::npos);
  }
}

TEST(LoadCohort, DuplicateIds) {
  std::string dup_case = R"({"kind":"case","case_id":"C1","surgery_date":"2015-03-10","label":"SSI"}
{"kind":"case","case_id":"C1","surgery_date":"2015-03-10","label":"NonSSI"}
)";
  EXPECT_THROW(parse_cohort(dup_case), DataError);
  std::string dup_note = R"({"kind":"case","case_id":"C1","surgery_date":"2015-03-10","label":"SSI"}
{"kind":"note","note_id":"N1","case_id":"C1","note_date":"2015-03-11","sections":[{"heading":"a","text":"b"}]}
{"kind":"note","note_id":"N1","case_id":"C1","note_date":"2015-03-12","sections":[{"heading":"a","text":"b"}]}
)";
  EXPECT_THROW(parse_cohort(dup_note), DataError);
}

TEST(LoadCohort, MalformedRecordReportsLine) {
  std::string text = R"({"kind":"case","case_id":"C1","surgery_date":"2015-03-10","label":"SSI"}
{"kind":"case","case_id":"C2","surgery_date":"2015-13-10","label":"SSI"}
)";
  try {
    parse_cohort(text);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_cohort(std::string("{not json\n")), DataError);
  EXPECT_THROW(parse_cohort(std::string(R"({"kind":"case","case_id":"C1","surgery_date":"2015-03-10","label":"maybe"})")),
               DataError);
  EXPECT_THROW(parse_cohort(std::string(
                   R"({"kind":"note","note_id":"N1","case_id":"C1","note_date":"2015-03-11","sections":[]})")),
               DataError);
}

TEST(LoadCohort, MissingFileIsDataError) { EXPECT_THROW(load_cohort("/nonexistent/cohort.jsonl"), DataError); }

TEST(PostsurgicalDay, Examples) {
  auto c = make_case("C1", Label::SSI);
  EXPECT_EQ(postsurgical_day(make_note("N", "C1", 0, {}), c), 0);
  EXPECT_EQ(postsurgical_day(make_note("N", "C1", 30, {}), c), 30);
  EXPECT_EQ(postsurgical_day(make_note("N", "C1", -5, {}), c), -5);
  // across a month and leap day
  SurgicalCase leap{"C2", parse_date("2016-02-27"), Label::NonSSI};
  ClinicalNote n{"N", "C2", parse_date("2016-03-01"), {}};
  EXPECT_EQ(postsurgical_day(n, leap), 3);
}

TEST(WindowFilter, BoundaryAndIdempotence) {
  Cohort c;
  c.cases.push_back(make_case("C1", Label::SSI));
  int i = 0;
  for (int d : {-1, 0, 15, 30, 31}) c.notes.push_back(make_note("N" + std::to_string(i++), "C1", d, {{"h", "t"}}));
  auto w = window_filter(c, 0, 30);
  ASSERT_EQ(w.notes.size(), 3u);
  std::vector<int> days;
  for (const auto& n : w.notes) days.push_back(postsurgical_day(n, c.cases[0]));
  EXPECT_EQ(days, (std::vector<int>{0, 15, 30}));
  EXPECT_EQ(w.cases, c.cases);
  EXPECT_EQ(window_filter(w, 0, 30), w);

  auto mid = window_filter(c, 11, 21);
  ASSERT_EQ(mid.notes.size(), 1u);
  EXPECT_EQ(postsurgical_day(mid.notes[0], c.cases[0]), 15);

  EXPECT_THROW(window_filter(c, 5, 4), std::invalid_argument);
}

TEST(WindowFilter, NoNotes) {
  Cohort c;
  c.cases.push_back(make_case("C1", Label::SSI));
  c.cases.push_back(make_case("C2", Label::NonSSI));
  auto w = window_filter(c, 0, 30);
  EXPECT_EQ(w.cases.size(), 2u);
  EXPECT_TRUE(w.notes.empty());
}

TEST(CohortStats, Counts) {
  auto empty = cohort_stats(Cohort{});
  EXPECT_EQ(empty.cases, 0u);
  EXPECT_EQ(empty.positives, 0u);
  EXPECT_EQ(empty.notes, 0u);
  EXPECT_TRUE(empty.notes_per_day.empty());

  Cohort c;
  c.cases.push_back(make_case("C1", Label::SSI));
  c.cases.push_back(make_case("C2", Label::NonSSI));
  c.notes.push_back(make_note("N1", "C1", 3, {{"h", "t"}}));
  c.notes.push_back(make_note("N2", "C2", 3, {{"h", "t"}}));
  c.notes.push_back(make_note("N3", "C2", 4, {{"h", "t"}}));
  auto s = cohort_stats(c);
  EXPECT_EQ(s.cases, 2u);
  EXPECT_EQ(s.positives, 1u);
  EXPECT_EQ(s.notes, 3u);
  EXPECT_EQ(s.notes_per_day.at(3), 2u);
  EXPECT_EQ(s.notes_per_day.at(4), 1u);
}

// load(write(C)) == C over randomly generated cohorts, including text with
// quotes, tabs, newlines and non-ASCII bytes.
TEST(CohortFormat, RoundTripProperty) {
  Rng rng(42);
  const std::vector<std::string> pieces = {"wound", "\"quoted\"", "tab\there", "line\nbreak", "caf\xc3\xa9",
                                           "back\\slash", "  spaced  ", ""};
  for (int trial = 0; trial < 50; ++trial) {
    Cohort c;
    const auto n_cases = rng.between(0, 6);
    for (long long i = 0; i < n_cases; ++i)
      c.cases.push_back({"C" + std::to_string(i), day0() + std::chrono::days{rng.between(-400, 400)},
                         rng.bernoulli(0.3) ? Label::SSI : Label::NonSSI});
    if (!c.cases.empty()) {
      const auto n_notes = rng.between(0, 10);
      for (long long i = 0; i < n_notes; ++i) {
        ClinicalNote n{"N" + std::to_string(i), c.cases[rng.below(c.cases.size())].case_id,
                       day0() + std::chrono::days{rng.between(-10, 40)}, {}};
        const auto n_sec = rng.between(1, 3);
        for (long long s = 0; s < n_sec; ++s)
          n.sections.push_back({pieces[rng.below(pieces.size())], pieces[rng.below(pieces.size())] + " " +
                                                                      pieces[rng.below(pieces.size())]});
        c.notes.push_back(std::move(n));
      }
    }
    ASSERT_EQ(parse_cohort(write_cohort(c)), c) << "trial " << trial;
  }
}

TEST(Dates, StrictParsing) {
  EXPECT_EQ(format_date(parse_date("2012-02-29")), "2012-02-29");
  EXPECT_THROW(parse_date("2013-02-29"), DataError);
  EXPECT_THROW(parse_date("2013-2-09"), DataError);
  EXPECT_THROW(parse_date("2013/02/09"), DataError);
}

// ---------------------------------------------------------------------------
// synthetic generator

SyntheticSpec small_spec() {
  SyntheticSpec s;
  s.seed = 1;
  s.n_cases = 60;
  s.n_positive = 12;
  s.signal_concepts = {{"wound infection", 0.7, 0.1}};
  s.distractor_concepts = {{"fever", 0.3, 0.3}, {"wound", 0.5, 0.5}};
  s.negation_rate = 0.2;
  s.family_mention_rate = 0.1;
  s.min_notes_per_case = 1;
  s.max_notes_per_case = 3;
  return s;
}

TEST(Synthetic, DeterministicForSeed) {
  auto a = generate_synthetic(small_spec());
  auto b = generate_synthetic(small_spec());
  EXPECT_EQ(write_cohort(a.cohort), write_cohort(b.cohort));
  EXPECT_EQ(write_ground_truth(a.ground_truth), write_ground_truth(b.ground_truth));
  auto other = small_spec();
  other.seed = 2;
  EXPECT_NE(write_cohort(generate_synthetic(other).cohort), write_cohort(a.cohort));
}

TEST(Synthetic, FullSizeLabelCounts) {
  SyntheticSpec s;
  s.seed = 3;
  s.n_cases = 1178;
  s.n_positive = 80;
  auto g = generate_synthetic(s);
  auto stats = cohort_stats(g.cohort);
  EXPECT_EQ(stats.cases, 1178u);
  EXPECT_EQ(stats.positives, 80u);
  EXPECT_EQ(stats.cases - stats.positives, 1098u);
  // generated cohorts satisfy the loader's validation
  EXPECT_EQ(parse_cohort(write_cohort(g.cohort)), g.cohort);
}

bool case_mentions(const Cohort& c, const std::string& case_id, const std::string& term) {
  for (const auto& n : c.notes) {
    if (n.case_id != case_id) continue;
    for (const auto& s : n.sections)
      if (normalize(s.text).find(term) != std::string::npos) return true;
  }
  return false;
}

TEST(Synthetic, DegenerateProbabilities) {
  SyntheticSpec s;
  s.seed = 11;
  s.n_cases = 50;
  s.n_positive = 10;
  s.signal_concepts = {{"cellulitis", 1.0, 0.0}};
  auto g = generate_synthetic(s);
  for (const auto& c : g.cohort.cases)
    EXPECT_EQ(case_mentions(g.cohort, c.case_id, "cellulitis"), c.label == Label::SSI) << c.case_id;
}

TEST(Synthetic, SidecarOffsetsPointAtTerms) {
  auto g = generate_synthetic(small_spec());
  std::map<std::string, const ClinicalNote*> notes;
  for (const auto& n : g.cohort.notes) notes[n.note_id] = &n;
  ASSERT_FALSE(g.ground_truth.empty());
  for (const auto& m : g.ground_truth) {
    const auto& text = notes.at(m.note_id)->sections.at(m.section_index).text;
    EXPECT_EQ(normalize(text).substr(m.char_start, m.term.size()), m.term);
    EXPECT_FALSE(m.negated && m.family);
  }
  EXPECT_EQ(parse_ground_truth(write_ground_truth(g.ground_truth)), g.ground_truth);
}

TEST(Synthetic, PresenceFrequencyConverges) {
  SyntheticSpec s;
  s.seed = 5;
  s.n_cases = 2000;
  s.n_positive = 1000;
  s.signal_concepts = {{"cellulitis", 0.6, 0.1}};
  s.distractor_concepts = {{"fever", 0.3, 0.3}};
  s.negation_rate = 0.2;
  auto g = generate_synthetic(s);
  std::map<std::string, Label> labels;
  for (const auto& c : g.cohort.cases) labels[c.case_id] = c.label;
  std::map<std::string, std::set<std::string>> present;  // term -> cases
  std::map<std::string, std::string> case_of;
  for (const auto& n : g.cohort.notes) case_of[n.note_id] = n.case_id;
  for (const auto& m : g.ground_truth) present[m.term].insert(case_of.at(m.note_id));
  auto rate = [&](const std::string& term, Label l) {
    double hit = 0;
    for (const auto& id : present[term])
      if (labels.at(id) == l) ++hit;
    return hit / 1000.0;
  };
  EXPECT_NEAR(rate("cellulitis", Label::SSI), 0.6, 0.05);
  EXPECT_NEAR(rate("cellulitis", Label::NonSSI), 0.1, 0.05);
  EXPECT_NEAR(rate("fever", Label::SSI), 0.3, 0.05);
  EXPECT_NEAR(rate("fever", Label::NonSSI), 0.3, 0.05);
}

TEST(Synthetic, InvalidSpec) {
  auto s = small_spec();
  s.n_positive = s.n_cases + 1;
  EXPECT_THROW(generate_synthetic(s), DataError);
  s = small_spec();
  s.negation_rate = 1.5;
  EXPECT_THROW(generate_synthetic(s), DataError);
  s = small_spec();
  s.max_day = 31;
  EXPECT_THROW(generate_synthetic(s), DataError);
  EXPECT_THROW(parse_synthetic_spec("{\"seed\": 1}"), DataError);
}

TEST(Synthetic, SpecJsonRoundTrip) {
  auto s = small_spec();
  auto back = parse_synthetic_spec(write_synthetic_spec(s));
  EXPECT_EQ(write_synthetic_spec(back), write_synthetic_spec(s));
  EXPECT_EQ(write_cohort(generate_synthetic(back).cohort), write_cohort(generate_synthetic(s).cohort));
}

}  // namespace
}  // namespace ssilex
