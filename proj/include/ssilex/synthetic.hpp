#pragma once

// Seeded synthetic cohort generator. Plants dictionary terms in notes with
// label-dependent probabilities, wraps some mentions in negation or family
// templates, and records every planted mention in a ground-truth sidecar.

#include <array>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include <json.hpp>

#include "ssilex/corpus.hpp"
#include "ssilex/error.hpp"
#include "ssilex/rng.hpp"
#include "ssilex/tagger.hpp"

namespace ssilex {

struct PlantedConcept {
  std::string term;
  double p_positive = 0.0;
  double p_negative = 0.0;
};

struct SyntheticSpec {
  std::uint64_t seed = 1;
  std::size_t n_cases = 0;
  std::size_t n_positive = 0;
  std::vector<PlantedConcept> signal_concepts;
  std::vector<PlantedConcept> distractor_concepts;
  double negation_rate = 0.0;
  double family_mention_rate = 0.0;
  // Fraction of planted mentions placed in a non-allowed section instead.
  double excluded_section_rate = 0.0;
  int min_notes_per_case = 1;
  int max_notes_per_case = 4;
  int min_day = 0;
  int max_day = 30;

  void validate() const {
    auto prob = [](double p, const std::string& what) {
      if (!(p >= 0.0 && p <= 1.0)) throw DataError("synthetic spec: " + what + " must be in [0,1]");
    };
    if (n_positive > n_cases) throw DataError("synthetic spec: n_positive exceeds n_cases");
    for (const auto* group : {&signal_concepts, &distractor_concepts}) {
      for (const auto& c : *group) {
        if (trim(normalize(c.term)).empty()) throw DataError("synthetic spec: empty concept term");
        prob(c.p_positive, "p_positive of '" + c.term + "'");
        prob(c.p_negative, "p_negative of '" + c.term + "'");
      }
    }
    prob(negation_rate, "negation_rate");
    prob(family_mention_rate, "family_mention_rate");
    prob(excluded_section_rate, "excluded_section_rate");
    if (min_notes_per_case < 1 || min_notes_per_case > max_notes_per_case)
      throw DataError("synthetic spec: notes_per_case_range must satisfy 1 <= min <= max");
    if (min_day < 0 || max_day > 30 || min_day > max_day)
      throw DataError("synthetic spec: day_range must lie within [0,30] with min <= max");
  }
};

inline SyntheticSpec parse_synthetic_spec(const std::string& text, const std::string& source = "synthetic spec") {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(source + ": malformed JSON: " + e.what());
  }
  SyntheticSpec s;
  try {
    s.seed = j.at("seed").get<std::uint64_t>();
    s.n_cases = j.at("n_cases").get<std::size_t>();
    s.n_positive = j.at("n_positive").get<std::size_t>();
    auto concepts = [&](const char* key) {
      std::vector<PlantedConcept> out;
      for (const auto& c : j.value(key, nlohmann::json::array()))
        out.push_back({c.at("term").get<std::string>(), c.at("p_positive").get<double>(),
                       c.at("p_negative").get<double>()});
      return out;
    };
    s.signal_concepts = concepts("signal_concepts");
    s.distractor_concepts = concepts("distractor_concepts");
    s.negation_rate = j.value("negation_rate", 0.0);
    s.family_mention_rate = j.value("family_mention_rate", 0.0);
    s.excluded_section_rate = j.value("excluded_section_rate", 0.0);
    if (j.contains("notes_per_case_range")) {
      s.min_notes_per_case = j.at("notes_per_case_range").at(0).get<int>();
      s.max_notes_per_case = j.at("notes_per_case_range").at(1).get<int>();
    }
    if (j.contains("day_range")) {
      s.min_day = j.at("day_range").at(0).get<int>();
      s.max_day = j.at("day_range").at(1).get<int>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(source + ": " + e.what());
  }
  s.validate();
  return s;
}

inline std::string write_synthetic_spec(const SyntheticSpec& s) {
  nlohmann::ordered_json j;
  j["seed"] = s.seed;
  j["n_cases"] = s.n_cases;
  j["n_positive"] = s.n_positive;
  auto concepts = [](const std::vector<PlantedConcept>& v) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& c : v) {
      nlohmann::ordered_json o;
      o["term"] = c.term;
      o["p_positive"] = c.p_positive;
      o["p_negative"] = c.p_negative;
      arr.push_back(o);
    }
    return arr;
  };
  j["signal_concepts"] = concepts(s.signal_concepts);
  j["distractor_concepts"] = concepts(s.distractor_concepts);
  j["negation_rate"] = s.negation_rate;
  j["family_mention_rate"] = s.family_mention_rate;
  j["excluded_section_rate"] = s.excluded_section_rate;
  j["notes_per_case_range"] = {s.min_notes_per_case, s.max_notes_per_case};
  j["day_range"] = {s.min_day, s.max_day};
  return j.dump(2) + "\n";
}

struct PlantedMention {
  std::string note_id;
  std::string term;
  bool negated = false;
  bool family = false;
  std::size_t section_index = 0;
  std::size_t char_start = 0;

  bool operator==(const PlantedMention&) const = default;
};

struct SyntheticCohort {
  Cohort cohort;
  std::vector<PlantedMention> ground_truth;
};

namespace synth {

// Fillers and templates are free of dictionary terms and trigger words so
// that every tagger hit in generated text is a planted one.
inline constexpr std::array kFillers = {
    "Vital signs stable overnight.",      "Tolerating a regular diet.",
    "Ambulating independently in the hallway.", "Pain controlled on the oral regimen.",
    "Plan discussed with the care team.", "Labs reviewed this morning.",
    "Will continue current management.",  "Bowel function has returned.",
    "Follow up in clinic as scheduled.",  "Lives at home with spouse.",
    "Sleeping well at night.",            "Urine output adequate.",
};

inline constexpr std::array kPositiveTemplates = {
    "{} noted on exam today.",
    "Assessment notable for {}.",
    "Findings consistent with {}.",
    "Patient seen for {}.",
};

inline constexpr std::array kNegatedTemplates = {
    "No evidence of {}.",
    "Denies {}.",
    "Negative for {}.",
    "{} was ruled out.",
};

inline constexpr std::array kFamilyTemplates = {
    "Mother had {}.",
    "Father treated for {}.",
    "Family history of {}.",
    "Sister with {}.",
};

inline constexpr std::array kExcludedHeadings = {"Family History", "Social History", "Vital Signs"};

// Returns the sentence and the offset of the term within it. A template that
// starts with the term gets its first letter capitalized.
inline std::pair<std::string, std::size_t> fill(std::string_view tmpl, const std::string& term) {
  const auto at = tmpl.find("{}");
  std::string s = std::string(tmpl.substr(0, at)) + term + std::string(tmpl.substr(at + 2));
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return {s, at};
}

struct Sentence {
  std::string text;
  std::optional<PlantedMention> planted;  // note_id/char_start filled during assembly
  std::size_t term_offset = 0;
};

}  // namespace synth

// Deterministic for a fixed spec. Ids are C00001.. and N000001..; surgery
// dates fall in 2010-2013.
inline SyntheticCohort generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  SyntheticCohort out;

  std::vector<Label> labels(spec.n_cases, Label::NonSSI);
  std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(spec.n_positive), Label::SSI);
  rng.shuffle(labels);

  const Date base = Date{std::chrono::year{2010} / 1 / 1};
  const auto& allowed = default_allowed_sections();

  std::vector<PlantedConcept> concepts = spec.signal_concepts;
  concepts.insert(concepts.end(), spec.distractor_concepts.begin(), spec.distractor_concepts.end());

  std::size_t note_counter = 0;
  char idbuf[32];
  for (std::size_t ci = 0; ci < spec.n_cases; ++ci) {
    std::snprintf(idbuf, sizeof idbuf, "C%05zu", ci + 1);
    SurgicalCase sc{idbuf, base + std::chrono::days{rng.below(4 * 365)}, labels[ci]};

    const int n_notes = static_cast<int>(rng.between(spec.min_notes_per_case, spec.max_notes_per_case));
    std::vector<int> days;
    for (int k = 0; k < n_notes; ++k) days.push_back(static_cast<int>(rng.between(spec.min_day, spec.max_day)));
    std::sort(days.begin(), days.end());

    struct DraftSection {
      std::string heading;
      bool allowed = true;
      std::vector<synth::Sentence> sentences;
    };
    std::vector<std::vector<DraftSection>> drafts(static_cast<std::size_t>(n_notes));
    for (auto& sections : drafts) {
      std::vector<std::size_t> order(allowed.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      rng.shuffle(order);
      const auto n_allowed = static_cast<std::size_t>(rng.between(2, 3));
      for (std::size_t i = 0; i < n_allowed; ++i) sections.push_back({allowed[order[i]], true, {}});
      DraftSection excluded{synth::kExcludedHeadings[rng.below(synth::kExcludedHeadings.size())], false, {}};
      sections.insert(sections.begin() + static_cast<std::ptrdiff_t>(rng.below(sections.size() + 1)),
                      std::move(excluded));
      for (auto& sec : sections) {
        const auto n_fill = rng.between(1, 3);
        for (long long f = 0; f < n_fill; ++f)
          sec.sentences.push_back({synth::kFillers[rng.below(synth::kFillers.size())], std::nullopt, 0});
      }
    }

    for (const auto& planted : concepts) {
      const double p = sc.label == Label::SSI ? planted.p_positive : planted.p_negative;
      if (!rng.bernoulli(p)) continue;
      const std::string term = trim(normalize(planted.term));
      const auto n_mentions = rng.between(1, 3);
      for (long long m = 0; m < n_mentions; ++m) {
        auto& sections = drafts[rng.below(drafts.size())];
        PlantedMention pm;
        pm.term = term;
        pm.negated = rng.bernoulli(spec.negation_rate);
        const bool family_draw = rng.bernoulli(spec.family_mention_rate);
        pm.family = !pm.negated && family_draw;
        const bool to_excluded = rng.bernoulli(spec.excluded_section_rate);
        std::vector<std::size_t> candidates;
        for (std::size_t s = 0; s < sections.size(); ++s)
          if (sections[s].allowed != to_excluded) candidates.push_back(s);
        const std::size_t target = candidates[rng.below(candidates.size())];
        std::string_view tmpl;
        if (pm.negated)
          tmpl = synth::kNegatedTemplates[rng.below(synth::kNegatedTemplates.size())];
        else if (pm.family)
          tmpl = synth::kFamilyTemplates[rng.below(synth::kFamilyTemplates.size())];
        else
          tmpl = synth::kPositiveTemplates[rng.below(synth::kPositiveTemplates.size())];
        auto [sentence, offset] = synth::fill(tmpl, term);
        pm.section_index = target;
        auto& sentences = sections[target].sentences;
        const auto pos = rng.below(sentences.size() + 1);
        sentences.insert(sentences.begin() + static_cast<std::ptrdiff_t>(pos),
                         synth::Sentence{std::move(sentence), std::move(pm), offset});
      }
    }

    for (int k = 0; k < n_notes; ++k) {
      std::snprintf(idbuf, sizeof idbuf, "N%06zu", ++note_counter);
      ClinicalNote note{idbuf, sc.case_id, sc.surgery_date + std::chrono::days{days[static_cast<std::size_t>(k)]}, {}};
      auto& sections = drafts[static_cast<std::size_t>(k)];
      for (std::size_t s = 0; s < sections.size(); ++s) {
        std::string text;
        for (auto& sentence : sections[s].sentences) {
          if (!text.empty()) text += ' ';
          if (sentence.planted) {
            sentence.planted->note_id = note.note_id;
            sentence.planted->section_index = s;
            sentence.planted->char_start = text.size() + sentence.term_offset;
            out.ground_truth.push_back(*sentence.planted);
          }
          text += sentence.text;
        }
        note.sections.push_back({sections[s].heading, std::move(text)});
      }
      out.cohort.notes.push_back(std::move(note));
    }
    out.cohort.cases.push_back(std::move(sc));
  }
  return out;
}

inline std::string write_ground_truth(const std::vector<PlantedMention>& truth) {
  std::string out;
  for (const auto& m : truth) {
    nlohmann::ordered_json j;
    j["note_id"] = m.note_id;
    j["term"] = m.term;
    j["planted"] = true;
    j["negated"] = m.negated;
    j["family"] = m.family;
    j["char_start"] = m.char_start;
    j["section_index"] = m.section_index;
    out += j.dump();
    out += '\n';
  }
  return out;
}

inline std::vector<PlantedMention> parse_ground_truth(const std::string& text) {
  std::vector<PlantedMention> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      out.push_back({j.at("note_id").get<std::string>(), j.at("term").get<std::string>(), j.at("negated").get<bool>(),
                     j.at("family").get<bool>(), j.value("section_index", std::size_t{0}),
                     j.at("char_start").get<std::size_t>()});
    } catch (const nlohmann::json::exception& e) {
      throw DataError("ground truth line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace ssilex
