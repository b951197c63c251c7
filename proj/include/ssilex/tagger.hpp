#pragma once

// Dictionary concept tagger for sectioned notes. Text is lowercased and
// whitespace-collapsed, then matched leftmost-longest at token boundaries.
// Each hit is annotated with negation (trigger phrases within a token window,
// bounded by the sentence) and experiencer (family triggers before the hit).

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "ssilex/corpus.hpp"
#include "ssilex/csv.hpp"
#include "ssilex/error.hpp"

namespace ssilex {

// Lowercases ASCII letters and collapses every whitespace run to one space.
// Offsets reported by the tagger refer to this string.
inline std::string normalize(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool in_space = false;
  for (unsigned char ch : text) {
    if (std::isspace(ch)) {
      if (!in_space) out += ' ';
      in_space = true;
    } else {
      out += static_cast<char>(std::tolower(ch));
      in_space = false;
    }
  }
  return out;
}

inline std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline bool is_word_char(unsigned char ch) { return std::isalnum(ch) != 0; }

inline bool is_sentence_break(char ch) { return ch == '.' || ch == '!' || ch == '?' || ch == ';'; }

struct Token {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t sentence = 0;
};

// Word tokens of a normalized string (maximal alphanumeric runs), each tagged
// with the index of the sentence it falls in.
struct TokenizedText {
  std::string text;
  std::vector<Token> tokens;

  std::string_view word(std::size_t i) const {
    return std::string_view(text).substr(tokens[i].begin, tokens[i].end - tokens[i].begin);
  }
};

inline TokenizedText tokenize(std::string normalized) {
  TokenizedText out;
  out.text = std::move(normalized);
  const std::string& t = out.text;
  std::size_t sentence = 0;
  std::size_t i = 0;
  while (i < t.size()) {
    if (is_word_char(static_cast<unsigned char>(t[i]))) {
      std::size_t j = i;
      while (j < t.size() && is_word_char(static_cast<unsigned char>(t[j]))) ++j;
      out.tokens.push_back({i, j, sentence});
      i = j;
    } else {
      if (is_sentence_break(t[i])) ++sentence;
      ++i;
    }
  }
  return out;
}

// Token trie over lowercase phrases. Used both for concept terms and for the
// negation/family trigger lists.
class PhraseTrie {
 public:
  // Returns false if the phrase was already present.
  bool insert(const std::string& phrase, std::size_t payload) {
    auto toks = tokenize(phrase);
    if (toks.tokens.empty()) throw DataError("phrase has no word tokens: '" + phrase + "'");
    std::size_t node = 0;
    for (std::size_t i = 0; i < toks.tokens.size(); ++i) {
      std::string w(toks.word(i));
      auto it = nodes_[node].children.find(w);
      if (it == nodes_[node].children.end()) {
        nodes_.push_back({});
        it = nodes_[node].children.emplace(std::move(w), nodes_.size() - 1).first;
      }
      node = it->second;
    }
    // Phrases sharing a token sequence but differing in punctuation are
    // distinguished by the exact surface check in match_at.
    auto& terminals = nodes_[node].terminals;
    for (const auto& [p, _] : terminals)
      if (p == phrase) return false;
    terminals.emplace_back(phrase, payload);
    return true;
  }

  struct Hit {
    std::size_t first_token;
    std::size_t last_token;
    std::size_t payload;
  };

  // Longest phrase whose tokens start at token `start` and whose surface
  // form equals the text span exactly.
  std::optional<Hit> longest_at(const TokenizedText& tt, std::size_t start) const {
    std::optional<Hit> best;
    std::size_t node = 0;
    for (std::size_t i = start; i < tt.tokens.size(); ++i) {
      auto it = nodes_[node].children.find(std::string(tt.word(i)));
      if (it == nodes_[node].children.end()) break;
      node = it->second;
      std::string_view span =
          std::string_view(tt.text).substr(tt.tokens[start].begin, tt.tokens[i].end - tt.tokens[start].begin);
      for (const auto& [phrase, payload] : nodes_[node].terminals)
        if (span == phrase) best = Hit{start, i, payload};
    }
    return best;
  }

  // Every phrase occurrence starting at any token (overlaps allowed).
  std::vector<Hit> all_hits(const TokenizedText& tt) const {
    std::vector<Hit> hits;
    for (std::size_t s = 0; s < tt.tokens.size(); ++s) {
      std::size_t node = 0;
      for (std::size_t i = s; i < tt.tokens.size(); ++i) {
        auto it = nodes_[node].children.find(std::string(tt.word(i)));
        if (it == nodes_[node].children.end()) break;
        node = it->second;
        std::string_view span =
            std::string_view(tt.text).substr(tt.tokens[s].begin, tt.tokens[i].end - tt.tokens[s].begin);
        for (const auto& [phrase, payload] : nodes_[node].terminals)
          if (span == phrase) hits.push_back({s, i, payload});
      }
    }
    return hits;
  }

  bool empty() const { return nodes_.size() == 1; }

 private:
  struct Node {
    std::map<std::string, std::size_t> children;
    std::vector<std::pair<std::string, std::size_t>> terminals;
  };
  std::vector<Node> nodes_{Node{}};
};

class Dictionary {
 public:
  struct Entry {
    std::string term;
    std::string concept_id;
  };

  // The term is normalized and trimmed; duplicates are rejected.
  void add(std::string_view term, std::string_view concept_id) {
    std::string t = trim(normalize(term));
    std::string id = trim(concept_id);
    if (t.empty()) throw DataError("dictionary: empty term");
    if (id.empty()) throw DataError("dictionary: empty concept_id for term '" + t + "'");
    if (!trie_.insert(t, entries_.size())) throw DataError("dictionary: duplicate term '" + t + "'");
    entries_.push_back({std::move(t), std::move(id)});
  }

  const std::vector<Entry>& entries() const { return entries_; }
  const Entry& entry(std::size_t i) const { return entries_[i]; }
  const PhraseTrie& trie() const { return trie_; }
  std::size_t size() const { return entries_.size(); }

  std::set<std::string> concept_ids() const {
    std::set<std::string> ids;
    for (const auto& e : entries_) ids.insert(e.concept_id);
    return ids;
  }

 private:
  std::vector<Entry> entries_;
  PhraseTrie trie_;
};

// term<TAB>concept_id per line; '#' starts a comment line.
inline Dictionary parse_dictionary(std::string_view text, const std::string& source = "dictionary") {
  Dictionary dict;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty() || trim(line)[0] == '#') continue;
    auto tab = line.find('\t');
    if (tab == std::string_view::npos)
      throw DataError(source + ":" + std::to_string(line_no) + ": expected term<TAB>concept_id");
    try {
      dict.add(line.substr(0, tab), line.substr(tab + 1));
    } catch (const DataError& e) {
      throw DataError(source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return dict;
}

inline Dictionary load_dictionary(const std::string& path) { return parse_dictionary(csv::read_file(path), path); }

enum class Experiencer { Patient, Other };

inline std::string_view to_string(Experiencer e) { return e == Experiencer::Patient ? "Patient" : "Other"; }

inline Experiencer parse_experiencer(std::string_view s) {
  if (s == "Patient") return Experiencer::Patient;
  if (s == "Other") return Experiencer::Other;
  throw DataError("invalid experiencer '" + std::string(s) + "'");
}

inline const std::vector<std::string>& default_allowed_sections() {
  static const std::vector<std::string> headings = {
      "Hospital Summary", "Impression/Report/Plan", "Subjective", "Diagnosis", "Secondary Diagnoses",
      "Problem Oriented Hospital Course"};
  return headings;
}

inline std::string heading_key(std::string_view heading) {
  std::string key = trim(heading);
  for (auto& ch : key) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return key;
}

struct FilterConfig {
  std::vector<std::string> allowed_sections = default_allowed_sections();
  std::vector<std::string> negation_pre_triggers = {"no",      "not",         "without",
                                                    "denies",  "denied",      "negative for",
                                                    "no evidence of", "ruled out", "free of"};
  std::vector<std::string> negation_post_triggers = {"was ruled out", "is ruled out"};
  std::size_t negation_window = 5;
  std::vector<std::string> family_triggers = {"mother", "father", "brother", "sister", "family history",
                                              "family hx"};
  std::size_t family_window = 8;

  bool section_allowed(std::string_view heading) const {
    const std::string key = heading_key(heading);
    return std::any_of(allowed_sections.begin(), allowed_sections.end(),
                       [&](const std::string& h) { return heading_key(h) == key; });
  }

  void validate() const {
    if (negation_window < 1) throw DataError("filter config: negation_window must be >= 1");
    if (family_window < 1) throw DataError("filter config: family_window must be >= 1");
  }
};

inline FilterConfig parse_filter_config(const std::string& text, const std::string& source = "filter config") {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(source + ": malformed JSON: " + e.what());
  }
  auto req = [&](const char* key) -> const nlohmann::json& {
    if (!j.contains(key)) throw DataError(source + ": missing key '" + key + "'");
    return j.at(key);
  };
  auto strings = [&](const char* key) {
    const auto& v = req(key);
    if (!v.is_array()) throw DataError(source + ": '" + key + "' must be an array of strings");
    std::vector<std::string> out;
    for (const auto& s : v) {
      if (!s.is_string()) throw DataError(source + ": '" + key + "' must be an array of strings");
      out.push_back(s.get<std::string>());
    }
    return out;
  };
  auto window = [&](const char* key) {
    const auto& v = req(key);
    if (!v.is_number_integer() || v.get<long long>() < 1)
      throw DataError(source + ": '" + key + "' must be a positive integer");
    return static_cast<std::size_t>(v.get<long long>());
  };
  FilterConfig cfg;
  cfg.allowed_sections = strings("allowed_sections");
  cfg.negation_pre_triggers = strings("negation_pre_triggers");
  cfg.negation_post_triggers = strings("negation_post_triggers");
  cfg.negation_window = window("negation_window");
  cfg.family_triggers = strings("family_triggers");
  cfg.family_window = window("family_window");
  cfg.validate();
  return cfg;
}

inline FilterConfig load_filter_config(const std::string& path) {
  return parse_filter_config(csv::read_file(path), path);
}

inline std::string write_filter_config(const FilterConfig& cfg) {
  nlohmann::ordered_json j;
  j["allowed_sections"] = cfg.allowed_sections;
  j["negation_pre_triggers"] = cfg.negation_pre_triggers;
  j["negation_post_triggers"] = cfg.negation_post_triggers;
  j["negation_window"] = cfg.negation_window;
  j["family_triggers"] = cfg.family_triggers;
  j["family_window"] = cfg.family_window;
  return j.dump(2) + "\n";
}

// Trigger lists compiled into tries once per configuration.
class TriggerSet {
 public:
  explicit TriggerSet(const FilterConfig& cfg) : cfg_(cfg) {
    auto fill = [](PhraseTrie& trie, const std::vector<std::string>& phrases) {
      for (const auto& p : phrases) {
        std::string t = trim(normalize(p));
        if (!t.empty()) trie.insert(t, 0);
      }
    };
    fill(pre_, cfg.negation_pre_triggers);
    fill(post_, cfg.negation_post_triggers);
    fill(family_, cfg.family_triggers);
  }

  const FilterConfig& config() const { return cfg_; }
  const PhraseTrie& pre() const { return pre_; }
  const PhraseTrie& post() const { return post_; }
  const PhraseTrie& family() const { return family_; }

 private:
  FilterConfig cfg_;
  PhraseTrie pre_, post_, family_;
};

// One dictionary hit in a normalized section text.
struct RawMention {
  std::size_t entry = 0;  // index into Dictionary::entries()
  std::size_t first_token = 0;
  std::size_t last_token = 0;
  std::size_t char_start = 0;
  std::size_t char_end = 0;
};

// Leftmost-longest, non-overlapping dictionary matching at token boundaries.
inline std::vector<RawMention> match_concepts(const TokenizedText& tt, const Dictionary& dict) {
  std::vector<RawMention> out;
  std::size_t i = 0;
  while (i < tt.tokens.size()) {
    if (auto hit = dict.trie().longest_at(tt, i)) {
      out.push_back({hit->payload, hit->first_token, hit->last_token, tt.tokens[hit->first_token].begin,
                     tt.tokens[hit->last_token].end});
      i = hit->last_token + 1;
    } else {
      ++i;
    }
  }
  return out;
}

inline std::vector<RawMention> match_concepts(std::string_view normalized_text, const Dictionary& dict) {
  return match_concepts(tokenize(std::string(normalized_text)), dict);
}

namespace detail {

inline bool trigger_before(const PhraseTrie& trie, const TokenizedText& tt, const RawMention& m,
                           std::size_t window) {
  if (trie.empty()) return false;
  const std::size_t sentence = tt.tokens[m.first_token].sentence;
  for (const auto& hit : trie.all_hits(tt)) {
    if (hit.last_token >= m.first_token) continue;
    if (tt.tokens[hit.last_token].sentence != sentence) continue;
    if (m.first_token - hit.last_token <= window) return true;
  }
  return false;
}

inline bool trigger_after(const PhraseTrie& trie, const TokenizedText& tt, const RawMention& m,
                          std::size_t window) {
  if (trie.empty()) return false;
  const std::size_t sentence = tt.tokens[m.last_token].sentence;
  for (const auto& hit : trie.all_hits(tt)) {
    if (hit.first_token <= m.last_token) continue;
    if (tt.tokens[hit.first_token].sentence != sentence) continue;
    if (hit.first_token - m.last_token <= window) return true;
  }
  return false;
}

}  // namespace detail

// A pre-trigger ending at most `negation_window` tokens before the mention,
// or a post-trigger starting at most that many tokens after it, in the same
// sentence.
inline bool detect_negation(const RawMention& m, const TokenizedText& tt, const TriggerSet& triggers) {
  const auto window = triggers.config().negation_window;
  return detail::trigger_before(triggers.pre(), tt, m, window) ||
         detail::trigger_after(triggers.post(), tt, m, window);
}

inline Experiencer attribute_experiencer(const RawMention& m, const TokenizedText& tt, const TriggerSet& triggers) {
  return detail::trigger_before(triggers.family(), tt, m, triggers.config().family_window) ? Experiencer::Other
                                                                                          : Experiencer::Patient;
}

struct ConceptMention {
  std::string concept_id;
  std::string matched_text;
  std::string note_id;
  std::string case_id;
  std::string section_heading;
  std::size_t section_index = 0;
  int day = 0;
  std::size_t char_start = 0;
  std::size_t char_end = 0;
  bool negated = false;
  Experiencer experiencer = Experiencer::Patient;

  bool operator==(const ConceptMention&) const = default;
};

inline bool passes_filters(const ConceptMention& m, const FilterConfig& cfg) {
  return cfg.section_allowed(m.section_heading) && !m.negated && m.experiencer == Experiencer::Patient;
}

// Canonical ordering: (case_id, note_id, section index, char_start).
inline void sort_mentions(std::vector<ConceptMention>& mentions) {
  std::sort(mentions.begin(), mentions.end(), [](const ConceptMention& a, const ConceptMention& b) {
    return std::tie(a.case_id, a.note_id, a.section_index, a.char_start) <
           std::tie(b.case_id, b.note_id, b.section_index, b.char_start);
  });
}

// Tags every section of every note and returns all mentions with negation
// and experiencer set. Use filter_view for the heuristic-filtered subset.
inline std::vector<ConceptMention> tag_cohort(const Cohort& cohort, const Dictionary& dict, const FilterConfig& cfg) {
  const TriggerSet triggers(cfg);
  const auto index = index_cases(cohort);
  std::vector<ConceptMention> out;
  for (const auto& note : cohort.notes) {
    auto it = index.find(note.case_id);
    if (it == index.end()) throw DataError("note '" + note.note_id + "' references unknown case '" + note.case_id + "'");
    const int day = postsurgical_day(note, cohort.cases[it->second]);
    for (std::size_t s = 0; s < note.sections.size(); ++s) {
      const auto& section = note.sections[s];
      const auto tt = tokenize(normalize(section.text));
      for (const auto& raw : match_concepts(tt, dict)) {
        ConceptMention m;
        m.concept_id = dict.entry(raw.entry).concept_id;
        m.matched_text = tt.text.substr(raw.char_start, raw.char_end - raw.char_start);
        m.note_id = note.note_id;
        m.case_id = note.case_id;
        m.section_heading = section.heading;
        m.section_index = s;
        m.day = day;
        m.char_start = raw.char_start;
        m.char_end = raw.char_end;
        m.negated = detect_negation(raw, tt, triggers);
        m.experiencer = attribute_experiencer(raw, tt, triggers);
        out.push_back(std::move(m));
      }
    }
  }
  sort_mentions(out);
  return out;
}

inline std::vector<ConceptMention> filter_view(const std::vector<ConceptMention>& mentions, const FilterConfig& cfg) {
  std::vector<ConceptMention> out;
  std::copy_if(mentions.begin(), mentions.end(), std::back_inserter(out),
               [&](const ConceptMention& m) { return passes_filters(m, cfg); });
  return out;
}

// ---------------------------------------------------------------------------
// Mention CSV

inline constexpr const char* kMentionHeader = "case_id,note_id,day,section,concept_id,char_start,char_end,negated,experiencer";

inline std::string write_mentions_csv(const std::vector<ConceptMention>& mentions) {
  std::string out = std::string(kMentionHeader) + "\n";
  for (const auto& m : mentions) {
    csv::append_row(out, {m.case_id, m.note_id, std::to_string(m.day), m.section_heading, m.concept_id,
                          std::to_string(m.char_start), std::to_string(m.char_end), m.negated ? "true" : "false",
                          std::string(to_string(m.experiencer))});
  }
  return out;
}

// The CSV carries no matched text or section index; those fields stay empty
// and zero. Row order is preserved.
inline std::vector<ConceptMention> parse_mentions_csv(std::string_view text, const std::string& source = "mentions") {
  csv::Table table(text, source);
  const auto c_case = table.column("case_id"), c_note = table.column("note_id"), c_day = table.column("day"),
             c_sec = table.column("section"), c_con = table.column("concept_id"), c_cs = table.column("char_start"),
             c_ce = table.column("char_end"), c_neg = table.column("negated"), c_exp = table.column("experiencer");
  std::vector<ConceptMention> out;
  out.reserve(table.rows().size());
  for (std::size_t i = 0; i < table.rows().size(); ++i) {
    const auto& r = table.rows()[i];
    const std::string where = source + ":" + std::to_string(table.line_of(i));
    ConceptMention m;
    m.case_id = r[c_case];
    m.note_id = r[c_note];
    m.day = static_cast<int>(csv::parse_int(r[c_day], where));
    m.section_heading = r[c_sec];
    m.concept_id = r[c_con];
    m.char_start = static_cast<std::size_t>(csv::parse_int(r[c_cs], where));
    m.char_end = static_cast<std::size_t>(csv::parse_int(r[c_ce], where));
    m.negated = csv::parse_bool(r[c_neg], where);
    try {
      m.experiencer = parse_experiencer(r[c_exp]);
    } catch (const DataError& e) {
      throw DataError(where + ": " + e.what());
    }
    if (m.char_start >= m.char_end) throw DataError(where + ": char_start must be < char_end");
    out.push_back(std::move(m));
  }
  return out;
}

inline std::vector<ConceptMention> load_mentions_csv(const std::string& path) {
  return parse_mentions_csv(csv::read_file(path), path);
}

}  // namespace ssilex
