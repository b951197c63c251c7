#pragma once

// Cohort data model: surgical cases, dated and sectioned clinical notes, the
// JSONL cohort file format, and postsurgical-day arithmetic.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "ssilex/error.hpp"

namespace ssilex {

using Date = std::chrono::sys_days;

enum class Label { SSI, NonSSI };

inline std::string_view to_string(Label label) { return label == Label::SSI ? "SSI" : "NonSSI"; }

inline Label parse_label(std::string_view s) {
  if (s == "SSI") return Label::SSI;
  if (s == "NonSSI") return Label::NonSSI;
  throw DataError("invalid label '" + std::string(s) + "' (expected SSI or NonSSI)");
}

// Strict YYYY-MM-DD.
inline Date parse_date(std::string_view s) {
  auto bad = [&] { return DataError("invalid date '" + std::string(s) + "' (expected YYYY-MM-DD)"); };
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') throw bad();
  auto digits = [&](std::size_t pos, std::size_t len) {
    int v = 0;
    for (std::size_t i = pos; i < pos + len; ++i) {
      if (s[i] < '0' || s[i] > '9') throw bad();
      v = v * 10 + (s[i] - '0');
    }
    return v;
  };
  std::chrono::year_month_day ymd{std::chrono::year{digits(0, 4)},
                                  std::chrono::month{static_cast<unsigned>(digits(5, 2))},
                                  std::chrono::day{static_cast<unsigned>(digits(8, 2))}};
  if (!ymd.ok()) throw bad();
  return Date{ymd};
}

inline std::string format_date(Date d) {
  std::chrono::year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

struct SurgicalCase {
  std::string case_id;
  Date surgery_date;
  Label label = Label::NonSSI;

  bool operator==(const SurgicalCase&) const = default;
};

struct Section {
  std::string heading;
  std::string text;

  bool operator==(const Section&) const = default;
};

struct ClinicalNote {
  std::string note_id;
  std::string case_id;
  Date note_date;
  std::vector<Section> sections;

  bool operator==(const ClinicalNote&) const = default;
};

struct Cohort {
  std::vector<SurgicalCase> cases;
  std::vector<ClinicalNote> notes;

  bool operator==(const Cohort&) const = default;
};

// case_id -> position in cohort.cases
using CaseIndex = std::unordered_map<std::string, std::size_t>;

inline CaseIndex index_cases(const Cohort& cohort) {
  CaseIndex index;
  index.reserve(cohort.cases.size());
  for (std::size_t i = 0; i < cohort.cases.size(); ++i) index.emplace(cohort.cases[i].case_id, i);
  return index;
}

// Whole days from surgery to note; negative for pre-operative notes.
inline int postsurgical_day(const ClinicalNote& note, const SurgicalCase& surgical_case) {
  return static_cast<int>((note.note_date - surgical_case.surgery_date).count());
}

inline constexpr int kDefaultMinDay = 0;
inline constexpr int kDefaultMaxDay = 30;

struct DayWindow {
  int min_day = kDefaultMinDay;
  int max_day = kDefaultMaxDay;

  bool contains(int day) const { return day >= min_day && day <= max_day; }
};

// Keeps every case and only the notes whose postsurgical day lies in the
// inclusive window.
inline Cohort window_filter(const Cohort& cohort, int min_day, int max_day) {
  if (min_day > max_day)
    throw std::invalid_argument("window_filter: min_day " + std::to_string(min_day) + " > max_day " +
                                std::to_string(max_day));
  const auto index = index_cases(cohort);
  Cohort out;
  out.cases = cohort.cases;
  for (const auto& note : cohort.notes) {
    auto it = index.find(note.case_id);
    if (it == index.end()) continue;
    int day = postsurgical_day(note, cohort.cases[it->second]);
    if (day >= min_day && day <= max_day) out.notes.push_back(note);
  }
  return out;
}

inline Cohort window_filter(const Cohort& cohort, DayWindow window) {
  return window_filter(cohort, window.min_day, window.max_day);
}

struct CohortStats {
  std::size_t cases = 0;
  std::size_t positives = 0;
  std::size_t notes = 0;
  std::map<int, std::size_t> notes_per_day;
};

inline CohortStats cohort_stats(const Cohort& cohort) {
  CohortStats stats;
  stats.cases = cohort.cases.size();
  for (const auto& c : cohort.cases)
    if (c.label == Label::SSI) ++stats.positives;
  stats.notes = cohort.notes.size();
  const auto index = index_cases(cohort);
  for (const auto& note : cohort.notes) {
    auto it = index.find(note.case_id);
    if (it != index.end()) ++stats.notes_per_day[postsurgical_day(note, cohort.cases[it->second])];
  }
  return stats;
}

// ---------------------------------------------------------------------------
// JSONL cohort format

namespace detail {

inline const nlohmann::json& require(const nlohmann::json& rec, const char* key, std::size_t line) {
  auto it = rec.find(key);
  if (it == rec.end()) throw DataError("line " + std::to_string(line) + ": missing field '" + key + "'");
  return *it;
}

inline std::string require_string(const nlohmann::json& rec, const char* key, std::size_t line) {
  const auto& v = require(rec, key, line);
  if (!v.is_string())
    throw DataError("line " + std::to_string(line) + ": field '" + key + "' must be a string");
  return v.get<std::string>();
}

}  // namespace detail

// Parses and validates a cohort. Cases and notes may be interleaved in any
// order; references are checked after all records are read.
inline Cohort parse_cohort(std::istream& in) {
  Cohort cohort;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError("line " + std::to_string(line_no) + ": malformed JSON: " + e.what());
    }
    if (!rec.is_object()) throw DataError("line " + std::to_string(line_no) + ": record is not an object");
    try {
      const std::string kind = detail::require_string(rec, "kind", line_no);
      if (kind == "case") {
        SurgicalCase c;
        c.case_id = detail::require_string(rec, "case_id", line_no);
        c.surgery_date = parse_date(detail::require_string(rec, "surgery_date", line_no));
        c.label = parse_label(detail::require_string(rec, "label", line_no));
        cohort.cases.push_back(std::move(c));
      } else if (kind == "note") {
        ClinicalNote n;
        n.note_id = detail::require_string(rec, "note_id", line_no);
        n.case_id = detail::require_string(rec, "case_id", line_no);
        n.note_date = parse_date(detail::require_string(rec, "note_date", line_no));
        const auto& sections = detail::require(rec, "sections", line_no);
        if (!sections.is_array() || sections.empty())
          throw DataError("line " + std::to_string(line_no) + ": 'sections' must be a non-empty array");
        for (const auto& s : sections) {
          if (!s.is_object()) throw DataError("line " + std::to_string(line_no) + ": section is not an object");
          n.sections.push_back({detail::require_string(s, "heading", line_no),
                                detail::require_string(s, "text", line_no)});
        }
        cohort.notes.push_back(std::move(n));
      } else {
        throw DataError("line " + std::to_string(line_no) + ": unknown record kind '" + kind + "'");
      }
    } catch (const DataError& e) {
      std::string msg = e.what();
      if (msg.rfind("line ", 0) != 0) msg = "line " + std::to_string(line_no) + ": " + msg;
      throw DataError(msg);
    }
  }

  std::unordered_set<std::string> case_ids;
  for (const auto& c : cohort.cases)
    if (!case_ids.insert(c.case_id).second) throw DataError("duplicate case_id '" + c.case_id + "'");
  std::unordered_set<std::string> note_ids;
  for (const auto& n : cohort.notes) {
    if (!note_ids.insert(n.note_id).second) throw DataError("duplicate note_id '" + n.note_id + "'");
    if (!case_ids.count(n.case_id))
      throw DataError("note '" + n.note_id + "' references unknown case '" + n.case_id + "'");
  }
  return cohort;
}

inline Cohort load_cohort(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read cohort file " + path);
  try {
    return parse_cohort(in);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

inline Cohort parse_cohort(const std::string& text) {
  std::istringstream in(text);
  return parse_cohort(in);
}

// Cases first, then notes, each in stored order.
inline std::string write_cohort(const Cohort& cohort) {
  std::string out;
  for (const auto& c : cohort.cases) {
    nlohmann::ordered_json rec;
    rec["kind"] = "case";
    rec["case_id"] = c.case_id;
    rec["surgery_date"] = format_date(c.surgery_date);
    rec["label"] = std::string(to_string(c.label));
    out += rec.dump();
    out += '\n';
  }
  for (const auto& n : cohort.notes) {
    nlohmann::ordered_json rec;
    rec["kind"] = "note";
    rec["note_id"] = n.note_id;
    rec["case_id"] = n.case_id;
    rec["note_date"] = format_date(n.note_date);
    auto sections = nlohmann::ordered_json::array();
    for (const auto& s : n.sections) {
      nlohmann::ordered_json sec;
      sec["heading"] = s.heading;
      sec["text"] = s.text;
      sections.push_back(std::move(sec));
    }
    rec["sections"] = std::move(sections);
    out += rec.dump();
    out += '\n';
  }
  return out;
}

}  // namespace ssilex
