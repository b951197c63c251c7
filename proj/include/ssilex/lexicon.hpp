#pragma once

// Case-level contingency counts, the smoothed PMI-style inequality score,
// ranking, and precision@k against expert relevance judgments.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "ssilex/corpus.hpp"
#include "ssilex/csv.hpp"
#include "ssilex/error.hpp"
#include "ssilex/tagger.hpp"

namespace ssilex {

inline constexpr double kScoreSmoothing = 0.01;

struct ContingencyCounts {
  std::string concept_id;
  std::size_t n_total = 0;  // surgical cases
  std::size_t n_c = 0;      // cases with the complication
  std::size_t n_o = 0;      // cases containing the concept
  std::size_t n_co = 0;     // cases with both

  bool operator==(const ContingencyCounts&) const = default;
};

// Counts each concept once per case. Output is sorted by concept_id.
inline std::vector<ContingencyCounts> count_contingency(const std::vector<ConceptMention>& mentions,
                                                        const Cohort& cohort, Label target = Label::SSI) {
  const auto index = index_cases(cohort);
  std::size_t n_c = 0;
  for (const auto& c : cohort.cases)
    if (c.label == target) ++n_c;

  std::map<std::string, std::unordered_set<std::size_t>> cases_by_concept;
  for (const auto& m : mentions) {
    auto it = index.find(m.case_id);
    if (it == index.end())
      throw DataError("mention of '" + m.concept_id + "' references unknown case '" + m.case_id + "'");
    cases_by_concept[m.concept_id].insert(it->second);
  }

  std::vector<ContingencyCounts> out;
  out.reserve(cases_by_concept.size());
  for (const auto& [concept_id, cases] : cases_by_concept) {
    ContingencyCounts cc{concept_id, cohort.cases.size(), n_c, cases.size(), 0};
    for (auto ci : cases)
      if (cohort.cases[ci].label == target) ++cc.n_co;
    out.push_back(std::move(cc));
  }
  return out;
}

// log2(N(c,o)) * (log2((N(c,o) + 0.01) / N(o)) - log2(N(c) / N)).
// Requires n_co, n_o, n_c, n_total all >= 1.
inline double inequality_score(const ContingencyCounts& c) {
  if (c.n_co == 0 || c.n_o == 0 || c.n_c == 0 || c.n_total == 0)
    throw std::domain_error("inequality_score: counts must be positive for '" + c.concept_id + "'");
  const double co = static_cast<double>(c.n_co);
  return std::log2(co) * (std::log2((co + kScoreSmoothing) / static_cast<double>(c.n_o)) -
                          std::log2(static_cast<double>(c.n_c) / static_cast<double>(c.n_total)));
}

// The second factor alone. Scaling all four counts by k leaves it unchanged
// except for the smoothing term, which shifts it by
// log2((k*n_co + 0.01) / (k*n_co + 0.01*k)).
inline double inequality_bracket(const ContingencyCounts& c) {
  return std::log2((static_cast<double>(c.n_co) + kScoreSmoothing) / static_cast<double>(c.n_o)) -
         std::log2(static_cast<double>(c.n_c) / static_cast<double>(c.n_total));
}

struct RankedConcept {
  std::string concept_id;
  double score = 0.0;
  std::size_t rank = 0;
  std::optional<ContingencyCounts> counts;
};

inline void assign_ranks(std::vector<RankedConcept>& ranking) {
  std::stable_sort(ranking.begin(), ranking.end(), [](const RankedConcept& a, const RankedConcept& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.concept_id < b.concept_id;
  });
  for (std::size_t i = 0; i < ranking.size(); ++i) ranking[i].rank = i + 1;
}

// Concepts that never co-occur with the complication are dropped.
inline std::vector<RankedConcept> rank_concepts(const std::vector<ContingencyCounts>& counts) {
  std::vector<RankedConcept> ranking;
  for (const auto& c : counts) {
    if (c.n_co == 0) continue;
    ranking.push_back({c.concept_id, inequality_score(c), 0, c});
  }
  assign_ranks(ranking);
  return ranking;
}

inline constexpr const char* kRankingHeader = "rank,concept_id,score,n_co,n_o,n_c,n_total";

inline std::string write_ranking_csv(const std::vector<RankedConcept>& ranking) {
  std::string out = std::string(kRankingHeader) + "\n";
  for (const auto& r : ranking) {
    csv::Row row{std::to_string(r.rank), r.concept_id, csv::format_fixed(r.score, 2)};
    if (r.counts) {
      row.push_back(std::to_string(r.counts->n_co));
      row.push_back(std::to_string(r.counts->n_o));
      row.push_back(std::to_string(r.counts->n_c));
      row.push_back(std::to_string(r.counts->n_total));
    } else {
      row.insert(row.end(), 4, "");
    }
    csv::append_row(out, row);
  }
  return out;
}

// Reads a ranking in file order. Count columns may be absent or empty (as in
// a fixture of published scores). Ranks must run 1..n and scores must be
// non-increasing.
inline std::vector<RankedConcept> parse_ranking_csv(std::string_view text, const std::string& source = "ranking") {
  csv::Table table(text, source);
  const auto c_rank = table.column("rank"), c_id = table.column("concept_id"), c_score = table.column("score");
  const bool has_counts = table.has_column("n_co") && table.has_column("n_o") && table.has_column("n_c") &&
                          table.has_column("n_total");
  std::vector<RankedConcept> out;
  for (std::size_t i = 0; i < table.rows().size(); ++i) {
    const auto& r = table.rows()[i];
    const std::string where = source + ":" + std::to_string(table.line_of(i));
    RankedConcept rc;
    rc.rank = static_cast<std::size_t>(csv::parse_int(r[c_rank], where));
    rc.concept_id = r[c_id];
    rc.score = csv::parse_double(r[c_score], where);
    if (has_counts && !r[table.column("n_co")].empty()) {
      rc.counts = ContingencyCounts{
          rc.concept_id, static_cast<std::size_t>(csv::parse_int(r[table.column("n_total")], where)),
          static_cast<std::size_t>(csv::parse_int(r[table.column("n_c")], where)),
          static_cast<std::size_t>(csv::parse_int(r[table.column("n_o")], where)),
          static_cast<std::size_t>(csv::parse_int(r[table.column("n_co")], where))};
    }
    if (rc.rank != i + 1) throw DataError(where + ": ranks must be consecutive from 1");
    if (!out.empty() && rc.score > out.back().score) throw DataError(where + ": scores must be non-increasing");
    out.push_back(std::move(rc));
  }
  return out;
}

inline std::vector<RankedConcept> load_ranking_csv(const std::string& path) {
  return parse_ranking_csv(csv::read_file(path), path);
}

enum class Degree { High, Medium, Low, None };

inline Degree parse_degree(std::string_view s) {
  if (s == "h") return Degree::High;
  if (s == "m") return Degree::Medium;
  if (s == "l") return Degree::Low;
  if (s == "n") return Degree::None;
  throw DataError("invalid degree '" + std::string(s) + "' (expected h, m, l or n)");
}

inline char degree_code(Degree d) {
  switch (d) {
    case Degree::High: return 'h';
    case Degree::Medium: return 'm';
    case Degree::Low: return 'l';
    case Degree::None: return 'n';
  }
  return 'n';
}

struct ExpertJudgment {
  std::string concept_id;
  Degree degree = Degree::None;
};

using Judgments = std::map<std::string, Degree>;

inline Judgments parse_judgments_csv(std::string_view text, const std::string& source = "judgments") {
  csv::Table table(text, source);
  const auto c_id = table.column("concept_id"), c_deg = table.column("degree");
  Judgments out;
  for (std::size_t i = 0; i < table.rows().size(); ++i) {
    const auto& r = table.rows()[i];
    const std::string where = source + ":" + std::to_string(table.line_of(i));
    Degree d;
    try {
      d = parse_degree(r[c_deg]);
    } catch (const DataError& e) {
      throw DataError(where + ": " + e.what());
    }
    if (!out.emplace(r[c_id], d).second) throw DataError(where + ": duplicate judgment for '" + r[c_id] + "'");
  }
  return out;
}

inline Judgments load_judgments_csv(const std::string& path) { return parse_judgments_csv(csv::read_file(path), path); }

// Fraction of the top k concepts whose judged degree is in `accepted`.
inline double precision_at_k(const std::vector<RankedConcept>& ranking, const Judgments& judgments, std::size_t k,
                             const std::set<Degree>& accepted) {
  if (k == 0 || k > ranking.size())
    throw DataError("precision_at_k: k=" + std::to_string(k) + " outside 1.." + std::to_string(ranking.size()));
  std::size_t hits = 0;
  for (std::size_t i = 0; i < k; ++i) {
    auto it = judgments.find(ranking[i].concept_id);
    if (it == judgments.end()) throw DataError("precision_at_k: no judgment for '" + ranking[i].concept_id + "'");
    if (accepted.count(it->second)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(k);
}

inline const std::set<Degree>& degrees_high() {
  static const std::set<Degree> s{Degree::High};
  return s;
}
inline const std::set<Degree>& degrees_high_medium() {
  static const std::set<Degree> s{Degree::High, Degree::Medium};
  return s;
}
inline const std::set<Degree>& degrees_any_relation() {
  static const std::set<Degree> s{Degree::High, Degree::Medium, Degree::Low};
  return s;
}

struct PrecisionRow {
  std::size_t k = 0;
  double high = 0.0;
  double high_or_medium = 0.0;
  double any = 0.0;
};

// Table of precision@k for the three relevance thresholds. k values larger
// than the ranking are skipped.
inline std::vector<PrecisionRow> precision_table(const std::vector<RankedConcept>& ranking, const Judgments& judgments,
                                                 const std::vector<std::size_t>& ks = {10, 20, 30}) {
  std::vector<PrecisionRow> rows;
  for (auto k : ks) {
    if (k > ranking.size()) continue;
    rows.push_back({k, precision_at_k(ranking, judgments, k, degrees_high()),
                    precision_at_k(ranking, judgments, k, degrees_high_medium()),
                    precision_at_k(ranking, judgments, k, degrees_any_relation())});
  }
  return rows;
}

inline std::string write_precision_csv(const std::vector<PrecisionRow>& rows) {
  std::string out = "k,high,high_or_medium,any\n";
  for (const auto& r : rows)
    csv::append_row(out, {std::to_string(r.k), csv::format_fixed(r.high, 2), csv::format_fixed(r.high_or_medium, 2),
                          csv::format_fixed(r.any, 2)});
  return out;
}

}  // namespace ssilex
