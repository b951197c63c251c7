#pragma once

// Concept frequencies over postsurgical days 0..30, split by outcome group:
// per-day mention counts, day-level co-occurrence of the daily top concepts,
// and top-5 totals for the periods 0-10, 11-21 and 22-30.

#include <algorithm>
#include <array>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ssilex/corpus.hpp"
#include "ssilex/csv.hpp"
#include "ssilex/error.hpp"
#include "ssilex/tagger.hpp"

namespace ssilex {

inline constexpr int kDays = 31;

struct DayDistribution {
  Label group = Label::SSI;
  std::string concept_id;
  std::array<std::size_t, kDays> freq_by_day{};

  std::size_t total() const {
    std::size_t t = 0;
    for (auto f : freq_by_day) t += f;
    return t;
  }
  bool operator==(const DayDistribution&) const = default;
};

// Mention-level counts for each selected concept (all-zero rows included),
// in concept_id order.
inline std::vector<DayDistribution> day_frequencies(const std::vector<ConceptMention>& mentions, const Cohort& cohort,
                                                    Label group, const std::set<std::string>& selected) {
  const auto index = index_cases(cohort);
  std::map<std::string, DayDistribution> by_concept;
  for (const auto& id : selected) by_concept[id] = DayDistribution{group, id, {}};
  for (const auto& m : mentions) {
    auto sel = by_concept.find(m.concept_id);
    if (sel == by_concept.end()) continue;
    auto it = index.find(m.case_id);
    if (it == index.end()) throw DataError("mention references unknown case '" + m.case_id + "'");
    if (cohort.cases[it->second].label != group) continue;
    if (m.day < 0 || m.day >= kDays)
      throw DataError("mention on day " + std::to_string(m.day) + " outside the 0-30 analysis window");
    ++sel->second.freq_by_day[static_cast<std::size_t>(m.day)];
  }
  std::vector<DayDistribution> out;
  for (auto& [_, d] : by_concept) out.push_back(std::move(d));
  return out;
}

inline std::size_t appeared_days(const DayDistribution& dist) {
  return static_cast<std::size_t>(
      std::count_if(dist.freq_by_day.begin(), dist.freq_by_day.end(), [](std::size_t f) { return f > 0; }));
}

struct CooccurrencePair {
  Label group = Label::SSI;
  std::string concept_a;
  std::string concept_b;
  std::size_t days_a = 0;
  std::size_t days_b = 0;
  std::size_t co_days = 0;

  bool operator==(const CooccurrencePair&) const = default;
};

// Indices of the concepts with the highest nonzero frequency on `day`, ties
// broken by concept_id. top_n == 0 means no limit.
inline std::vector<std::size_t> daily_top(const std::vector<DayDistribution>& dists, int day, std::size_t top_n) {
  std::vector<std::size_t> present;
  for (std::size_t i = 0; i < dists.size(); ++i)
    if (dists[i].freq_by_day[static_cast<std::size_t>(day)] > 0) present.push_back(i);
  std::sort(present.begin(), present.end(), [&](std::size_t a, std::size_t b) {
    const auto fa = dists[a].freq_by_day[static_cast<std::size_t>(day)];
    const auto fb = dists[b].freq_by_day[static_cast<std::size_t>(day)];
    if (fa != fb) return fa > fb;
    return dists[a].concept_id < dists[b].concept_id;
  });
  if (top_n && present.size() > top_n) present.resize(top_n);
  return present;
}

// Distributions must belong to one group. Pairs are keyed with
// concept_a < concept_b and sorted by co_days descending, then by names.
inline std::vector<CooccurrencePair> cooccurrence_pairs(const std::vector<DayDistribution>& dists,
                                                        std::size_t daily_top_n = 5) {
  if (daily_top_n == 1) throw std::invalid_argument("cooccurrence_pairs: daily_top_n must be >= 2 (or 0 for all)");
  std::map<std::pair<std::string, std::string>, std::size_t> co;
  for (int day = 0; day < kDays; ++day) {
    auto top = daily_top(dists, day, daily_top_n);
    for (std::size_t i = 0; i < top.size(); ++i)
      for (std::size_t j = i + 1; j < top.size(); ++j) {
        auto a = dists[top[i]].concept_id, b = dists[top[j]].concept_id;
        if (b < a) std::swap(a, b);
        ++co[{a, b}];
      }
  }
  std::map<std::string, std::size_t> days;
  Label group = dists.empty() ? Label::SSI : dists.front().group;
  for (const auto& d : dists) days[d.concept_id] = appeared_days(d);

  std::vector<CooccurrencePair> out;
  for (const auto& [key, n] : co)
    out.push_back({group, key.first, key.second, days[key.first], days[key.second], n});
  std::stable_sort(out.begin(), out.end(),
                   [](const CooccurrencePair& x, const CooccurrencePair& y) { return x.co_days > y.co_days; });
  return out;
}

enum class Period { Days0to10, Days11to21, Days22to30 };

struct PeriodRange {
  Period period;
  int first_day;
  int last_day;
  const char* label;
};

inline constexpr std::array<PeriodRange, 3> kPeriods = {{{Period::Days0to10, 0, 10, "0-10"},
                                                         {Period::Days11to21, 11, 21, "11-21"},
                                                         {Period::Days22to30, 22, 30, "22-30"}}};

inline Period parse_period(std::string_view s) {
  for (const auto& p : kPeriods)
    if (s == p.label) return p.period;
  throw DataError("invalid period '" + std::string(s) + "'");
}

inline const char* period_label(Period p) { return kPeriods[static_cast<std::size_t>(p)].label; }

struct PeriodSummary {
  Label group = Label::SSI;
  Period period = Period::Days0to10;
  std::vector<std::pair<std::string, std::size_t>> top;

  bool operator==(const PeriodSummary&) const = default;
};

inline std::size_t period_total(const DayDistribution& d, const PeriodRange& range) {
  std::size_t total = 0;
  for (int day = range.first_day; day <= range.last_day; ++day) total += d.freq_by_day[static_cast<std::size_t>(day)];
  return total;
}

// Top `top_n` concepts by total frequency in each period; zero totals are
// never listed.
inline std::vector<PeriodSummary> period_summary(const std::vector<DayDistribution>& dists, Label group,
                                                 std::size_t top_n = 5) {
  std::vector<PeriodSummary> out;
  for (const auto& range : kPeriods) {
    PeriodSummary s{group, range.period, {}};
    for (const auto& d : dists) {
      if (d.group != group) continue;
      if (auto t = period_total(d, range)) s.top.emplace_back(d.concept_id, t);
    }
    std::sort(s.top.begin(), s.top.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    if (s.top.size() > top_n) s.top.resize(top_n);
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Report formats

inline std::string write_distribution_csv(const std::vector<DayDistribution>& dists) {
  std::string out = "group,concept_id,day,freq\n";
  for (const auto& d : dists)
    for (int day = 0; day < kDays; ++day)
      csv::append_row(out, {std::string(to_string(d.group)), d.concept_id, std::to_string(day),
                            std::to_string(d.freq_by_day[static_cast<std::size_t>(day)])});
  return out;
}

inline std::string write_pairs_csv(const std::vector<CooccurrencePair>& pairs) {
  std::string out = "group,concept_a,days_a,concept_b,days_b,co_days\n";
  for (const auto& p : pairs)
    csv::append_row(out, {std::string(to_string(p.group)), p.concept_a, std::to_string(p.days_a), p.concept_b,
                          std::to_string(p.days_b), std::to_string(p.co_days)});
  return out;
}

inline std::vector<CooccurrencePair> parse_pairs_csv(std::string_view text, const std::string& source = "pairs") {
  csv::Table t(text, source);
  std::vector<CooccurrencePair> out;
  for (std::size_t i = 0; i < t.rows().size(); ++i) {
    const auto& r = t.rows()[i];
    const auto where = source + ":" + std::to_string(t.line_of(i));
    CooccurrencePair p{parse_label(r[t.column("group")]),
                       r[t.column("concept_a")],
                       r[t.column("concept_b")],
                       static_cast<std::size_t>(csv::parse_int(r[t.column("days_a")], where)),
                       static_cast<std::size_t>(csv::parse_int(r[t.column("days_b")], where)),
                       static_cast<std::size_t>(csv::parse_int(r[t.column("co_days")], where))};
    if (!(p.concept_a < p.concept_b)) throw DataError(where + ": pair must satisfy concept_a < concept_b");
    if (p.co_days > std::min(p.days_a, p.days_b) || std::max(p.days_a, p.days_b) > kDays)
      throw DataError(where + ": co_days must not exceed either concept's appeared days (<= 31)");
    out.push_back(std::move(p));
  }
  return out;
}

inline std::string write_periods_csv(const std::vector<PeriodSummary>& summaries) {
  std::string out = "group,period,rank,concept_id,total_freq\n";
  for (const auto& s : summaries)
    for (std::size_t i = 0; i < s.top.size(); ++i)
      csv::append_row(out, {std::string(to_string(s.group)), period_label(s.period), std::to_string(i + 1),
                            s.top[i].first, std::to_string(s.top[i].second)});
  return out;
}

// Rebuilds summaries (one per group and period that has rows) in file order.
inline std::vector<PeriodSummary> parse_periods_csv(std::string_view text, const std::string& source = "periods") {
  csv::Table t(text, source);
  std::vector<PeriodSummary> out;
  for (std::size_t i = 0; i < t.rows().size(); ++i) {
    const auto& r = t.rows()[i];
    const auto where = source + ":" + std::to_string(t.line_of(i));
    const Label group = parse_label(r[t.column("group")]);
    const Period period = parse_period(r[t.column("period")]);
    const auto rank = static_cast<std::size_t>(csv::parse_int(r[t.column("rank")], where));
    const auto total = static_cast<std::size_t>(csv::parse_int(r[t.column("total_freq")], where));
    if (out.empty() || out.back().group != group || out.back().period != period) out.push_back({group, period, {}});
    auto& s = out.back();
    if (rank != s.top.size() + 1) throw DataError(where + ": ranks must be consecutive from 1 within a period");
    if (!s.top.empty() && total > s.top.back().second)
      throw DataError(where + ": frequencies must be non-increasing within a period");
    s.top.emplace_back(r[t.column("concept_id")], total);
  }
  return out;
}

}  // namespace ssilex
