#pragma once

// Pipeline stages behind the CLI subcommands. Each stage renders its outputs
// into memory; commit_outputs writes them and removes everything it wrote if
// any write fails.

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ssilex/classify.hpp"
#include "ssilex/corpus.hpp"
#include "ssilex/lexicon.hpp"
#include "ssilex/synthetic.hpp"
#include "ssilex/tagger.hpp"
#include "ssilex/temporal.hpp"

namespace ssilex {

// file name -> contents
using OutputFiles = std::map<std::string, std::string>;

inline void commit_outputs(const OutputFiles& files, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  const bool created_dir = !fs::exists(dir);
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory " + dir.string() + ": " + ec.message());
  std::vector<fs::path> written;
  try {
    for (const auto& [name, contents] : files) {
      const auto path = dir / name;
      std::ofstream out(path, std::ios::binary | std::ios::trunc);
      if (!out) throw DataError("cannot write " + path.string());
      written.push_back(path);
      out << contents;
      out.close();
      if (!out) throw DataError("write failed for " + path.string());
    }
  } catch (...) {
    for (const auto& p : written) fs::remove(p, ec);
    if (created_dir) fs::remove(dir, ec);
    throw;
  }
}

namespace files {
inline constexpr const char* kCohort = "cohort.jsonl";
inline constexpr const char* kGroundTruth = "ground_truth.jsonl";
inline constexpr const char* kMentionsAll = "mentions_all.csv";
inline constexpr const char* kMentionsFiltered = "mentions_filtered.csv";
inline constexpr const char* kRanking = "ranking.csv";
inline constexpr const char* kPrecision = "precision_at_k.csv";
inline constexpr const char* kDistribution = "day_distribution.csv";
inline constexpr const char* kPairs = "cooccurrence_pairs.csv";
inline constexpr const char* kPeriods = "period_summary.csv";
inline constexpr const char* kCvCsv = "cv_report.csv";
inline constexpr const char* kCvJson = "cv_report.json";
}  // namespace files

inline OutputFiles run_gen(const SyntheticSpec& spec) {
  auto synthetic = generate_synthetic(spec);
  return {{files::kCohort, write_cohort(synthetic.cohort)},
          {files::kGroundTruth, write_ground_truth(synthetic.ground_truth)}};
}

inline OutputFiles run_tag(const Cohort& cohort, const Dictionary& dict, const FilterConfig& cfg, DayWindow window) {
  const auto all = tag_cohort(window_filter(cohort, window), dict, cfg);
  return {{files::kMentionsAll, write_mentions_csv(all)},
          {files::kMentionsFiltered, write_mentions_csv(filter_view(all, cfg))}};
}

inline OutputFiles run_rank(const std::vector<RankedConcept>& ranking, const Judgments* judgments,
                            const std::vector<std::size_t>& ks = {10, 20, 30}) {
  OutputFiles out{{files::kRanking, write_ranking_csv(ranking)}};
  if (judgments) out[files::kPrecision] = write_precision_csv(precision_table(ranking, *judgments, ks));
  return out;
}

inline OutputFiles run_rank(const std::vector<ConceptMention>& filtered, const Cohort& cohort,
                            const Judgments* judgments, const std::vector<std::size_t>& ks = {10, 20, 30}) {
  return run_rank(rank_concepts(count_contingency(filtered, cohort)), judgments, ks);
}

struct TemporalOptions {
  std::size_t daily_top_n = 5;  // 0 lifts the per-day restriction
  std::size_t concepts_top_k = 30;  // 0 selects every observed concept
  std::size_t period_top_n = 5;
};

inline OutputFiles run_temporal(const std::vector<ConceptMention>& filtered, const Cohort& cohort,
                                const TemporalOptions& opt) {
  std::set<std::string> selected;
  if (opt.concepts_top_k == 0) {
    for (const auto& m : filtered) selected.insert(m.concept_id);
  } else {
    auto ranking = rank_concepts(count_contingency(filtered, cohort));
    for (std::size_t i = 0; i < ranking.size() && i < opt.concepts_top_k; ++i) selected.insert(ranking[i].concept_id);
  }
  std::vector<DayDistribution> all_dists;
  std::vector<CooccurrencePair> all_pairs;
  std::vector<PeriodSummary> all_periods;
  for (Label group : {Label::SSI, Label::NonSSI}) {
    auto dists = day_frequencies(filtered, cohort, group, selected);
    auto pairs = cooccurrence_pairs(dists, opt.daily_top_n);
    auto periods = period_summary(dists, group, opt.period_top_n);
    all_dists.insert(all_dists.end(), dists.begin(), dists.end());
    all_pairs.insert(all_pairs.end(), pairs.begin(), pairs.end());
    all_periods.insert(all_periods.end(), periods.begin(), periods.end());
  }
  return {{files::kDistribution, write_distribution_csv(all_dists)},
          {files::kPairs, write_pairs_csv(all_pairs)},
          {files::kPeriods, write_periods_csv(all_periods)}};
}

inline OutputFiles run_classify(const Cohort& cohort, const std::vector<ConceptMention>& filtered,
                                const std::vector<FeatureSource>& sources, const CvConfig& cfg, DayWindow window) {
  const Cohort windowed = window_filter(cohort, window);
  std::vector<CvReport> reports;
  for (const auto& s : sources) reports.push_back(cross_validate(windowed, filtered, s, cfg));
  return {{files::kCvCsv, write_cv_csv(reports)}, {files::kCvJson, write_cv_json(reports)}};
}

// Parses "pmi:<k>", "pmi:<a>-<b>" or "expert:<file>".
inline std::vector<FeatureSource> parse_feature_argument(const std::string& arg) {
  const auto colon = arg.find(':');
  if (colon == std::string::npos) throw std::invalid_argument("--features expects pmi:<k> or expert:<file>");
  const std::string kind = arg.substr(0, colon), value = arg.substr(colon + 1);
  if (kind == "expert") return {FeatureSource::expert(load_feature_specs(value))};
  if (kind != "pmi") throw std::invalid_argument("--features kind must be pmi or expert, got '" + kind + "'");
  auto to_k = [&](const std::string& s) {
    std::size_t pos = 0;
    long long k = -1;
    try {
      k = std::stoll(s, &pos);
    } catch (const std::exception&) {
    }
    if (k < 1 || pos != s.size()) throw std::invalid_argument("invalid feature count '" + s + "' in " + arg);
    return static_cast<std::size_t>(k);
  };
  const auto dash = value.find('-');
  if (dash == std::string::npos) return {FeatureSource::pmi(to_k(value))};
  const auto lo = to_k(value.substr(0, dash)), hi = to_k(value.substr(dash + 1));
  if (lo > hi) throw std::invalid_argument("empty feature range in " + arg);
  std::vector<FeatureSource> out;
  for (auto k = lo; k <= hi; ++k) out.push_back(FeatureSource::pmi(k));
  return out;
}

// ---------------------------------------------------------------------------
// pipeline

struct RunConfig {
  std::filesystem::path cohort;          // either cohort ...
  std::filesystem::path synthetic_spec;  // ... or a generator spec
  std::filesystem::path dictionary;
  std::filesystem::path filters;  // optional: built-in defaults when empty
  std::filesystem::path judgments;  // optional
  std::filesystem::path expert_features;  // optional
  DayWindow window;
  std::vector<std::size_t> precision_ks{10, 20, 30};
  std::vector<std::size_t> pmi_ks{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  TemporalOptions temporal;
  CvConfig cv;
  std::filesystem::path output_dir;
};

// Relative paths are resolved against the config file's directory.
inline RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base,
                                  const std::string& source = "run config") {
  namespace fs = std::filesystem;
  RunConfig cfg;
  try {
    auto j = nlohmann::json::parse(text);
    auto path = [&](const char* key, bool required) -> fs::path {
      if (!j.contains(key)) {
        if (required) throw DataError(source + ": missing '" + key + "'");
        return {};
      }
      fs::path p = j.at(key).get<std::string>();
      if (p.is_relative()) p = base / p;
      if (std::string(key) != "output_dir" && !fs::exists(p))
        throw DataError(source + ": " + key + " path does not exist: " + p.string());
      return p;
    };
    cfg.cohort = path("cohort", false);
    cfg.synthetic_spec = path("synthetic_spec", false);
    if (cfg.cohort.empty() == cfg.synthetic_spec.empty())
      throw DataError(source + ": exactly one of 'cohort' or 'synthetic_spec' is required");
    cfg.dictionary = path("dictionary", true);
    cfg.filters = path("filters", false);
    cfg.judgments = path("judgments", false);
    cfg.expert_features = path("expert_features", false);
    cfg.output_dir = path("output_dir", true);
    if (j.contains("window")) {
      cfg.window = {j.at("window").at(0).get<int>(), j.at("window").at(1).get<int>()};
      if (cfg.window.min_day > cfg.window.max_day) throw DataError(source + ": window min exceeds max");
    }
    if (j.contains("precision_k")) cfg.precision_ks = j.at("precision_k").get<std::vector<std::size_t>>();
    if (j.contains("pmi_k")) cfg.pmi_ks = j.at("pmi_k").get<std::vector<std::size_t>>();
    if (j.contains("temporal")) {
      const auto& t = j.at("temporal");
      cfg.temporal.daily_top_n = t.value("daily_top_n", cfg.temporal.daily_top_n);
      cfg.temporal.concepts_top_k = t.value("concepts_top_k", cfg.temporal.concepts_top_k);
      if (t.value("all_pairs", false)) cfg.temporal.daily_top_n = 0;
    }
    if (j.contains("cv")) {
      const auto& c = j.at("cv");
      cfg.cv.folds = c.value("folds", cfg.cv.folds);
      cfg.cv.seed = c.value("seed", cfg.cv.seed);
      cfg.cv.confidence = c.value("confidence", cfg.cv.confidence);
      cfg.cv.min_leaf = c.value("min_leaf", cfg.cv.min_leaf);
      cfg.cv.global_ranking = c.value("global_ranking", cfg.cv.global_ranking);
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(source + ": " + e.what());
  }
  return cfg;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  return parse_run_config(csv::read_file(path.string()), path.parent_path(), path.string());
}

// Runs gen (when configured), tag, rank, temporal and classify. Later stages
// consume the serialized outputs of earlier ones, exactly as the individual
// subcommands would read them from disk.
inline OutputFiles run_pipeline(const RunConfig& cfg) {
  OutputFiles out;
  Cohort cohort;
  if (!cfg.synthetic_spec.empty()) {
    auto spec = parse_synthetic_spec(csv::read_file(cfg.synthetic_spec.string()), cfg.synthetic_spec.string());
    out.merge(run_gen(spec));
    cohort = parse_cohort(out.at(files::kCohort));
  } else {
    cohort = load_cohort(cfg.cohort.string());
  }
  const auto dict = load_dictionary(cfg.dictionary.string());
  const auto filters = cfg.filters.empty() ? FilterConfig{} : load_filter_config(cfg.filters.string());
  out.merge(run_tag(cohort, dict, filters, cfg.window));
  const auto filtered = parse_mentions_csv(out.at(files::kMentionsFiltered), files::kMentionsFiltered);

  std::optional<Judgments> judgments;
  if (!cfg.judgments.empty()) judgments = load_judgments_csv(cfg.judgments.string());
  out.merge(run_rank(filtered, cohort, judgments ? &*judgments : nullptr, cfg.precision_ks));
  out.merge(run_temporal(filtered, cohort, cfg.temporal));

  std::vector<FeatureSource> sources;
  for (auto k : cfg.pmi_ks) sources.push_back(FeatureSource::pmi(k));
  if (!cfg.expert_features.empty())
    sources.push_back(FeatureSource::expert(load_feature_specs(cfg.expert_features.string())));
  CvConfig cv = cfg.cv;
  cv.sections = filters;
  out.merge(run_classify(cohort, filtered, sources, cv, cfg.window));
  return out;
}

}  // namespace ssilex
