#pragma once

// Case-level feature vectors (concept presence or regex patterns over note
// text) and stratified cross-validation of the decision tree with per-fold
// PMI feature selection.

#include <map>
#include <regex>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "ssilex/corpus.hpp"
#include "ssilex/csv.hpp"
#include "ssilex/dtree.hpp"
#include "ssilex/error.hpp"
#include "ssilex/lexicon.hpp"
#include "ssilex/tagger.hpp"

namespace ssilex {

struct FeatureSpec {
  enum class Kind { ConceptKeyword, RegexPattern };
  Kind kind = Kind::ConceptKeyword;
  std::string id;
  std::string pattern;     // RegexPattern
  std::string concept_id;  // ConceptKeyword

  static FeatureSpec concept_keyword(std::string concept_id) {
    return {Kind::ConceptKeyword, concept_id, {}, concept_id};
  }
  static FeatureSpec regex(std::string id, std::string pattern) {
    return {Kind::RegexPattern, std::move(id), std::move(pattern), {}};
  }
};

// JSON array of {"kind":"regex","id":..,"pattern":..} or
// {"kind":"concept","id":..,"concept_id":..}.
inline std::vector<FeatureSpec> parse_feature_specs(const std::string& text, const std::string& source = "features") {
  std::vector<FeatureSpec> out;
  try {
    auto j = nlohmann::json::parse(text);
    if (!j.is_array()) throw DataError(source + ": expected a JSON array of feature specs");
    for (const auto& f : j) {
      const auto kind = f.at("kind").get<std::string>();
      if (kind == "regex") {
        auto spec = FeatureSpec::regex(f.at("id").get<std::string>(), f.at("pattern").get<std::string>());
        try {
          std::regex re(spec.pattern);
        } catch (const std::regex_error& e) {
          throw DataError(source + ": pattern '" + spec.pattern + "' does not compile: " + e.what());
        }
        out.push_back(std::move(spec));
      } else if (kind == "concept") {
        auto spec = FeatureSpec::concept_keyword(f.at("concept_id").get<std::string>());
        spec.id = f.value("id", spec.concept_id);
        out.push_back(std::move(spec));
      } else {
        throw DataError(source + ": unknown feature kind '" + kind + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(source + ": " + e.what());
  }
  return out;
}

inline std::vector<FeatureSpec> load_feature_specs(const std::string& path) {
  return parse_feature_specs(csv::read_file(path), path);
}

// Concept features are true when the case has at least one mention of the
// concept in `mentions` (expected to be the filtered view). Regex features
// search the lowercased raw text of every allowed section of every note in
// the cohort (expected to be window-filtered). One instance per case, in
// cohort order.
inline std::vector<Instance> build_instances(const Cohort& cohort, const std::vector<ConceptMention>& mentions,
                                             const std::vector<FeatureSpec>& specs, const FilterConfig& sections) {
  const auto index = index_cases(cohort);
  std::vector<Instance> out(cohort.cases.size());
  for (std::size_t i = 0; i < cohort.cases.size(); ++i) {
    out[i].case_id = cohort.cases[i].case_id;
    out[i].label = cohort.cases[i].label;
    out[i].features.assign(specs.size(), false);
  }

  std::unordered_map<std::string, std::vector<std::size_t>> concept_slots;
  std::vector<std::pair<std::size_t, std::regex>> regexes;
  for (std::size_t f = 0; f < specs.size(); ++f) {
    if (specs[f].kind == FeatureSpec::Kind::ConceptKeyword) {
      concept_slots[specs[f].concept_id].push_back(f);
    } else {
      try {
        regexes.emplace_back(f, std::regex(specs[f].pattern));
      } catch (const std::regex_error& e) {
        throw DataError("feature '" + specs[f].id + "': pattern does not compile: " + e.what());
      }
    }
  }

  for (const auto& m : mentions) {
    auto slot = concept_slots.find(m.concept_id);
    if (slot == concept_slots.end()) continue;
    auto it = index.find(m.case_id);
    if (it == index.end()) throw DataError("mention references unknown case '" + m.case_id + "'");
    for (auto f : slot->second) out[it->second].features[f] = true;
  }

  if (!regexes.empty()) {
    for (const auto& note : cohort.notes) {
      auto it = index.find(note.case_id);
      if (it == index.end()) continue;
      auto& inst = out[it->second];
      for (const auto& section : note.sections) {
        if (!sections.section_allowed(section.heading)) continue;
        std::string lowered = section.text;
        for (auto& ch : lowered) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
        for (const auto& [f, re] : regexes)
          if (!inst.features[f] && std::regex_search(lowered, re)) inst.features[f] = true;
      }
    }
  }
  return out;
}

struct Confusion {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;

  std::size_t total() const { return tp + fp + fn + tn; }
  // Zero when nothing was predicted positive.
  double precision() const { return tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0; }
  double recall() const { return tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0; }
  double f1() const {
    const double p = precision(), r = recall();
    return p + r > 0 ? 2 * p * r / (p + r) : 0.0;
  }
  void add(Label truth, Label predicted) {
    if (truth == Label::SSI)
      (predicted == Label::SSI ? tp : fn) += 1;
    else
      (predicted == Label::SSI ? fp : tn) += 1;
  }
  Confusion& operator+=(const Confusion& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
  bool operator==(const Confusion&) const = default;
};

struct FeatureSource {
  enum class Kind { PmiTopK, ExpertRegex };
  Kind kind = Kind::PmiTopK;
  std::size_t k = 1;                // PmiTopK
  std::vector<FeatureSpec> fixed;   // ExpertRegex (any fixed feature list)

  static FeatureSource pmi(std::size_t k) { return {Kind::PmiTopK, k, {}}; }
  static FeatureSource expert(std::vector<FeatureSpec> specs) {
    return {Kind::ExpertRegex, specs.size(), std::move(specs)};
  }
  std::string name() const { return kind == Kind::PmiTopK ? "pmi" : "expert"; }
};

struct CvConfig {
  std::size_t folds = 10;
  std::uint64_t seed = 1;
  double confidence = 0.25;
  std::size_t min_leaf = 2;
  // Rank features once on the whole cohort instead of per training split.
  bool global_ranking = false;
  FilterConfig sections;  // allowed sections for regex features
};

struct FoldResult {
  std::size_t fold = 0;
  Confusion confusion;
  std::vector<std::string> features;
};

struct CvReport {
  std::string feature_source;
  std::size_t k = 0;
  std::vector<FoldResult> folds;
  Confusion pooled;
  double mean_precision = 0.0;
  double mean_recall = 0.0;
  double mean_f1 = 0.0;
  // No instance was ever predicted SSI; precision is reported as 0.
  bool zero_predicted_positive = false;
};

// Top-k concepts by inequality score computed only from the cases in
// `training_cases`.
inline std::vector<std::string> select_pmi_features(const Cohort& cohort, const std::vector<ConceptMention>& mentions,
                                                    const std::vector<std::size_t>& training_cases, std::size_t k) {
  Cohort train;
  train.cases.reserve(training_cases.size());
  std::unordered_set<std::string> ids;
  for (auto i : training_cases) {
    train.cases.push_back(cohort.cases[i]);
    ids.insert(cohort.cases[i].case_id);
  }
  std::vector<ConceptMention> train_mentions;
  for (const auto& m : mentions)
    if (ids.count(m.case_id)) train_mentions.push_back(m);
  auto ranking = rank_concepts(count_contingency(train_mentions, train));
  std::vector<std::string> out;
  for (std::size_t i = 0; i < ranking.size() && i < k; ++i) out.push_back(ranking[i].concept_id);
  return out;
}

inline CvReport cross_validate(const Cohort& cohort, const std::vector<ConceptMention>& mentions,
                               const FeatureSource& source, const CvConfig& cfg) {
  std::vector<Label> labels;
  for (const auto& c : cohort.cases) labels.push_back(c.label);
  const auto folds = stratified_kfold(labels, cfg.folds, cfg.seed);

  CvReport report;
  report.feature_source = source.name();
  report.k = source.kind == FeatureSource::Kind::PmiTopK ? source.k : source.fixed.size();

  std::vector<std::string> global;
  if (source.kind == FeatureSource::Kind::PmiTopK && cfg.global_ranking) {
    std::vector<std::size_t> all(cohort.cases.size());
    std::iota(all.begin(), all.end(), 0);
    global = select_pmi_features(cohort, mentions, all, source.k);
  }

  std::vector<Instance> fixed_instances;
  if (source.kind == FeatureSource::Kind::ExpertRegex)
    fixed_instances = build_instances(cohort, mentions, source.fixed, cfg.sections);

  std::vector<char> in_test(cohort.cases.size());
  for (std::size_t f = 0; f < folds.folds.size(); ++f) {
    std::fill(in_test.begin(), in_test.end(), 0);
    for (auto i : folds.folds[f]) in_test[i] = 1;
    std::vector<std::size_t> train_rows;
    for (std::size_t i = 0; i < cohort.cases.size(); ++i)
      if (!in_test[i]) train_rows.push_back(i);

    FoldResult fold{f, {}, {}};
    std::vector<Instance> instances;
    if (source.kind == FeatureSource::Kind::PmiTopK) {
      fold.features = cfg.global_ranking ? global : select_pmi_features(cohort, mentions, train_rows, source.k);
      std::vector<FeatureSpec> specs;
      for (const auto& id : fold.features) specs.push_back(FeatureSpec::concept_keyword(id));
      instances = build_instances(cohort, mentions, specs, cfg.sections);
    } else {
      for (const auto& s : source.fixed) fold.features.push_back(s.id);
      instances = fixed_instances;
    }

    std::vector<Instance> training;
    training.reserve(train_rows.size());
    for (auto i : train_rows) training.push_back(instances[i]);
    auto tree = prune(dtc(training, cfg.min_leaf), training, cfg.confidence);
    for (auto i : folds.folds[f]) fold.confusion.add(instances[i].label, classify(tree, instances[i].features));
    report.pooled += fold.confusion;
    report.folds.push_back(std::move(fold));
  }

  for (const auto& f : report.folds) {
    report.mean_precision += f.confusion.precision();
    report.mean_recall += f.confusion.recall();
    report.mean_f1 += f.confusion.f1();
  }
  const double n = static_cast<double>(report.folds.size());
  report.mean_precision /= n;
  report.mean_recall /= n;
  report.mean_f1 /= n;
  report.zero_predicted_positive = report.pooled.tp + report.pooled.fp == 0;
  return report;
}

// ---------------------------------------------------------------------------
// Report formats

inline constexpr const char* kCvHeader = "feature_source,k,fold,tp,fp,fn,tn,precision,recall,f1";

// Per-fold rows, then a "pooled" row (micro-averaged) and a "mean" row
// (fold-averaged P/R/F1 with summed confusion counts).
inline void append_cv_rows(std::string& out, const CvReport& r) {
  auto row = [&](const std::string& fold, const Confusion& c, double p, double rc, double f1) {
    csv::append_row(out, {r.feature_source, std::to_string(r.k), fold, std::to_string(c.tp), std::to_string(c.fp),
                          std::to_string(c.fn), std::to_string(c.tn), csv::format_fixed(p, 4),
                          csv::format_fixed(rc, 4), csv::format_fixed(f1, 4)});
  };
  for (const auto& f : r.folds)
    row(std::to_string(f.fold), f.confusion, f.confusion.precision(), f.confusion.recall(), f.confusion.f1());
  row("pooled", r.pooled, r.pooled.precision(), r.pooled.recall(), r.pooled.f1());
  row("mean", r.pooled, r.mean_precision, r.mean_recall, r.mean_f1);
}

inline std::string write_cv_csv(const std::vector<CvReport>& reports) {
  std::string out = std::string(kCvHeader) + "\n";
  for (const auto& r : reports) append_cv_rows(out, r);
  return out;
}

inline std::string write_cv_json(const std::vector<CvReport>& reports) {
  auto arr = nlohmann::ordered_json::array();
  auto confusion = [](const Confusion& c) {
    nlohmann::ordered_json j;
    j["tp"] = c.tp;
    j["fp"] = c.fp;
    j["fn"] = c.fn;
    j["tn"] = c.tn;
    return j;
  };
  for (const auto& r : reports) {
    nlohmann::ordered_json j;
    j["feature_source"] = r.feature_source;
    j["k"] = r.k;
    auto folds = nlohmann::ordered_json::array();
    for (const auto& f : r.folds) {
      nlohmann::ordered_json fj;
      fj["fold"] = f.fold;
      fj["features"] = f.features;
      fj["confusion"] = confusion(f.confusion);
      fj["precision"] = f.confusion.precision();
      fj["recall"] = f.confusion.recall();
      fj["f1"] = f.confusion.f1();
      folds.push_back(std::move(fj));
    }
    j["folds"] = std::move(folds);
    nlohmann::ordered_json pooled = confusion(r.pooled);
    pooled["precision"] = r.pooled.precision();
    pooled["recall"] = r.pooled.recall();
    pooled["f1"] = r.pooled.f1();
    j["pooled"] = std::move(pooled);
    nlohmann::ordered_json mean;
    mean["precision"] = r.mean_precision;
    mean["recall"] = r.mean_recall;
    mean["f1"] = r.mean_f1;
    j["fold_mean"] = std::move(mean);
    j["zero_predicted_positive"] = r.zero_predicted_positive;
    arr.push_back(std::move(j));
  }
  return arr.dump(2) + "\n";
}

}  // namespace ssilex
