// ssilex: keyword lexicon generation and validation for surgical site
// infection from sectioned clinical notes.
//
// Exit status: 0 success, 1 usage error, 2 data/validation error,
// 3 internal error.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ssilex/commands.hpp"

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kInternal = 3 };

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

}  // namespace

int main(int argc, char** argv) {
  using namespace ssilex;
  CLI::App app{"Keyword lexicon generation, temporal analysis and decision-tree validation for SSI detection"};
  app.require_subcommand(1);

  DayWindow window;
  auto add_window = [&](CLI::App* cmd) {
    cmd->add_option("--min-day", window.min_day, "First postsurgical day kept (inclusive)")->capture_default_str();
    cmd->add_option("--max-day", window.max_day, "Last postsurgical day kept (inclusive)")->capture_default_str();
  };

  std::string out_dir;

  // gen
  std::string spec_path;
  auto* gen = app.add_subcommand("gen", "Generate a seeded synthetic cohort and its ground-truth sidecar");
  gen->add_option("--spec", spec_path, "Synthetic cohort spec (JSON)")->required();
  gen->add_option("--out", out_dir, "Output directory")->required();

  // tag
  std::string cohort_path, dict_path, filters_path;
  auto* tag = app.add_subcommand("tag", "Tag concept mentions and write full and filtered mention CSVs");
  tag->add_option("--cohort", cohort_path, "Cohort JSONL")->required();
  tag->add_option("--dict", dict_path, "Dictionary (term<TAB>concept_id)")->required();
  tag->add_option("--filters", filters_path, "Filter config JSON (defaults built in)");
  tag->add_option("--out", out_dir, "Output directory")->required();
  add_window(tag);

  // rank
  std::string mentions_path, judgments_path, ranking_path;
  auto* rank = app.add_subcommand("rank", "Rank concepts by inequality score; optionally compute precision@k");
  auto* rank_mentions = rank->add_option("--mentions", mentions_path, "Filtered mention CSV");
  auto* rank_cohort = rank->add_option("--cohort", cohort_path, "Cohort JSONL");
  auto* rank_fixture =
      rank->add_option("--ranking", ranking_path, "Existing ranking CSV to evaluate instead of recomputing");
  rank_fixture->excludes(rank_mentions)->excludes(rank_cohort);
  rank_mentions->needs(rank_cohort);
  rank_cohort->needs(rank_mentions);
  rank->add_option("--judgments", judgments_path, "Expert judgments CSV (concept_id,degree)");
  rank->add_option("--out", out_dir, "Output directory")->required();

  // temporal
  TemporalOptions topt;
  bool all_pairs = false;
  auto* temporal = app.add_subcommand("temporal", "Day distributions, co-occurrence pairs and period summaries");
  temporal->add_option("--mentions", mentions_path, "Filtered mention CSV")->required();
  temporal->add_option("--cohort", cohort_path, "Cohort JSONL")->required();
  temporal->add_option("--top", topt.daily_top_n, "Concepts per day considered for pairs")->capture_default_str();
  temporal->add_option("--concepts", topt.concepts_top_k, "Top-k PMI concepts analyzed (0 = all)")
      ->capture_default_str();
  temporal->add_flag("--all-pairs", all_pairs, "Count pairs among all concepts present each day");
  temporal->add_option("--out", out_dir, "Output directory")->required();

  // classify
  std::vector<std::string> feature_args;
  CvConfig cv;
  auto* classify_cmd = app.add_subcommand("classify", "Stratified cross-validation of the decision tree");
  classify_cmd->add_option("--cohort", cohort_path, "Cohort JSONL")->required();
  classify_cmd->add_option("--mentions", mentions_path, "Filtered mention CSV")->required();
  classify_cmd->add_option("--features", feature_args, "pmi:<k>, pmi:<a>-<b> or expert:<file> (repeatable)")
      ->required();
  classify_cmd->add_option("--filters", filters_path, "Filter config JSON (allowed sections for regex features)");
  classify_cmd->add_option("--folds", cv.folds, "Number of folds")->capture_default_str();
  classify_cmd->add_option("--seed", cv.seed, "Fold assignment seed")->capture_default_str();
  classify_cmd->add_option("--confidence", cv.confidence, "Pruning confidence")->capture_default_str();
  classify_cmd->add_option("--min-leaf", cv.min_leaf, "Minimum instances per leaf")->capture_default_str();
  classify_cmd->add_flag("--global-ranking", cv.global_ranking, "Rank features once on the whole cohort");
  classify_cmd->add_option("--out", out_dir, "Output directory")->required();
  add_window(classify_cmd);

  // pipeline
  std::string config_path;
  auto* pipeline = app.add_subcommand("pipeline", "Run gen/tag/rank/temporal/classify from one config");
  pipeline->add_option("--config", config_path, "Run config JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "ssilex: " << e.what() << "\n";
    return kUsage;
  }

  try {
    if (window.min_day > window.max_day) throw UsageError("--min-day must not exceed --max-day");
    auto load_filters = [&] { return filters_path.empty() ? FilterConfig{} : load_filter_config(filters_path); };

    OutputFiles outputs;
    std::filesystem::path target = out_dir;
    if (*gen) {
      outputs = run_gen(parse_synthetic_spec(csv::read_file(spec_path), spec_path));
    } else if (*tag) {
      outputs = run_tag(load_cohort(cohort_path), load_dictionary(dict_path), load_filters(), window);
    } else if (*rank) {
      std::optional<Judgments> judgments;
      if (!judgments_path.empty()) judgments = load_judgments_csv(judgments_path);
      const Judgments* j = judgments ? &*judgments : nullptr;
      if (!ranking_path.empty())
        outputs = run_rank(load_ranking_csv(ranking_path), j);
      else if (!mentions_path.empty())
        outputs = run_rank(load_mentions_csv(mentions_path), load_cohort(cohort_path), j);
      else
        throw UsageError("rank needs either --ranking or --mentions with --cohort");
    } else if (*temporal) {
      if (all_pairs) topt.daily_top_n = 0;
      if (topt.daily_top_n == 1) throw UsageError("--top must be at least 2");
      outputs = run_temporal(load_mentions_csv(mentions_path), load_cohort(cohort_path), topt);
    } else if (*classify_cmd) {
      std::vector<FeatureSource> sources;
      for (const auto& arg : feature_args) {
        try {
          auto parsed = parse_feature_argument(arg);
          sources.insert(sources.end(), parsed.begin(), parsed.end());
        } catch (const std::invalid_argument& e) {
          throw UsageError(e.what());
        }
      }
      if (cv.folds < 2) throw UsageError("--folds must be at least 2");
      if (!(cv.confidence > 0.0 && cv.confidence < 0.5)) throw UsageError("--confidence must lie in (0, 0.5)");
      if (cv.min_leaf < 1) throw UsageError("--min-leaf must be at least 1");
      cv.sections = load_filters();
      outputs = run_classify(load_cohort(cohort_path), load_mentions_csv(mentions_path), sources, cv, window);
    } else if (*pipeline) {
      auto cfg = load_run_config(config_path);
      target = cfg.output_dir;
      outputs = run_pipeline(cfg);
    }
    commit_outputs(outputs, target);
  } catch (const UsageError& e) {
    std::cerr << "ssilex: " << e.what() << "\n";
    return kUsage;
  } catch (const DataError& e) {
    std::cerr << "ssilex: " << e.what() << "\n";
    return kData;
  } catch (const std::invalid_argument& e) {
    // raised by library preconditions, e.g. more folds than cases
    std::cerr << "ssilex: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "ssilex: internal error: " << e.what() << "\n";
    return kInternal;
  }
  return kOk;
}
