#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "fewshot/feature_store.hpp"
#include "fewshot/pipeline_config.hpp"
#include "fewshot/preprocessing.hpp"
#include "fewshot/task.hpp"

namespace fewshot {

/// Banks feeding an evaluation. `features` are novel-class banks, one per
/// backbone; `base` are the matching base-class banks used for inductive
/// centering. `support_means`, when non-empty, holds one matrix per feature
/// bank whose row p replaces every support vector of the class at bank
/// position p (the synthetic "pinned support" setting).
struct BankSet {
  std::vector<const FeatureBank*> features;
  std::vector<const FeatureBank*> base;
  std::vector<Matrix> support_means;
};

struct EvalSummary {
  double mean_accuracy = 0.0;
  double half_interval = 0.0;  // 1.96 * sample std / sqrt(n_runs); 0 for a single run
  std::uint32_t n_runs = 0;
  std::vector<double> per_run_accuracies;
  double wall_time_seconds = 0.0;
};

/// Fraction of queries whose prediction equals the hidden label.
double accuracy(std::span<const std::uint32_t> predictions, std::span<const std::uint32_t> labels);

/// Preprocesses the task, classifies with NCM or soft K-means per the mode,
/// and scores the predictions.
double run_accuracy(const Task& task, const PipelineConfig& config, const PreprocessStats* base_stats);

/// Predictions for a preprocessed task.
std::vector<std::uint32_t> classify(const Task& task, const PipelineConfig& config);

/// Mean accuracy and 95% half interval over config.n_runs episodes. Run r uses
/// episode seed derive_run_seed(global_seed, r); results are reduced in run
/// order, so the summary does not depend on the thread count.
EvalSummary evaluate(const BankSet& banks, const PipelineConfig& config);

EvalSummary summarize(std::vector<double> per_run, bool keep_per_run);

enum class SweepParam { Beta, Views, Backbones };

const char* to_string(SweepParam param);
SweepParam parse_sweep_param(const std::string& text);

struct SweepRow {
  double value = 0.0;
  PipelineConfig config;
  EvalSummary summary;
};

/// One evaluation per value with a shared global seed, so every value sees
/// the same episodes. Views sets the number of averaged views (1 is a single
/// view); Backbones concatenates the first b banks.
std::vector<SweepRow> sweep(const BankSet& banks, SweepParam param, std::span<const double> values,
                            const PipelineConfig& base_config);

// Reporting ---------------------------------------------------------------

nlohmann::json config_to_json(const PipelineConfig& config);
PipelineConfig config_from_json(const nlohmann::json& j);

/// {"mean", "interval", "runs", "interval_definition"} plus "seconds" when
/// `with_timing` and "per_run" when retained.
nlohmann::json summary_to_json(const EvalSummary& summary, bool with_timing);

/// method,mode,n,k,q,beta,runs,seed,mean,interval,seconds
std::string csv_header();
std::string csv_row(const PipelineConfig& config, const EvalSummary& summary);

}  // namespace fewshot
