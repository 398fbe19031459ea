#include "fewshot/evaluator.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "fewshot/classifiers.hpp"
#include "fewshot/errors.hpp"
#include "fewshot/rng.hpp"
#include "fewshot/sampler.hpp"

namespace fewshot {

namespace {

constexpr double kZ95 = 1.96;

void check_config(const PipelineConfig& config) {
  if (config.n < 2) throw Error(ErrorCode::ConfigError, "tasks need at least 2 ways");
  if (config.k < 1) throw Error(ErrorCode::ConfigError, "tasks need at least 1 shot");
  if (config.n_runs < 1) throw Error(ErrorCode::ConfigError, "runs must be at least 1");
  if (config.imbalance) {
    if (config.imbalance->q_total < config.n) {
      throw Error(ErrorCode::ConfigError, "q_total must be at least the number of ways");
    }
    if (!(config.imbalance->dirichlet_a > 0.0)) {
      throw Error(ErrorCode::ConfigError, "dirichlet_a must be positive");
    }
  } else if (config.q < 1) {
    throw Error(ErrorCode::ConfigError, "tasks need at least 1 query per class");
  }
  if (config.mode == Mode::Transductive && (!(config.beta > 0.0) || !std::isfinite(config.beta))) {
    throw Error(ErrorCode::ConfigError, "beta must be positive");
  }
  if (!(config.shift_tol >= 0.0)) throw Error(ErrorCode::ConfigError, "shift_tol must be non-negative");
}

void check_compatible(std::span<const FeatureBank* const> banks, const char* what) {
  for (std::size_t b = 1; b < banks.size(); ++b) {
    const auto report = check_ensemble_compatible(*banks.front(), *banks[b]);
    if (!report.empty()) {
      throw Error(ErrorCode::IncompatibleBanks, std::string(what) + " bank " + std::to_string(b) + ": " +
                                                    report.front().message);
    }
  }
}

// Evaluation inputs after bank selection and validation.
struct Prepared {
  std::vector<const FeatureBank*> banks;
  std::uint32_t views_used = 1;
  std::optional<PreprocessStats> base_stats;
  std::optional<Matrix> support_means;
};

Prepared prepare(const BankSet& set, const PipelineConfig& config) {
  check_config(config);
  if (set.features.empty()) throw Error(ErrorCode::ConfigError, "no feature banks given");
  for (const auto* b : set.features) {
    if (b == nullptr) throw Error(ErrorCode::ConfigError, "null feature bank");
  }
  if (config.use_E && set.features.size() < 2) {
    throw Error(ErrorCode::ConfigError, "the ensemble step (E) needs at least 2 feature banks");
  }
  if (!config.use_E && set.features.size() > 1) {
    throw Error(ErrorCode::ConfigError, "several feature banks given but the ensemble step (E) is off");
  }

  Prepared p;
  p.banks = set.features;
  check_compatible(p.banks, "feature");

  const std::uint32_t n_views = p.banks.front()->n_views();
  if (config.use_AS) {
    p.views_used = config.views == 0 ? n_views : config.views;
    if (p.views_used > n_views) {
      throw Error(ErrorCode::ConfigError, "asked for " + std::to_string(p.views_used) +
                                              " views but the banks hold " + std::to_string(n_views));
    }
  }

  Eigen::Index dim = 0;
  for (const auto* b : p.banks) dim += b->dim();

  if (config.mode == Mode::Inductive && config.use_C) {
    if (set.base.size() < p.banks.size()) {
      throw Error(ErrorCode::ConfigError, "inductive centering needs one base bank per feature bank");
    }
    std::vector<const FeatureBank*> base(set.base.begin(), set.base.begin() + static_cast<long>(p.banks.size()));
    for (std::size_t b = 0; b < base.size(); ++b) {
      if (base[b]->dim() != p.banks[b]->dim()) {
        throw Error(ErrorCode::DimensionMismatch, "base bank " + std::to_string(b) + " dimension differs from its feature bank");
      }
    }
    const std::uint32_t base_views = config.use_AS ? base.front()->n_views() : 1;
    p.base_stats = compute_base_stats(base, base_views);
  }

  if (!set.support_means.empty()) {
    if (set.support_means.size() < p.banks.size()) {
      throw Error(ErrorCode::ConfigError, "pinned support means must be given for every feature bank");
    }
    Matrix means(static_cast<Eigen::Index>(p.banks.front()->n_classes()), dim);
    Eigen::Index offset = 0;
    for (std::size_t b = 0; b < p.banks.size(); ++b) {
      const auto& m = set.support_means[b];
      if (m.rows() != means.rows() || m.cols() != p.banks[b]->dim()) {
        throw Error(ErrorCode::DimensionMismatch, "pinned support means do not match bank " + std::to_string(b));
      }
      means.middleCols(offset, m.cols()) = m;
      offset += m.cols();
    }
    p.support_means = std::move(means);
  }
  return p;
}

double evaluate_run(const Prepared& p, const PipelineConfig& config, std::uint32_t run_index) {
  const std::uint64_t seed = derive_run_seed(config.global_seed, run_index);
  const FeatureBank& layout = *p.banks.front();
  const Episode episode = config.imbalance ? sample_imbalanced_episode(layout, config.n, config.k, *config.imbalance, seed)
                                           : sample_episode(layout, config.n, config.k, config.q, seed);
  Task task = build_task(episode, p.banks, p.views_used);
  if (p.support_means) {
    for (std::size_t i = 0; i < task.support.size(); ++i) {
      task.support[i].rowwise() = p.support_means->row(episode.classes[i]);
    }
  }
  return run_accuracy(task, config, p.base_stats ? &*p.base_stats : nullptr);
}

}  // namespace

double accuracy(std::span<const std::uint32_t> predictions, std::span<const std::uint32_t> labels) {
  if (predictions.size() != labels.size()) {
    throw Error(ErrorCode::DimensionMismatch, "prediction and label counts differ");
  }
  if (labels.empty()) throw Error(ErrorCode::EmptyList, "no queries to score");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) correct += predictions[i] == labels[i];
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

std::vector<std::uint32_t> classify(const Task& task, const PipelineConfig& config) {
  if (config.mode == Mode::Inductive) return ncm_predict(task.query, ncm_barycenters(task.support));
  return soft_kmeans_predict(task, {config.beta, config.max_iters, config.shift_tol});
}

double run_accuracy(const Task& task, const PipelineConfig& config, const PreprocessStats* base_stats) {
  const Task prepared = preprocess_task(task, config, base_stats);
  return accuracy(classify(prepared, config), prepared.query_labels);
}

EvalSummary summarize(std::vector<double> per_run, bool keep_per_run) {
  EvalSummary s;
  s.n_runs = static_cast<std::uint32_t>(per_run.size());
  if (per_run.empty()) return s;
  double sum = 0.0;
  for (double a : per_run) sum += a;
  const double n = static_cast<double>(per_run.size());
  s.mean_accuracy = sum / n;
  if (per_run.size() > 1) {
    double ss = 0.0;
    for (double a : per_run) ss += (a - s.mean_accuracy) * (a - s.mean_accuracy);
    const double std_dev = std::sqrt(ss / (n - 1.0));
    s.half_interval = kZ95 * std_dev / std::sqrt(n);
  }
  if (keep_per_run) s.per_run_accuracies = std::move(per_run);
  return s;
}

EvalSummary evaluate(const BankSet& banks, const PipelineConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  const Prepared p = prepare(banks, config);

  const std::uint32_t n_runs = config.n_runs;
  std::vector<double> per_run(n_runs);
  unsigned threads = config.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : config.threads;
  threads = std::min<unsigned>(threads, n_runs);

  std::atomic<std::uint32_t> next{0};
  std::atomic<std::uint32_t> stop_at{n_runs};
  std::mutex error_mutex;
  std::uint32_t error_run = n_runs;
  std::exception_ptr error;

  // Runs are handed out in index order, so once run r fails every run below
  // r has already been claimed; the reported error is always the lowest one.
  auto worker = [&] {
    for (;;) {
      const std::uint32_t r = next.fetch_add(1);
      if (r >= stop_at.load()) return;
      try {
        per_run[r] = evaluate_run(p, config, r);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (r < error_run) {
          error_run = r;
          error = std::current_exception();
        }
        std::uint32_t cur = stop_at.load();
        while (r < cur && !stop_at.compare_exchange_weak(cur, r)) {
        }
      }
    }
  };

  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);

  EvalSummary summary = summarize(std::move(per_run), config.keep_per_run);
  summary.wall_time_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return summary;
}

const char* to_string(SweepParam param) {
  switch (param) {
    case SweepParam::Beta: return "beta";
    case SweepParam::Views: return "views";
    case SweepParam::Backbones: return "backbones";
  }
  return "unknown";
}

SweepParam parse_sweep_param(const std::string& text) {
  if (text == "beta") return SweepParam::Beta;
  if (text == "views" || text == "l" || text == "crops") return SweepParam::Views;
  if (text == "backbones" || text == "b") return SweepParam::Backbones;
  throw Error(ErrorCode::ConfigError, "unknown sweep parameter '" + text + "' (expected beta, views or backbones)");
}

std::vector<SweepRow> sweep(const BankSet& banks, SweepParam param, std::span<const double> values,
                            const PipelineConfig& base_config) {
  if (values.empty()) throw Error(ErrorCode::ConfigError, "sweep needs at least one value");
  auto as_count = [](double v, const char* what) {
    if (!(v >= 1.0) || v != std::floor(v) || v > 4294967295.0) {
      throw Error(ErrorCode::ConfigError, std::string(what) + " values must be positive integers");
    }
    return static_cast<std::uint32_t>(v);
  };

  std::vector<SweepRow> rows;
  rows.reserve(values.size());
  for (double value : values) {
    PipelineConfig config = base_config;
    BankSet subset = banks;
    switch (param) {
      case SweepParam::Beta:
        if (!(value > 0.0)) throw Error(ErrorCode::ConfigError, "beta values must be positive");
        config.beta = value;
        break;
      case SweepParam::Views:
        config.use_AS = true;
        config.views = as_count(value, "view");
        break;
      case SweepParam::Backbones: {
        const std::uint32_t b = as_count(value, "backbone");
        if (b > banks.features.size()) {
          throw Error(ErrorCode::ConfigError, "sweep asks for " + std::to_string(b) + " backbones but only " +
                                                  std::to_string(banks.features.size()) + " banks were given");
        }
        subset.features.resize(b);
        if (subset.base.size() > b) subset.base.resize(b);
        if (subset.support_means.size() > b) subset.support_means.resize(b);
        config.use_E = b > 1;
        break;
      }
    }
    rows.push_back({value, config, evaluate(subset, config)});
  }
  return rows;
}

}  // namespace fewshot
