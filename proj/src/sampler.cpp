#include "fewshot/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fewshot/errors.hpp"
#include "fewshot/preprocessing.hpp"

namespace fewshot {

Eigen::Index Task::n_support() const {
  Eigen::Index total = 0;
  for (const auto& s : support) total += s.rows();
  return total;
}

namespace {

// Partial Fisher-Yates: the first `m` entries of a shuffled 0..n-1.
std::vector<std::uint32_t> choose(Rng& rng, std::uint32_t n, std::uint32_t m) {
  std::vector<std::uint32_t> pool(n);
  std::iota(pool.begin(), pool.end(), 0u);
  for (std::uint32_t i = 0; i < m; ++i) {
    const auto j = i + static_cast<std::uint32_t>(rng.below(n - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(m);
  return pool;
}

std::vector<std::uint32_t> choose_classes(Rng& rng, const FeatureBank& bank, std::uint32_t n) {
  if (n == 0) throw Error(ErrorCode::ConfigError, "a task needs at least one way");
  if (bank.n_classes() < n) {
    throw Error(ErrorCode::NotEnoughClasses, "bank has " + std::to_string(bank.n_classes()) +
                                                 " classes, task needs " + std::to_string(n));
  }
  return choose(rng, static_cast<std::uint32_t>(bank.n_classes()), n);
}

void fill_images(Rng& rng, const FeatureBank& bank, Episode& episode, std::uint32_t k,
                 std::span<const std::uint32_t> query_counts) {
  const std::size_t n = episode.classes.size();
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint32_t position = episode.classes[i];
    const std::uint32_t need = k + query_counts[i];
    if (bank.n_images(position) < need) {
      throw Error(ErrorCode::NotEnoughImages,
                  "class id " + std::to_string(bank.class_at(position).class_id) + " has " +
                      std::to_string(bank.n_images(position)) + " images, task needs " + std::to_string(need));
    }
  }
  episode.support.resize(n);
  episode.query.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto picked = choose(rng, bank.n_images(episode.classes[i]), k + query_counts[i]);
    episode.support[i].assign(picked.begin(), picked.begin() + k);
    episode.query[i].assign(picked.begin() + k, picked.end());
  }
}

}  // namespace

Episode sample_episode(const FeatureBank& bank, std::uint32_t n, std::uint32_t k, std::uint32_t q,
                       std::uint64_t seed) {
  Rng rng(seed);
  Episode episode;
  episode.seed = seed;
  episode.classes = choose_classes(rng, bank, n);
  const std::vector<std::uint32_t> counts(n, q);
  fill_images(rng, bank, episode, k, counts);
  return episode;
}

std::vector<std::uint32_t> largest_remainder(std::span<const double> proportions, std::uint32_t total) {
  const std::size_t n = proportions.size();
  if (n == 0) throw Error(ErrorCode::EmptyList, "no proportions to round");
  std::vector<std::uint32_t> counts(n);
  std::vector<double> remainder(n);
  std::uint64_t assigned = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double exact = proportions[i] * total;
    const double floor = std::floor(exact);
    counts[i] = static_cast<std::uint32_t>(floor);
    remainder[i] = exact - floor;
    assigned += counts[i];
  }
  // Rounding in the products can push the floors past the total.
  while (assigned > total) {
    const auto it = std::max_element(counts.begin(), counts.end());
    --*it;
    --assigned;
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t r = 0; assigned < total; r = (r + 1) % n, ++assigned) ++counts[order[r]];
  return counts;
}

std::vector<std::uint32_t> dirichlet_query_counts(Rng& rng, std::uint32_t n, const ImbalanceSpec& spec) {
  if (!(spec.dirichlet_a > 0.0)) throw Error(ErrorCode::ConfigError, "dirichlet_a must be positive");
  if (spec.q_total < n) {
    throw Error(ErrorCode::ConfigError, "q_total must be at least the number of ways");
  }
  const auto proportions = rng.dirichlet(n, spec.dirichlet_a);
  return largest_remainder(proportions, spec.q_total);
}

Episode sample_imbalanced_episode(const FeatureBank& bank, std::uint32_t n, std::uint32_t k,
                                  const ImbalanceSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  Episode episode;
  episode.seed = seed;
  episode.classes = choose_classes(rng, bank, n);
  const auto counts = dirichlet_query_counts(rng, n, spec);
  fill_images(rng, bank, episode, k, counts);
  return episode;
}

Task build_task(const Episode& episode, std::span<const FeatureBank* const> banks, std::uint32_t views_averaged) {
  if (banks.empty()) throw Error(ErrorCode::EmptyList, "no banks to build a task from");
  Eigen::Index dim = 0;
  for (const auto* bank : banks) dim += bank->dim();

  auto gather = [&](std::uint32_t position, std::uint32_t image, auto&& row) {
    Eigen::Index offset = 0;
    for (const auto* bank : banks) {
      row.segment(offset, bank->dim()) = average_views(*bank, position, image, views_averaged).transpose();
      offset += bank->dim();
    }
  };

  Task task;
  task.episode_seed = episode.seed;
  const std::size_t n = episode.classes.size();
  task.support.resize(n);
  std::size_t n_query = 0;
  for (const auto& q : episode.query) n_query += q.size();
  task.query.resize(static_cast<Eigen::Index>(n_query), dim);
  task.query_labels.reserve(n_query);

  Eigen::Index row = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto position = episode.classes[i];
    auto& s = task.support[i];
    s.resize(static_cast<Eigen::Index>(episode.support[i].size()), dim);
    for (std::size_t j = 0; j < episode.support[i].size(); ++j) {
      gather(position, episode.support[i][j], s.row(static_cast<Eigen::Index>(j)));
    }
    for (auto image : episode.query[i]) {
      gather(position, image, task.query.row(row++));
      task.query_labels.push_back(static_cast<std::uint32_t>(i));
    }
  }
  return task;
}

Task sample_task(const FeatureBank& bank, std::uint32_t n, std::uint32_t k, std::uint32_t q, std::uint64_t seed) {
  const FeatureBank* banks[] = {&bank};
  return build_task(sample_episode(bank, n, k, q, seed), banks, bank.n_views());
}

Task sample_imbalanced_task(const FeatureBank& bank, std::uint32_t n, std::uint32_t k, const ImbalanceSpec& spec,
                            std::uint64_t seed) {
  const FeatureBank* banks[] = {&bank};
  return build_task(sample_imbalanced_episode(bank, n, k, spec, seed), banks, bank.n_views());
}

}  // namespace fewshot
