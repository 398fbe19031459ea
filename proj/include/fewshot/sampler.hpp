#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fewshot/feature_store.hpp"
#include "fewshot/pipeline_config.hpp"
#include "fewshot/rng.hpp"
#include "fewshot/task.hpp"

namespace fewshot {

/// Image indices of an episode, independent of which banks supply features.
/// `classes` holds bank class positions; way i of the task is classes[i].
struct Episode {
  std::vector<std::uint32_t> classes;
  std::vector<std::vector<std::uint32_t>> support;
  std::vector<std::vector<std::uint32_t>> query;
  std::uint64_t seed = 0;
};

/// n classes uniformly without replacement, then k + q images per class
/// uniformly without replacement (first k go to the support set).
/// Throws NotEnoughClasses / NotEnoughImages.
Episode sample_episode(const FeatureBank& bank, std::uint32_t n, std::uint32_t k, std::uint32_t q,
                       std::uint64_t seed);

/// Like sample_episode, but per-class query counts come from
/// dirichlet_query_counts(). Throws NotEnoughImages once counts are known.
Episode sample_imbalanced_episode(const FeatureBank& bank, std::uint32_t n, std::uint32_t k,
                                  const ImbalanceSpec& spec, std::uint64_t seed);

/// Floors of p_i * total, with the leftover units handed to the largest
/// remainders (ties to the lowest index). Sums exactly to `total`.
std::vector<std::uint32_t> largest_remainder(std::span<const double> proportions,
                                             std::uint32_t total);

std::vector<std::uint32_t> dirichlet_query_counts(Rng& rng, std::uint32_t n,
                                                  const ImbalanceSpec& spec);

/// Gathers features for an episode. Each image is the mean of its first
/// `views_averaged` views in every bank, concatenated in bank order. Banks
/// must share the layout of the bank the episode was drawn from.
Task build_task(const Episode& episode, std::span<const FeatureBank* const> banks,
                std::uint32_t views_averaged);

/// Single bank, all views averaged.
Task sample_task(const FeatureBank& bank, std::uint32_t n, std::uint32_t k, std::uint32_t q,
                 std::uint64_t seed);

Task sample_imbalanced_task(const FeatureBank& bank, std::uint32_t n, std::uint32_t k,
                            const ImbalanceSpec& spec, std::uint64_t seed);

}  // namespace fewshot
