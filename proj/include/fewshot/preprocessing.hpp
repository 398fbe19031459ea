#pragma once

#include <span>
#include <vector>

#include "fewshot/feature_store.hpp"
#include "fewshot/pipeline_config.hpp"
#include "fewshot/task.hpp"
#include "fewshot/types.hpp"

namespace fewshot {

enum class MeanSource { BaseDataset, TaskVectors };

struct PreprocessStats {
  FeatureVector mean;
  MeanSource source = MeanSource::BaseDataset;
};

/// Coordinate-wise mean of the views of one image. Throws EmptyViewList.
FeatureVector average_views(std::span<const FeatureVector> views);

/// Mean of the first `count` views of a bank image (FVB1 floats, widened).
FeatureVector average_views(const FeatureBank& bank, std::size_t position, std::size_t image,
                            std::uint32_t count);

/// Input i occupies its own contiguous slice of the output, in order.
FeatureVector concat_features(std::span<const FeatureVector> per_backbone);

PreprocessStats compute_mean(std::span<const FeatureVector> vectors, MeanSource source);
PreprocessStats compute_mean(const Matrix& rows, MeanSource source);

/// z - mean. Throws DimensionMismatch.
FeatureVector center(const FeatureVector& z, const PreprocessStats& stats);

/// z / ||z||. Throws DegenerateVector when ||z|| <= 1e-12.
FeatureVector project_hypersphere(const FeatureVector& z);

/// Mean over every image of the base banks, after view averaging and
/// concatenation in bank order. All banks must share one layout.
PreprocessStats compute_base_stats(std::span<const FeatureBank* const> base_banks,
                                   std::uint32_t views_averaged);

/// Applies C then H to every support and query vector. Inductive centering
/// uses `base_stats` (required, ConfigError otherwise); transductive centering
/// uses the mean of the task's own support and query vectors.
Task preprocess_task(Task task, const PipelineConfig& config, const PreprocessStats* base_stats);

}  // namespace fewshot
