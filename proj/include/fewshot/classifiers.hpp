#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "fewshot/task.hpp"
#include "fewshot/types.hpp"

namespace fewshot {

/// Class centers; row i is the center of class i after `iteration` updates.
struct Barycenters {
  Matrix centers;
  std::uint32_t iteration = 0;

  std::uint32_t ways() const noexcept { return static_cast<std::uint32_t>(centers.rows()); }
};

struct SoftKMeansConfig {
  double beta = 5.0;
  std::uint32_t max_iters = 30;
  double shift_tol = 1e-6;
};

/// Mean of each support set. Throws EmptyClass.
Barycenters ncm_barycenters(std::span<const Matrix> support);

/// Index of the nearest center in L2; ties go to the lowest index.
std::uint32_t ncm_predict(const Eigen::Ref<const FeatureVector>& query, const Barycenters& bary);
std::uint32_t ncm_predict(const FeatureVector& query, const Barycenters& bary);
std::vector<std::uint32_t> ncm_predict(const Matrix& queries, const Barycenters& bary);

/// Soft assignment of `z` to each center. Query vectors get
/// softmax(-beta * ||z - c_i||^2); a support vector of class `support_class`
/// gets the indicator of that class.
FeatureVector soft_weights(const Eigen::Ref<const FeatureVector>& z, const Barycenters& bary,
                           double beta, std::optional<std::uint32_t> support_class = std::nullopt);

/// One soft K-means update:
///   c_i <- (sum_{s in S_i} s + sum_{z in Q} w_i(z) z) / (|S_i| + sum_{z in Q} w_i(z))
Barycenters soft_kmeans_step(const Task& task, const Barycenters& bary, const SoftKMeansConfig& config);

struct SoftKMeansResult {
  Barycenters centers;
  std::vector<std::uint32_t> predictions;
  double last_shift = 0.0;
};

/// Starts from the NCM centers and iterates until the largest center move is
/// below shift_tol or max_iters updates have run, then predicts by nearest
/// center. max_iters = 0 is plain NCM.
SoftKMeansResult soft_kmeans(const Task& task, const SoftKMeansConfig& config);

std::vector<std::uint32_t> soft_kmeans_predict(const Task& task, const SoftKMeansConfig& config);

}  // namespace fewshot
