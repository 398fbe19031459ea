#pragma once

#include <cstdint>
#include <vector>

#include "fewshot/types.hpp"

namespace fewshot {

/// One few-shot episode after feature extraction.
struct Task {
  std::vector<Matrix> support;             // support[i] rows form S_i
  Matrix query;                            // rows are the query vectors Q
  std::vector<std::uint32_t> query_labels; // hidden true class per query row
  std::uint64_t episode_seed = 0;

  std::uint32_t ways() const noexcept { return static_cast<std::uint32_t>(support.size()); }
  Eigen::Index dim() const noexcept { return query.cols(); }
  Eigen::Index n_support() const;
};

}  // namespace fewshot
