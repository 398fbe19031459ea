#pragma once

#include <cstdint>

#include <nlohmann/json.hpp>

#include "fewshot/feature_store.hpp"
#include "fewshot/types.hpp"

namespace fewshot {

/// Gaussian class clusters with means on a regular simplex.
struct SyntheticSpec {
  std::uint32_t n_classes = 5;
  std::uint32_t dim = 64;
  std::uint32_t images_per_class = 100;
  std::uint32_t n_views = 1;
  double separation = 2.0;  // pairwise distance between class means
  double sigma = 1.0;       // per-image isotropic noise std
  double view_noise = 0.0;  // per-view jitter std on top of the image vector
  bool pin_supports_to_means = false;
  std::uint64_t seed = 0;
  std::uint32_t first_class_id = 0;
};

/// Throws InvalidSpec.
void validate_spec(const SyntheticSpec& spec);

/// n_classes x dim; rows are the class means. All pairwise distances equal
/// `separation` and the centroid is the origin. Needs dim >= n_classes - 1.
Matrix class_means(const SyntheticSpec& spec);

/// image = mean + N(0, sigma^2 I); view = image + N(0, view_noise^2 I).
FeatureBank generate_bank(const SyntheticSpec& spec);

/// Exact 2-way NCM accuracy with supports pinned to the true means and no
/// preprocessing: Phi(d / (2 sigma_eff)), sigma_eff^2 = sigma^2 + view_noise^2 / views_averaged.
/// Throws UnsupportedSpec outside that setting. views_averaged = 0 uses n_views.
double oracle_accuracy(const SyntheticSpec& spec, std::uint32_t views_averaged = 0);

double standard_normal_cdf(double x);

nlohmann::json spec_to_json(const SyntheticSpec& spec);
SyntheticSpec spec_from_json(const nlohmann::json& j);

}  // namespace fewshot
