#include "fewshot/synthetic.hpp"

#include <cmath>
#include <string>

#include "fewshot/errors.hpp"
#include "fewshot/rng.hpp"

namespace fewshot {

void validate_spec(const SyntheticSpec& spec) {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidSpec, msg); };
  if (spec.n_classes < 2) fail("n_classes must be at least 2");
  if (spec.dim < 1) fail("dim must be at least 1");
  if (spec.dim + 1 < spec.n_classes) fail("dim must be at least n_classes - 1 for the simplex layout");
  if (spec.images_per_class < 1) fail("images_per_class must be at least 1");
  if (spec.n_views < 1) fail("n_views must be at least 1");
  if (!(spec.separation >= 0.0) || !std::isfinite(spec.separation)) fail("separation must be finite and >= 0");
  if (!(spec.sigma > 0.0) || !std::isfinite(spec.sigma)) fail("sigma must be finite and > 0");
  if (!(spec.view_noise >= 0.0) || !std::isfinite(spec.view_noise)) fail("view_noise must be finite and >= 0");
  if (static_cast<std::uint64_t>(spec.first_class_id) + spec.n_classes > 0xffffffffULL) fail("class ids overflow");
}

Matrix class_means(const SyntheticSpec& spec) {
  validate_spec(spec);
  // Helmert basis of the plane orthogonal to (1, ..., 1): vertex i of the
  // standard simplex, centered, has coordinate j equal to entry i of
  // (1, ..., 1, -j, 0, ...) / sqrt(j (j + 1)). Those vertices sit sqrt(2)
  // apart, hence the d / sqrt(2) scale.
  const Eigen::Index n = spec.n_classes;
  Matrix means = Matrix::Zero(n, spec.dim);
  const double scale = spec.separation / std::sqrt(2.0);
  for (Eigen::Index j = 1; j < n; ++j) {
    const double norm = std::sqrt(static_cast<double>(j * (j + 1)));
    for (Eigen::Index i = 0; i < j; ++i) means(i, j - 1) = scale / norm;
    means(j, j - 1) = -scale * static_cast<double>(j) / norm;
  }
  return means;
}

FeatureBank generate_bank(const SyntheticSpec& spec) {
  const Matrix means = class_means(spec);
  Rng rng(spec.seed);
  const std::size_t dim = spec.dim;
  std::vector<ClassFeatures> classes(spec.n_classes);
  FeatureVector image(dim);
  for (std::uint32_t c = 0; c < spec.n_classes; ++c) {
    auto& cls = classes[c];
    cls.class_id = spec.first_class_id + c;
    cls.n_images = spec.images_per_class;
    cls.values.reserve(static_cast<std::size_t>(spec.images_per_class) * spec.n_views * dim);
    for (std::uint32_t i = 0; i < spec.images_per_class; ++i) {
      for (std::size_t d = 0; d < dim; ++d) image[d] = means(c, d) + spec.sigma * rng.normal();
      for (std::uint32_t v = 0; v < spec.n_views; ++v) {
        for (std::size_t d = 0; d < dim; ++d) {
          const double jitter = spec.view_noise > 0.0 ? spec.view_noise * rng.normal() : 0.0;
          cls.values.push_back(static_cast<float>(image[d] + jitter));
        }
      }
    }
  }
  return FeatureBank("synthetic-seed-" + std::to_string(spec.seed), spec.dim, spec.n_views, std::move(classes));
}

double standard_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double oracle_accuracy(const SyntheticSpec& spec, std::uint32_t views_averaged) {
  validate_spec(spec);
  if (spec.n_classes != 2 || !spec.pin_supports_to_means) {
    throw Error(ErrorCode::UnsupportedSpec, "the closed form covers only 2 classes with pinned supports");
  }
  const std::uint32_t views = views_averaged == 0 ? spec.n_views : views_averaged;
  if (views > spec.n_views) throw Error(ErrorCode::InvalidSpec, "more views averaged than generated");
  const double sigma_eff =
      std::sqrt(spec.sigma * spec.sigma + spec.view_noise * spec.view_noise / static_cast<double>(views));
  return standard_normal_cdf(spec.separation / (2.0 * sigma_eff));
}

nlohmann::json spec_to_json(const SyntheticSpec& s) {
  return {{"n_classes", s.n_classes},       {"dim", s.dim},
          {"images_per_class", s.images_per_class}, {"n_views", s.n_views},
          {"separation", s.separation},     {"sigma", s.sigma},
          {"view_noise", s.view_noise},     {"pin_supports_to_means", s.pin_supports_to_means},
          {"seed", s.seed},                 {"first_class_id", s.first_class_id}};
}

SyntheticSpec spec_from_json(const nlohmann::json& j) {
  SyntheticSpec s;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "n_classes") s.n_classes = value.get<std::uint32_t>();
      else if (key == "dim") s.dim = value.get<std::uint32_t>();
      else if (key == "images_per_class") s.images_per_class = value.get<std::uint32_t>();
      else if (key == "n_views") s.n_views = value.get<std::uint32_t>();
      else if (key == "separation") s.separation = value.get<double>();
      else if (key == "sigma") s.sigma = value.get<double>();
      else if (key == "view_noise") s.view_noise = value.get<double>();
      else if (key == "pin_supports_to_means") s.pin_supports_to_means = value.get<bool>();
      else if (key == "seed") s.seed = value.get<std::uint64_t>();
      else if (key == "first_class_id") s.first_class_id = value.get<std::uint32_t>();
      else throw Error(ErrorCode::InvalidSpec, "unknown synthetic spec field '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidSpec, std::string("bad synthetic spec JSON: ") + e.what());
  }
  validate_spec(s);
  return s;
}

}  // namespace fewshot
