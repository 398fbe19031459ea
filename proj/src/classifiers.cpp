#include "fewshot/classifiers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fewshot/errors.hpp"

namespace fewshot {

namespace {

void require_dim(Eigen::Index got, Eigen::Index want) {
  if (got != want) {
    throw Error(ErrorCode::DimensionMismatch,
                "vector dimension " + std::to_string(got) + " vs center dimension " + std::to_string(want));
  }
}

// Exact squared L2 distance from z to every center.
Eigen::VectorXd squared_distances(const Eigen::Ref<const FeatureVector>& z, const Matrix& centers) {
  Eigen::VectorXd d(centers.rows());
  for (Eigen::Index i = 0; i < centers.rows(); ++i) d[i] = (centers.row(i).transpose() - z).squaredNorm();
  return d;
}

std::uint32_t argmin(const Eigen::VectorXd& values) {
  std::uint32_t best = 0;
  for (Eigen::Index i = 1; i < values.size(); ++i) {
    if (values[i] < values[best]) best = static_cast<std::uint32_t>(i);
  }
  return best;
}

// softmax(-beta * d2) with the smallest distance shifted to exponent 0.
FeatureVector softmax_neg(const Eigen::VectorXd& d2, double beta) {
  const double shift = d2.minCoeff();
  FeatureVector w = (-beta * (d2.array() - shift)).exp().matrix();
  return w / w.sum();
}

void require_beta(double beta) {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw Error(ErrorCode::ConfigError, "beta must be positive");
}

}  // namespace

Barycenters ncm_barycenters(std::span<const Matrix> support) {
  if (support.empty()) throw Error(ErrorCode::EmptyList, "no support sets");
  Barycenters bary;
  bary.centers.resize(static_cast<Eigen::Index>(support.size()), support.front().cols());
  for (std::size_t i = 0; i < support.size(); ++i) {
    const auto& s = support[i];
    if (s.rows() == 0) throw Error(ErrorCode::EmptyClass, "support set " + std::to_string(i) + " is empty");
    require_dim(s.cols(), bary.centers.cols());
    bary.centers.row(static_cast<Eigen::Index>(i)) = s.colwise().mean();
  }
  return bary;
}

std::uint32_t ncm_predict(const Eigen::Ref<const FeatureVector>& query, const Barycenters& bary) {
  require_dim(query.size(), bary.centers.cols());
  return argmin(squared_distances(query, bary.centers));
}

std::uint32_t ncm_predict(const FeatureVector& query, const Barycenters& bary) {
  return ncm_predict(Eigen::Ref<const FeatureVector>(query), bary);
}

std::vector<std::uint32_t> ncm_predict(const Matrix& queries, const Barycenters& bary) {
  if (queries.rows() == 0) return {};
  require_dim(queries.cols(), bary.centers.cols());
  std::vector<std::uint32_t> out(static_cast<std::size_t>(queries.rows()));
  for (Eigen::Index r = 0; r < queries.rows(); ++r) {
    out[static_cast<std::size_t>(r)] = argmin(squared_distances(queries.row(r).transpose(), bary.centers));
  }
  return out;
}

FeatureVector soft_weights(const Eigen::Ref<const FeatureVector>& z, const Barycenters& bary, double beta,
                           std::optional<std::uint32_t> support_class) {
  require_dim(z.size(), bary.centers.cols());
  require_beta(beta);
  if (support_class) {
    if (*support_class >= bary.ways()) throw Error(ErrorCode::ConfigError, "support class out of range");
    FeatureVector w = FeatureVector::Zero(bary.centers.rows());
    w[*support_class] = 1.0;
    return w;
  }
  return softmax_neg(squared_distances(z, bary.centers), beta);
}

Barycenters soft_kmeans_step(const Task& task, const Barycenters& bary, const SoftKMeansConfig& config) {
  require_beta(config.beta);
  const Eigen::Index n = bary.centers.rows();
  const Eigen::Index dim = bary.centers.cols();
  if (static_cast<Eigen::Index>(task.support.size()) != n) {
    throw Error(ErrorCode::DimensionMismatch, "task ways differ from the number of centers");
  }

  Matrix numer(n, dim);
  Eigen::VectorXd denom(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = task.support[static_cast<std::size_t>(i)];
    require_dim(s.cols(), dim);
    numer.row(i) = s.colwise().sum();
    denom[i] = static_cast<double>(s.rows());
  }
  if (task.query.rows() > 0) {
    require_dim(task.query.cols(), dim);
    for (Eigen::Index r = 0; r < task.query.rows(); ++r) {
      const auto z = task.query.row(r);
      const FeatureVector w = softmax_neg(squared_distances(z.transpose(), bary.centers), config.beta);
      for (Eigen::Index i = 0; i < n; ++i) numer.row(i) += w[i] * z;
      denom += w;
    }
  }

  Barycenters next;
  next.iteration = bary.iteration + 1;
  next.centers = numer.array().colwise() / denom.array();
  return next;
}

SoftKMeansResult soft_kmeans(const Task& task, const SoftKMeansConfig& config) {
  require_beta(config.beta);
  SoftKMeansResult result;
  result.centers = ncm_barycenters(task.support);
  for (std::uint32_t t = 0; t < config.max_iters; ++t) {
    Barycenters next = soft_kmeans_step(task, result.centers, config);
    result.last_shift = (next.centers - result.centers.centers).rowwise().norm().maxCoeff();
    result.centers = std::move(next);
    if (result.last_shift < config.shift_tol) break;
  }
  result.predictions = ncm_predict(task.query, result.centers);
  return result;
}

std::vector<std::uint32_t> soft_kmeans_predict(const Task& task, const SoftKMeansConfig& config) {
  return soft_kmeans(task, config).predictions;
}

}  // namespace fewshot
