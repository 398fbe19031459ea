#include "fewshot/preprocessing.hpp"

#include <string>

#include "fewshot/errors.hpp"

namespace fewshot {

namespace {

void require_dim(Eigen::Index got, Eigen::Index want, const char* what) {
  if (got != want) {
    throw Error(ErrorCode::DimensionMismatch,
                std::string(what) + ": dimension " + std::to_string(got) + " vs " + std::to_string(want));
  }
}

void normalize_rows(Matrix& rows) {
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    const double norm = rows.row(r).norm();
    if (!(norm > kDegenerateNorm)) {
      throw Error(ErrorCode::DegenerateVector, "cannot project a vector of norm " + std::to_string(norm));
    }
    rows.row(r) /= norm;
  }
}

}  // namespace

FeatureVector average_views(std::span<const FeatureVector> views) {
  if (views.empty()) throw Error(ErrorCode::EmptyViewList, "no views to average");
  FeatureVector sum = views.front();
  for (std::size_t v = 1; v < views.size(); ++v) {
    require_dim(views[v].size(), sum.size(), "average_views");
    sum += views[v];
  }
  return sum / static_cast<double>(views.size());
}

FeatureVector average_views(const FeatureBank& bank, std::size_t position, std::size_t image,
                            std::uint32_t count) {
  if (count == 0) throw Error(ErrorCode::EmptyViewList, "no views to average");
  if (count > bank.n_views()) {
    throw Error(ErrorCode::ConfigError, "asked for " + std::to_string(count) + " views but the bank holds " +
                                            std::to_string(bank.n_views()));
  }
  const auto values = bank.image(position, image);
  const Eigen::Index dim = bank.dim();
  FeatureVector sum = FeatureVector::Zero(dim);
  for (std::uint32_t v = 0; v < count; ++v) {
    sum += Eigen::Map<const Eigen::VectorXf>(values.data() + v * dim, dim).cast<double>();
  }
  return count == 1 ? sum : FeatureVector(sum / static_cast<double>(count));
}

FeatureVector concat_features(std::span<const FeatureVector> per_backbone) {
  if (per_backbone.empty()) throw Error(ErrorCode::EmptyList, "no feature vectors to concatenate");
  Eigen::Index total = 0;
  for (const auto& v : per_backbone) total += v.size();
  FeatureVector out(total);
  Eigen::Index offset = 0;
  for (const auto& v : per_backbone) {
    out.segment(offset, v.size()) = v;
    offset += v.size();
  }
  return out;
}

PreprocessStats compute_mean(std::span<const FeatureVector> vectors, MeanSource source) {
  if (vectors.empty()) throw Error(ErrorCode::EmptyList, "mean of an empty set");
  FeatureVector sum = FeatureVector::Zero(vectors.front().size());
  for (const auto& v : vectors) {
    require_dim(v.size(), sum.size(), "compute_mean");
    sum += v;
  }
  return {sum / static_cast<double>(vectors.size()), source};
}

PreprocessStats compute_mean(const Matrix& rows, MeanSource source) {
  if (rows.rows() == 0) throw Error(ErrorCode::EmptyList, "mean of an empty set");
  return {rows.colwise().mean().transpose(), source};
}

FeatureVector center(const FeatureVector& z, const PreprocessStats& stats) {
  require_dim(z.size(), stats.mean.size(), "center");
  return z - stats.mean;
}

FeatureVector project_hypersphere(const FeatureVector& z) {
  const double norm = z.norm();
  if (!(norm > kDegenerateNorm)) {
    throw Error(ErrorCode::DegenerateVector, "cannot project a vector of norm " + std::to_string(norm));
  }
  return z / norm;
}

PreprocessStats compute_base_stats(std::span<const FeatureBank* const> base_banks, std::uint32_t views_averaged) {
  if (base_banks.empty()) throw Error(ErrorCode::EmptyList, "no base banks");
  const FeatureBank& layout = *base_banks.front();
  for (std::size_t b = 1; b < base_banks.size(); ++b) {
    const auto report = check_ensemble_compatible(layout, *base_banks[b]);
    if (!report.empty()) throw Error(ErrorCode::IncompatibleBanks, "base banks: " + report.front().message);
  }

  Eigen::Index dim = 0;
  for (const auto* bank : base_banks) dim += bank->dim();
  FeatureVector sum = FeatureVector::Zero(dim);
  std::size_t count = 0;
  for (std::size_t p = 0; p < layout.n_classes(); ++p) {
    for (std::uint32_t i = 0; i < layout.n_images(p); ++i) {
      Eigen::Index offset = 0;
      for (const auto* bank : base_banks) {
        sum.segment(offset, bank->dim()) += average_views(*bank, p, i, views_averaged);
        offset += bank->dim();
      }
      ++count;
    }
  }
  if (count == 0) throw Error(ErrorCode::EmptyList, "base banks hold no images");
  return {sum / static_cast<double>(count), MeanSource::BaseDataset};
}

Task preprocess_task(Task task, const PipelineConfig& config, const PreprocessStats* base_stats) {
  if (config.use_C) {
    FeatureVector mean;
    if (config.mode == Mode::Inductive) {
      if (base_stats == nullptr) {
        throw Error(ErrorCode::ConfigError, "inductive centering needs the base-dataset mean");
      }
      mean = base_stats->mean;
    } else {
      const Eigen::Index total = task.n_support() + task.query.rows();
      if (total == 0) throw Error(ErrorCode::EmptyList, "task has no vectors");
      FeatureVector sum = task.query.colwise().sum().transpose();
      for (const auto& s : task.support) sum += s.colwise().sum().transpose();
      mean = sum / static_cast<double>(total);
    }
    require_dim(mean.size(), task.dim(), "preprocess_task");
    for (auto& s : task.support) s.rowwise() -= mean.transpose();
    task.query.rowwise() -= mean.transpose();
  }
  if (config.use_H) {
    for (auto& s : task.support) normalize_rows(s);
    normalize_rows(task.query);
  }
  return task;
}

}  // namespace fewshot
