#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace fewshot {

enum class Mode { Inductive, Transductive };

/// Per-class query counts drawn from a symmetric Dirichlet and hidden from
/// the classifier.
struct ImbalanceSpec {
  std::uint32_t q_total = 75;
  double dirichlet_a = 2.0;
};

/// Which pipeline steps run and how episodes are drawn.
///
/// Steps run in the order: view averaging (AS) per backbone, concatenation
/// across backbones (E), centering (C), hypersphere projection (H).
struct PipelineConfig {
  Mode mode = Mode::Inductive;
  bool use_AS = true;
  bool use_E = false;
  bool use_C = true;
  bool use_H = true;

  std::uint32_t n = 5;   // ways
  std::uint32_t k = 1;   // shots
  std::uint32_t q = 15;  // queries per class (balanced tasks)
  std::optional<ImbalanceSpec> imbalance;

  double beta = 5.0;
  std::uint32_t max_iters = 30;
  double shift_tol = 1e-6;

  /// Leading views averaged per image when AS is on; 0 averages all of them.
  /// With AS off only view 0 is used.
  std::uint32_t views = 0;

  std::uint32_t n_runs = 10000;
  std::uint64_t global_seed = 0;

  /// Worker threads; 0 means hardware concurrency. Never affects results.
  unsigned threads = 0;

  bool keep_per_run = false;
};

/// EASY, ASY, EY or Y depending on the AS and E toggles.
std::string method_name(const PipelineConfig& config);

const char* to_string(Mode mode);
Mode parse_mode(const std::string& text);

}  // namespace fewshot
