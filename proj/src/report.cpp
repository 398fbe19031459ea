#include <cstdio>

#include "fewshot/errors.hpp"
#include "fewshot/evaluator.hpp"

namespace fewshot {

namespace {

// Shortest text that reads back to the same double.
std::string number(double v) { return nlohmann::json(v).dump(); }

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

}  // namespace

nlohmann::json config_to_json(const PipelineConfig& c) {
  nlohmann::json j;
  j["method"] = method_name(c);
  j["mode"] = to_string(c.mode);
  j["AS"] = c.use_AS;
  j["E"] = c.use_E;
  j["C"] = c.use_C;
  j["H"] = c.use_H;
  j["n"] = c.n;
  j["k"] = c.k;
  j["q"] = c.q;
  if (c.imbalance) {
    j["imbalance"] = {{"q_total", c.imbalance->q_total}, {"dirichlet_a", c.imbalance->dirichlet_a}};
  } else {
    j["imbalance"] = nullptr;
  }
  j["beta"] = c.beta;
  j["max_iters"] = c.max_iters;
  j["shift_tol"] = c.shift_tol;
  j["views"] = c.views;
  j["runs"] = c.n_runs;
  j["seed"] = c.global_seed;
  return j;
}

PipelineConfig config_from_json(const nlohmann::json& j) {
  try {
    PipelineConfig c;
    if (j.contains("mode")) c.mode = parse_mode(j.at("mode").get<std::string>());
    c.use_AS = get_or(j, "AS", c.use_AS);
    c.use_E = get_or(j, "E", c.use_E);
    c.use_C = get_or(j, "C", c.use_C);
    c.use_H = get_or(j, "H", c.use_H);
    c.n = get_or(j, "n", c.n);
    c.k = get_or(j, "k", c.k);
    c.q = get_or(j, "q", c.q);
    if (j.contains("imbalance") && !j.at("imbalance").is_null()) {
      const auto& im = j.at("imbalance");
      c.imbalance = ImbalanceSpec{get_or(im, "q_total", ImbalanceSpec{}.q_total),
                                  get_or(im, "dirichlet_a", ImbalanceSpec{}.dirichlet_a)};
    }
    c.beta = get_or(j, "beta", c.beta);
    c.max_iters = get_or(j, "max_iters", c.max_iters);
    c.shift_tol = get_or(j, "shift_tol", c.shift_tol);
    c.views = get_or(j, "views", c.views);
    c.n_runs = get_or(j, "runs", c.n_runs);
    c.global_seed = get_or(j, "seed", c.global_seed);
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("bad pipeline config JSON: ") + e.what());
  }
}

nlohmann::json summary_to_json(const EvalSummary& s, bool with_timing) {
  nlohmann::json j;
  j["mean"] = s.mean_accuracy;
  j["interval"] = s.half_interval;
  j["runs"] = s.n_runs;
  j["interval_definition"] = "1.96 * sample_std(per_run_accuracy) / sqrt(runs)";
  if (with_timing) j["seconds"] = s.wall_time_seconds;
  if (!s.per_run_accuracies.empty()) j["per_run"] = s.per_run_accuracies;
  return j;
}

std::string csv_header() { return "method,mode,n,k,q,beta,runs,seed,mean,interval,seconds"; }

std::string csv_row(const PipelineConfig& c, const EvalSummary& s) {
  char seconds[32];
  std::snprintf(seconds, sizeof seconds, "%.3f", s.wall_time_seconds);
  const std::uint32_t q = c.imbalance ? c.imbalance->q_total : c.q;
  return method_name(c) + "," + to_string(c.mode) + "," + std::to_string(c.n) + "," + std::to_string(c.k) + "," +
         std::to_string(q) + "," + number(c.beta) + "," + std::to_string(c.n_runs) + "," +
         std::to_string(c.global_seed) + "," + number(s.mean_accuracy) + "," + number(s.half_interval) + "," +
         seconds;
}

}  // namespace fewshot
