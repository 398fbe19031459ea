#include "fewshot/cli.hpp"

#include <deque>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fewshot/errors.hpp"
#include "fewshot/evaluator.hpp"
#include "fewshot/feature_store.hpp"
#include "fewshot/synthetic.hpp"

namespace fewshot {

namespace {

using nlohmann::json;

json read_json_file(const std::string& path, ErrorCode on_error) {
  std::ifstream in(path);
  if (!in) throw Error(on_error, "cannot open '" + path + "'");
  try {
    json j;
    in >> j;
    return j;
  } catch (const json::exception& e) {
    throw Error(on_error, "'" + path + "' is not valid JSON: " + e.what());
  }
}

// Writes to --out when given, otherwise to the result stream.
void emit(const std::string& text, const std::string& out_path, std::ostream& out) {
  if (out_path.empty()) {
    out << text;
    return;
  }
  std::ofstream file(out_path, std::ios::trunc);
  if (!file) throw Error(ErrorCode::IoError, "cannot open '" + out_path + "' for writing");
  file << text;
}

json violations_to_json(const ValidationReport& report) {
  json arr = json::array();
  for (const auto& v : report) {
    json item = {{"kind", v.kind}, {"message", v.message}};
    if (v.class_position) item["class_position"] = *v.class_position;
    if (v.image) item["image"] = *v.image;
    if (v.view) item["view"] = *v.view;
    if (v.coordinate) item["coordinate"] = *v.coordinate;
    arr.push_back(item);
  }
  return arr;
}

// Flags shared by `eval` and `sweep`. Values only override the pipeline
// config (possibly loaded from --config) when given explicitly.
struct EvalFlags {
  std::string features;
  std::vector<std::string> ensemble;
  std::vector<std::string> base;
  std::string config_file;
  std::string pin_supports;
  std::string mode = "inductive";
  std::uint32_t ways = 5, shots = 1, queries = 15, runs = 10000, views = 0, max_iters = 30;
  std::uint32_t q_total = 75;
  double dirichlet_a = 2.0, beta = 5.0, shift_tol = 1e-6;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  bool no_as = false, no_center = false, no_normalize = false, imbalanced = false;
  bool timing = false, per_run = false;
  std::string format;
  std::string out;

  std::map<std::string, CLI::Option*> opts;

  void attach(CLI::App* app) {
    opts["features"] = app->add_option("--features", features, "FVB1 feature bank (single backbone)");
    opts["ensemble"] = app->add_option("--ensemble", ensemble, "FVB1 banks concatenated in order (enables E)");
    opts["base"] = app->add_option("--base", base, "base-class banks for inductive centering, one per backbone");
    opts["config"] = app->add_option("--config", config_file, "JSON config echoed by a previous run");
    opts["pin-supports"] =
        app->add_option("--pin-supports", pin_supports, "synthetic spec JSON; supports replaced by the class means");
    opts["mode"] = app->add_option("--mode", mode, "inductive or transductive")
                       ->check(CLI::IsMember({"inductive", "transductive"}));
    opts["ways"] = app->add_option("--ways,-n", ways, "classes per task");
    opts["shots"] = app->add_option("--shots,-k", shots, "support images per class");
    opts["queries"] = app->add_option("--queries,-q", queries, "query images per class");
    opts["runs"] = app->add_option("--runs", runs, "number of episodes");
    opts["seed"] = app->add_option("--seed", seed, "global seed");
    opts["beta"] = app->add_option("--beta", beta, "soft K-means temperature");
    opts["max-iters"] = app->add_option("--max-iters", max_iters, "soft K-means iteration budget");
    opts["shift-tol"] = app->add_option("--shift-tol", shift_tol, "soft K-means convergence threshold");
    opts["views"] = app->add_option("--views", views, "leading views averaged per image (0: all)");
    opts["no-as"] = app->add_flag("--no-as", no_as, "use only the first view of each image");
    opts["no-center"] = app->add_flag("--no-center", no_center, "skip centering");
    opts["no-normalize"] = app->add_flag("--no-normalize", no_normalize, "skip hypersphere projection");
    opts["imbalanced"] = app->add_flag("--imbalanced", imbalanced, "Dirichlet per-class query counts");
    opts["q-total"] = app->add_option("--q-total", q_total, "total queries per imbalanced task");
    opts["dirichlet-a"] = app->add_option("--dirichlet-a", dirichlet_a, "Dirichlet concentration");
    app->add_option("--threads", threads, "worker threads (0: hardware concurrency)");
    app->add_flag("--timing", timing, "include wall time in JSON output");
    app->add_flag("--per-run", per_run, "include per-run accuracies in JSON output");
    app->add_option("--format", format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
    app->add_option("--out,-o", out, "write results to this file");
  }

  bool given(const std::string& name) const { return opts.at(name)->count() > 0; }
};

// Everything needed to rerun an evaluation: pipeline config plus inputs.
struct Resolved {
  PipelineConfig config;
  std::vector<std::string> features;
  std::vector<std::string> base;
  std::string pin_supports;
};

Resolved resolve(const EvalFlags& f, std::ostream& err) {
  Resolved r;
  if (!f.config_file.empty()) {
    json j = read_json_file(f.config_file, ErrorCode::ConfigError);
    if (j.contains("config")) j = j.at("config");
    r.config = config_from_json(j);
    r.features = j.value("features", std::vector<std::string>{});
    r.base = j.value("base", std::vector<std::string>{});
    if (j.contains("pin_supports") && j.at("pin_supports").is_string()) r.pin_supports = j.at("pin_supports");
  }
  PipelineConfig& c = r.config;

  if (f.given("features") && f.given("ensemble")) {
    throw Error(ErrorCode::ConfigError, "use either --features or --ensemble, not both");
  }
  if (f.given("features")) {
    r.features = {f.features};
    c.use_E = false;
  }
  if (f.given("ensemble")) {
    if (f.ensemble.size() < 2) {
      throw Error(ErrorCode::ConfigError, "--ensemble concatenates backbones and needs at least 2 banks; use --features for one");
    }
    r.features = f.ensemble;
    c.use_E = true;
  }
  if (r.features.empty()) throw Error(ErrorCode::ConfigError, "no feature banks: pass --features or --ensemble");
  if (f.given("base")) r.base = f.base;
  if (f.given("pin-supports")) r.pin_supports = f.pin_supports;

  if (f.given("mode")) c.mode = parse_mode(f.mode);
  if (f.given("ways")) c.n = f.ways;
  if (f.given("shots")) c.k = f.shots;
  if (f.given("queries")) c.q = f.queries;
  if (f.given("runs")) c.n_runs = f.runs;
  if (f.given("seed")) c.global_seed = f.seed;
  if (f.given("beta")) c.beta = f.beta;
  if (f.given("max-iters")) c.max_iters = f.max_iters;
  if (f.given("shift-tol")) c.shift_tol = f.shift_tol;
  if (f.given("views")) c.views = f.views;
  if (f.no_as) c.use_AS = false;
  if (f.no_center) c.use_C = false;
  if (f.no_normalize) c.use_H = false;
  if (f.imbalanced || f.given("q-total") || f.given("dirichlet-a")) {
    ImbalanceSpec spec = c.imbalance.value_or(ImbalanceSpec{});
    if (f.given("q-total")) spec.q_total = f.q_total;
    if (f.given("dirichlet-a")) spec.dirichlet_a = f.dirichlet_a;
    c.imbalance = spec;
  }
  c.threads = f.threads;
  c.keep_per_run = f.per_run;

  if (c.mode == Mode::Inductive && c.use_C && r.base.empty()) {
    err << "warning: no --base banks for inductive centering; using the mean of the feature banks instead\n";
    r.base = r.features;
  }
  return r;
}

json echo(const Resolved& r) {
  json j = config_to_json(r.config);
  j["features"] = r.features;
  j["base"] = r.base;
  j["pin_supports"] = r.pin_supports.empty() ? json(nullptr) : json(r.pin_supports);
  return j;
}

// Keeps loaded banks alive for the BankSet pointers.
struct LoadedBanks {
  std::deque<FeatureBank> storage;
  BankSet set;
};

LoadedBanks load_banks(const Resolved& r) {
  LoadedBanks lb;
  for (const auto& path : r.features) lb.set.features.push_back(&lb.storage.emplace_back(load_feature_bank(path)));
  if (r.config.mode == Mode::Inductive && r.config.use_C) {
    for (std::size_t i = 0; i < r.base.size(); ++i) {
      if (i < r.features.size() && r.base[i] == r.features[i]) {
        lb.set.base.push_back(lb.set.features[i]);
      } else {
        lb.set.base.push_back(&lb.storage.emplace_back(load_feature_bank(r.base[i])));
      }
    }
  }
  if (!r.pin_supports.empty()) {
    json j = read_json_file(r.pin_supports, ErrorCode::InvalidSpec);
    if (j.contains("spec")) j = j.at("spec");
    const Matrix means = class_means(spec_from_json(j));
    for (std::size_t b = 0; b < lb.set.features.size(); ++b) lb.set.support_means.push_back(means);
  }
  return lb;
}

int run_eval(const EvalFlags& f, std::ostream& out, std::ostream& err) {
  const Resolved r = resolve(f, err);
  const LoadedBanks banks = load_banks(r);
  const EvalSummary summary = evaluate(banks.set, r.config);
  if (f.format == "csv") {
    emit(csv_header() + "\n" + csv_row(r.config, summary) + "\n", f.out, out);
  } else {
    const json j = {{"config", echo(r)}, {"summary", summary_to_json(summary, f.timing)}};
    emit(j.dump(2) + "\n", f.out, out);
  }
  return kExitOk;
}

int run_sweep(const EvalFlags& f, const std::string& param_text, const std::vector<double>& values,
              std::ostream& out, std::ostream& err) {
  const SweepParam param = parse_sweep_param(param_text);
  const Resolved r = resolve(f, err);
  if (param == SweepParam::Backbones && !f.given("ensemble")) {
    throw Error(ErrorCode::ConfigError, "a backbone sweep needs the banks listed with --ensemble");
  }
  const LoadedBanks banks = load_banks(r);
  const auto rows = sweep(banks.set, param, values, r.config);

  if (f.format == "json") {
    json arr = json::array();
    for (const auto& row : rows) {
      arr.push_back({{"param", to_string(param)}, {"value", row.value},
                     {"config", config_to_json(row.config)}, {"summary", summary_to_json(row.summary, f.timing)}});
    }
    emit(json({{"config", echo(r)}, {"sweep", arr}}).dump(2) + "\n", f.out, out);
  } else {
    std::ostringstream csv;
    csv << "# config " << echo(r).dump() << "\n";
    csv << "param,value," << csv_header() << "\n";
    for (const auto& row : rows) {
      csv << to_string(param) << "," << json(row.value).dump() << "," << csv_row(row.config, row.summary) << "\n";
    }
    emit(csv.str(), f.out, out);
  }
  return kExitOk;
}

struct SynthFlags {
  std::string spec_file;
  std::string out;
  std::string spec_out;
  SyntheticSpec spec;
  std::map<std::string, CLI::Option*> opts;

  void attach(CLI::App* app) {
    app->add_option("--spec", spec_file, "synthetic spec JSON (flags override its fields)");
    app->add_option("--out,-o", out, "output FVB1 path")->required();
    app->add_option("--spec-out", spec_out, "also write the resolved spec JSON here");
    opts["n_classes"] = app->add_option("--classes", spec.n_classes, "number of classes");
    opts["dim"] = app->add_option("--dim", spec.dim, "feature dimension");
    opts["images_per_class"] = app->add_option("--images", spec.images_per_class, "images per class");
    opts["n_views"] = app->add_option("--views", spec.n_views, "views per image");
    opts["separation"] = app->add_option("--separation,-d", spec.separation, "distance between class means");
    opts["sigma"] = app->add_option("--sigma", spec.sigma, "per-image noise std");
    opts["view_noise"] = app->add_option("--view-noise", spec.view_noise, "per-view jitter std");
    opts["pin_supports_to_means"] = app->add_flag("--pin-supports", spec.pin_supports_to_means,
                                                  "record that supports are pinned to the class means");
    opts["seed"] = app->add_option("--seed", spec.seed, "generator seed");
    opts["first_class_id"] = app->add_option("--first-class-id", spec.first_class_id, "id of the first class");
  }
};

int run_gen_synth(const SynthFlags& f, std::ostream& out) {
  json j = spec_to_json(SyntheticSpec{});
  if (!f.spec_file.empty()) {
    json file = read_json_file(f.spec_file, ErrorCode::InvalidSpec);
    if (file.contains("spec")) file = file.at("spec");
    j.update(file);
  }
  const json flags = spec_to_json(f.spec);
  for (const auto& [key, opt] : f.opts) {
    if (opt->count() > 0) j[key] = flags.at(key);
  }
  const SyntheticSpec spec = spec_from_json(j);
  const FeatureBank bank = generate_bank(spec);
  write_feature_bank(bank, f.out);

  BankManifest manifest;
  manifest.source_id = bank.source_id();
  for (const auto& c : bank.classes()) manifest.class_names[c.class_id] = "synthetic_" + std::to_string(c.class_id);
  write_manifest(manifest, manifest_path_for(f.out));

  json result = {{"path", f.out}, {"spec", spec_to_json(spec)}};
  if (spec.n_classes == 2 && spec.pin_supports_to_means) {
    result["oracle_accuracy"] = {{"views_averaged_1", oracle_accuracy(spec, 1)},
                                 {"views_averaged_all", oracle_accuracy(spec, 0)}};
  }
  if (!f.spec_out.empty()) emit(spec_to_json(spec).dump(2) + "\n", f.spec_out, out);
  out << result.dump(2) << "\n";
  return kExitOk;
}

int run_validate(const std::vector<std::string>& paths, std::ostream& out) {
  json files = json::array();
  bool ok = true;
  std::deque<FeatureBank> banks;
  for (const auto& path : paths) {
    json entry = {{"path", path}};
    try {
      const FeatureBank& bank = banks.emplace_back(read_feature_bank_unchecked(path));
      const auto report = validate_bank(bank);
      entry["valid"] = report.empty();
      entry["dim"] = bank.dim();
      entry["n_views"] = bank.n_views();
      entry["n_classes"] = bank.n_classes();
      entry["violations"] = violations_to_json(report);
      ok = ok && report.empty();
    } catch (const Error& e) {
      entry["valid"] = false;
      entry["violations"] = json::array({{{"kind", to_string(e.code())}, {"message", e.what()}}});
      ok = false;
    }
    files.push_back(entry);
  }
  json result = {{"files", files}};
  if (ok && banks.size() > 1) {
    ValidationReport all;
    for (std::size_t b = 1; b < banks.size(); ++b) {
      auto report = check_ensemble_compatible(banks.front(), banks[b]);
      all.insert(all.end(), report.begin(), report.end());
    }
    result["ensemble_compatible"] = all.empty();
    result["ensemble_violations"] = violations_to_json(all);
    ok = all.empty();
  }
  result["valid"] = ok;
  out << result.dump(2) << "\n";
  return ok ? kExitOk : kExitDataError;
}

}  // namespace

int parse_and_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Few-shot classification evaluation engine"};
  app.name("fewshot");
  app.require_subcommand(1);

  EvalFlags eval_flags;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a pipeline over many sampled episodes");
  eval_flags.attach(eval_cmd);

  EvalFlags sweep_flags;
  std::string sweep_param;
  std::vector<double> sweep_values;
  auto* sweep_cmd = app.add_subcommand("sweep", "evaluate once per value of beta, views or backbones");
  sweep_flags.attach(sweep_cmd);
  sweep_cmd->add_option("--param", sweep_param, "beta, views or backbones")->required();
  sweep_cmd->add_option("--values", sweep_values, "comma separated values")->required()->delimiter(',');

  SynthFlags synth_flags;
  auto* synth_cmd = app.add_subcommand("gen-synth", "generate a Gaussian class-cluster feature bank");
  synth_flags.attach(synth_cmd);

  std::vector<std::string> validate_paths;
  auto* validate_cmd = app.add_subcommand("validate", "check FVB1 files and their ensemble compatibility");
  validate_cmd->add_option("--features,files", validate_paths, "FVB1 files")->required();

  auto* fmt_cmd = app.add_subcommand("fmt-spec", "print the FVB1 byte layout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitConfigError;
  }

  try {
    if (*eval_cmd) {
      if (eval_flags.format.empty()) eval_flags.format = "json";
      return run_eval(eval_flags, out, err);
    }
    if (*sweep_cmd) {
      if (sweep_flags.format.empty()) sweep_flags.format = "csv";
      return run_sweep(sweep_flags, sweep_param, sweep_values, out, err);
    }
    if (*synth_cmd) return run_gen_synth(synth_flags, out);
    if (*validate_cmd) return run_validate(validate_paths, out);
    if (*fmt_cmd) {
      out << fvb1_layout_description();
      return kExitOk;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return is_config_error(e.code()) ? kExitConfigError : kExitDataError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitDataError;
  }
  return kExitConfigError;
}

}  // namespace fewshot
