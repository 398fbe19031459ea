#include <doctest.h>

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fewshot/cli.hpp"
#include "fewshot/feature_store.hpp"
#include "oracles.hpp"

using namespace fewshot;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "fewshot");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = parse_and_dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string make_bank(const std::string& name, std::vector<std::string> extra = {}, const std::string& images = "30") {
  const std::string path = oracle::temp_path(name + ".fvb").string();
  std::vector<std::string> args = {"gen-synth", "--classes", "6", "--dim", "8", "--images", images, "--out", path};
  args.insert(args.end(), extra.begin(), extra.end());
  const auto r = run(args);
  REQUIRE(r.code == kExitOk);
  return path;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("gen-synth writes a loadable bank with a manifest") {
  const std::string path = oracle::temp_path("gs.fvb").string();
  const auto r = run({"gen-synth", "--classes", "2", "--dim", "4", "--images", "10", "-d", "2", "--pin-supports",
                      "--seed", "3", "--out", path});
  REQUIRE(r.code == kExitOk);
  const auto j = json::parse(r.out);
  CHECK(j.at("spec").at("n_classes") == 2);
  CHECK(j.at("oracle_accuracy").at("views_averaged_1").get<double>() == doctest::Approx(0.841344746068543));
  const auto bank = load_feature_bank(path);
  CHECK(bank.n_classes() == 2);
  CHECK(bank.source_id() == "synthetic-seed-3");
  CHECK(std::filesystem::exists(manifest_path_for(path)));
}

TEST_CASE("gen-synth reads a spec file and lets flags override it") {
  const std::string spec = oracle::temp_path("spec.json").string();
  std::ofstream(spec) << R"({"n_classes": 3, "dim": 5, "images_per_class": 4, "seed": 8})";
  const std::string path = oracle::temp_path("gs2.fvb").string();
  const auto r = run({"gen-synth", "--spec", spec, "--dim", "6", "--out", path});
  REQUIRE(r.code == kExitOk);
  const auto bank = load_feature_bank(path);
  CHECK(bank.n_classes() == 3);
  CHECK(bank.dim() == 6);
  CHECK(bank.n_images(0) == 4);

  std::ofstream(spec) << R"({"n_classes": 3, "colour": "red"})";
  CHECK(run({"gen-synth", "--spec", spec, "--out", path}).code == kExitConfigError);
  CHECK(run({"gen-synth", "--classes", "30", "--dim", "4", "--out", path}).code == kExitConfigError);
}

TEST_CASE("eval happy path emits a JSON summary") {
  const auto bank = make_bank("eval");
  const auto r = run({"eval", "--features", bank, "--mode", "inductive", "--ways", "5", "--shots", "1", "--queries",
                      "15", "--runs", "200", "--seed", "42", "--base", bank});
  REQUIRE(r.code == kExitOk);
  const auto j = json::parse(r.out);
  CHECK(j.at("config").at("method") == "ASY");
  CHECK(j.at("config").at("seed") == 42);
  CHECK(j.at("config").at("runs") == 200);
  const double mean = j.at("summary").at("mean");
  CHECK((mean > 0.2 && mean <= 1.0));
  CHECK(j.at("summary").at("interval").get<double>() > 0.0);
  CHECK_FALSE(j.at("summary").contains("seconds"));
}

TEST_CASE("eval without --base warns and falls back to the feature bank") {
  const auto bank = make_bank("nobase");
  const auto r = run({"eval", "--features", bank, "--runs", "20"});
  CHECK(r.code == kExitOk);
  CHECK(r.err.find("warning") != std::string::npos);
  CHECK(json::parse(r.out).at("config").at("base") == json::array({bank}));
}

TEST_CASE("echoed config reproduces the same numbers") {
  const auto bank = make_bank("echo");
  const auto first = run({"eval", "--features", bank, "--mode", "transductive", "--runs", "100", "--seed", "7",
                          "--no-as", "--beta", "2"});
  REQUIRE(first.code == kExitOk);
  const std::string saved = oracle::temp_path("echo.json").string();
  std::ofstream(saved) << first.out;
  const auto second = run({"eval", "--config", saved});
  REQUIRE(second.code == kExitOk);
  CHECK(second.out == first.out);
  // explicit flags override the file
  const auto third = run({"eval", "--config", saved, "--beta", "3"});
  CHECK(json::parse(third.out).at("config").at("beta") == 3.0);
}

TEST_CASE("single bank with --ensemble is a config error") {
  const auto bank = make_bank("ens1");
  const auto r = run({"eval", "--ensemble", bank});
  CHECK(r.code == kExitConfigError);
  CHECK(r.err.find("at least 2") != std::string::npos);
}

TEST_CASE("ensemble eval") {
  const auto a = make_bank("ensA", {"--seed", "1"});
  const auto b = make_bank("ensB", {"--seed", "2"});
  const auto r = run({"eval", "--ensemble", a, b, "--runs", "50", "--base", a, b});
  REQUIRE(r.code == kExitOk);
  CHECK(json::parse(r.out).at("config").at("method") == "EASY");
}

TEST_CASE("data errors exit 2") {
  const std::string missing = oracle::temp_path("missing.fvb").string();
  CHECK(run({"eval", "--features", missing, "--runs", "5"}).code == kExitDataError);
  const std::string junk = oracle::temp_path("junk.fvb").string();
  std::ofstream(junk) << "NOPE and some more bytes here";
  CHECK(run({"eval", "--features", junk, "--runs", "5"}).code == kExitDataError);
  const auto bank = make_bank("few");
  CHECK(run({"eval", "--features", bank, "--ways", "7", "--runs", "5"}).code == kExitDataError);
}

TEST_CASE("config errors exit 1") {
  const auto bank = make_bank("cfg");
  CHECK(run({"eval", "--features", bank, "--bogus-flag"}).code == kExitConfigError);
  CHECK(run({"eval", "--features", bank, "--mode", "sideways"}).code == kExitConfigError);
  CHECK(run({"eval"}).code == kExitConfigError);
  CHECK(run({"eval", "--features", bank, "--ways", "1"}).code == kExitConfigError);
  CHECK(run({"eval", "--features", bank, "--format", "xml"}).code == kExitConfigError);
  CHECK(run({"sweep", "--features", bank, "--param", "gamma", "--values", "1"}).code == kExitConfigError);
  CHECK(run({"sweep", "--features", bank, "--param", "backbones", "--values", "1"}).code == kExitConfigError);
  CHECK(run({}).code == kExitConfigError);
}

TEST_CASE("beta sweep emits one CSV row per grid value") {
  const auto bank = make_bank("sweep");
  const auto r = run({"sweep", "--features", bank, "--mode", "transductive", "--param", "beta", "--values",
                      "0.1,0.5,1,2,5,10,20,50,100,200,500", "--runs", "20"});
  REQUIRE(r.code == kExitOk);
  std::istringstream lines(r.out);
  std::string line;
  std::vector<std::string> all;
  while (std::getline(lines, line)) all.push_back(line);
  REQUIRE(all.size() == 13);
  CHECK(all[0].rfind("# config ", 0) == 0);
  CHECK(all[1] == "param,value,method,mode,n,k,q,beta,runs,seed,mean,interval,seconds");
  CHECK(all[2].rfind("beta,0.1,ASY,transductive,5,1,15,0.1,20,0,", 0) == 0);
  CHECK(all[12].rfind("beta,500.0,ASY,transductive,5,1,15,500.0,20,0,", 0) == 0);
}

TEST_CASE("sweep JSON and output file") {
  const auto a = make_bank("swA", {"--seed", "1", "--views", "3", "--view-noise", "0.5"});
  const auto b = make_bank("swB", {"--seed", "2", "--views", "3", "--view-noise", "0.5"});
  const std::string out = oracle::temp_path("sweep.json").string();
  const auto r = run({"sweep", "--ensemble", a, b, "--param", "b", "--values", "1,2", "--runs", "20", "--format",
                      "json", "--out", out});
  REQUIRE(r.code == kExitOk);
  const auto j = json::parse(slurp(out));
  REQUIRE(j.at("sweep").size() == 2);
  CHECK(j.at("sweep")[0].at("config").at("E") == false);
  CHECK(j.at("sweep")[1].at("config").at("E") == true);

  const auto views = run({"sweep", "--features", a, "--param", "views", "--values", "1,3", "--runs", "20"});
  CHECK(views.code == kExitOk);
  CHECK(run({"sweep", "--features", a, "--param", "views", "--values", "4", "--runs", "20"}).code ==
        kExitConfigError);
}

TEST_CASE("pinned supports through the CLI") {
  const std::string spec = oracle::temp_path("pin.json").string();
  const std::string path = oracle::temp_path("pin.fvb").string();
  REQUIRE(run({"gen-synth", "--classes", "2", "--dim", "4", "--images", "200", "--pin-supports", "--out", path,
               "--spec-out", spec})
              .code == kExitOk);
  const auto r = run({"eval", "--features", path, "--ways", "2", "--no-center", "--no-normalize", "--pin-supports",
                      spec, "--runs", "500"});
  REQUIRE(r.code == kExitOk);
  const auto j = json::parse(r.out);
  CHECK(j.at("config").at("pin_supports") == spec);
  CHECK(std::abs(j.at("summary").at("mean").get<double>() - 0.8413) < 0.05);
}

TEST_CASE("imbalanced eval and csv format") {
  const auto bank = make_bank("imb", {}, "100");
  const auto r = run({"eval", "--features", bank, "--mode", "transductive", "--imbalanced", "--q-total", "60",
                      "--runs", "20", "--format", "csv"});
  REQUIRE(r.code == kExitOk);
  CHECK(r.out.find("ASY,transductive,5,1,60,5.0,20,0,") != std::string::npos);
}

TEST_CASE("validate") {
  const auto a = make_bank("valA");
  const auto b = make_bank("valB", {"--first-class-id", "2"});
  const auto ok = run({"validate", a});
  CHECK(ok.code == kExitOk);
  CHECK(json::parse(ok.out).at("valid") == true);

  const auto mismatch = run({"validate", a, b});
  CHECK(mismatch.code == kExitDataError);
  const auto j = json::parse(mismatch.out);
  CHECK(j.at("ensemble_compatible") == false);

  const std::string junk = oracle::temp_path("bad.fvb").string();
  std::ofstream(junk) << "FVB2xxxxxxxxxxxxxxxxxxxx";
  const auto bad = run({"validate", "--features", junk});
  CHECK(bad.code == kExitDataError);
  CHECK(json::parse(bad.out).at("files")[0].at("violations")[0].at("kind") == "BadMagic");
}

TEST_CASE("fmt-spec and help") {
  const auto r = run({"fmt-spec"});
  CHECK(r.code == kExitOk);
  CHECK(r.out.find("FVB1") != std::string::npos);
  CHECK(run({"--help"}).code == kExitOk);
}
