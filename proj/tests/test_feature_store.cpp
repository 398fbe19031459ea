#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include "fewshot/errors.hpp"
#include "fewshot/feature_store.hpp"
#include "oracles.hpp"

using namespace fewshot;

namespace {

FeatureBank tiny_bank() {
  return FeatureBank("tiny", 2, 1, {{7, 1, {1.0f, 2.0f}}, {3, 1, {-0.5f, 1e-30f}}});
}

FeatureBank random_bank(std::mt19937_64& gen, std::uint32_t classes, std::uint32_t dim, std::uint32_t views) {
  std::normal_distribution<float> normal;
  std::uniform_int_distribution<std::uint32_t> images(1, 6);
  std::vector<ClassFeatures> cls;
  for (std::uint32_t c = 0; c < classes; ++c) {
    ClassFeatures cf{c * 11 + 5, images(gen), {}};
    cf.values.resize(static_cast<std::size_t>(cf.n_images) * views * dim);
    for (auto& v : cf.values) v = normal(gen);
    cls.push_back(std::move(cf));
  }
  return FeatureBank("random", dim, views, std::move(cls));
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

ErrorCode load_error(const std::filesystem::path& path) {
  try {
    load_feature_bank(path);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("load succeeded");
  return ErrorCode::IoError;
}

}  // namespace

TEST_CASE("round trip of a 2-class bank is bit exact and keeps class order") {
  const auto bank = tiny_bank();
  const auto path = oracle::temp_path("tiny.fvb");
  write_feature_bank(bank, path);
  const auto loaded = load_feature_bank(path);
  CHECK(same_contents(bank, loaded));
  REQUIRE(loaded.n_classes() == 2);
  CHECK(loaded.class_at(0).class_id == 7);
  CHECK(loaded.class_at(1).class_id == 3);
  CHECK(loaded.view(1, 0, 0)[1] == 1e-30f);
  CHECK(loaded.source_id() == path.stem().string());
}

TEST_CASE("round trip property over random banks") {
  std::mt19937_64 gen(42);
  for (int trial = 0; trial < 25; ++trial) {
    const auto bank = random_bank(gen, 1 + trial % 5, 1 + trial % 7, 1 + trial % 3);
    const auto bytes = serialize_feature_bank(bank);
    CHECK(same_contents(parse_feature_bank(bytes), bank));
  }
}

TEST_CASE("header layout is little endian") {
  const auto bytes = serialize_feature_bank(tiny_bank());
  REQUIRE(bytes.size() == 20 + 2 * (8 + 8));
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "FVB1");
  CHECK(bytes[4] == 1);   // version
  CHECK(bytes[8] == 2);   // dim
  CHECK(bytes[12] == 1);  // n_views
  CHECK(bytes[16] == 2);  // n_classes
  CHECK(bytes[20] == 7);  // first class id
  // 1.0f = 0x3f800000
  CHECK(bytes[28] == 0x00);
  CHECK(bytes[31] == 0x3f);
}

TEST_CASE("header dim 3 with a 2-float payload is a dimension mismatch") {
  auto bytes = serialize_feature_bank(FeatureBank("x", 2, 1, {{0, 1, {1.0f, 2.0f}}}));
  bytes[8] = 3;
  const auto path = oracle::temp_path("dim.fvb");
  write_bytes(path, bytes);
  CHECK(load_error(path) == ErrorCode::DimensionMismatch);
}

TEST_CASE("structural errors") {
  const auto good = serialize_feature_bank(tiny_bank());

  SUBCASE("bad magic") {
    auto bytes = good;
    bytes[3] = '2';
    const auto path = oracle::temp_path("magic.fvb");
    write_bytes(path, bytes);
    CHECK(load_error(path) == ErrorCode::BadMagic);
  }
  SUBCASE("truncated header") {
    const auto path = oracle::temp_path("short.fvb");
    write_bytes(path, {good.begin(), good.begin() + 10});
    CHECK(load_error(path) == ErrorCode::TruncatedFile);
  }
  SUBCASE("truncated mid-float") {
    const auto path = oracle::temp_path("midfloat.fvb");
    write_bytes(path, {good.begin(), good.end() - 3});
    CHECK(load_error(path) == ErrorCode::TruncatedFile);
  }
  SUBCASE("missing class record") {
    const auto path = oracle::temp_path("missing.fvb");
    write_bytes(path, {good.begin(), good.begin() + 28});
    CHECK(load_error(path) == ErrorCode::TruncatedFile);
  }
  SUBCASE("trailing bytes") {
    auto bytes = good;
    bytes.insert(bytes.end(), {0, 0, 0, 0});
    const auto path = oracle::temp_path("trailing.fvb");
    write_bytes(path, bytes);
    CHECK(load_error(path) == ErrorCode::DimensionMismatch);
  }
  SUBCASE("missing file") {
    CHECK(load_error(oracle::temp_path("absent.fvb")) == ErrorCode::IoError);
  }
  SUBCASE("NaN in payload") {
    auto bytes = good;
    // class 0 value 1 -> quiet NaN 0x7fc00000
    bytes[32] = 0x00;
    bytes[33] = 0x00;
    bytes[34] = 0xc0;
    bytes[35] = 0x7f;
    const auto path = oracle::temp_path("nan.fvb");
    write_bytes(path, bytes);
    CHECK(load_error(path) == ErrorCode::NonFiniteValue);
  }
}

TEST_CASE("30-view 640-dim bank loads with 30 vectors per image") {
  std::vector<ClassFeatures> classes;
  for (std::uint32_t c = 0; c < 2; ++c) {
    classes.push_back({c, 2, std::vector<float>(2 * 30 * 640, 0.25f * static_cast<float>(c + 1))});
  }
  const FeatureBank bank("resnet12", 640, 30, std::move(classes));
  const auto path = oracle::temp_path("big.fvb");
  write_feature_bank(bank, path);
  const auto loaded = load_feature_bank(path);
  CHECK(loaded.n_views() == 30);
  CHECK(loaded.image(1, 1).size() == 30u * 640u);
  CHECK(loaded.view(1, 1, 29).size() == 640u);
  CHECK(loaded.view(1, 1, 29)[639] == 0.5f);
}

TEST_CASE("three 640-dim banks written for ensemble use validate and are compatible") {
  std::mt19937_64 gen(9);
  std::normal_distribution<float> normal;
  std::vector<FeatureBank> banks;
  for (int b = 0; b < 3; ++b) {
    std::vector<ClassFeatures> classes;
    for (std::uint32_t c = 0; c < 3; ++c) {
      ClassFeatures cf{c, 2, std::vector<float>(2 * 640)};
      for (auto& v : cf.values) v = normal(gen);
      classes.push_back(std::move(cf));
    }
    banks.emplace_back("backbone" + std::to_string(b), 640, 1, std::move(classes));
    const auto path = oracle::temp_path("ens" + std::to_string(b) + ".fvb");
    write_feature_bank(banks.back(), path);
    CHECK(validate_bank(load_feature_bank(path)).empty());
  }
  CHECK(check_ensemble_compatible(banks[0], banks[1]).empty());
  CHECK(check_ensemble_compatible(banks[0], banks[2]).empty());
}

TEST_CASE("write rejects an empty class before touching disk") {
  const FeatureBank bank("bad", 2, 1, {{0, 0, {}}});
  const auto path = oracle::temp_path("empty.fvb");
  CHECK_THROWS_AS(write_feature_bank(bank, path), Error);
  CHECK_FALSE(std::filesystem::exists(path));
}

TEST_CASE("validate_bank") {
  SUBCASE("valid bank gives an empty report") { CHECK(validate_bank(tiny_bank()).empty()); }

  SUBCASE("NaN is located by class, image, view and coordinate") {
    std::vector<float> values(3 * 2 * 4, 1.0f);
    values[(2 * 2 + 1) * 4 + 3] = std::numeric_limits<float>::quiet_NaN();
    const FeatureBank bank("nan", 4, 2, {{0, 1, std::vector<float>(8, 0.0f)}, {9, 3, values}});
    const auto report = validate_bank(bank);
    REQUIRE(report.size() == 1);
    CHECK(report[0].kind == "NonFiniteValue");
    CHECK(report[0].class_position == 1u);
    CHECK(report[0].image == 2u);
    CHECK(report[0].view == 1u);
    CHECK(report[0].coordinate == 3u);
  }

  SUBCASE("duplicate ids, empty classes and bad payload sizes") {
    const FeatureBank bank("dup", 2, 1, {{1, 1, {0.f, 0.f}}, {1, 0, {}}, {2, 2, {0.f}}});
    const auto report = validate_bank(bank);
    std::vector<std::string> kinds;
    for (const auto& v : report) kinds.push_back(v.kind);
    CHECK(kinds == std::vector<std::string>{"DuplicateClass", "EmptyClass", "DimensionMismatch"});
  }

  SUBCASE("mismatched class sets report the symmetric difference") {
    const FeatureBank a("a", 1, 1, {{1, 1, {0.f}}, {2, 1, {0.f}}, {3, 1, {0.f}}});
    const FeatureBank b("b", 1, 1, {{2, 1, {0.f}}, {3, 1, {0.f}}, {4, 1, {0.f}}});
    const auto report = check_ensemble_compatible(a, b);
    REQUIRE(report.size() == 2);
    CHECK(report[0].message.find("class id 1") != std::string::npos);
    CHECK(report[1].message.find("class id 4") != std::string::npos);
  }
}

TEST_CASE("sidecar manifest names the source") {
  const auto path = oracle::temp_path("named.fvb");
  write_feature_bank(tiny_bank(), path);
  write_manifest({"resnet12-seed3", {{7, "dog"}, {3, "cat"}}}, manifest_path_for(path));
  const auto loaded = load_feature_bank(path);
  CHECK(loaded.source_id() == "resnet12-seed3");
  const auto m = load_manifest(manifest_path_for(path));
  CHECK(m.class_names.at(7) == "dog");
}
