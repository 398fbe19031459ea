#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "fewshot/errors.hpp"
#include "fewshot/rng.hpp"
#include "fewshot/sampler.hpp"
#include "fewshot/synthetic.hpp"

using namespace fewshot;

namespace {

// Image i of class c has the single coordinate 1000 c + i, so tasks reveal
// exactly which images they used.
FeatureBank indexed_bank(std::uint32_t n_classes, std::uint32_t images) {
  std::vector<ClassFeatures> classes;
  for (std::uint32_t c = 0; c < n_classes; ++c) {
    ClassFeatures cls{c + 100, images, {}};
    for (std::uint32_t i = 0; i < images; ++i) cls.values.push_back(static_cast<float>(1000 * c + i));
    classes.push_back(std::move(cls));
  }
  return FeatureBank("indexed", 1, 1, std::move(classes));
}

std::uint32_t code_error(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return static_cast<std::uint32_t>(e.code());
  }
  return 0xffffffffu;
}

}  // namespace

TEST_CASE("seed derivation") {
  CHECK(splitmix64(0) == 0xe220a8397b1dcdafULL);
  CHECK(derive_run_seed(7, 3) == splitmix64(7 ^ splitmix64(3)));
  std::set<std::uint64_t> seeds;
  for (std::uint64_t r = 0; r < 100000; ++r) seeds.insert(derive_run_seed(42, r));
  CHECK(seeds.size() == 100000);
}

TEST_CASE("Rng is reproducible and in range") {
  Rng a(9), b(9);
  for (int i = 0; i < 1000; ++i) CHECK(a.next() == b.next());
  Rng r(1);
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform();
    CHECK((u >= 0.0 && u < 1.0));
    CHECK(r.below(7) < 7);
  }
}

TEST_CASE("Rng normal and gamma moments") {
  Rng r(123);
  const int n = 200000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    s += x;
    s2 += x * x;
  }
  CHECK(std::abs(s / n) < 0.01);
  CHECK(std::abs(s2 / n - 1.0) < 0.01);
  for (double shape : {0.5, 2.0, 7.5}) {
    double g = 0;
    for (int i = 0; i < n; ++i) g += r.gamma(shape);
    CHECK(std::abs(g / n - shape) < 0.02 * std::max(1.0, shape));
  }
}

TEST_CASE("benchmark default task shape") {
  const auto bank = indexed_bank(20, 30);
  const Task t = sample_task(bank, 5, 1, 15, 42);
  CHECK(t.ways() == 5);
  CHECK(t.query.rows() == 75);
  CHECK(t.query_labels.size() == 75);
  for (const auto& s : t.support) CHECK(s.rows() == 1);
  for (auto l : t.query_labels) CHECK(l < 5);
}

TEST_CASE("same seed gives identical tasks, different seeds differ") {
  const auto bank = indexed_bank(20, 30);
  const Task a = sample_task(bank, 5, 1, 15, 42);
  const Task b = sample_task(bank, 5, 1, 15, 42);
  const Task c = sample_task(bank, 5, 1, 15, 43);
  CHECK(a.query == b.query);
  for (std::size_t i = 0; i < 5; ++i) CHECK(a.support[i] == b.support[i]);
  CHECK(a.query_labels == b.query_labels);
  CHECK(a.query != c.query);
}

TEST_CASE("exact-size bank uses every image exactly once") {
  const auto bank = indexed_bank(5, 16);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Task t = sample_task(bank, 5, 1, 15, seed);
    std::multiset<double> used;
    for (const auto& s : t.support) used.insert(s(0, 0));
    for (Eigen::Index r = 0; r < t.query.rows(); ++r) used.insert(t.query(r, 0));
    CHECK(used.size() == 80);
    CHECK(std::set<double>(used.begin(), used.end()).size() == 80);
  }
}

TEST_CASE("support and query are disjoint and labels match the class") {
  const auto bank = indexed_bank(10, 25);
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    const Task t = sample_task(bank, 5, 3, 7, seed);
    for (std::uint32_t i = 0; i < 5; ++i) {
      const double cls = std::floor(t.support[i](0, 0) / 1000.0);
      std::set<double> support;
      for (Eigen::Index r = 0; r < t.support[i].rows(); ++r) {
        CHECK(std::floor(t.support[i](r, 0) / 1000.0) == cls);
        support.insert(t.support[i](r, 0));
      }
      CHECK(support.size() == 3);
      for (Eigen::Index r = 0; r < t.query.rows(); ++r) {
        if (t.query_labels[static_cast<std::size_t>(r)] != i) continue;
        CHECK(std::floor(t.query(r, 0) / 1000.0) == cls);
        CHECK(support.count(t.query(r, 0)) == 0);
      }
    }
  }
}

TEST_CASE("class selection is uniform over 50,000 draws") {
  const auto bank = indexed_bank(20, 2);
  std::vector<int> hits(20, 0);
  const int draws = 50000;
  for (int d = 0; d < draws; ++d) {
    const Episode e = sample_episode(bank, 5, 1, 1, derive_run_seed(1, static_cast<std::uint64_t>(d)));
    CHECK(std::set<std::uint32_t>(e.classes.begin(), e.classes.end()).size() == 5);
    for (auto c : e.classes) ++hits[c];
  }
  for (int h : hits) CHECK(std::abs(h / static_cast<double>(draws) - 0.25) <= 0.01);
}

TEST_CASE("sampling errors") {
  const auto bank = indexed_bank(4, 10);
  CHECK(code_error([&] { sample_task(bank, 5, 1, 1, 0); }) == static_cast<std::uint32_t>(ErrorCode::NotEnoughClasses));
  CHECK(code_error([&] { sample_task(bank, 2, 5, 6, 0); }) == static_cast<std::uint32_t>(ErrorCode::NotEnoughImages));
  CHECK_NOTHROW(sample_task(bank, 4, 5, 5, 0));
  const ImbalanceSpec big{60, 2.0};
  CHECK(code_error([&] { sample_imbalanced_task(bank, 2, 1, big, 0); }) ==
        static_cast<std::uint32_t>(ErrorCode::NotEnoughImages));
}

TEST_CASE("largest_remainder") {
  const std::vector<double> thirds = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  CHECK(largest_remainder(thirds, 10) == std::vector<std::uint32_t>{4, 3, 3});
  const std::vector<double> p = {0.1, 0.45, 0.45};
  CHECK(largest_remainder(p, 75) == std::vector<std::uint32_t>{7, 34, 34});
  const std::vector<double> exact = {0.2, 0.8};
  CHECK(largest_remainder(exact, 5) == std::vector<std::uint32_t>{1, 4});
}

TEST_CASE("imbalanced counts sum exactly to q_total") {
  Rng rng(5);
  const ImbalanceSpec spec{75, 2.0};
  for (int t = 0; t < 10000; ++t) {
    const auto counts = dirichlet_query_counts(rng, 5, spec);
    CHECK(std::accumulate(counts.begin(), counts.end(), 0u) == 75u);
  }
}

TEST_CASE("Dirichlet proportions average to 1/n") {
  Rng rng(77);
  const int draws = 10000;
  std::vector<double> total(5, 0.0);
  for (int t = 0; t < draws; ++t) {
    const auto p = rng.dirichlet(5, 2.0);
    double s = 0;
    for (std::size_t i = 0; i < 5; ++i) {
      total[i] += p[i];
      s += p[i];
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
  for (double v : total) CHECK(std::abs(v / draws - 0.2) < 0.01);
}

TEST_CASE("huge concentration gives near-equal counts") {
  Rng rng(8);
  const ImbalanceSpec spec{75, 1e6};
  for (int t = 0; t < 1000; ++t) {
    for (auto c : dirichlet_query_counts(rng, 5, spec)) CHECK(std::abs(static_cast<int>(c) - 15) <= 1);
  }
}

TEST_CASE("imbalanced task labels follow the drawn counts") {
  const auto bank = indexed_bank(10, 90);
  const ImbalanceSpec spec{75, 2.0};
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const Episode e = sample_imbalanced_episode(bank, 5, 1, spec, seed);
    std::size_t total = 0;
    for (const auto& q : e.query) total += q.size();
    CHECK(total == 75);
    const Task t = sample_imbalanced_task(bank, 5, 1, spec, seed);
    CHECK(t.query.rows() == 75);
    for (std::uint32_t i = 0; i < 5; ++i) {
      CHECK(static_cast<std::size_t>(std::count(t.query_labels.begin(), t.query_labels.end(), i)) ==
            e.query[i].size());
    }
  }
}

TEST_CASE("build_task averages views and concatenates banks in order") {
  std::vector<ClassFeatures> a_classes, b_classes;
  for (std::uint32_t c = 0; c < 3; ++c) {
    // image 0 has views (c, c + 2), image 1 has views (c + 10, c + 12)
    a_classes.push_back({c, 2, {float(c), float(c + 2), float(c + 10), float(c + 12)}});
    b_classes.push_back({c, 2, {float(-1.0f * c), float(-1.0f * c - 20)}});
  }
  const FeatureBank a("a", 1, 2, a_classes);
  const FeatureBank b("b", 1, 1, b_classes);
  Episode e;
  e.classes = {2, 0};
  e.support = {{0}, {1}};
  e.query = {{1}, {0}};
  const std::vector<const FeatureBank*> banks = {&a};
  const Task both = build_task(e, banks, 2);
  CHECK(both.support[0](0, 0) == 3.0);   // class 2 image 0: (2 + 4) / 2
  CHECK(both.support[1](0, 0) == 11.0);  // class 0 image 1: (10 + 12) / 2
  const Task first = build_task(e, banks, 1);
  CHECK(first.support[0](0, 0) == 2.0);
  const std::vector<const FeatureBank*> pair = {&a, &b};
  const Task cat = build_task(e, pair, 1);
  CHECK(cat.dim() == 2);
  CHECK(cat.query(0, 0) == 12.0);
  CHECK(cat.query(0, 1) == -22.0);
  CHECK(cat.query_labels == std::vector<std::uint32_t>{0, 1});
}
