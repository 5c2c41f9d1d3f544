#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "../support/discovery_oracle.hpp"
#include "cropemu/discovery/cluster.hpp"
#include "cropemu/discovery/importance.hpp"
#include "cropemu/discovery/pca.hpp"
#include "cropemu/discovery/ranking.hpp"
#include "cropemu/error.hpp"
#include "cropemu/random.hpp"

using namespace cropemu;
using namespace cropemu::discovery;

namespace {

swag::EnsemblePrediction scalar(double mean, double cv) {
  return {{mean}, {0.0}, {mean}, {mean}, {cv}};
}

PredictionTable table_of(const std::vector<std::pair<std::string, std::vector<double>>>& envYields) {
  PredictionTable t;
  for (const auto& [env, ys] : envYields)
    for (std::size_t i = 0; i < ys.size(); ++i) t.rows.push_back({i + 1, env, scalar(ys[i], 0.1)});
  return t;
}

}  // namespace

TEST_CASE("top-k ranking") {
  SUBCASE("k equal to the config count keeps everything") {
    const auto t = table_of({{"a", {3, 1, 2}}, {"b", {1, 1, 1}}});
    const auto top = rank_topk_per_env(t, 3, 0);
    CHECK(top.at("a") == std::vector<std::uint64_t>{1, 2, 3});
    CHECK(top.at("b") == std::vector<std::uint64_t>{1, 2, 3});
  }
  SUBCASE("largest yields win") {
    const auto t = table_of({{"a", {1, 2, 3, 4, 5}}});
    CHECK(rank_topk_per_env(t, 2, 0).at("a") == std::vector<std::uint64_t>{4, 5});
  }
  SUBCASE("ties go to the lower cv, then the lower id") {
    PredictionTable t;
    t.rows = {{1, "a", scalar(5, 0.3)}, {2, "a", scalar(5, 0.1)}, {3, "a", scalar(1, 0.0)}};
    CHECK(rank_topk_per_env(t, 1, 0).at("a") == std::vector<std::uint64_t>{2});
    t.rows[0].prediction.cv = {0.1};
    CHECK(rank_topk_per_env(t, 1, 0).at("a") == std::vector<std::uint64_t>{1});
  }
  SUBCASE("incomplete grid names the missing cell") {
    PredictionTable t = table_of({{"a", {1, 2}}, {"b", {1, 2}}});
    t.rows.pop_back();
    try {
      rank_topk_per_env(t, 1, 0);
      FAIL("expected InputError");
    } catch (const InputError& e) {
      CHECK(std::string(e.what()).find("b#2") != std::string::npos);
    }
    CHECK_THROWS_AS(rank_topk_per_env(table_of({{"a", {1, 2}}}), 3, 0), InputError);
  }
}

TEST_CASE("intersection") {
  const auto t = table_of({{"a", {5, 4, 3, 2, 1}}, {"b", {1, 2, 3, 4, 5}}, {"c", {3, 5, 4, 1, 2}}});
  const std::vector<bool> all(t.rows.size(), true);
  SUBCASE("single environment") {
    const auto one = table_of({{"a", {5, 4, 3, 2, 1}}});
    std::vector<bool> mask{true, false, true, true, true};
    const auto r = intersect_resilient(rank_topk_per_env(one, 3, 0), retained_by_env(one, mask), 5);
    CHECK(r.resilientIds == std::vector<std::uint64_t>{1, 3});
    CHECK(r.fractionOfSpace == doctest::Approx(0.4));
  }
  SUBCASE("disjoint top sets give nothing") {
    const auto r = intersect_resilient(rank_topk_per_env(t, 2, 0), retained_by_env(t, all), 5);
    CHECK(r.resilientIds.empty());
    CHECK(r.fractionOfSpace == 0.0);
  }
  SUBCASE("overlap and order independence") {
    const auto top = rank_topk_per_env(t, 3, 0);
    const auto r = intersect_resilient(top, retained_by_env(t, all), 5);
    CHECK(r.resilientIds == std::vector<std::uint64_t>{3});
    auto reordered = t;
    std::reverse(reordered.rows.begin(), reordered.rows.end());
    const auto r2 = intersect_resilient(rank_topk_per_env(reordered, 3, 0), retained_by_env(reordered, all), 5);
    CHECK(r2.resilientIds == r.resilientIds);
  }
  SUBCASE("cv rejection anywhere removes the config") {
    std::vector<bool> mask = all;
    for (std::size_t i = 0; i < t.rows.size(); ++i)
      if (t.rows[i].environment == "c" && t.rows[i].configId == 3) mask[i] = false;
    CHECK(intersect_resilient(rank_topk_per_env(t, 3, 0), retained_by_env(t, mask), 5).resilientIds.empty());
  }
  CHECK(format_fraction_percent(181.0 / 100000) == "0.18%");
  CHECK(format_fraction_percent(0.5) == "50%");
}

TEST_CASE("oracle grid matches the brute-force resilient set") {
  swag::CvFilterConfig cfg;
  cfg.relaxedEnvCount = 1;
  for (std::uint64_t seed : {1u, 2u}) {
    CAPTURE(seed);
    const auto table = testing::oracle_grid(seed, 200);
    CHECK_NOTHROW(table.check_complete());
    const auto lib = testing::library_resilient(table, 40, cropsim::GrainTotalWt, [&] {
      auto c = cfg;
      c.output = cropsim::GrainTotalWt;
      return c;
    }());
    auto c = cfg;
    c.output = cropsim::GrainTotalWt;
    const auto brute = testing::brute_force_resilient(table, 40, cropsim::GrainTotalWt, c);
    CHECK(lib.resilientIds == brute);
    CHECK_FALSE(brute.empty());
  }
}

TEST_CASE("k-means") {
  SUBCASE("separated blobs are recovered exactly") {
    Rng rng(5);
    nn::Tensor pts({200, 3});
    std::vector<std::size_t> truth(200);
    for (std::size_t i = 0; i < 200; ++i) {
      truth[i] = i % 2;
      for (std::size_t j = 0; j < 3; ++j) pts.values[i * 3 + j] = (truth[i] ? 50.0 : -50.0) + standard_normal(rng);
    }
    const auto res = kmeans_cluster(pts, {2, 5, 100, 3});
    for (std::size_t i = 1; i < 200; ++i) CHECK((res.assignment[i] == res.assignment[0]) == (truth[i] == truth[0]));
  }
  SUBCASE("one cluster is the mean") {
    nn::Tensor pts({4, 2}, {0, 1, 2, 3, 4, 5, 6, 7});
    const auto res = kmeans_cluster(pts, {1, 2, 10, 1});
    CHECK(res.centroids.values == std::vector<double>{3, 4});
  }
  SUBCASE("duplicates share a cluster and SSE never rises") {
    Rng rng(9);
    nn::Tensor pts({120, 4});
    for (auto& v : pts.values) v = standard_normal(rng);
    for (std::size_t j = 0; j < 4; ++j) pts.values[119 * 4 + j] = pts.values[7 * 4 + j];
    const auto res = kmeans_cluster(pts, {4, 8, 300, 2});
    CHECK(res.assignment[119] == res.assignment[7]);
    for (const auto& h : res.sseHistory)
      for (std::size_t i = 1; i < h.size(); ++i) CHECK(h[i] <= h[i - 1] + 1e-12);
    CHECK(kmeans_cluster(pts, {4, 8, 300, 2}).assignment == res.assignment);
  }
  CHECK_THROWS_AS(kmeans_cluster(nn::Tensor({3, 2}), {4, 1, 10, 1}), ConfigError);
}

TEST_CASE("cluster summary") {
  nn::Tensor pts({4, 1}, {1, 2, 10, 11});
  KMeansResult km;
  km.assignment = {0, 0, 1, 1};
  km.centroids = nn::Tensor({2, 1}, {1.5, 10.5});
  const std::vector<std::vector<double>> yields{{5, 1}, {7, 1}, {2, 9}, {2, 11}};
  const auto s = summarize_clusters(km, pts, {"RUE"}, yields, {"Logan", "Bremer"});
  CHECK(s.clusters[0].size == 2);
  CHECK(s.clusters[1].traitMeans[0] == 10.5);
  CHECK(s.clusters[0].yieldMean == doctest::Approx(3.5));
  CHECK(s.bestClusterPerLocation.at("Logan") == 0);
  CHECK(s.bestClusterPerLocation.at("Bremer") == 1);
}

TEST_CASE("permutation importance") {
  Rng rng(14);
  const std::size_t n = 400;
  nn::Tensor x({n, 3});
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < 3; ++j) x.values[i * 3 + j] = uniform01(rng);
    y[i] = 5 * x.values[i * 3] + x.values[i * 3 + 1];
  }
  const Predictor oracle = [](const nn::Tensor& m) {
    std::vector<double> p(m.batch());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = 5 * m.values[i * 3] + m.values[i * 3 + 1];
    return p;
  };
  const auto imp = permutation_importance(oracle, x, y, {"RUE", "TF1", "null"}, 10, 3);
  CHECK(imp[0].rank == 1);
  CHECK(imp[1].rank == 2);
  CHECK(imp[2].drop == 0.0);
  CHECK(std::abs(imp[2].drop) <= 2 * imp[2].dropStd / std::sqrt(10.0) + 1e-15);
  CHECK(imp[0].percent + imp[1].percent + imp[2].percent == doctest::Approx(100));
  // Shuffling everything leaves a predictor no better than a constant (r2 near 0 or below).
  const double joint = joint_permutation_drop(oracle, x, y, 10, 4);
  CHECK(joint == doctest::Approx(1.0 - r2_score(std::vector<double>(n, 0.0), y)).epsilon(0.5));
  CHECK(joint > 1.5);
  CHECK_THROWS_AS(permutation_importance(oracle, x, y, {}, 0, 1), InputError);
}

TEST_CASE("permutation importance of a noisy null feature is indistinguishable from zero") {
  Rng rng(33);
  const std::size_t n = 300;
  nn::Tensor x({n, 2});
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x.values[i * 2] = uniform01(rng);
    x.values[i * 2 + 1] = uniform01(rng);
    y[i] = 3 * x.values[i * 2] + 0.5 * standard_normal(rng);
  }
  // A learner-like predictor that picked up a tiny spurious weight.
  const Predictor fitted = [](const nn::Tensor& m) {
    std::vector<double> p(m.batch());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = 3 * m.values[i * 2] + 0.01 * (m.values[i * 2 + 1] - 0.5);
    return p;
  };
  const auto imp = permutation_importance(fitted, x, y, {"signal", "null"}, 10, 8);
  CHECK(std::abs(imp[1].drop) < 2 * imp[1].dropStd / std::sqrt(10.0) + 2e-4);
  CHECK(imp[0].rank == 1);
}

TEST_CASE("pca") {
  SUBCASE("points on a line") {
    nn::Tensor pts({50, 5});
    for (std::size_t i = 0; i < 50; ++i)
      for (std::size_t j = 0; j < 5; ++j) pts.values[i * 5 + j] = static_cast<double>(i) * (j + 1.0) - 3.0 * j;
    const auto r = pca_project(pts);
    CHECK(r.explained[0] >= 0.999);
    const auto& l = r.loadings[0];
    CHECK(*std::max_element(l.begin(), l.end(), [](double a, double b) { return std::abs(a) < std::abs(b); }) > 0);
  }
  SUBCASE("isotropic cloud") {
    Rng rng(2);
    const std::size_t d = 4;
    nn::Tensor pts({10000, d});
    for (auto& v : pts.values) v = standard_normal(rng);
    const auto r = pca_project(pts, d);
    for (double e : r.explained) CHECK(std::abs(e - 0.25) < 0.03);
  }
  SUBCASE("row order does not matter") {
    Rng rng(6);
    nn::Tensor pts({30, 3});
    for (std::size_t i = 0; i < 30; ++i) {
      const double t = standard_normal(rng);
      pts.values[i * 3] = t;
      pts.values[i * 3 + 1] = 2 * t + 0.3 * standard_normal(rng);
      pts.values[i * 3 + 2] = standard_normal(rng);
    }
    std::vector<std::size_t> rev(30);
    for (std::size_t i = 0; i < 30; ++i) rev[i] = 29 - i;
    const auto a = pca_project(pts), b = pca_project(pts.gather_rows(rev));
    for (std::size_t c = 0; c < 2; ++c) {
      CHECK(a.explained[c] == doctest::Approx(b.explained[c]));
      for (std::size_t i = 0; i < 30; ++i)
        CHECK(a.coordinates.values[i * 2 + c] == doctest::Approx(b.coordinates.values[(29 - i) * 2 + c]));
    }
  }
  CHECK_THROWS_AS(pca_project(nn::Tensor({1, 3})), InputError);
}
