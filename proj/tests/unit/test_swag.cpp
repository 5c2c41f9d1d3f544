#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include <Eigen/Dense>

#include "cropemu/csv.hpp"
#include "cropemu/error.hpp"
#include "cropemu/log.hpp"
#include "cropemu/random.hpp"
#include "cropemu/swag/ensemble.hpp"

using namespace cropemu;
using namespace cropemu::swag;

namespace {

SwagPosterior scalar_posterior(std::initializer_list<double> snapshots, std::size_t rank = 10) {
  SwagPosterior p(1, rank);
  for (double w : snapshots) p.add_snapshot(std::vector<double>{w});
  return p;
}

EnsemblePrediction prediction(double mean, double sd) {
  return {{mean}, {sd * sd}, {mean - kInterval95 * sd}, {mean + kInterval95 * sd}, {sd / std::abs(mean)}};
}

struct SmallModel {
  emulator::Emulator em;
  nn::Tensor x, y;
  std::vector<std::size_t> rows;
};

SmallModel small_model(std::vector<std::size_t> hidden) {
  SmallModel m;
  const std::size_t n = 256;
  Rng rng(3);
  m.x = nn::Tensor({n, 3});
  m.y = nn::Tensor({n, 2});
  for (auto& v : m.x.values) v = standard_normal(rng);
  for (std::size_t r = 0; r < n; ++r) {
    m.y.values[r * 2] = m.x.values[r * 3] - m.x.values[r * 3 + 1] + 0.3 * standard_normal(rng) + 20;
    m.y.values[r * 2 + 1] = 2 * m.x.values[r * 3 + 2] + 0.3 * standard_normal(rng) + 5;
    m.rows.push_back(r);
  }
  emulator::EmulatorHyper h;
  h.hidden = std::move(hidden);
  h.maxEpochs = 20;
  h.batchSize = 32;
  h.learningRate = 3e-3;
  m.em = emulator::train_emulator(m.x, m.y, m.rows, {"a", "b", "c"}, {"u", "v"}, h);
  return m;
}

}  // namespace

TEST_CASE("hand moments of two scalar snapshots") {
  const auto p = scalar_posterior({1.0, 3.0});
  CHECK(p.weightMean[0] == 2.0);
  CHECK(p.secondMoment[0] == 5.0);
  CHECK(p.diagonal_variance()[0] == 1.0);
  CHECK(p.snapshotCount == 2);
  REQUIRE(p.rank() == 2);
  CHECK(p.deviationColumns[0][0] == 0.0);   // first snapshot against its own mean
  CHECK(p.deviationColumns[1][0] == 1.0);   // 3 - 2
}

TEST_CASE("deviation columns keep the newest maxRank snapshots") {
  SwagPosterior p(1, 10);
  for (int i = 0; i < 10; ++i) p.add_snapshot(std::vector<double>{static_cast<double>(i * i)});
  CHECK(p.rank() == 10);
  const double newest = p.deviationColumns.back()[0];
  p.add_snapshot(std::vector<double>{5.0});
  p.add_snapshot(std::vector<double>{7.0});
  CHECK(p.rank() == 10);
  CHECK(p.deviationColumns[7][0] == newest);
  CHECK(p.deviationColumns.back()[0] == doctest::Approx(7.0 - p.weightMean[0]));
}

TEST_CASE("running moments equal batch moments") {
  Rng rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t P = 7, S = 3 + static_cast<std::size_t>(trial);
    std::vector<std::vector<double>> snaps(S, std::vector<double>(P));
    SwagPosterior p(P, 4);
    for (auto& s : snaps) {
      for (auto& v : s) v = 10 * standard_normal(rng);
      p.add_snapshot(s);
    }
    for (std::size_t i = 0; i < P; ++i) {
      double m = 0, m2 = 0;
      for (const auto& s : snaps) {
        m += s[i];
        m2 += s[i] * s[i];
      }
      m /= static_cast<double>(S);
      m2 /= static_cast<double>(S);
      CHECK(std::abs(p.weightMean[i] - m) <= 1e-12 * std::max(1.0, std::abs(m)));
      CHECK(std::abs(p.secondMoment[i] - m2) <= 1e-12 * std::max(1.0, m2));
    }
  }
}

TEST_CASE("diagonal variance is clamped at zero") {
  SwagPosterior p(2);
  p.snapshotCount = 2;
  p.weightMean = {0.1, 3.0};
  p.secondMoment = {0.1 * 0.1 - 1e-18, 9.5};
  const auto v = p.diagonal_variance();
  CHECK(v[0] == 0.0);
  CHECK(v[1] == doctest::Approx(0.5));
}

TEST_CASE("degenerate posteriors sample their mean") {
  const auto p = scalar_posterior({4.0, 4.0, 4.0});
  CHECK(p.diagonal_variance()[0] == 0.0);
  for (std::uint64_t s = 0; s < 20; ++s) CHECK(swag_sample(p, s) == std::vector<double>{4.0});
}

TEST_CASE("sample formula by hand") {
  SwagPosterior p = scalar_posterior({1.0, 3.0}, 0);
  const std::vector<double> z1{1.0};
  const auto w = swag_sample(p, z1, std::vector<double>{});
  CHECK(w[0] == doctest::Approx(2.0 + 1.0 / std::sqrt(2.0)));
  CHECK(std::abs(w[0] - 2.7071) < 1e-4);
  CHECK_THROWS_AS(swag_sample(p, std::vector<double>{1, 2}, std::vector<double>{}), InputError);
  CHECK_THROWS_AS(swag_sample(scalar_posterior({1.0}), 3), ConfigError);
}

TEST_CASE("scalar sample variance matches the closed form") {
  const auto p = scalar_posterior({0.3, -1.2, 2.0, 0.7, 1.1, -0.4}, 4);
  double lowRank = 0;
  for (const auto& c : p.deviationColumns) lowRank += c[0] * c[0];
  const double expected = 0.5 * p.diagonal_variance()[0] + lowRank / (2.0 * 3.0);
  double m = 0, m2 = 0;
  const int n = 10000;
  for (int s = 0; s < n; ++s) {
    const double w = swag_sample(p, derive_seed(5, static_cast<std::uint64_t>(s)))[0];
    m += w;
    m2 += w * w;
  }
  m /= n;
  const double var = m2 / n - m * m;
  CHECK(std::abs(var / expected - 1.0) < 0.05);
}

TEST_CASE("sample covariance matches the closed form in several dimensions") {
  Rng rng(23);
  const std::size_t P = 6;
  SwagPosterior p(P, 5);
  for (int s = 0; s < 8; ++s) {
    std::vector<double> w(P);
    for (std::size_t i = 0; i < P; ++i) w[i] = static_cast<double>(i) + (1.0 + static_cast<double>(i)) * 0.3 * standard_normal(rng);
    p.add_snapshot(w);
  }
  Eigen::MatrixXd D(P, p.rank());
  for (std::size_t j = 0; j < p.rank(); ++j)
    for (std::size_t i = 0; i < P; ++i) D(static_cast<long>(i), static_cast<long>(j)) = p.deviationColumns[j][i];
  const auto diag = p.diagonal_variance();
  Eigen::MatrixXd expected = D * D.transpose() / (2.0 * static_cast<double>(p.rank() - 1));
  for (std::size_t i = 0; i < P; ++i) expected(static_cast<long>(i), static_cast<long>(i)) += 0.5 * diag[i];

  const int n = 50000;
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(P);
  Eigen::MatrixXd second = Eigen::MatrixXd::Zero(P, P);
  for (int s = 0; s < n; ++s) {
    const auto w = swag_sample(p, derive_seed(9, static_cast<std::uint64_t>(s)));
    const Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<long>(P));
    mean += v;
    second += v * v.transpose();
  }
  mean /= n;
  const Eigen::MatrixXd cov = second / n - mean * mean.transpose();
  CHECK((cov - expected).norm() / expected.norm() < 0.05);
}

TEST_CASE("single deviation column falls back to the diagonal with a warning") {
  std::vector<std::string> warnings;
  set_log_sink([&](LogLevel level, const std::string& msg) {
    if (level == LogLevel::Warning) warnings.push_back(msg);
  });
  SwagPosterior p = scalar_posterior({1.0, 3.0}, 1);
  REQUIRE(p.rank() == 1);
  const auto w = swag_sample(p, std::vector<double>{0.0}, std::vector<double>{5.0});
  set_log_sink(nullptr);
  CHECK(w[0] == 2.0);
  CHECK(warnings.size() == 1);
}

TEST_CASE("config validation") {
  SwagConfig c;
  CHECK_NOTHROW(validate(c));
  CHECK(c.snapshot_count() == 10);
  c.collectFromEpoch = 30;
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = SwagConfig{};
  c.collectFromEpoch = 31;
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = SwagConfig{};
  c.sampleCount = 1;
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = SwagConfig{};
  c.maxRank = 11;
  CHECK_THROWS_AS(validate(c), ConfigError);
}

TEST_CASE("fine-tuning collects one snapshot per window epoch") {
  const auto m = small_model({8});
  SwagConfig c;
  c.totalFinetuneEpochs = 12;
  c.collectFromEpoch = 3;
  c.batchSize = 32;
  const auto post = finetune_collect(m.em, m.x, m.y, m.rows, c);
  CHECK(post.snapshotCount == 10);
  CHECK(post.rank() == 10);
  CHECK(post.parameter_count() == m.em.model.net.parameter_count());
  const auto again = finetune_collect(m.em, m.x, m.y, m.rows, c);
  CHECK(again.weightMean == post.weightMean);

  c.collectFromEpoch = 12;
  CHECK_THROWS_AS(finetune_collect(m.em, m.x, m.y, m.rows, c), ConfigError);
}

TEST_CASE("ensemble prediction") {
  const auto m = small_model({8});
  SwagConfig c;
  c.totalFinetuneEpochs = 6;
  c.collectFromEpoch = 2;
  c.maxRank = 5;
  c.batchSize = 32;
  const auto post = finetune_collect(m.em, m.x, m.y, m.rows, c);
  const nn::Tensor bn = m.x.gather_rows(std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7});

  SUBCASE("statistics are well formed") {
    const auto preds = ensemble_predict(post, m.em, m.x, 10, bn, 4);
    REQUIRE(preds.size() == 256);
    for (const auto& p : preds)
      for (std::size_t k = 0; k < 2; ++k) {
        CHECK(p.variance[k] >= 0);
        CHECK(p.lower[k] <= p.mean[k]);
        CHECK(p.upper[k] >= p.mean[k]);
        CHECK(p.cv[k] >= 0);
      }
    CHECK(ensemble_predict(post, m.em, m.x, 10, bn, 4)[17].mean == preds[17].mean);
  }
  SUBCASE("degenerate posterior gives zero spread") {
    SwagPosterior same(post.parameter_count(), 3);
    for (int i = 0; i < 3; ++i) same.add_snapshot(m.em.model.params);
    const auto preds = ensemble_predict(same, m.em, m.x, 5, bn, 1);
    for (const auto& p : preds) {
      CHECK(p.variance == std::vector<double>{0.0, 0.0});
      CHECK(p.cv == std::vector<double>{0.0, 0.0});
    }
  }
  SUBCASE("argument checks") {
    CHECK_THROWS_AS(ensemble_predict(post, m.em, m.x, 1, bn, 1), ConfigError);
    CHECK_THROWS_AS(ensemble_predict(post, m.em, m.x, 5, nn::Tensor({0, 3}), 1), ConfigError);
  }
}

TEST_CASE("member order does not change the summary") {
  Rng rng(4);
  std::vector<nn::Tensor> members(7, nn::Tensor({5, 3}));
  for (auto& t : members)
    for (auto& v : t.values) v = 100 + standard_normal(rng);
  const auto a = summarize_members(members);
  std::reverse(members.begin(), members.end());
  std::swap(members[1], members[4]);
  const auto b = summarize_members(members);
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t k = 0; k < 3; ++k) {
      CHECK(std::abs(a[r].mean[k] - b[r].mean[k]) < 1e-12 * 100);
      CHECK(std::abs(a[r].variance[k] - b[r].variance[k]) < 1e-10);
    }
}

TEST_CASE("calibration metrics") {
  SUBCASE("infinite intervals cover everything") {
    std::vector<EnsemblePrediction> preds{prediction(1, 1), prediction(2, 1)};
    for (auto& p : preds) {
      p.lower[0] = -INFINITY;
      p.upper[0] = INFINITY;
    }
    CHECK(calibration_metrics(preds, nn::Tensor({2, 1}, {1e9, -1e9})).perOutput[0].coverage95 == 1.0);
  }
  SUBCASE("gaussian toy with the true sigma") {
    Rng rng(12);
    const std::size_t n = 5000;
    std::vector<EnsemblePrediction> preds;
    nn::Tensor truth({n, 1});
    for (std::size_t i = 0; i < n; ++i) {
      const double mu = standard_normal(rng), sd = 0.1 + 2 * uniform01(rng);
      preds.push_back(prediction(mu, sd));
      truth.values[i] = mu + sd * standard_normal(rng);
    }
    const auto rep = calibration_metrics(preds, truth);
    CHECK(std::abs(rep.perOutput[0].coverage95 - 0.95) < 0.02);
    REQUIRE(rep.corrVarSqErr.has_value());
    CHECK(*rep.corrVarSqErr > 0.2);

    double previous = rep.perOutput[0].coverage95;
    for (double f : {1.1, 1.5, 3.0}) {
      auto wide = preds;
      for (auto& p : wide) {
        const double half = (p.upper[0] - p.lower[0]) / 2 * f;
        p.lower[0] = p.mean[0] - half;
        p.upper[0] = p.mean[0] + half;
      }
      const double cov = calibration_metrics(wide, truth).perOutput[0].coverage95;
      CHECK(cov >= previous);
      previous = cov;
    }
  }
  SUBCASE("constant variance leaves the correlation missing") {
    std::vector<EnsemblePrediction> preds{prediction(1, 1), prediction(2, 1), prediction(3, 1)};
    CHECK_FALSE(calibration_metrics(preds, nn::Tensor({3, 1}, {0, 1, 5})).corrVarSqErr.has_value());
  }
}

TEST_CASE("cv filter thresholds") {
  auto at = [](double cv) {
    EnsemblePrediction p = prediction(10, 10 * cv);
    p.cv = {cv};
    return p;
  };
  CvFilterConfig cfg;
  cfg.output = 0;
  const std::vector<std::string> ranking{"e1", "e2", "e3", "e4", "e5", "e6"};
  const std::vector<EnsemblePrediction> preds{at(0.4), at(0.8), at(0.8), at(1.2)};
  const std::vector<std::string> envs{"e6", "e2", "e5", "e1"};
  const auto keep = cv_filter(preds, envs, cfg, ranking);
  CHECK(keep == std::vector<bool>{true, true, false, false});

  const std::vector<EnsemblePrediction> zeros(4, at(0.0));
  CHECK(cv_filter(zeros, envs, cfg, ranking) == std::vector<bool>(4, true));
  CHECK_THROWS_AS(cv_filter(preds, {"e1", "e2", "e3", "nowhere"}, cfg, ranking), InputError);
}

TEST_CASE("environment uncertainty ranking") {
  auto at = [](double cv) {
    EnsemblePrediction p;
    p.cv = {cv};
    return p;
  };
  const std::vector<EnsemblePrediction> preds{at(0.1), at(0.3), at(0.9), at(0.5), at(0.2), at(0.2)};
  const std::vector<std::string> envs{"a", "a", "b", "c", "d", "d"};
  CHECK(rank_env_uncertainty(preds, envs, 0) == std::vector<std::string>{"b", "c", "a", "d"});
}

TEST_CASE("posterior file and prediction export") {
  const auto p = scalar_posterior({1.0, 2.5, 4.0}, 2);
  SwagConfig c;
  c.seed = 77;
  const auto path = std::filesystem::temp_directory_path() / "cropemu_test_swag.bin";
  save_posterior(p, c, path);
  SwagConfig back;
  const auto q = load_posterior(path, &back);
  std::filesystem::remove(path);
  CHECK(q.weightMean == p.weightMean);
  CHECK(q.secondMoment == p.secondMoment);
  CHECK(q.deviationColumns == p.deviationColumns);
  CHECK(q.snapshotCount == 3);
  CHECK(back.seed == 77);

  std::stringstream ss;
  write_predictions_csv(ss, {prediction(2, 0.5)}, {9}, {"Logan/control/0"}, {"GrainTotalWt"});
  const auto table = csv::read(ss);
  CHECK(table.header == std::vector<std::string>{"id", "environment", "GrainTotalWt_mean", "GrainTotalWt_std",
                                                 "GrainTotalWt_cv"});
  CHECK(table.number(0, 3) == 0.5);
}
