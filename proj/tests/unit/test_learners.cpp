#include <gtest/gtest.h>

#include <cmath>

#include "gte/error.hpp"
#include "gte/learners.hpp"
#include "gte/rng.hpp"
#include "oracles.hpp"

namespace gte {
namespace {

std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> r(n);
  for (std::size_t i = 0; i < n; ++i) r[i] = i;
  return r;
}

// X ~ U(0,1)^m, W ~ Bernoulli(e), bids lognormal around 1.
MarketDataset random_dataset(std::size_t n, std::size_t m, double e, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> bids(n);
  std::vector<int> w(n);
  std::vector<std::vector<double>> x(n, std::vector<double>(m));
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& v : x[i]) v = rng.uniform();
    w[i] = rng.bernoulli(e) ? 1 : 0;
    bids[i] = std::exp(0.3 * rng.normal());
  }
  return testing::scalar_dataset(bids, w, x);
}

// Trapezoid integral of g(z) phi(z) over [-12, 12].
template <typename G>
double normal_expectation(G g) {
  const int steps = 200000;
  const double a = -12.0, b = 12.0, h = (b - a) / steps;
  double sum = 0.0;
  for (int t = 0; t <= steps; ++t) {
    const double z = a + h * t;
    const double f = g(z) * std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
    sum += (t == 0 || t == steps) ? 0.5 * f : f;
  }
  return sum * h;
}

TEST(Propensity, ClipsToKappa) {
  FunctionPropensityLearner low([](std::span<const double>) { return 0.004; }, 0.01);
  FunctionPropensityLearner high([](std::span<const double>) { return 0.999; }, 0.01);
  const auto data = random_dataset(10, 1, 0.5, 1);
  const auto rows = all_rows(10);
  const std::vector<double> x{0.3};
  EXPECT_EQ(low.fit(data, rows)->predict(x), 0.01);
  EXPECT_EQ(low.fit(data, rows)->predict_raw(x), 0.004);
  EXPECT_EQ(high.fit(data, rows)->predict(x), 0.99);
}

TEST(Propensity, LogisticNearHalfWhenTreatmentIsIndependent) {
  const auto data = random_dataset(500, 1, 0.5, 11);
  const auto model = LogisticRidgeLearner().fit(data, all_rows(500));
  Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    const std::vector<double> x{rng.uniform()};
    EXPECT_NEAR(model->predict(x), 0.5, 0.1);
  }
}

TEST(Propensity, LogisticRecoversASteepSlope) {
  Rng rng(8);
  const std::size_t n = 4000;
  std::vector<double> bids(n, 1.0);
  std::vector<int> w(n);
  std::vector<std::vector<double>> x(n, std::vector<double>(1));
  for (std::size_t i = 0; i < n; ++i) {
    x[i][0] = rng.normal();
    w[i] = rng.bernoulli(1.0 / (1.0 + std::exp(-2.0 * x[i][0]))) ? 1 : 0;
  }
  const auto data = testing::scalar_dataset(bids, w, x);
  const auto model = LogisticRidgeLearner().fit(data, all_rows(n));
  EXPECT_NEAR(model->predict(std::vector<double>{1.0}), 1.0 / (1.0 + std::exp(-2.0)), 0.04);
  EXPECT_NEAR(model->predict(std::vector<double>{-0.5}), 1.0 / (1.0 + std::exp(1.0)), 0.04);
}

TEST(Propensity, SingleArmTrainingSetIsRejected) {
  const auto data = testing::scalar_dataset({1, 2, 3}, {1, 1, 1}, {{0.1}, {0.2}, {0.3}});
  const auto rows = all_rows(3);
  const LogisticRidgeLearner logistic;
  const KnnPropensityLearner knn;
  for (const PropensityLearner* learner : {static_cast<const PropensityLearner*>(&logistic),
                                           static_cast<const PropensityLearner*>(&knn)}) {
    try {
      learner->fit(data, rows);
      ADD_FAILURE() << learner->name();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::SingleArmTrainingSet);
    }
  }
}

TEST(Propensity, KnnIsTreatedShareOfNeighbours) {
  const auto data = testing::scalar_dataset({1, 1, 1, 1, 1, 1}, {1, 1, 0, 0, 0, 1},
                                            {{0.0}, {0.1}, {0.2}, {10.0}, {10.1}, {10.2}});
  const auto model = KnnPropensityLearner(0.0, std::log(3.0) / std::log(6.0)).fit(data, all_rows(6));
  EXPECT_NEAR(model->predict(std::vector<double>{0.05}), 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(model->predict(std::vector<double>{10.05}), 1.0 / 3.0, 1e-12);
}

TEST(KnnRegressor, ConstantTargetsGiveConstantPredictions) {
  const auto data = random_dataset(40, 2, 0.5, 2);
  const auto rows = all_rows(40);
  const std::vector<double> targets(40 * 2, 3.25);
  MeanFitContext ctx;
  ctx.data = &data;
  ctx.rows = rows;
  ctx.targets = targets;
  ctx.width = 2;
  const auto model = KnnRegressor().fit(ctx);
  std::vector<double> out(2);
  model->predict(std::vector<double>{0.5, 0.5}, out);
  EXPECT_EQ(out, (std::vector<double>{3.25, 3.25}));
}

TEST(KnnRegressor, LearnsALinearMean) {
  const std::size_t n = 2000;
  Rng rng(4);
  std::vector<double> bids(n, 1.0), y(n);
  std::vector<int> w(n, 1);
  std::vector<std::vector<double>> x(n, std::vector<double>(2));
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = {rng.uniform(), rng.uniform()};
    y[i] = x[i][0] + 0.5 * rng.normal();
  }
  const auto data = testing::scalar_dataset(bids, w, x);
  const auto rows = all_rows(n);
  MeanFitContext ctx;
  ctx.data = &data;
  ctx.rows = rows;
  ctx.targets = y;
  const auto model = KnnRegressor(0.5).fit(ctx);
  double mse = 0.0;
  const int held_out = 500;
  for (int t = 0; t < held_out; ++t) {
    const std::vector<double> q{rng.uniform(), rng.uniform()};
    double pred = 0.0;
    model->predict(q, std::span<double>(&pred, 1));
    mse += (pred - q[0]) * (pred - q[0]);
  }
  EXPECT_LT(mse / held_out, 0.05);
}

TEST(KnnRegressor, DefaultK) {
  EXPECT_EQ(KnnRegressor::default_k(1000, 2.0 / 3.0), 100u);
  EXPECT_EQ(KnnRegressor::default_k(2000, 0.5), 45u);
  EXPECT_EQ(KnnRegressor::default_k(1, 0.5), 1u);
}

TEST(ConstantMean, ForcedAndTrainingMean) {
  const auto data = random_dataset(4, 1, 0.5, 9);
  const auto rows = all_rows(4);
  const std::vector<double> targets{1, 2, 3, 6};
  MeanFitContext ctx;
  ctx.data = &data;
  ctx.rows = rows;
  ctx.targets = targets;
  double out = -1.0;
  ConstantMeanLearner().fit(ctx)->predict(std::vector<double>{0.0}, std::span<double>(&out, 1));
  EXPECT_EQ(out, 3.0);
  ConstantMeanLearner(0.0).fit(ctx)->predict(std::vector<double>{0.0}, std::span<double>(&out, 1));
  EXPECT_EQ(out, 0.0);
}

TEST(LogNormalBidModel, ClosedFormsMatchNumericIntegration) {
  LogNormalBidModel model;
  model.intercept = 0.2;
  model.slopes = {0.8, -0.3};
  model.sigma = 0.45;
  const std::vector<double> x{0.4, 0.9};
  const double m = 0.2 + 0.8 * 0.4 - 0.3 * 0.9;
  for (double p : {0.3, 1.0, 1.7, 4.0}) {
    const double demand = normal_expectation([&](double z) { return std::exp(m + 0.45 * z) > p ? 1.0 : 0.0; });
    const double surplus = normal_expectation([&](double z) { return std::max(std::exp(m + 0.45 * z) - p, 0.0); });
    EXPECT_NEAR(model.demand_mean(x, p), demand, 1e-4) << p;
    EXPECT_NEAR(model.surplus_mean(x, p), surplus, 1e-6) << p;
  }
}

TEST(LogNormalBidModel, RegressionRecoversTheDesign) {
  Rng rng(21);
  const std::size_t n = 5000;
  std::vector<double> bids(n);
  std::vector<int> w(n);
  std::vector<std::vector<double>> x(n, std::vector<double>(1));
  for (std::size_t i = 0; i < n; ++i) {
    x[i][0] = rng.uniform();
    w[i] = static_cast<int>(i % 2);
    bids[i] = std::exp((w[i] ? 0.5 : 0.0) + 0.8 * x[i][0] + 0.3 * rng.normal());
  }
  const auto data = testing::scalar_dataset(bids, w, x);
  const auto models = fit_lognormal_bids(data, all_rows(n));
  ASSERT_EQ(models.size(), 2u);
  EXPECT_NEAR(models[0].intercept, 0.0, 0.03);
  EXPECT_NEAR(models[1].intercept, 0.5, 0.03);
  EXPECT_NEAR(models[0].slopes[0], 0.8, 0.05);
  EXPECT_NEAR(models[0].sigma, 0.3, 0.01);
}

TEST(LogNormalMeanModel, PredictAtMovesWithCutoffs) {
  LogNormalBidModel bids;
  bids.slopes = {0.0};
  bids.sigma = 0.3;
  const LogNormalMeanModel model(bids, TargetKind::Demand, {1.0});
  EXPECT_TRUE(model.depends_on_cutoffs());
  double at_cached = 0.0, at_low = 0.0;
  const std::vector<double> x{0.0};
  model.predict(x, std::span<double>(&at_cached, 1));
  model.predict_at(x, std::vector<double>{0.5}, std::span<double>(&at_low, 1));
  EXPECT_NEAR(at_cached, 0.5, 1e-12);
  EXPECT_GT(at_low, at_cached);
}

TEST(NormalQuantile, KnownValues) {
  EXPECT_NEAR(normal_quantile(0.975), 1.959963984540054, 1e-12);
  EXPECT_NEAR(normal_quantile(0.95), 1.6448536269514722, 1e-12);
  EXPECT_NEAR(normal_cdf(1.959963984540054), 0.975, 1e-12);
  EXPECT_THROW(normal_quantile(1.0), Error);
}

}  // namespace
}  // namespace gte
