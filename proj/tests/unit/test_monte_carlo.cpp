#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "gte/error.hpp"
#include "gte/monte_carlo.hpp"
#include "gte/report.hpp"

namespace gte {
namespace {

ExperimentConfig small_experiment() {
  ExperimentConfig c;
  c.dgp = DgpKind::AuctionLogNormal;
  c.estimators = {EstimatorKind::Ldml, EstimatorKind::DrAte};
  c.n_values = {200};
  c.reps = 2;
  c.seed = 5;
  c.continuum_draws = 50'000;
  return c;
}

RepRecord record(double estimate, double tau_bar, double lo, double hi) {
  RepRecord r;
  r.n = 10;
  r.estimate = estimate;
  r.tau_bar = tau_bar;
  r.tau_star = 1.0;
  r.ci_lo = lo;
  r.ci_hi = hi;
  r.se = (hi - lo) / 4.0;
  r.has_ci = true;
  return r;
}

TEST(Summarize, HandComputedMetrics) {
  std::vector<RepRecord> recs{record(1.0, 1.0, 0.5, 1.5), record(2.0, 1.0, 1.5, 2.5), record(4.0, 1.0, 0.0, 8.0)};
  RepRecord failed = record(100.0, 1.0, 0.0, 1.0);
  failed.failed = true;
  recs.push_back(failed);
  const auto row = summarize(EstimatorKind::Ldml, 10, recs);
  EXPECT_EQ(row.reps, 4u);
  EXPECT_EQ(row.failures, 1u);
  EXPECT_DOUBLE_EQ(row.bias, 4.0 / 3.0);
  EXPECT_DOUBLE_EQ(row.rmse, std::sqrt(10.0 / 3.0));
  EXPECT_NEAR(row.rmse * row.rmse, row.bias * row.bias + row.sd * row.sd, 1e-12);
  EXPECT_DOUBLE_EQ(row.coverage_star, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(row.coverage_bar, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(row.mean_ci_width, 10.0 / 3.0);
  EXPECT_EQ(summarize(EstimatorKind::DrAte, 10, recs).reps, 0u);
}

TEST(MonteCarlo, SmallRunProducesOneRecordPerReplication) {
  const auto cfg = small_experiment();
  const auto table = monte_carlo(cfg);
  ASSERT_EQ(table.records.size(), 4u);
  ASSERT_EQ(table.rows.size(), 2u);
  for (const auto& row : table.rows) {
    EXPECT_EQ(row.reps, 2u);
    EXPECT_EQ(row.failures, 0u);
    EXPECT_NEAR(row.rmse * row.rmse, row.bias * row.bias + row.sd * row.sd, 1e-10);
  }
  // Ordered by (n, rep, estimator); both estimators see the same data.
  EXPECT_EQ(table.records[0].rep, 0u);
  EXPECT_EQ(table.records[1].rep, 0u);
  EXPECT_EQ(table.records[0].data_seed, table.records[1].data_seed);
  EXPECT_EQ(table.records[0].tau_bar, table.records[1].tau_bar);
  EXPECT_NE(table.records[0].data_seed, table.records[2].data_seed);

  const Provenance prov{"abc", cfg.seed};
  const auto csv = mc_provenance_csv(table, prov);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
}

TEST(MonteCarlo, WorkerCountDoesNotChangeResults) {
  auto cfg = small_experiment();
  cfg.reps = 3;
  cfg.workers = 1;
  const auto serial = monte_carlo(cfg);
  cfg.workers = 3;
  const auto parallel = monte_carlo(cfg);
  ASSERT_EQ(serial.records.size(), parallel.records.size());
  for (std::size_t r = 0; r < serial.records.size(); ++r) {
    EXPECT_EQ(serial.records[r].estimate, parallel.records[r].estimate);
    EXPECT_EQ(serial.records[r].se, parallel.records[r].se);
    EXPECT_EQ(serial.records[r].data_seed, parallel.records[r].data_seed);
  }
  const Provenance prov{"abc", cfg.seed};
  EXPECT_EQ(mc_results_csv(serial, cfg.dgp, prov), mc_results_csv(parallel, cfg.dgp, prov));
}

TEST(MonteCarlo, ReplicationSeedsAreDistinct) {
  std::set<std::uint64_t> seeds;
  for (std::size_t n : {500u, 2000u, 8000u}) {
    for (std::size_t rep = 0; rep < 200; ++rep) seeds.insert(replication_seed(7, n, rep));
  }
  EXPECT_EQ(seeds.size(), 600u);
  EXPECT_NE(replication_seed(7, 500, 0), replication_seed(8, 500, 0));
}

TEST(MonteCarlo, NamesRoundTrip) {
  for (auto k : {DgpKind::AuctionLogNormal, DgpKind::AuctionTruncNormal, DgpKind::School}) {
    EXPECT_EQ(parse_dgp(to_string(k)), k);
  }
  for (auto k : {EstimatorKind::Ldml, EstimatorKind::DrAte, EstimatorKind::SmGte, EstimatorKind::SmdrGte,
                 EstimatorKind::LdmlOracle, EstimatorKind::LdmlZeroMean, EstimatorKind::LdmlHalfScore,
                 EstimatorKind::LdmlBothWrong}) {
    EXPECT_EQ(parse_estimator(to_string(k)), k);
  }
  EXPECT_THROW(parse_dgp("nope"), Error);
  EXPECT_THROW(parse_estimator("nope"), Error);
}

TEST(MonteCarlo, OracleNuisancesOnlyForTheLognormalAuction) {
  auto cfg = small_experiment();
  cfg.dgp = DgpKind::School;
  cfg.estimators = {EstimatorKind::LdmlOracle};
  cfg.reps = 1;
  const auto table = monte_carlo(cfg);
  ASSERT_EQ(table.records.size(), 1u);
  EXPECT_TRUE(table.records[0].failed);
  EXPECT_FALSE(table.records[0].error.empty());
}

// Identical potential bids: every replication has tau_bar = 0, so the
// interval should contain zero at about the nominal rate.
TEST(MonteCarlo, NullEffectWithOracleNuisances) {
  ExperimentConfig cfg;
  cfg.dgp = DgpKind::AuctionLogNormal;
  cfg.estimators = {EstimatorKind::LdmlOracle};
  cfg.n_values = {2000};
  cfg.reps = 100;
  cfg.seed = 11;
  cfg.effect = 1.0;
  cfg.continuum_draws = 50'000;
  const auto table = monte_carlo(cfg);
  std::size_t inside = 0;
  for (const auto& r : table.records) {
    ASSERT_FALSE(r.failed) << r.error;
    EXPECT_EQ(r.tau_bar, 0.0);
    inside += std::abs(r.estimate) < 3.0 * r.se;
  }
  EXPECT_GE(inside, 95u);
}

TEST(MonteCarlo, RejectsEmptyConfigurations) {
  auto cfg = small_experiment();
  cfg.reps = 0;
  EXPECT_THROW(monte_carlo(cfg), Error);
  cfg = small_experiment();
  cfg.estimators.clear();
  EXPECT_THROW(monte_carlo(cfg), Error);
}

}  // namespace
}  // namespace gte
