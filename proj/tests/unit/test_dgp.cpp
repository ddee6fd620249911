#include <gtest/gtest.h>

#include <cmath>

#include "gte/dgp.hpp"
#include "gte/error.hpp"
#include "gte/learners.hpp"
#include "oracles.hpp"

namespace gte {
namespace {

OracleMarket hand_auction(const std::vector<double>& b0, double effect) {
  std::vector<BidValue> bid0, bid1;
  std::vector<int> w;
  std::vector<std::vector<double>> x;
  for (double b : b0) {
    bid0.push_back(ScalarBid{b});
    bid1.push_back(ScalarBid{effect * b});
    w.push_back(0);
    x.push_back({0.0});
  }
  return OracleMarket{testing::scalar_dataset(b0, w, x), MechanismSpec::uniform_price_auction(0.5), bid1, bid0,
                      std::vector<int>(b0.size(), 0), std::vector<double>(b0.size(), 0.5)};
}

// Mean surplus with the cutoff at the (m+1)th highest bid.
double sorted_rule_value(const std::vector<double>& bids, std::size_t winners) {
  const double p = testing::upa_sorted_cutoff(bids, winners, 0.0);
  double total = 0.0;
  for (double b : bids) total += std::max(b - p, 0.0);
  return total / static_cast<double>(bids.size());
}

TEST(HandAuction, FiniteGlobalEffect) {
  const auto market = hand_auction({1, 2, 3, 4}, 1.5);
  // Treated cutoff 3, surplus 1.5 + 3; control cutoff 2, surplus 1 + 2.
  EXPECT_DOUBLE_EQ(true_gte_finite(market), 0.375);
  EXPECT_DOUBLE_EQ(true_gte_finite(market), sorted_rule_value({1.5, 3, 4.5, 6}, 2) - sorted_rule_value({1, 2, 3, 4}, 2));
  EXPECT_EQ(true_gte_finite(hand_auction({1, 2, 3, 4}, 1.0)), 0.0);
}

TEST(HandAuction, ValueUnderAMixedAssignment) {
  const auto market = hand_auction({1, 2, 3, 4}, 1.5);
  const std::vector<int> w{0, 1, 0, 1};
  EXPECT_DOUBLE_EQ(true_value_finite(market, w), sorted_rule_value({1, 3, 3, 6}, 2));
  EXPECT_THROW(true_value_finite(market, std::vector<int>{1, 0}), Error);
}

TEST(AuctionDgp, TreatedBidsAreTheScaledControlBids) {
  for (auto family : {BidFamily::LogNormal, BidFamily::TruncatedNormal}) {
    const auto m = gen_auction_market({.n = 500, .family = family, .seed = 4, .covariate_dim = 5});
    ASSERT_EQ(m.n(), 500u);
    EXPECT_EQ(m.data.covariate_dim(), 5u);
    for (std::size_t i = 0; i < m.n(); ++i) {
      const double b0 = std::get<ScalarBid>(m.bid0[i]).value;
      const double b1 = std::get<ScalarBid>(m.bid1[i]).value;
      EXPECT_GT(b0, 0.0);
      EXPECT_EQ(b1, 1.5 * b0);
      const double observed = std::get<ScalarBid>(m.data.bid(i)).value;
      EXPECT_EQ(observed, m.data.treatment(i) == 1 ? b1 : b0);
      EXPECT_DOUBLE_EQ(m.propensity[i], auction_propensity(m.data.covariates(i)));
    }
  }
}

TEST(AuctionDgp, OracleValuesAreConsistent) {
  const auto m = gen_auction_market({.n = 300, .seed = 9, .covariate_dim = 3});
  const std::vector<int> ones(300, 1), zeros(300, 0);
  EXPECT_EQ(true_gte_finite(m), true_value_finite(m, ones) - true_value_finite(m, zeros));
  EXPECT_GT(true_gte_finite(m), 0.0);
}

TEST(AuctionDgp, DeterministicAndSeedIsolated) {
  const auto a = gen_auction_market({.n = 50, .seed = 3, .covariate_dim = 3});
  const auto b = gen_auction_market({.n = 50, .seed = 3, .covariate_dim = 3});
  const auto c = gen_auction_market({.n = 50, .seed = 4, .covariate_dim = 3});
  EXPECT_EQ(a.data.covariate_block()[0], b.data.covariate_block()[0]);
  EXPECT_EQ(a.data.treatments(), b.data.treatments());
  EXPECT_EQ(a.data.scalar_bids(), b.data.scalar_bids());
  EXPECT_NE(a.data.scalar_bids(), c.data.scalar_bids());
}

TEST(AuctionDgp, TreatedShareMatchesTheMeanPropensity) {
  const std::size_t n = 20000;
  const auto m = gen_auction_market({.n = n, .seed = 5, .covariate_dim = 3});
  double share = 0.0, mean_e = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    share += m.data.treatment(i);
    mean_e += m.propensity[i];
  }
  share /= n;
  mean_e /= n;
  EXPECT_NEAR(share, mean_e, 3.0 * std::sqrt(0.25 / n));
}

TEST(AuctionDgp, RejectsBadDesigns) {
  EXPECT_THROW(gen_auction_market({.n = 5}), Error);
  EXPECT_THROW(gen_auction_market({.n = 50, .covariate_dim = 2}), Error);
  EXPECT_THROW(gen_auction_market({.n = 50, .capacity = 1.5}), Error);
}

TEST(AuctionDgp, FiniteTruthApproachesTheLargeMarketTruth) {
  const AuctionDgpConfig design{.n = 100000, .seed = 6, .covariate_dim = 3};
  const double cont = continuum_gte(design, 400'000, 1);
  EXPECT_EQ(cont, continuum_gte(design, 400'000, 1));
  EXPECT_NEAR(true_gte_finite(gen_auction_market(design)), cont, 0.01);
}

TEST(SchoolDgp, ShapeAndPropensity) {
  const auto m = gen_school_market({.n = 400, .seed = 2});
  EXPECT_EQ(m.data.items(), 3u);
  EXPECT_EQ(m.data.covariate_dim(), 6u);
  for (std::size_t i = 0; i < m.n(); ++i) {
    const auto x = m.data.covariates(i);
    EXPECT_EQ(m.tags[i], static_cast<int>(x[5]));
    const double a = 0.5 * x[2] - 0.5 * x[1];
    EXPECT_DOUBLE_EQ(m.propensity[i], 0.5 * std::clamp(a, 0.02, 0.98) + 0.5 * std::clamp(a + 1.0, 0.02, 0.98));
  }
}

TEST(SchoolDgp, TreatmentOnlyMovesSubgroupOneRankings) {
  const auto m = gen_school_market({.n = 2000, .seed = 7});
  std::size_t moved = 0;
  for (std::size_t i = 0; i < m.n(); ++i) {
    const auto& r1 = std::get<RankedBid>(m.bid1[i]);
    const auto& r0 = std::get<RankedBid>(m.bid0[i]);
    EXPECT_EQ(r1.scores, r0.scores);
    if (m.tags[i] == 0) {
      EXPECT_EQ(r1.ranking, r0.ranking);
    } else {
      moved += r1.ranking != r0.ranking;
      // The bump raises school 1, so it can only move up.
      const auto pos = [](const RankedBid& r) { return std::find(r.ranking.begin(), r.ranking.end(), 0) - r.ranking.begin(); };
      EXPECT_LE(pos(r1), pos(r0));
    }
  }
  EXPECT_GT(moved, 0u);
}

TEST(SchoolDgp, FallbackSchoolNeverBinds) {
  const auto m = gen_school_market({.n = 1000, .seed = 3});
  for (const auto* bids : {&m.bid1, &m.bid0}) {
    const auto spec = with_resolved_box(m.spec, *bids);
    const auto cleared = clear_uniform(spec, *bids, m.tags);
    EXPECT_EQ(cleared.cutoffs[2], spec.box.lo[2]);
  }
}

TEST(SchoolDgp, DirectEffectEqualsGlobalEffectWithoutCongestion) {
  const auto m = gen_school_market({.n = 500, .seed = 4, .capacities = {2.0, 2.0, 2.0}});
  EXPECT_NEAR(true_dte_mc(m, 20, 1), true_gte_finite(m), 1e-12);
  EXPECT_GT(true_gte_finite(m), 0.0);
}

TEST(SchoolDgp, TreatedShareMatchesTheMeanPropensity) {
  const std::size_t n = 20000;
  const auto m = gen_school_market({.n = n, .seed = 8});
  double share = 0.0, mean_e = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    share += m.data.treatment(i);
    mean_e += m.propensity[i];
  }
  EXPECT_NEAR(share / n, mean_e / n, 3.0 * std::sqrt(0.25 / n));
}

}  // namespace
}  // namespace gte
