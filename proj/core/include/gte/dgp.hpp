#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gte/learners.hpp"
#include "gte/market_data.hpp"
#include "gte/mechanism.hpp"

namespace gte {

enum class BidFamily { LogNormal, TruncatedNormal };

const char* to_string(BidFamily family);

// X ~ U(0,1)^m, W ~ Bernoulli(Phi(x1 - 0.5 x2 + 0.5 x3)), control bids with
// location 0.8 x1 - 0.3 x2 - 0.2 x3 and scale 0.3, treated bids = effect *
// control bids, surplus outcome, capacity 0.5.
// LogNormal: B(0) = exp(location + 0.3 eps).
// TruncatedNormal: B(0) ~ N(location, 0.3^2) truncated to (0, inf).
struct AuctionDgpConfig {
  std::size_t n = 1000;
  BidFamily family = BidFamily::LogNormal;
  std::uint64_t seed = 0;
  std::size_t covariate_dim = 20;
  double capacity = 0.5;
  double effect = 1.5;
  double sigma = 0.3;
};

// Three schools with capacities (0.25, 0.25, 1.0); covariates X1..X5 ~ N(0,1)
// plus the subgroup flag C ~ Bernoulli(Phi(1 + X3)). Utilities
//   U = C mu_L + (1 - C) mu_H + bump C W e_1 + 0.3 X2 e_3 + eps,
// rankings by descending utility, lottery scores U(0,1) per school, and match
// values 2 (C = 1) or 1 (C = 0) at schools 1-2, 0 at school 3.
// W ~ Bernoulli(clip(0.5 X3 - 0.5 X2 + v, 0.02, 0.98)), v ~ Bernoulli(0.5).
struct SchoolDgpConfig {
  std::size_t n = 1000;
  std::uint64_t seed = 0;
  Capacities capacities{0.25, 0.25, 1.0};
  double bump = 1.0;
};

// A simulated market with both potential submissions of every unit.
struct OracleMarket {
  MarketDataset data;
  MechanismSpec spec;
  std::vector<BidValue> bid1;
  std::vector<BidValue> bid0;
  std::vector<int> tags;
  std::vector<double> propensity;  // true P(W = 1 | X)

  std::size_t n() const { return data.n(); }
  // Submissions under an assignment w in {0,1}^n.
  std::vector<BidValue> bids_under(std::span<const int> w) const;
};

OracleMarket gen_auction_market(const AuctionDgpConfig& config);
OracleMarket gen_school_market(const SchoolDgpConfig& config);

double auction_propensity(std::span<const double> x);
double school_propensity(std::span<const double> x);
// True per-arm lognormal bid models of the lognormal auction design.
std::vector<LogNormalBidModel> auction_bid_models(const AuctionDgpConfig& config);

// Mean outcome when units receive treatments `w` and the market clears with
// uniform weights at s*.
double true_value_finite(const OracleMarket& oracle, std::span<const int> w);
// Finite-market global effect: all-treated minus all-control.
double true_gte_finite(const OracleMarket& oracle);
// Direct effect: average over `reps` redraws of W from the true propensity;
// both potential outcomes of each unit are evaluated at the realized cutoffs.
double true_dte_mc(const OracleMarket& oracle, std::size_t reps, std::uint64_t seed);

// Large-market global effect from one `draws`-unit market per arm; cached
// in memory by (design, draws, seed).
double continuum_gte(const AuctionDgpConfig& config, std::size_t draws = 1'000'000, std::uint64_t seed = 2024);
double continuum_gte(const SchoolDgpConfig& config, std::size_t draws = 1'000'000, std::uint64_t seed = 2024);

}  // namespace gte
