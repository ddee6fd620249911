#pragma once

#include <cstdint>
#include <vector>

#include "gte/estimators.hpp"
#include "gte/learners.hpp"
#include "gte/market_data.hpp"
#include "gte/mechanism.hpp"

namespace gte {

// Outcomes at the single observed clearing: uniform weights 1/n, capacities s*.
std::vector<double> observed_outcomes(const MechanismSpec& spec, const MarketDataset& data);

struct AteEstimate {
  double tau = 0.0;
  double se = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  std::vector<double> scores;  // G^y_1 - G^y_0 per observation
};

// Cross-fitted AIPW of a fixed outcome vector; nuisances for fold k are fit on
// the whole out-of-fold set I_{-k}.
AteEstimate estimate_ate_dr(const MarketDataset& data, std::span<const double> outcomes, const FoldPlan& plan,
                            const NuisanceConfig& config, double alpha = 0.05);

enum class StructuralVariant { Plain, DrCorrected };

struct StructuralEstimate {
  double tau = 0.0;
  double value_treated = 0.0;
  double value_control = 0.0;
  // DrCorrected only.
  double se = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  bool has_ci = false;
  Cutoffs cutoffs_treated;
  Cutoffs cutoffs_control;
  std::size_t iterations = 0;
  std::vector<std::string> warnings;
};

struct StructuralConfig {
  std::size_t n_sim = 100;
  EstimatorConfig estimator;
};

// Plain: per-arm log-bid regressions with a pooled sigma, then n_sim
// simulated markets at the observed covariates (common shocks across arms),
// each cleared under all-treated and all-control bids.
// DrCorrected: cross-fitted lognormal conditional means plugged into the
// doubly-robust moments; cutoffs solved by iterating the weighted mechanism.
StructuralEstimate estimate_gte_structural(const MarketDataset& data, const MechanismSpec& spec,
                                           StructuralVariant variant, std::uint64_t seed,
                                           const FoldPlan* plan, const StructuralConfig& config);

}  // namespace gte
