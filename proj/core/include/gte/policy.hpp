#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "gte/estimators.hpp"
#include "gte/market_data.hpp"
#include "gte/mechanism.hpp"
#include "gte/nuisance.hpp"

namespace gte {

struct PolicyClass {
  enum class Kind { ExplicitSet, LinearThresholds };

  Kind kind = Kind::ExplicitSet;
  std::vector<TreatmentRule> rules;
  std::size_t directions = 8;
  std::size_t intercepts = 5;
  std::uint64_t seed = 0;

  static PolicyClass explicit_set(std::vector<TreatmentRule> rules);
  // `directions` seeded random unit vectors, each with `intercepts`
  // thresholds at evenly spaced empirical quantiles of the projection.
  static PolicyClass linear_thresholds(std::size_t directions, std::size_t intercepts, std::uint64_t seed);
};

// Candidate list: pi_1 and pi_0 first unless already present, then the
// class's own rules in order.
std::vector<TreatmentRule> candidate_rules(const PolicyClass& cls, const MarketDataset& data);

struct LeaderboardEntry {
  TreatmentRule rule;
  std::string label;
  double value = 0.0;
  double se = 0.0;
};

struct PolicyResult {
  TreatmentRule best_rule;
  std::size_t best_index = 0;
  ValueEstimate best_value;
  std::vector<LeaderboardEntry> leaderboard;
  // V(best) - max(V(pi_1), V(pi_0))
  double regret_vs_uniform = 0.0;
};

// LDML values of every rule on one fold plan and one propensity fit.
std::vector<ValueEstimate> evaluate_rules(const MechanismSpec& spec, const MarketDataset& data,
                                          std::span<const TreatmentRule> rules, const FoldPlan& plan,
                                          const EstimatorConfig& config, std::size_t workers = 1,
                                          std::shared_ptr<const FoldPropensities> props = nullptr);

// Empirical welfare maximization; ties go to the lower candidate index.
PolicyResult learn_policy_ewm(const MechanismSpec& spec, const MarketDataset& data, const PolicyClass& cls,
                              const FoldPlan& plan, const EstimatorConfig& config, std::size_t workers = 1);

// rho(x) = [mu^y_1 - nu mu^d_1] - [mu^y_0 - nu mu^d_0], averaging the fold
// models for an arbitrary x.
double estimate_rho(const NuisanceBundle& bundle, std::span<const double> nu, std::span<const double> x);
// Observation i of the bundle's dataset, using the models of its own fold.
double estimate_rho_at(const NuisanceBundle& bundle, std::span<const double> nu, std::size_t i);

// Realized treatments (or fitted propensities) as a table keyed by id.
TreatmentRule observed_rule(const MarketDataset& data);
TreatmentRule propensity_rule(const MarketDataset& data, std::span<const double> e_hat);

struct PluginRule {
  TreatmentRule rule;  // table over the training ids
  std::vector<double> nu;
  std::vector<double> rho;
  Cutoffs cutoffs;
  double share_treated = 0.0;
  std::shared_ptr<const NuisanceBundle> bundle;

  // 1(rho(x) > 0) for each observation of another dataset.
  TreatmentRule rule_for(const MarketDataset& other) const;
};

// Nuisances and nu at the observed assignment (a table of cross-fitted
// propensities), then treat where rho > 0. One pass, no fixed point.
PluginRule plugin_global_rule(const MechanismSpec& spec, const MarketDataset& data, const FoldPlan& plan,
                              const EstimatorConfig& config);

}  // namespace gte
