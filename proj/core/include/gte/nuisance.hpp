#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "gte/learners.hpp"
#include "gte/market_data.hpp"
#include "gte/mechanism.hpp"

namespace gte {

struct NuisanceConfig {
  std::shared_ptr<const PropensityLearner> propensity;
  // Learner for the first-step propensity fit on H; null reuses `propensity`.
  std::shared_ptr<const PropensityLearner> first_step_propensity;
  std::shared_ptr<const MeanLearner> mean;

  // Logistic ridge (kappa 0.01) and KNN with k = ceil(n^{2/3}).
  static NuisanceConfig defaults();
  const PropensityLearner& first_step() const {
    return first_step_propensity ? *first_step_propensity : *propensity;
  }
};

// Propensity models per fold: `h[k]` is fit on H_{-k} (first-step weights),
// `g[k]` on G_{-k}. Shared by every rule evaluated on the same fold plan.
struct FoldPropensities {
  std::vector<std::shared_ptr<const PropensityModel>> h;
  std::vector<std::shared_ptr<const PropensityModel>> g;
  // g[k(i)] evaluated at X_i.
  std::vector<double> e_hat;
  // Units whose e_hat was moved by clipping.
  std::size_t clipped = 0;
};

FoldPropensities fit_fold_propensities(const MarketDataset& data, const FoldPlan& plan,
                                       const NuisanceConfig& config);

std::shared_ptr<const PropensityModel> fit_propensity(const MarketDataset& data,
                                                      std::span<const std::size_t> rows,
                                                      const PropensityLearner& learner);

// IPW weights of the first step over H_{-k}, in the order of plan.h_rows[k].
std::vector<double> first_step_weights(const MarketDataset& data, const FoldPlan& plan, std::size_t k,
                                       std::span<const double> pi, const PropensityModel& propensity_h);

// Cutoffs from clearing the H_{-k} bids with the first-step weights at s*.
ClearingResult first_step_cutoffs(const MechanismSpec& spec, const MarketDataset& data,
                                  const FoldPlan& plan, std::size_t k, std::span<const double> pi,
                                  const PropensityModel& propensity_h);

// Per-arm regressions on G_{-k}: index [arm].
struct FoldMeans {
  std::shared_ptr<const ConditionalMeanModel> y[2];
  std::shared_ptr<const ConditionalMeanModel> d[2];
};

FoldMeans fit_conditional_means(const MechanismSpec& spec, const MarketDataset& data,
                                std::span<const std::size_t> train_rows, std::span<const double> cutoffs,
                                const MeanLearner& learner);

struct FoldNuisance {
  Cutoffs first_step;
  ClearingReport first_step_report;
  FoldMeans means;
  std::vector<std::size_t> propensity_rows;  // rows the e-hat model was trained on
  std::vector<std::size_t> mean_rows;        // rows the mean models were trained on
};

// Cross-fitted nuisances for one rule. Cached predictions use the models of
// each observation's own fold; `mu[arm]` is n x (1 + J) row-major holding
// [mu^y, mu^d_1..mu^d_J].
struct NuisanceBundle {
  MechanismSpec spec;  // box resolved
  TreatmentRule rule;
  std::vector<int> fold_of;
  std::vector<FoldNuisance> folds;
  std::shared_ptr<const FoldPropensities> propensities;
  std::vector<double> pi;
  std::vector<double> e_hat;
  std::vector<double> mu[2];

  std::size_t n() const { return pi.size(); }
  std::size_t items() const { return spec.items; }
  std::size_t width() const { return spec.items + 1; }
  bool cutoff_dependent() const;

  // [mu^y, mu^d] of arm w at observation i, at cutoffs p when the models
  // depend on them (cached values otherwise).
  void mean_at(const MarketDataset& data, std::size_t i, int arm, std::span<const double> p,
               std::span<double> out) const;
  std::span<const double> cached_mean(std::size_t i, int arm) const {
    return {mu[arm].data() + i * width(), width()};
  }
};

// Fills the cached per-observation predictions of an assembled bundle.
void cache_predictions(const MarketDataset& data, NuisanceBundle& bundle);

// Definition of the three-way split: for each fold, first-step cutoffs from H
// and conditional means from G at those cutoffs. `shared` avoids refitting
// the propensity models when several rules use the same fold plan.
NuisanceBundle cross_fit(const MechanismSpec& spec, const MarketDataset& data, const TreatmentRule& rule,
                         const FoldPlan& plan, const NuisanceConfig& config,
                         std::shared_ptr<const FoldPropensities> shared = nullptr);

}  // namespace gte
