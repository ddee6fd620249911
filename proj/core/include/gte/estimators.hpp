#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gte/finite_diff.hpp"
#include "gte/market_data.hpp"
#include "gte/mechanism.hpp"
#include "gte/nuisance.hpp"

namespace gte {

// What the finite-difference step for nu is proportional to.
enum class StepBasis {
  BoxWidth,    // hi_j - lo_j
  AtomSpread,  // standard deviation of the bid values / item-j scores
};

struct EstimatorConfig {
  NuisanceConfig nuisance = NuisanceConfig::defaults();
  std::size_t k_folds = 3;
  bool stratify_folds = false;
  double alpha = 0.05;
  // h_j = nu_step_scale * n^{-1/4} * basis_j
  double nu_step_scale = 0.5;
  StepBasis nu_step_basis = StepBasis::BoxWidth;
  bool one_sided_at_edge = true;
  // Cap on p <- clear(s_hat(p)) iterations for cutoff-dependent mean models.
  std::size_t max_fixed_point = 50;
};

// Doubly-robust scores of one rule at cutoffs p, combined across arms with
// the rule's treatment probabilities:
//   y_i = pi_i G^y_{1i}(p) + (1 - pi_i) G^y_{0i}(p), d likewise (n x J),
//   q_i = y_i - nu . (d_i - s*).
struct DrScores {
  Cutoffs p;
  std::size_t items = 1;
  std::vector<double> y;
  std::vector<double> d;
  std::vector<double> q;

  std::size_t n() const { return y.size(); }
  std::span<const double> d_row(std::size_t i) const { return {d.data() + i * items, items}; }
};

DrScores dr_scores(const MarketDataset& data, const NuisanceBundle& bundle, std::span<const double> p);
// Mean of the combined y score, and of the d score minus s*: (y, z_1..z_J).
std::vector<double> dr_aggregate(const MarketDataset& data, const NuisanceBundle& bundle,
                                 std::span<const double> p);
void attach_nu(DrScores& scores, std::span<const double> nu, std::span<const double> s_star);

// Second-step inverse-propensity weights, divided by n.
Weights second_step_weights(const MarketDataset& data, const NuisanceBundle& bundle);
// s* plus the mean demand-residual correction, evaluated at cutoffs p (only
// matters for cutoff-dependent mean models).
Capacities perturbed_capacities(const MarketDataset& data, const NuisanceBundle& bundle,
                                std::span<const double> p);
// Clamps non-positive components to 1e-6 s*_j; returns whether any changed.
bool clamp_capacities(Capacities& s, std::span<const double> s_star);

// Second-step cutoffs. With mean models that ignore the cutoffs this is one
// clearing at s_hat; otherwise p <- clear(gamma, s_hat(p)) is iterated from
// the clearing at s* until the cutoffs repeat or `max_iter` is hit.
struct DrCutoffs {
  Cutoffs p;
  Capacities s;
  Weights gamma;
  ClearingReport report;
  std::size_t iterations = 0;
  bool converged = true;
  bool clamped = false;
};

DrCutoffs solve_dr_cutoffs(const MarketDataset& data, const NuisanceBundle& bundle, std::size_t max_iter);

std::vector<double> nu_steps(const MarketDataset& data, const MechanismSpec& spec, const EstimatorConfig& config);
// Items whose cutoff is above the box floor; the rest have nu = 0.
std::vector<std::size_t> binding_items(const MechanismSpec& spec, std::span<const double> p);

struct FoldDiagnostic {
  std::size_t fold = 0;
  std::size_t propensity_rows = 0;
  std::size_t mean_rows = 0;
  Cutoffs first_step_cutoffs;
  bool first_step_converged = true;
  double first_step_residual_norm = 0.0;
};

struct ValueEstimate {
  TreatmentRule rule;
  double value = 0.0;
  Cutoffs cutoffs;
  Capacities perturbed_capacities;
  Weights gamma;
  DrScores scores;
  std::vector<double> nu;
  std::vector<double> nu_step;
  double se = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  ClearingReport clearing;
  std::size_t fixed_point_iterations = 0;
  std::vector<FoldDiagnostic> folds;
  std::size_t clipped_propensities = 0;
  std::vector<std::string> warnings;
};

Sensitivity estimate_nu(const MarketDataset& data, const NuisanceBundle& bundle, std::span<const double> p,
                        std::span<const double> h, bool allow_one_sided = true);

// Second and third steps for the rule the bundle was built for. The standard
// error uses the rule's own q scores.
ValueEstimate estimate_value_ldml(const MarketDataset& data, const NuisanceBundle& bundle,
                                  const EstimatorConfig& config);

struct VarianceResult {
  double sigma2 = 0.0;
  double se = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
};

// sigma^2 = mean((q1 - q0 - tau)^2), se = sigma / sqrt(n).
VarianceResult variance_plugin(const DrScores& treated, const DrScores& control, double tau, double alpha);
// One-sample version: mean((q - v)^2).
VarianceResult variance_single(const DrScores& scores, double value, double alpha);

struct GteEstimate {
  double tau = 0.0;
  double se = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double alpha = 0.05;
  std::size_t n = 0;
  ValueEstimate treated;
  ValueEstimate control;
  std::vector<std::string> warnings;
};

GteEstimate estimate_gte_ldml(const MechanismSpec& spec, const MarketDataset& data, const FoldPlan& plan,
                              const EstimatorConfig& config);
// Uses a seeded fold plan built from the config.
GteEstimate estimate_gte_ldml(const MechanismSpec& spec, const MarketDataset& data, std::uint64_t seed,
                              const EstimatorConfig& config);

FoldPlan fold_plan_for(const MarketDataset& data, std::uint64_t seed, const EstimatorConfig& config);

}  // namespace gte
