#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "gte/market_data.hpp"

namespace gte {

using Cutoffs = std::vector<double>;     // one cutoff per item
using Capacities = std::vector<double>;  // fractional capacity per item
using Weights = std::vector<double>;     // one nonnegative weight per bid

// Compact box S = prod [lo_j, hi_j] the cutoffs live in. An empty box means
// "derive from the data": [min datum - 1, max datum + 1] per item.
struct CutoffBox {
  std::vector<double> lo;
  std::vector<double> hi;

  bool empty() const { return lo.empty(); }
  bool contains(std::span<const double> p) const;
};

enum class MechanismKind { UniformPriceAuction, DeferredAcceptance };
enum class OutcomeKind { Surplus, MatchValue, Custom };

// Custom outcome: (bid, tag, allocation, cutoffs) -> outcome.
using OutcomeFn = std::function<double(const BidValue&, int, std::span<const double>,
                                       std::span<const double>)>;

struct MechanismSpec {
  MechanismKind kind = MechanismKind::UniformPriceAuction;
  std::size_t items = 1;
  Capacities capacities{0.5};
  CutoffBox box;
  OutcomeKind outcome = OutcomeKind::Surplus;
  // match_values[tag][item]
  std::vector<std::vector<double>> match_values;
  std::string custom_name;
  OutcomeFn custom_outcome;

  static MechanismSpec uniform_price_auction(double capacity, CutoffBox box = {});
  static MechanismSpec deferred_acceptance(Capacities capacities,
                                           std::vector<std::vector<double>> match_values,
                                           CutoffBox box = {});

  BidKind bid_kind() const {
    return kind == MechanismKind::UniformPriceAuction ? BidKind::Scalar : BidKind::RankedList;
  }
  void validate() const;
};

struct ClearingReport {
  std::vector<double> residual;  // weighted demand minus capacity at the cutoffs
  double residual_norm = 0.0;
  std::size_t iterations = 0;
  bool converged = true;
  // Some item is still over-demanded at its upper box edge.
  bool edge_oversubscribed = false;
  std::vector<std::string> warnings;
};

struct ClearingResult {
  Cutoffs cutoffs;
  ClearingReport report;
};

struct ClearingOptions {
  // Maximum deferred-acceptance sweeps per item; total cap is this times J.
  std::size_t sweeps_per_item = 200;
};

// Slack for comparing a weighted demand with a capacity; absorbs the rounding
// of sums such as m * (1/n) versus m/n.
inline constexpr double kClearingSlack = 1e-10;

CutoffBox default_box(const MechanismSpec& spec, std::span<const BidValue> bids);
// Copy of `spec` with an empty box replaced by the data-derived default.
MechanismSpec with_resolved_box(const MechanismSpec& spec, std::span<const BidValue> bids);
MechanismSpec with_resolved_box(const MechanismSpec& spec, const MarketDataset& data);

// 1/n plus the largest single weight: the one-atom clearing bound.
double default_tolerance(std::span<const double> gamma);

// Allocation vector in {0,1}^J. Ties at the cutoff are rejected.
std::vector<double> demand(const MechanismSpec& spec, const BidValue& bid, std::span<const double> p);
void demand_into(const MechanismSpec& spec, const BidValue& bid, std::span<const double> p,
                 std::span<double> out);
// Index of the allocated item, or -1.
int allocated_item(const MechanismSpec& spec, const BidValue& bid, std::span<const double> p);

double outcome(const MechanismSpec& spec, const BidValue& bid, int tag, std::span<const double> p);

std::vector<double> clearing_residual(const MechanismSpec& spec, std::span<const BidValue> bids,
                                      std::span<const double> gamma, std::span<const double> s,
                                      std::span<const double> p);

// Smallest cutoffs (snapped to bid/score atoms or box edges) at which the
// gamma-weighted demand respects capacities `s`. Uniform price auction: a
// weighted quantile. Deferred acceptance: monotone cutoff tatonnement from the
// box floor, Gauss-Seidel over items.
ClearingResult clear_market(const MechanismSpec& spec, std::span<const BidValue> bids,
                            std::span<const double> gamma, std::span<const double> s, double tol,
                            const ClearingOptions& options = {});

// Demand (n x J, row-major) and outcomes of each bid at fixed cutoffs.
struct MarketEvaluation {
  std::size_t items = 1;
  std::vector<double> demand;
  std::vector<double> outcome;

  std::span<const double> demand_row(std::size_t i) const { return {demand.data() + i * items, items}; }
};

MarketEvaluation evaluate_bids(const MechanismSpec& spec, std::span<const BidValue> bids,
                               std::span<const int> tags, std::span<const double> p);
MarketEvaluation evaluate_market(const MechanismSpec& spec, const MarketDataset& data,
                                 std::span<const double> p);

struct Counterfactual {
  Cutoffs cutoffs;
  MarketEvaluation evaluation;
  ClearingReport report;
};

Counterfactual run_counterfactual(const MechanismSpec& spec, const MarketDataset& data,
                                  std::span<const double> gamma, std::span<const double> s, double tol);

// Mean outcome when `bids` clear with uniform weights 1/n at the mechanism capacities.
struct UniformClearing {
  Cutoffs cutoffs;
  double mean_outcome = 0.0;
  MarketEvaluation evaluation;
  ClearingReport report;
};
UniformClearing clear_uniform(const MechanismSpec& spec, std::span<const BidValue> bids,
                              std::span<const int> tags);

}  // namespace gte
