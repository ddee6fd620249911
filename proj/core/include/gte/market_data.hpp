#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace gte {

// A bid in an auction: a single strictly positive value.
struct ScalarBid {
  double value = 0.0;
};

// A submission to a matching mechanism. `ranking` lists acceptable items in
// preference order using 0-based item indices; unlisted items are ranked below
// the outside option. `scores` holds one priority score per item.
struct RankedBid {
  std::vector<int> ranking;
  std::vector<double> scores;
};

using BidValue = std::variant<ScalarBid, RankedBid>;

enum class BidKind { Scalar, RankedList };

BidKind kind_of(const BidValue& bid);
const char* to_string(BidKind kind);

// Throws on non-finite/non-positive scalars, duplicate or out-of-range ranks,
// and score vectors whose length differs from `items`.
void validate_bid(const BidValue& bid, std::size_t items);

struct MarketObservation {
  std::string id;
  BidValue bid;
  int treatment = 0;
  std::vector<double> covariates;
  // Group label used to look up match values (e.g. a subgroup indicator).
  int tag = 0;
  std::optional<double> outcome_cached;
};

// Validated, immutable collection of observations sharing bid kind, item
// count and covariate dimension. Covariates are also kept in a contiguous
// row-major block for the learners.
class MarketDataset {
 public:
  MarketDataset(std::vector<MarketObservation> observations, std::size_t items);

  std::size_t n() const { return observations_.size(); }
  std::size_t items() const { return items_; }
  std::size_t covariate_dim() const { return dim_; }
  BidKind bid_kind() const { return kind_; }

  const std::vector<MarketObservation>& observations() const { return observations_; }
  const MarketObservation& operator[](std::size_t i) const { return observations_[i]; }

  int treatment(std::size_t i) const { return observations_[i].treatment; }
  const BidValue& bid(std::size_t i) const { return observations_[i].bid; }
  std::span<const double> covariates(std::size_t i) const {
    return {covariate_block_.data() + i * dim_, dim_};
  }
  std::span<const double> covariate_block() const { return covariate_block_; }

  std::vector<BidValue> bids() const;
  std::vector<int> treatments() const;
  // Throws BidKindMismatch for ranked datasets.
  std::vector<double> scalar_bids() const;
  bool has_both_arms() const;

  MarketDataset subset(std::span<const std::size_t> rows) const;

 private:
  std::vector<MarketObservation> observations_;
  std::size_t items_ = 0;
  std::size_t dim_ = 0;
  BidKind kind_ = BidKind::Scalar;
  std::vector<double> covariate_block_;
};

// A treatment-assignment rule x -> [0, 1].
class TreatmentRule {
 public:
  enum class Kind { UniformAll, UniformNone, LinearThreshold, TableLookup };

  static TreatmentRule all();
  static TreatmentRule none();
  static TreatmentRule linear_threshold(std::vector<double> weights, double intercept);
  static TreatmentRule table(std::map<std::string, double> probabilities);

  Kind kind() const { return kind_; }
  const std::vector<double>& weights() const { return weights_; }
  double intercept() const { return intercept_; }
  const std::map<std::string, double>& table() const { return table_; }

  // Throws DimensionMismatch / MissingId.
  double evaluate(std::span<const double> x, const std::string& id) const;
  std::string describe() const;

  bool operator==(const TreatmentRule& other) const = default;

 private:
  Kind kind_ = Kind::UniformAll;
  std::vector<double> weights_;
  double intercept_ = 0.0;
  std::map<std::string, double> table_;
};

double evaluate_rule(const TreatmentRule& rule, std::span<const double> x, const std::string& id);
// pi(X_i) for every observation.
std::vector<double> rule_values(const TreatmentRule& rule, const MarketDataset& data);

// K-fold plan with a per-fold split of the out-of-fold rows into H (first-step
// cutoffs) and G (propensity and conditional means). All index lists are
// sorted ascending.
struct FoldPlan {
  std::size_t k_folds = 3;
  std::uint64_t seed = 0;
  std::vector<int> fold_of;
  std::vector<std::vector<std::size_t>> in_fold;
  std::vector<std::vector<std::size_t>> h_rows;
  std::vector<std::vector<std::size_t>> g_rows;

  std::size_t n() const { return fold_of.size(); }
  std::vector<std::size_t> out_of_fold(std::size_t k) const;
  bool operator==(const FoldPlan& other) const = default;
};

// Seeded permutation dealt round-robin into k folds; each complement is then
// shuffled and halved (H gets the floor half). When `stratify_by` is given the
// permutation is drawn within each treatment arm.
FoldPlan make_fold_plan(std::size_t n, std::size_t k, std::uint64_t seed,
                        const std::vector<int>* stratify_by = nullptr);

}  // namespace gte
