#include "gte/market_data.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gte/error.hpp"
#include "gte/rng.hpp"

namespace gte {

BidKind kind_of(const BidValue& bid) {
  return std::holds_alternative<ScalarBid>(bid) ? BidKind::Scalar : BidKind::RankedList;
}

const char* to_string(BidKind kind) {
  return kind == BidKind::Scalar ? "scalar" : "ranked";
}

void validate_bid(const BidValue& bid, std::size_t items) {
  if (const auto* s = std::get_if<ScalarBid>(&bid)) {
    if (!std::isfinite(s->value) || s->value <= 0.0) {
      fail(ErrorCode::NonPositiveBid, "scalar bid must be finite and > 0");
    }
    return;
  }
  const auto& r = std::get<RankedBid>(bid);
  if (r.scores.size() != items) {
    fail(ErrorCode::DimensionMismatch, "score vector has length " + std::to_string(r.scores.size()) +
                                           ", expected " + std::to_string(items));
  }
  std::vector<bool> seen(items, false);
  for (int item : r.ranking) {
    if (item < 0 || static_cast<std::size_t>(item) >= items) {
      fail(ErrorCode::InvalidArgument, "ranked item " + std::to_string(item + 1) + " outside 1.." +
                                           std::to_string(items));
    }
    if (seen[item]) {
      fail(ErrorCode::DuplicateRankEntry, "item " + std::to_string(item + 1) + " ranked twice");
    }
    seen[item] = true;
  }
  for (double s : r.scores) {
    if (!std::isfinite(s)) fail(ErrorCode::InvalidArgument, "non-finite score");
  }
}

MarketDataset::MarketDataset(std::vector<MarketObservation> observations, std::size_t items)
    : observations_(std::move(observations)), items_(items) {
  if (observations_.empty()) fail(ErrorCode::EmptyDataset, "dataset has no observations");
  kind_ = kind_of(observations_.front().bid);
  if (kind_ == BidKind::Scalar && items_ != 1) {
    fail(ErrorCode::InvalidArgument, "scalar bids imply exactly one item");
  }
  if (items_ == 0) fail(ErrorCode::InvalidArgument, "item count must be positive");
  dim_ = observations_.front().covariates.size();
  covariate_block_.reserve(observations_.size() * dim_);
  for (std::size_t i = 0; i < observations_.size(); ++i) {
    const auto& o = observations_[i];
    if (kind_of(o.bid) != kind_) {
      fail(ErrorCode::BidKindMismatch, "observation " + std::to_string(i + 1) + " has a " +
                                           to_string(kind_of(o.bid)) + " bid in a " +
                                           to_string(kind_) + " dataset");
    }
    if (o.covariates.size() != dim_) {
      fail(ErrorCode::DimensionMismatch, "observation " + std::to_string(i + 1) + " has " +
                                             std::to_string(o.covariates.size()) +
                                             " covariates, expected " + std::to_string(dim_));
    }
    if (o.treatment != 0 && o.treatment != 1) {
      fail(ErrorCode::NonBinaryTreatment, "observation " + std::to_string(i + 1) +
                                              " has treatment " + std::to_string(o.treatment));
    }
    validate_bid(o.bid, items_);
    covariate_block_.insert(covariate_block_.end(), o.covariates.begin(), o.covariates.end());
  }
}

std::vector<BidValue> MarketDataset::bids() const {
  std::vector<BidValue> out;
  out.reserve(n());
  for (const auto& o : observations_) out.push_back(o.bid);
  return out;
}

std::vector<int> MarketDataset::treatments() const {
  std::vector<int> out;
  out.reserve(n());
  for (const auto& o : observations_) out.push_back(o.treatment);
  return out;
}

std::vector<double> MarketDataset::scalar_bids() const {
  if (kind_ != BidKind::Scalar) fail(ErrorCode::BidKindMismatch, "dataset bids are rankings");
  std::vector<double> out;
  out.reserve(n());
  for (const auto& o : observations_) out.push_back(std::get<ScalarBid>(o.bid).value);
  return out;
}

bool MarketDataset::has_both_arms() const {
  bool t = false, c = false;
  for (const auto& o : observations_) (o.treatment == 1 ? t : c) = true;
  return t && c;
}

MarketDataset MarketDataset::subset(std::span<const std::size_t> rows) const {
  std::vector<MarketObservation> obs;
  obs.reserve(rows.size());
  for (std::size_t r : rows) obs.push_back(observations_.at(r));
  return MarketDataset(std::move(obs), items_);
}

// ---------------------------------------------------------------------------

TreatmentRule TreatmentRule::all() { return TreatmentRule{}; }

TreatmentRule TreatmentRule::none() {
  TreatmentRule r;
  r.kind_ = Kind::UniformNone;
  return r;
}

TreatmentRule TreatmentRule::linear_threshold(std::vector<double> weights, double intercept) {
  TreatmentRule r;
  r.kind_ = Kind::LinearThreshold;
  r.weights_ = std::move(weights);
  r.intercept_ = intercept;
  return r;
}

TreatmentRule TreatmentRule::table(std::map<std::string, double> probabilities) {
  for (const auto& [id, p] : probabilities) {
    if (!(p >= 0.0 && p <= 1.0)) {
      fail(ErrorCode::InvalidArgument, "table probability for id '" + id + "' outside [0,1]");
    }
  }
  TreatmentRule r;
  r.kind_ = Kind::TableLookup;
  r.table_ = std::move(probabilities);
  return r;
}

double TreatmentRule::evaluate(std::span<const double> x, const std::string& id) const {
  switch (kind_) {
    case Kind::UniformAll: return 1.0;
    case Kind::UniformNone: return 0.0;
    case Kind::LinearThreshold: {
      if (x.size() != weights_.size()) {
        fail(ErrorCode::DimensionMismatch, "rule expects " + std::to_string(weights_.size()) +
                                               " covariates, got " + std::to_string(x.size()));
      }
      double index = intercept_;
      for (std::size_t j = 0; j < x.size(); ++j) index += weights_[j] * x[j];
      return index > 0.0 ? 1.0 : 0.0;
    }
    case Kind::TableLookup: {
      auto it = table_.find(id);
      if (it == table_.end()) fail(ErrorCode::MissingId, "no table entry for id '" + id + "'");
      return it->second;
    }
  }
  return 0.0;
}

std::string TreatmentRule::describe() const {
  switch (kind_) {
    case Kind::UniformAll: return "all-treated";
    case Kind::UniformNone: return "all-control";
    case Kind::LinearThreshold: {
      std::ostringstream os;
      os.precision(6);
      os << "threshold(w=[";
      for (std::size_t j = 0; j < weights_.size(); ++j) os << (j ? " " : "") << weights_[j];
      os << "] b=" << intercept_ << ")";
      return os.str();
    }
    case Kind::TableLookup: return "table(" + std::to_string(table_.size()) + " ids)";
  }
  return "?";
}

double evaluate_rule(const TreatmentRule& rule, std::span<const double> x, const std::string& id) {
  return rule.evaluate(x, id);
}

std::vector<double> rule_values(const TreatmentRule& rule, const MarketDataset& data) {
  std::vector<double> out(data.n());
  for (std::size_t i = 0; i < data.n(); ++i) out[i] = rule.evaluate(data.covariates(i), data[i].id);
  return out;
}

// ---------------------------------------------------------------------------

std::vector<std::size_t> FoldPlan::out_of_fold(std::size_t k) const {
  std::vector<std::size_t> out;
  out.reserve(n());
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    if (fold_of[i] != static_cast<int>(k)) out.push_back(i);
  }
  return out;
}

FoldPlan make_fold_plan(std::size_t n, std::size_t k, std::uint64_t seed,
                        const std::vector<int>* stratify_by) {
  if (k < 2) fail(ErrorCode::InvalidArgument, "need at least two folds");
  if (n < 2 * k) {
    fail(ErrorCode::TooFewObservations, "n=" + std::to_string(n) + " is below 2k=" +
                                            std::to_string(2 * k));
  }
  if (stratify_by && stratify_by->size() != n) {
    fail(ErrorCode::LengthMismatch, "stratification vector length differs from n");
  }

  FoldPlan plan;
  plan.k_folds = k;
  plan.seed = seed;
  plan.fold_of.assign(n, -1);

  Rng rng = Rng::stream(seed, "folds");
  std::vector<std::size_t> order;
  order.reserve(n);
  if (stratify_by) {
    for (int arm : {0, 1}) {
      std::vector<std::size_t> block;
      for (std::size_t i = 0; i < n; ++i) {
        if ((*stratify_by)[i] == arm) block.push_back(i);
      }
      rng.shuffle(block);
      order.insert(order.end(), block.begin(), block.end());
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) order.push_back(i);
    rng.shuffle(order);
  }
  for (std::size_t r = 0; r < n; ++r) plan.fold_of[order[r]] = static_cast<int>(r % k);

  plan.in_fold.resize(k);
  for (std::size_t i = 0; i < n; ++i) plan.in_fold[plan.fold_of[i]].push_back(i);

  plan.h_rows.resize(k);
  plan.g_rows.resize(k);
  for (std::size_t f = 0; f < k; ++f) {
    std::vector<std::size_t> rest = plan.out_of_fold(f);
    Rng split = Rng::stream(seed, "hg-split", f);
    split.shuffle(rest);
    const std::size_t half = rest.size() / 2;
    plan.h_rows[f].assign(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(half));
    plan.g_rows[f].assign(rest.begin() + static_cast<std::ptrdiff_t>(half), rest.end());
    std::sort(plan.h_rows[f].begin(), plan.h_rows[f].end());
    std::sort(plan.g_rows[f].begin(), plan.g_rows[f].end());
  }
  return plan;
}

}  // namespace gte
