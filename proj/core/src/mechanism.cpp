#include "gte/mechanism.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gte/error.hpp"

namespace gte {

bool CutoffBox::contains(std::span<const double> p) const {
  if (p.size() != lo.size()) return false;
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (p[j] < lo[j] || p[j] > hi[j]) return false;
  }
  return true;
}

MechanismSpec MechanismSpec::uniform_price_auction(double capacity, CutoffBox box) {
  MechanismSpec spec;
  spec.kind = MechanismKind::UniformPriceAuction;
  spec.items = 1;
  spec.capacities = {capacity};
  spec.box = std::move(box);
  spec.outcome = OutcomeKind::Surplus;
  return spec;
}

MechanismSpec MechanismSpec::deferred_acceptance(Capacities capacities,
                                                 std::vector<std::vector<double>> match_values,
                                                 CutoffBox box) {
  MechanismSpec spec;
  spec.kind = MechanismKind::DeferredAcceptance;
  spec.items = capacities.size();
  spec.capacities = std::move(capacities);
  spec.box = std::move(box);
  spec.outcome = OutcomeKind::MatchValue;
  spec.match_values = std::move(match_values);
  return spec;
}

void MechanismSpec::validate() const {
  if (items == 0) fail(ErrorCode::InvalidConfig, "mechanism needs at least one item");
  if (kind == MechanismKind::UniformPriceAuction && items != 1) {
    fail(ErrorCode::InvalidConfig, "uniform price auction has exactly one item");
  }
  if (capacities.size() != items) {
    fail(ErrorCode::InvalidConfig, "capacity vector length differs from item count");
  }
  for (double c : capacities) {
    if (!(c > 0.0) || !std::isfinite(c)) fail(ErrorCode::InvalidConfig, "capacities must be positive");
  }
  if (!box.empty()) {
    if (box.lo.size() != items || box.hi.size() != items) {
      fail(ErrorCode::InvalidConfig, "cutoff box dimension differs from item count");
    }
    for (std::size_t j = 0; j < items; ++j) {
      if (!(box.lo[j] < box.hi[j])) fail(ErrorCode::InvalidConfig, "cutoff box must have lo < hi");
    }
  }
  if (outcome == OutcomeKind::Surplus && kind != MechanismKind::UniformPriceAuction) {
    fail(ErrorCode::InvalidConfig, "surplus outcome requires scalar bids");
  }
  if (outcome == OutcomeKind::Custom && !custom_outcome) {
    fail(ErrorCode::InvalidConfig, "custom outcome '" + custom_name + "' has no function");
  }
}

namespace {

void check_kind(const MechanismSpec& spec, const BidValue& bid) {
  if (kind_of(bid) != spec.bid_kind()) {
    fail(ErrorCode::BidKindMismatch, std::string("mechanism expects ") + to_string(spec.bid_kind()) +
                                         " bids, got " + to_string(kind_of(bid)));
  }
}

// Weighted atoms (value, weight), weight > 0.
struct Atom {
  double value;
  double weight;
};

struct CutoffSearch {
  double cutoff;
  bool oversubscribed;
};

// Smallest c in {lo} U {atoms in (lo, hi)} U {hi} with sum of weights of atoms
// strictly above c at most `capacity`. Atoms are sorted in place.
CutoffSearch smallest_clearing_cutoff(std::vector<Atom>& atoms, double capacity, double lo, double hi) {
  std::sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) { return a.value > b.value; });
  const double limit = capacity + kClearingSlack;

  double above = 0.0;  // weight strictly above the current candidate
  std::size_t t = 0;
  while (t < atoms.size() && atoms[t].value > hi) above += atoms[t++].weight;
  if (above > limit) return {hi, true};

  double best = hi;
  while (t < atoms.size()) {
    const double v = atoms[t].value;
    if (v <= lo) break;
    // Demand at c = v counts only atoms strictly above v, i.e. `above`.
    if (above > limit) return {best, false};
    best = v;
    while (t < atoms.size() && atoms[t].value == v) above += atoms[t++].weight;
  }
  // Candidate lo: everything strictly above lo has now been accumulated.
  if (above <= limit) return {lo, false};
  return {best, false};
}

void finish_report(const MechanismSpec& spec, std::span<const BidValue> bids,
                   std::span<const double> gamma, std::span<const double> s,
                   std::span<const double> p, double tol, ClearingReport& report) {
  report.residual = clearing_residual(spec, bids, gamma, s, p);
  double sq = 0.0;
  for (double r : report.residual) sq += r * r;
  report.residual_norm = std::sqrt(sq);
  for (double r : report.residual) {
    if (r > tol) report.converged = false;
  }
  if (report.edge_oversubscribed) {
    report.converged = false;
    report.warnings.push_back("demand exceeds capacity at the upper cutoff bound");
  }
}

void check_inputs(const MechanismSpec& spec, std::span<const BidValue> bids,
                  std::span<const double> gamma, std::span<const double> s) {
  if (bids.size() != gamma.size()) {
    fail(ErrorCode::LengthMismatch, std::to_string(bids.size()) + " bids but " +
                                        std::to_string(gamma.size()) + " weights");
  }
  if (s.size() != spec.items) fail(ErrorCode::LengthMismatch, "capacity vector has wrong length");
}

}  // namespace

CutoffBox default_box(const MechanismSpec& spec, std::span<const BidValue> bids) {
  CutoffBox box;
  box.lo.assign(spec.items, std::numeric_limits<double>::infinity());
  box.hi.assign(spec.items, -std::numeric_limits<double>::infinity());
  for (const auto& b : bids) {
    check_kind(spec, b);
    if (const auto* sb = std::get_if<ScalarBid>(&b)) {
      box.lo[0] = std::min(box.lo[0], sb->value);
      box.hi[0] = std::max(box.hi[0], sb->value);
    } else {
      const auto& r = std::get<RankedBid>(b);
      for (std::size_t j = 0; j < spec.items; ++j) {
        box.lo[j] = std::min(box.lo[j], r.scores[j]);
        box.hi[j] = std::max(box.hi[j], r.scores[j]);
      }
    }
  }
  for (std::size_t j = 0; j < spec.items; ++j) {
    if (!std::isfinite(box.lo[j])) {
      box.lo[j] = 0.0;
      box.hi[j] = 0.0;
    }
    box.lo[j] -= 1.0;
    box.hi[j] += 1.0;
  }
  return box;
}

MechanismSpec with_resolved_box(const MechanismSpec& spec, std::span<const BidValue> bids) {
  MechanismSpec out = spec;
  if (out.box.empty()) out.box = default_box(spec, bids);
  return out;
}

MechanismSpec with_resolved_box(const MechanismSpec& spec, const MarketDataset& data) {
  if (!spec.box.empty()) return spec;
  const auto bids = data.bids();
  return with_resolved_box(spec, std::span<const BidValue>(bids));
}

double default_tolerance(std::span<const double> gamma) {
  double mx = 0.0;
  for (double g : gamma) mx = std::max(mx, g);
  return 1.0 / static_cast<double>(std::max<std::size_t>(gamma.size(), 1)) + mx;
}

int allocated_item(const MechanismSpec& spec, const BidValue& bid, std::span<const double> p) {
  check_kind(spec, bid);
  if (p.size() != spec.items) fail(ErrorCode::DimensionMismatch, "cutoff vector has wrong length");
  if (const auto* sb = std::get_if<ScalarBid>(&bid)) return sb->value > p[0] ? 0 : -1;
  const auto& r = std::get<RankedBid>(bid);
  for (int j : r.ranking) {
    if (r.scores[j] > p[j]) return j;
  }
  return -1;
}

void demand_into(const MechanismSpec& spec, const BidValue& bid, std::span<const double> p,
                 std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  const int j = allocated_item(spec, bid, p);
  if (j >= 0) out[j] = 1.0;
}

std::vector<double> demand(const MechanismSpec& spec, const BidValue& bid, std::span<const double> p) {
  std::vector<double> out(spec.items, 0.0);
  demand_into(spec, bid, p, out);
  return out;
}

namespace {

double outcome_given_item(const MechanismSpec& spec, const BidValue& bid, int tag, int item,
                          std::span<const double> p) {
  switch (spec.outcome) {
    case OutcomeKind::Surplus: {
      const auto* sb = std::get_if<ScalarBid>(&bid);
      if (!sb) fail(ErrorCode::BidKindMismatch, "surplus outcome requires a scalar bid");
      return item == 0 ? sb->value - p[0] : 0.0;
    }
    case OutcomeKind::MatchValue: {
      if (item < 0) return 0.0;
      if (tag < 0 || static_cast<std::size_t>(tag) >= spec.match_values.size() ||
          static_cast<std::size_t>(item) >= spec.match_values[tag].size()) {
        fail(ErrorCode::MissingMatchValue, "no match value for tag " + std::to_string(tag) +
                                               ", item " + std::to_string(item + 1));
      }
      return spec.match_values[tag][item];
    }
    case OutcomeKind::Custom: {
      std::vector<double> alloc(spec.items, 0.0);
      if (item >= 0) alloc[item] = 1.0;
      return spec.custom_outcome(bid, tag, alloc, p);
    }
  }
  return 0.0;
}

}  // namespace

double outcome(const MechanismSpec& spec, const BidValue& bid, int tag, std::span<const double> p) {
  return outcome_given_item(spec, bid, tag, allocated_item(spec, bid, p), p);
}

std::vector<double> clearing_residual(const MechanismSpec& spec, std::span<const BidValue> bids,
                                      std::span<const double> gamma, std::span<const double> s,
                                      std::span<const double> p) {
  check_inputs(spec, bids, gamma, s);
  std::vector<double> r(spec.items, 0.0);
  for (std::size_t i = 0; i < bids.size(); ++i) {
    if (gamma[i] == 0.0) continue;
    const int j = allocated_item(spec, bids[i], p);
    if (j >= 0) r[j] += gamma[i];
  }
  for (std::size_t j = 0; j < spec.items; ++j) r[j] -= s[j];
  return r;
}

ClearingResult clear_market(const MechanismSpec& spec_in, std::span<const BidValue> bids,
                            std::span<const double> gamma, std::span<const double> s, double tol,
                            const ClearingOptions& options) {
  check_inputs(spec_in, bids, gamma, s);
  if (!(tol > 0.0)) fail(ErrorCode::InvalidArgument, "clearing tolerance must be positive");
  if (bids.empty()) fail(ErrorCode::EmptyMarket, "no bids to clear");
  bool any_positive = false;
  for (double g : gamma) {
    if (!std::isfinite(g) || g < 0.0) fail(ErrorCode::InvalidArgument, "weights must be finite and >= 0");
    any_positive = any_positive || g > 0.0;
  }
  if (!any_positive) fail(ErrorCode::EmptyMarket, "all weights are zero");
  for (double c : s) {
    if (!(c > 0.0) || !std::isfinite(c)) fail(ErrorCode::InvalidArgument, "capacities must be > 0");
  }
  const MechanismSpec spec = with_resolved_box(spec_in, bids);
  const std::size_t J = spec.items;

  ClearingResult result;
  auto& report = result.report;

  if (spec.kind == MechanismKind::UniformPriceAuction) {
    std::vector<Atom> atoms;
    atoms.reserve(bids.size());
    for (std::size_t i = 0; i < bids.size(); ++i) {
      check_kind(spec, bids[i]);
      if (gamma[i] > 0.0) atoms.push_back({std::get<ScalarBid>(bids[i]).value, gamma[i]});
    }
    const auto found = smallest_clearing_cutoff(atoms, s[0], spec.box.lo[0], spec.box.hi[0]);
    result.cutoffs = {found.cutoff};
    report.iterations = 1;
    report.edge_oversubscribed = found.oversubscribed;
    finish_report(spec, bids, gamma, s, result.cutoffs, tol, report);
    return result;
  }

  // Deferred acceptance. Position of each item in each ranking, -1 if absent.
  std::vector<const RankedBid*> ranked(bids.size(), nullptr);
  for (std::size_t i = 0; i < bids.size(); ++i) {
    check_kind(spec, bids[i]);
    ranked[i] = &std::get<RankedBid>(bids[i]);
  }

  Cutoffs p = spec.box.lo;
  std::vector<bool> stuck(J, false);
  std::vector<Atom> atoms;
  atoms.reserve(bids.size());
  const std::size_t cap = options.sweeps_per_item * J;
  std::size_t sweep = 0;
  bool changed = true;
  while (changed) {
    if (sweep >= cap) {
      fail(ErrorCode::NoConvergence, "cutoff tatonnement hit " + std::to_string(cap) + " sweeps");
    }
    ++sweep;
    changed = false;
    for (std::size_t j = 0; j < J; ++j) {
      // Applicants who reach item j: every item they rank above j rejects them.
      atoms.clear();
      for (std::size_t i = 0; i < bids.size(); ++i) {
        if (gamma[i] == 0.0) continue;
        const RankedBid& r = *ranked[i];
        for (int item : r.ranking) {
          if (static_cast<std::size_t>(item) == j) {
            atoms.push_back({r.scores[j], gamma[i]});
            break;
          }
          if (r.scores[item] > p[item]) break;  // held by a preferred item
        }
      }
      const auto found = smallest_clearing_cutoff(atoms, s[j], p[j], spec.box.hi[j]);
      stuck[j] = found.oversubscribed;
      if (found.cutoff > p[j]) {
        p[j] = found.cutoff;
        changed = true;
      }
    }
  }
  result.cutoffs = p;
  report.iterations = sweep;
  report.edge_oversubscribed = std::any_of(stuck.begin(), stuck.end(), [](bool b) { return b; });
  finish_report(spec, bids, gamma, s, result.cutoffs, tol, report);
  return result;
}

MarketEvaluation evaluate_bids(const MechanismSpec& spec, std::span<const BidValue> bids,
                               std::span<const int> tags, std::span<const double> p) {
  if (!tags.empty() && tags.size() != bids.size()) {
    fail(ErrorCode::LengthMismatch, "tag vector length differs from bid count");
  }
  MarketEvaluation ev;
  ev.items = spec.items;
  ev.demand.assign(bids.size() * spec.items, 0.0);
  ev.outcome.assign(bids.size(), 0.0);
  for (std::size_t i = 0; i < bids.size(); ++i) {
    const int item = allocated_item(spec, bids[i], p);
    if (item >= 0) ev.demand[i * spec.items + item] = 1.0;
    ev.outcome[i] = outcome_given_item(spec, bids[i], tags.empty() ? 0 : tags[i], item, p);
  }
  return ev;
}

MarketEvaluation evaluate_market(const MechanismSpec& spec, const MarketDataset& data,
                                 std::span<const double> p) {
  MarketEvaluation ev;
  ev.items = spec.items;
  ev.demand.assign(data.n() * spec.items, 0.0);
  ev.outcome.assign(data.n(), 0.0);
  for (std::size_t i = 0; i < data.n(); ++i) {
    const int item = allocated_item(spec, data.bid(i), p);
    if (item >= 0) ev.demand[i * spec.items + item] = 1.0;
    ev.outcome[i] = outcome_given_item(spec, data.bid(i), data[i].tag, item, p);
  }
  return ev;
}

Counterfactual run_counterfactual(const MechanismSpec& spec, const MarketDataset& data,
                                  std::span<const double> gamma, std::span<const double> s, double tol) {
  const auto bids = data.bids();
  auto cleared = clear_market(spec, bids, gamma, s, tol);
  Counterfactual cf;
  cf.cutoffs = cleared.cutoffs;
  cf.evaluation = evaluate_market(spec, data, cf.cutoffs);
  cf.report = std::move(cleared.report);
  return cf;
}

UniformClearing clear_uniform(const MechanismSpec& spec, std::span<const BidValue> bids,
                              std::span<const int> tags) {
  const std::vector<double> gamma(bids.size(), 1.0 / static_cast<double>(bids.size()));
  auto cleared = clear_market(spec, bids, gamma, spec.capacities, default_tolerance(gamma));
  UniformClearing out;
  out.cutoffs = cleared.cutoffs;
  out.report = std::move(cleared.report);
  out.evaluation = evaluate_bids(spec, bids, tags, out.cutoffs);
  double sum = 0.0;
  for (double y : out.evaluation.outcome) sum += y;
  out.mean_outcome = sum / static_cast<double>(bids.size());
  return out;
}

}  // namespace gte
