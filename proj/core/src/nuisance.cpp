#include "gte/nuisance.hpp"

#include <algorithm>

#include "gte/error.hpp"

namespace gte {

NuisanceConfig NuisanceConfig::defaults() {
  NuisanceConfig c;
  c.propensity = std::make_shared<LogisticRidgeLearner>();
  c.mean = std::make_shared<KnnRegressor>();
  return c;
}

std::shared_ptr<const PropensityModel> fit_propensity(const MarketDataset& data,
                                                      std::span<const std::size_t> rows,
                                                      const PropensityLearner& learner) {
  return learner.fit(data, rows);
}

FoldPropensities fit_fold_propensities(const MarketDataset& data, const FoldPlan& plan,
                                       const NuisanceConfig& config) {
  if (!config.propensity) fail(ErrorCode::InvalidConfig, "no propensity learner configured");
  if (plan.n() != data.n()) fail(ErrorCode::LengthMismatch, "fold plan size differs from dataset size");
  FoldPropensities out;
  for (std::size_t k = 0; k < plan.k_folds; ++k) {
    out.h.push_back(fit_propensity(data, plan.h_rows[k], config.first_step()));
    out.g.push_back(fit_propensity(data, plan.g_rows[k], *config.propensity));
  }
  out.e_hat.resize(data.n());
  for (std::size_t i = 0; i < data.n(); ++i) {
    const auto& model = *out.g[static_cast<std::size_t>(plan.fold_of[i])];
    const double raw = model.predict_raw(data.covariates(i));
    out.e_hat[i] = model.predict(data.covariates(i));
    if (out.e_hat[i] != raw) ++out.clipped;
  }
  return out;
}

namespace {

double ipw_weight(double pi, int w, double e, double denom_scale) {
  double g = 0.0;
  const double treat = pi * w;
  const double control = (1.0 - pi) * (1 - w);
  if (treat != 0.0) {
    if (!(e > 0.0)) fail(ErrorCode::IllConditioned, "treated unit with zero propensity");
    g += treat / (denom_scale * e);
  }
  if (control != 0.0) {
    if (!(e < 1.0)) fail(ErrorCode::IllConditioned, "control unit with unit propensity");
    g += control / (denom_scale * (1.0 - e));
  }
  return g;
}

}  // namespace

std::vector<double> first_step_weights(const MarketDataset& data, const FoldPlan& plan, std::size_t k,
                                       std::span<const double> pi, const PropensityModel& propensity_h) {
  const auto& rows = plan.h_rows.at(k);
  if (rows.empty()) fail(ErrorCode::TooFewObservations, "first-step split H is empty");
  const double h = static_cast<double>(rows.size());
  std::vector<double> gamma;
  gamma.reserve(rows.size());
  for (std::size_t r : rows) {
    gamma.push_back(ipw_weight(pi[r], data.treatment(r), propensity_h.predict(data.covariates(r)), h));
  }
  return gamma;
}

ClearingResult first_step_cutoffs(const MechanismSpec& spec, const MarketDataset& data,
                                  const FoldPlan& plan, std::size_t k, std::span<const double> pi,
                                  const PropensityModel& propensity_h) {
  const MechanismSpec resolved = with_resolved_box(spec, data);
  const auto gamma = first_step_weights(data, plan, k, pi, propensity_h);
  std::vector<BidValue> bids;
  bids.reserve(plan.h_rows[k].size());
  for (std::size_t r : plan.h_rows[k]) bids.push_back(data.bid(r));
  return clear_market(resolved, bids, gamma, resolved.capacities, default_tolerance(gamma));
}

FoldMeans fit_conditional_means(const MechanismSpec& spec, const MarketDataset& data,
                                std::span<const std::size_t> train_rows, std::span<const double> cutoffs,
                                const MeanLearner& learner) {
  const std::size_t J = spec.items;
  FoldMeans out;
  for (int arm : {0, 1}) {
    std::vector<std::size_t> rows;
    for (std::size_t r : train_rows) {
      if (data.treatment(r) == arm) rows.push_back(r);
    }
    if (rows.empty()) {
      fail(ErrorCode::SingleArmTrainingSet, "regression split has no units in arm " + std::to_string(arm));
    }
    std::vector<double> ty(rows.size()), td(rows.size() * J);
    for (std::size_t t = 0; t < rows.size(); ++t) {
      const BidValue& b = data.bid(rows[t]);
      const int item = allocated_item(spec, b, cutoffs);
      if (item >= 0) td[t * J + static_cast<std::size_t>(item)] = 1.0;
      ty[t] = outcome(spec, b, data[rows[t]].tag, cutoffs);
    }
    MeanFitContext ctx;
    ctx.data = &data;
    ctx.spec = &spec;
    ctx.rows = rows;
    ctx.arm = arm;
    ctx.cutoffs = cutoffs;
    ctx.targets = ty;
    ctx.width = 1;
    ctx.target = TargetKind::Outcome;
    out.y[arm] = learner.fit(ctx);
    ctx.targets = td;
    ctx.width = J;
    ctx.target = TargetKind::Demand;
    out.d[arm] = learner.fit(ctx);
  }
  return out;
}

bool NuisanceBundle::cutoff_dependent() const {
  for (const auto& f : folds) {
    for (int a : {0, 1}) {
      if (f.means.y[a]->depends_on_cutoffs() || f.means.d[a]->depends_on_cutoffs()) return true;
    }
  }
  return false;
}

void NuisanceBundle::mean_at(const MarketDataset& data, std::size_t i, int arm, std::span<const double> p,
                             std::span<double> out) const {
  const auto& means = folds[static_cast<std::size_t>(fold_of[i])].means;
  const auto x = data.covariates(i);
  means.y[arm]->predict_at(x, p, out.subspan(0, 1));
  means.d[arm]->predict_at(x, p, out.subspan(1, items()));
}

void cache_predictions(const MarketDataset& data, NuisanceBundle& bundle) {
  const std::size_t w = bundle.width();
  for (int arm : {0, 1}) {
    bundle.mu[arm].assign(data.n() * w, 0.0);
    for (std::size_t i = 0; i < data.n(); ++i) {
      const auto& means = bundle.folds[static_cast<std::size_t>(bundle.fold_of[i])].means;
      std::span<double> out(bundle.mu[arm].data() + i * w, w);
      means.y[arm]->predict(data.covariates(i), out.subspan(0, 1));
      means.d[arm]->predict(data.covariates(i), out.subspan(1, w - 1));
    }
  }
}

NuisanceBundle cross_fit(const MechanismSpec& spec, const MarketDataset& data, const TreatmentRule& rule,
                         const FoldPlan& plan, const NuisanceConfig& config,
                         std::shared_ptr<const FoldPropensities> shared) {
  spec.validate();
  if (spec.bid_kind() != data.bid_kind()) {
    fail(ErrorCode::BidKindMismatch, "mechanism and dataset bid kinds differ");
  }
  if (spec.items != data.items()) fail(ErrorCode::DimensionMismatch, "mechanism and dataset item counts differ");
  if (plan.n() != data.n()) fail(ErrorCode::LengthMismatch, "fold plan size differs from dataset size");
  if (!config.mean) fail(ErrorCode::InvalidConfig, "no conditional-mean learner configured");

  NuisanceBundle b;
  b.spec = with_resolved_box(spec, data);
  b.rule = rule;
  b.fold_of = plan.fold_of;
  b.pi = rule_values(rule, data);
  b.propensities = shared ? std::move(shared)
                          : std::make_shared<const FoldPropensities>(fit_fold_propensities(data, plan, config));
  b.e_hat = b.propensities->e_hat;

  for (std::size_t k = 0; k < plan.k_folds; ++k) {
    FoldNuisance f;
    auto first = first_step_cutoffs(b.spec, data, plan, k, b.pi, *b.propensities->h[k]);
    f.first_step = std::move(first.cutoffs);
    f.first_step_report = std::move(first.report);
    f.means = fit_conditional_means(b.spec, data, plan.g_rows[k], f.first_step, *config.mean);
    f.propensity_rows = plan.g_rows[k];
    f.mean_rows = plan.g_rows[k];
    b.folds.push_back(std::move(f));
  }
  cache_predictions(data, b);
  return b;
}

}  // namespace gte
