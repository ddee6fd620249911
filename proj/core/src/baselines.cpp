#include "gte/baselines.hpp"

#include <cmath>

#include "gte/error.hpp"
#include "gte/rng.hpp"

namespace gte {

std::vector<double> observed_outcomes(const MechanismSpec& spec, const MarketDataset& data) {
  const auto bids = data.bids();
  std::vector<int> tags;
  tags.reserve(data.n());
  for (const auto& o : data.observations()) tags.push_back(o.tag);
  return clear_uniform(spec, bids, tags).evaluation.outcome;
}

AteEstimate estimate_ate_dr(const MarketDataset& data, std::span<const double> outcomes, const FoldPlan& plan,
                            const NuisanceConfig& config, double alpha) {
  if (outcomes.size() != data.n()) fail(ErrorCode::LengthMismatch, "outcome vector length differs from n");
  if (plan.n() != data.n()) fail(ErrorCode::LengthMismatch, "fold plan size differs from dataset size");
  if (!config.propensity || !config.mean) fail(ErrorCode::InvalidConfig, "incomplete nuisance configuration");

  AteEstimate est;
  est.scores.assign(data.n(), 0.0);
  for (std::size_t k = 0; k < plan.k_folds; ++k) {
    const auto rest = plan.out_of_fold(k);
    const auto e_model = config.propensity->fit(data, rest);
    std::shared_ptr<const ConditionalMeanModel> mu[2];
    for (int arm : {0, 1}) {
      std::vector<std::size_t> rows;
      std::vector<double> targets;
      for (std::size_t r : rest) {
        if (data.treatment(r) != arm) continue;
        rows.push_back(r);
        targets.push_back(outcomes[r]);
      }
      MeanFitContext ctx;
      ctx.data = &data;
      ctx.rows = rows;
      ctx.targets = targets;
      ctx.width = 1;
      ctx.arm = arm;
      mu[arm] = config.mean->fit(ctx);
    }
    double m1 = 0.0, m0 = 0.0;
    for (std::size_t i : plan.in_fold[k]) {
      const auto x = data.covariates(i);
      const double e = e_model->predict(x);
      mu[1]->predict(x, std::span<double>(&m1, 1));
      mu[0]->predict(x, std::span<double>(&m0, 1));
      const int w = data.treatment(i);
      const double g1 = w == 1 ? m1 + (outcomes[i] - m1) / e : m1;
      const double g0 = w == 0 ? m0 + (outcomes[i] - m0) / (1.0 - e) : m0;
      est.scores[i] = g1 - g0;
    }
  }
  const double n = static_cast<double>(data.n());
  double sum = 0.0;
  for (double s : est.scores) sum += s;
  est.tau = sum / n;
  double ss = 0.0;
  for (double s : est.scores) ss += (s - est.tau) * (s - est.tau);
  est.se = std::sqrt(ss / n / n);
  const double z = normal_quantile(1.0 - alpha / 2.0);
  est.ci_lo = est.tau - z * est.se;
  est.ci_hi = est.tau + z * est.se;
  return est;
}

namespace {

void require_auction(const MarketDataset& data, const MechanismSpec& spec) {
  if (data.bid_kind() != BidKind::Scalar || spec.kind != MechanismKind::UniformPriceAuction) {
    fail(ErrorCode::BidKindMismatch, "structural estimators need an auction with scalar bids");
  }
}

StructuralEstimate structural_plain(const MarketDataset& data, const MechanismSpec& spec, std::uint64_t seed,
                                    const StructuralConfig& config) {
  if (config.n_sim == 0) fail(ErrorCode::InvalidConfig, "n_sim must be positive");
  std::vector<std::size_t> all(data.n());
  for (std::size_t i = 0; i < data.n(); ++i) all[i] = i;
  const auto models = fit_lognormal_bids(data, all);

  std::vector<double> loc[2];
  for (int arm : {0, 1}) {
    loc[arm].resize(data.n());
    for (std::size_t i = 0; i < data.n(); ++i) loc[arm][i] = models[arm].location(data.covariates(i));
  }
  MechanismSpec open = spec;
  open.box = {};  // each simulated market gets its own data-derived box

  StructuralEstimate est;
  std::vector<BidValue> bids[2] = {std::vector<BidValue>(data.n()), std::vector<BidValue>(data.n())};
  for (std::size_t r = 0; r < config.n_sim; ++r) {
    Rng rng = Rng::stream(seed, "structural-sim", r);
    for (std::size_t i = 0; i < data.n(); ++i) {
      const double eps = rng.normal();
      for (int arm : {0, 1}) bids[arm][i] = ScalarBid{std::exp(loc[arm][i] + models[arm].sigma * eps)};
    }
    est.value_treated += clear_uniform(open, bids[1], {}).mean_outcome;
    est.value_control += clear_uniform(open, bids[0], {}).mean_outcome;
  }
  est.value_treated /= static_cast<double>(config.n_sim);
  est.value_control /= static_cast<double>(config.n_sim);
  est.tau = est.value_treated - est.value_control;
  return est;
}

StructuralEstimate structural_dr(const MarketDataset& data, const MechanismSpec& spec, std::uint64_t seed,
                                 const FoldPlan* plan_in, const StructuralConfig& config) {
  const FoldPlan plan = plan_in ? *plan_in : fold_plan_for(data, seed, config.estimator);
  const auto& nc = config.estimator.nuisance;
  if (!nc.propensity) fail(ErrorCode::InvalidConfig, "no propensity learner configured");

  NuisanceBundle base;
  base.spec = with_resolved_box(spec, data);
  base.fold_of = plan.fold_of;
  auto props = std::make_shared<FoldPropensities>();
  props->e_hat.resize(data.n());
  for (std::size_t k = 0; k < plan.k_folds; ++k) {
    const auto rest = plan.out_of_fold(k);
    props->g.push_back(nc.propensity->fit(data, rest));
    const auto models = fit_lognormal_bids(data, rest);
    FoldNuisance f;
    f.first_step = base.spec.box.lo;
    for (int arm : {0, 1}) {
      f.means.y[arm] = std::make_shared<LogNormalMeanModel>(models[arm], TargetKind::Outcome, f.first_step);
      f.means.d[arm] = std::make_shared<LogNormalMeanModel>(models[arm], TargetKind::Demand, f.first_step);
    }
    f.propensity_rows = rest;
    f.mean_rows = rest;
    base.folds.push_back(std::move(f));
  }
  for (std::size_t i = 0; i < data.n(); ++i) {
    props->e_hat[i] = props->g[static_cast<std::size_t>(plan.fold_of[i])]->predict(data.covariates(i));
  }
  base.propensities = props;
  base.e_hat = props->e_hat;

  StructuralEstimate est;
  ValueEstimate values[2];
  for (int arm : {1, 0}) {
    NuisanceBundle b = base;
    b.rule = arm == 1 ? TreatmentRule::all() : TreatmentRule::none();
    b.pi = rule_values(b.rule, data);
    cache_predictions(data, b);
    auto& v = values[arm];
    v = estimate_value_ldml(data, b, config.estimator);
    est.iterations += v.fixed_point_iterations;
    const std::string label = arm == 1 ? "treated: " : "control: ";
    for (const auto& w : v.warnings) est.warnings.push_back(label + w);
  }
  est.value_treated = values[1].value;
  est.value_control = values[0].value;
  est.cutoffs_treated = values[1].cutoffs;
  est.cutoffs_control = values[0].cutoffs;
  est.tau = est.value_treated - est.value_control;
  const auto var = variance_plugin(values[1].scores, values[0].scores, est.tau, config.estimator.alpha);
  est.se = var.se;
  est.ci_lo = var.ci_lo;
  est.ci_hi = var.ci_hi;
  est.has_ci = true;
  return est;
}

}  // namespace

StructuralEstimate estimate_gte_structural(const MarketDataset& data, const MechanismSpec& spec,
                                           StructuralVariant variant, std::uint64_t seed,
                                           const FoldPlan* plan, const StructuralConfig& config) {
  require_auction(data, spec);
  for (std::size_t i = 0; i < data.n(); ++i) {
    if (!(std::get<ScalarBid>(data.bid(i)).value > 0.0)) {
      fail(ErrorCode::NonPositiveBid, "bid " + std::to_string(i + 1) + " is not positive");
    }
  }
  return variant == StructuralVariant::Plain ? structural_plain(data, spec, seed, config)
                                             : structural_dr(data, spec, seed, plan, config);
}

}  // namespace gte
