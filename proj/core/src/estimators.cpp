#include "gte/estimators.hpp"

#include <algorithm>
#include <cmath>

#include "gte/error.hpp"

namespace gte {

namespace {

// G_w = mu + 1(W = w) / P(W = w) * (obs - mu), skipping the IPW term when the
// indicator is off so a degenerate propensity cannot produce 0/0.
double aipw(double mu, double obs, int w, int arm, double e) {
  if (w != arm) return mu;
  const double p = arm == 1 ? e : 1.0 - e;
  return mu + (obs - mu) / p;
}

void check_alignment(const MarketDataset& data, const NuisanceBundle& bundle) {
  if (bundle.n() != data.n()) fail(ErrorCode::LengthMismatch, "nuisance bundle built for a different dataset");
}

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

DrScores dr_scores(const MarketDataset& data, const NuisanceBundle& bundle, std::span<const double> p) {
  check_alignment(data, bundle);
  const auto& spec = bundle.spec;
  const std::size_t n = data.n();
  const std::size_t J = spec.items;
  const bool live = bundle.cutoff_dependent();

  DrScores s;
  s.p.assign(p.begin(), p.end());
  s.items = J;
  s.y.assign(n, 0.0);
  s.d.assign(n * J, 0.0);
  std::vector<double> buf[2] = {std::vector<double>(J + 1), std::vector<double>(J + 1)};
  std::vector<double> d_obs(J);
  for (std::size_t i = 0; i < n; ++i) {
    const int w = data.treatment(i);
    const double pi = bundle.pi[i];
    const double e = bundle.e_hat[i];
    std::span<const double> mu[2];
    for (int arm : {0, 1}) {
      if (live) {
        bundle.mean_at(data, i, arm, p, buf[arm]);
        mu[arm] = buf[arm];
      } else {
        mu[arm] = bundle.cached_mean(i, arm);
      }
    }
    const int item = allocated_item(spec, data.bid(i), p);
    std::fill(d_obs.begin(), d_obs.end(), 0.0);
    if (item >= 0) d_obs[static_cast<std::size_t>(item)] = 1.0;
    const double y_obs = outcome(spec, data.bid(i), data[i].tag, p);

    double y = 0.0;
    if (pi != 0.0) y += pi * aipw(mu[1][0], y_obs, w, 1, e);
    if (pi != 1.0) y += (1.0 - pi) * aipw(mu[0][0], y_obs, w, 0, e);
    s.y[i] = y;
    for (std::size_t j = 0; j < J; ++j) {
      double d = 0.0;
      if (pi != 0.0) d += pi * aipw(mu[1][1 + j], d_obs[j], w, 1, e);
      if (pi != 1.0) d += (1.0 - pi) * aipw(mu[0][1 + j], d_obs[j], w, 0, e);
      s.d[i * J + j] = d;
    }
  }
  s.q = s.y;
  return s;
}

std::vector<double> dr_aggregate(const MarketDataset& data, const NuisanceBundle& bundle,
                                 std::span<const double> p) {
  const DrScores s = dr_scores(data, bundle, p);
  const std::size_t J = s.items;
  std::vector<double> out(J + 1, 0.0);
  out[0] = mean_of(s.y);
  for (std::size_t i = 0; i < s.n(); ++i) {
    for (std::size_t j = 0; j < J; ++j) out[1 + j] += s.d[i * J + j];
  }
  for (std::size_t j = 0; j < J; ++j) {
    out[1 + j] = out[1 + j] / static_cast<double>(s.n()) - bundle.spec.capacities[j];
  }
  return out;
}

void attach_nu(DrScores& scores, std::span<const double> nu, std::span<const double> s_star) {
  const std::size_t J = scores.items;
  if (nu.size() != J || s_star.size() != J) fail(ErrorCode::DimensionMismatch, "nu row has wrong length");
  scores.q.resize(scores.n());
  for (std::size_t i = 0; i < scores.n(); ++i) {
    double q = scores.y[i];
    for (std::size_t j = 0; j < J; ++j) {
      if (nu[j] != 0.0) q -= nu[j] * (scores.d[i * J + j] - s_star[j]);
    }
    scores.q[i] = q;
  }
}

Weights second_step_weights(const MarketDataset& data, const NuisanceBundle& bundle) {
  check_alignment(data, bundle);
  const double n = static_cast<double>(data.n());
  Weights gamma(data.n(), 0.0);
  for (std::size_t i = 0; i < data.n(); ++i) {
    const int w = data.treatment(i);
    const double pi = bundle.pi[i];
    const double e = bundle.e_hat[i];
    double g = 0.0;
    if (pi * w != 0.0) g += pi * w / (n * e);
    if ((1.0 - pi) * (1 - w) != 0.0) g += (1.0 - pi) * (1 - w) / (n * (1.0 - e));
    gamma[i] = g;
  }
  return gamma;
}

Capacities perturbed_capacities(const MarketDataset& data, const NuisanceBundle& bundle,
                                std::span<const double> p) {
  check_alignment(data, bundle);
  const std::size_t J = bundle.items();
  const bool live = bundle.cutoff_dependent();
  std::vector<double> correction(J, 0.0);
  std::vector<double> buf[2] = {std::vector<double>(J + 1), std::vector<double>(J + 1)};
  for (std::size_t i = 0; i < data.n(); ++i) {
    const int w = data.treatment(i);
    const double pi = bundle.pi[i];
    const double e = bundle.e_hat[i];
    std::span<const double> mu[2];
    for (int arm : {0, 1}) {
      if (live) {
        bundle.mean_at(data, i, arm, p, buf[arm]);
        mu[arm] = buf[arm];
      } else {
        mu[arm] = bundle.cached_mean(i, arm);
      }
    }
    // (W/e - 1) pi mu1 + ((1-W)/(1-e) - 1)(1 - pi) mu0
    const double c1 = pi != 0.0 ? (w / e - 1.0) * pi : 0.0;
    const double c0 = pi != 1.0 ? ((1 - w) / (1.0 - e) - 1.0) * (1.0 - pi) : 0.0;
    for (std::size_t j = 0; j < J; ++j) {
      if (c1 != 0.0) correction[j] += c1 * mu[1][1 + j];
      if (c0 != 0.0) correction[j] += c0 * mu[0][1 + j];
    }
  }
  Capacities s(J);
  for (std::size_t j = 0; j < J; ++j) {
    s[j] = bundle.spec.capacities[j] + correction[j] / static_cast<double>(data.n());
  }
  return s;
}

bool clamp_capacities(Capacities& s, std::span<const double> s_star) {
  bool changed = false;
  for (std::size_t j = 0; j < s.size(); ++j) {
    if (!(s[j] > 0.0)) {
      s[j] = 1e-6 * s_star[j];
      changed = true;
    }
  }
  return changed;
}

std::vector<double> nu_steps(const MarketDataset& data, const MechanismSpec& spec,
                             const EstimatorConfig& config) {
  const MechanismSpec resolved = with_resolved_box(spec, data);
  const std::size_t J = resolved.items;
  const double scale = config.nu_step_scale * std::pow(static_cast<double>(data.n()), -0.25);
  std::vector<double> h(J);
  for (std::size_t j = 0; j < J; ++j) {
    double basis = resolved.box.hi[j] - resolved.box.lo[j];
    if (config.nu_step_basis == StepBasis::AtomSpread) {
      double sum = 0.0, sq = 0.0;
      for (std::size_t i = 0; i < data.n(); ++i) {
        const BidValue& b = data.bid(i);
        const double v = std::holds_alternative<ScalarBid>(b) ? std::get<ScalarBid>(b).value
                                                              : std::get<RankedBid>(b).scores[j];
        sum += v;
        sq += v * v;
      }
      const double n = static_cast<double>(data.n());
      const double var = std::max(sq / n - (sum / n) * (sum / n), 0.0);
      if (var > 0.0) basis = std::sqrt(var);
    }
    h[j] = scale * basis;
  }
  return h;
}

std::vector<std::size_t> binding_items(const MechanismSpec& spec, std::span<const double> p) {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (p[j] > spec.box.lo[j]) out.push_back(j);
  }
  return out;
}

Sensitivity estimate_nu(const MarketDataset& data, const NuisanceBundle& bundle, std::span<const double> p,
                        std::span<const double> h, bool allow_one_sided) {
  const auto active = binding_items(bundle.spec, p);
  VectorFn agg = [&](std::span<const double> q, std::span<double> out) {
    const auto a = dr_aggregate(data, bundle, q);
    std::copy(a.begin(), a.end(), out.begin());
  };
  return estimate_sensitivity(agg, p, h, bundle.spec.box, active, allow_one_sided);
}

VarianceResult variance_single(const DrScores& scores, double value, double alpha) {
  VarianceResult r;
  const std::size_t n = scores.n();
  if (n == 0) fail(ErrorCode::EmptyDataset, "no scores");
  double ss = 0.0;
  for (double q : scores.q) ss += (q - value) * (q - value);
  r.sigma2 = ss / static_cast<double>(n);
  r.se = std::sqrt(r.sigma2 / static_cast<double>(n));
  const double z = normal_quantile(1.0 - alpha / 2.0);
  r.ci_lo = value - z * r.se;
  r.ci_hi = value + z * r.se;
  return r;
}

VarianceResult variance_plugin(const DrScores& treated, const DrScores& control, double tau, double alpha) {
  if (treated.n() != control.n() || treated.q.size() != control.q.size()) {
    fail(ErrorCode::LengthMismatch, "treated and control score vectors differ in length");
  }
  const std::size_t n = treated.n();
  if (n == 0) fail(ErrorCode::EmptyDataset, "no scores");
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = treated.q[i] - control.q[i] - tau;
    ss += r * r;
  }
  VarianceResult v;
  v.sigma2 = ss / static_cast<double>(n);
  v.se = std::sqrt(v.sigma2 / static_cast<double>(n));
  const double z = normal_quantile(1.0 - alpha / 2.0);
  v.ci_lo = tau - z * v.se;
  v.ci_hi = tau + z * v.se;
  return v;
}

DrCutoffs solve_dr_cutoffs(const MarketDataset& data, const NuisanceBundle& bundle, std::size_t max_iter) {
  check_alignment(data, bundle);
  const auto& spec = bundle.spec;
  const auto bids = data.bids();
  DrCutoffs out;
  out.gamma = second_step_weights(data, bundle);
  const double tol = default_tolerance(out.gamma);
  if (!bundle.cutoff_dependent()) {
    out.s = perturbed_capacities(data, bundle, spec.box.lo);
    out.clamped = clamp_capacities(out.s, spec.capacities);
    auto cleared = clear_market(spec, bids, out.gamma, out.s, tol);
    out.p = std::move(cleared.cutoffs);
    out.report = std::move(cleared.report);
    out.iterations = 1;
    return out;
  }
  auto cleared = clear_market(spec, bids, out.gamma, spec.capacities, tol);
  out.p = std::move(cleared.cutoffs);
  out.report = std::move(cleared.report);
  out.converged = false;
  for (out.iterations = 1; out.iterations <= max_iter; ++out.iterations) {
    Capacities s = perturbed_capacities(data, bundle, out.p);
    out.clamped = clamp_capacities(s, spec.capacities) || out.clamped;
    cleared = clear_market(spec, bids, out.gamma, s, tol);
    const bool same = cleared.cutoffs == out.p;
    out.p = std::move(cleared.cutoffs);
    out.report = std::move(cleared.report);
    out.s = std::move(s);
    if (same) {
      out.converged = true;
      break;
    }
  }
  out.iterations = std::min(out.iterations, max_iter);
  return out;
}

ValueEstimate estimate_value_ldml(const MarketDataset& data, const NuisanceBundle& bundle,
                                  const EstimatorConfig& config) {
  check_alignment(data, bundle);
  const auto& spec = bundle.spec;
  ValueEstimate v;
  v.rule = bundle.rule;
  auto sol = solve_dr_cutoffs(data, bundle, config.max_fixed_point);
  v.gamma = std::move(sol.gamma);
  v.perturbed_capacities = std::move(sol.s);
  v.cutoffs = std::move(sol.p);
  v.clearing = std::move(sol.report);
  v.fixed_point_iterations = sol.iterations;
  if (sol.clamped) v.warnings.push_back("perturbed capacity non-positive; clamped to 1e-6 s*");
  if (!sol.converged) v.warnings.push_back("cutoff fixed point hit the iteration cap");
  if (!v.clearing.converged) v.warnings.push_back("second-step clearing did not converge");

  v.scores = dr_scores(data, bundle, v.cutoffs);
  v.value = mean_of(v.scores.y);

  v.nu_step = nu_steps(data, spec, config);
  auto sens = estimate_nu(data, bundle, v.cutoffs, v.nu_step, config.one_sided_at_edge);
  v.nu = std::move(sens.nu);
  for (auto& w : sens.warnings) v.warnings.push_back(std::move(w));
  attach_nu(v.scores, v.nu, spec.capacities);

  for (std::size_t k = 0; k < bundle.folds.size(); ++k) {
    const auto& f = bundle.folds[k];
    v.folds.push_back({k, f.propensity_rows.size(), f.mean_rows.size(), f.first_step, f.first_step_report.converged,
                       f.first_step_report.residual_norm});
  }
  if (bundle.propensities) v.clipped_propensities = bundle.propensities->clipped;

  const auto var = variance_single(v.scores, v.value, config.alpha);
  v.se = var.se;
  v.ci_lo = var.ci_lo;
  v.ci_hi = var.ci_hi;
  return v;
}

FoldPlan fold_plan_for(const MarketDataset& data, std::uint64_t seed, const EstimatorConfig& config) {
  if (config.stratify_folds) {
    const auto w = data.treatments();
    return make_fold_plan(data.n(), config.k_folds, seed, &w);
  }
  return make_fold_plan(data.n(), config.k_folds, seed);
}

GteEstimate estimate_gte_ldml(const MechanismSpec& spec, const MarketDataset& data, const FoldPlan& plan,
                              const EstimatorConfig& config) {
  if (!(config.alpha > 0.0 && config.alpha < 1.0)) fail(ErrorCode::InvalidConfig, "alpha must be in (0,1)");
  auto props = std::make_shared<const FoldPropensities>(fit_fold_propensities(data, plan, config.nuisance));
  const auto b1 = cross_fit(spec, data, TreatmentRule::all(), plan, config.nuisance, props);
  const auto b0 = cross_fit(spec, data, TreatmentRule::none(), plan, config.nuisance, props);

  GteEstimate g;
  g.alpha = config.alpha;
  g.n = data.n();
  g.treated = estimate_value_ldml(data, b1, config);
  g.control = estimate_value_ldml(data, b0, config);
  g.tau = g.treated.value - g.control.value;
  const auto var = variance_plugin(g.treated.scores, g.control.scores, g.tau, config.alpha);
  g.se = var.se;
  g.ci_lo = var.ci_lo;
  g.ci_hi = var.ci_hi;
  for (const auto* v : {&g.treated, &g.control}) {
    const std::string arm = v == &g.treated ? "treated: " : "control: ";
    for (const auto& w : v->warnings) g.warnings.push_back(arm + w);
  }
  return g;
}

GteEstimate estimate_gte_ldml(const MechanismSpec& spec, const MarketDataset& data, std::uint64_t seed,
                              const EstimatorConfig& config) {
  return estimate_gte_ldml(spec, data, fold_plan_for(data, seed, config), config);
}

}  // namespace gte
