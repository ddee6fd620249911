#include "gte/policy.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "gte/error.hpp"
#include "gte/parallel.hpp"
#include "gte/rng.hpp"

namespace gte {

PolicyClass PolicyClass::explicit_set(std::vector<TreatmentRule> rules) {
  PolicyClass c;
  c.kind = Kind::ExplicitSet;
  c.rules = std::move(rules);
  return c;
}

PolicyClass PolicyClass::linear_thresholds(std::size_t directions, std::size_t intercepts, std::uint64_t seed) {
  PolicyClass c;
  c.kind = Kind::LinearThresholds;
  c.directions = directions;
  c.intercepts = intercepts;
  c.seed = seed;
  return c;
}

std::vector<TreatmentRule> candidate_rules(const PolicyClass& cls, const MarketDataset& data) {
  std::vector<TreatmentRule> own;
  if (cls.kind == PolicyClass::Kind::ExplicitSet) {
    own = cls.rules;
  } else {
    const std::size_t m = data.covariate_dim();
    if (m == 0) fail(ErrorCode::InvalidConfig, "threshold rules need covariates");
    if (cls.directions == 0 || cls.intercepts == 0) fail(ErrorCode::InvalidConfig, "empty threshold class");
    std::vector<double> proj(data.n());
    for (std::size_t d = 0; d < cls.directions; ++d) {
      Rng rng = Rng::stream(cls.seed, "policy-direction", d);
      std::vector<double> w(m);
      double norm = 0.0;
      while (norm == 0.0) {
        for (auto& v : w) v = rng.normal();
        norm = 0.0;
        for (double v : w) norm += v * v;
      }
      norm = std::sqrt(norm);
      for (auto& v : w) v /= norm;
      for (std::size_t i = 0; i < data.n(); ++i) {
        const auto x = data.covariates(i);
        double s = 0.0;
        for (std::size_t c = 0; c < m; ++c) s += w[c] * x[c];
        proj[i] = s;
      }
      std::vector<double> sorted = proj;
      std::sort(sorted.begin(), sorted.end());
      for (std::size_t g = 0; g < cls.intercepts; ++g) {
        const double level = static_cast<double>(g + 1) / static_cast<double>(cls.intercepts + 1);
        const auto idx = static_cast<std::size_t>(std::floor(level * static_cast<double>(sorted.size() - 1)));
        own.push_back(TreatmentRule::linear_threshold(w, -sorted[idx]));
      }
    }
  }
  std::vector<TreatmentRule> out;
  const auto has = [&](const TreatmentRule& r) { return std::find(own.begin(), own.end(), r) != own.end(); };
  if (!has(TreatmentRule::all())) out.push_back(TreatmentRule::all());
  if (!has(TreatmentRule::none())) out.push_back(TreatmentRule::none());
  out.insert(out.end(), own.begin(), own.end());
  return out;
}

std::vector<ValueEstimate> evaluate_rules(const MechanismSpec& spec, const MarketDataset& data,
                                          std::span<const TreatmentRule> rules, const FoldPlan& plan,
                                          const EstimatorConfig& config, std::size_t workers,
                                          std::shared_ptr<const FoldPropensities> props) {
  if (!props) props = std::make_shared<const FoldPropensities>(fit_fold_propensities(data, plan, config.nuisance));
  std::vector<ValueEstimate> out(rules.size());
  parallel_for(rules.size(), workers, [&](std::size_t r) {
    const auto bundle = cross_fit(spec, data, rules[r], plan, config.nuisance, props);
    out[r] = estimate_value_ldml(data, bundle, config);
  });
  return out;
}

PolicyResult learn_policy_ewm(const MechanismSpec& spec, const MarketDataset& data, const PolicyClass& cls,
                              const FoldPlan& plan, const EstimatorConfig& config, std::size_t workers) {
  const auto rules = candidate_rules(cls, data);
  if (rules.empty()) fail(ErrorCode::InvalidConfig, "policy class is empty");
  auto values = evaluate_rules(spec, data, rules, plan, config, workers);

  PolicyResult res;
  double v1 = 0.0, v0 = 0.0;
  for (std::size_t r = 0; r < rules.size(); ++r) {
    LeaderboardEntry e;
    e.rule = rules[r];
    e.label = rules[r].describe();
    e.value = values[r].value;
    e.se = values[r].se;
    res.leaderboard.push_back(std::move(e));
    if (values[r].value > values[res.best_index].value) res.best_index = r;
    if (rules[r] == TreatmentRule::all()) v1 = values[r].value;
    if (rules[r] == TreatmentRule::none()) v0 = values[r].value;
  }
  res.best_rule = rules[res.best_index];
  res.best_value = std::move(values[res.best_index]);
  res.regret_vs_uniform = res.best_value.value - std::max(v1, v0);
  return res;
}

double estimate_rho_at(const NuisanceBundle& bundle, std::span<const double> nu, std::size_t i) {
  const std::size_t J = bundle.items();
  if (nu.size() != J) fail(ErrorCode::DimensionMismatch, "nu row has wrong length");
  double arm_value[2];
  for (int arm : {0, 1}) {
    const auto mu = bundle.cached_mean(i, arm);
    double v = mu[0];
    for (std::size_t j = 0; j < J; ++j) v -= nu[j] * mu[1 + j];
    arm_value[arm] = v;
  }
  return arm_value[1] - arm_value[0];
}

double estimate_rho(const NuisanceBundle& bundle, std::span<const double> nu, std::span<const double> x) {
  const std::size_t J = bundle.items();
  if (nu.size() != J) fail(ErrorCode::DimensionMismatch, "nu row has wrong length");
  if (bundle.folds.empty()) fail(ErrorCode::InvalidArgument, "bundle has no fitted folds");
  std::vector<double> y(1), d(J);
  double total = 0.0;
  for (const auto& f : bundle.folds) {
    for (int arm : {0, 1}) {
      f.means.y[arm]->predict(x, y);
      f.means.d[arm]->predict(x, d);
      double v = y[0];
      for (std::size_t j = 0; j < J; ++j) v -= nu[j] * d[j];
      total += arm == 1 ? v : -v;
    }
  }
  return total / static_cast<double>(bundle.folds.size());
}

namespace {

TreatmentRule id_table(const MarketDataset& data, std::span<const double> values) {
  std::map<std::string, double> table;
  for (std::size_t i = 0; i < data.n(); ++i) {
    if (!table.emplace(data[i].id, values[i]).second) {
      fail(ErrorCode::InvalidArgument, "duplicate observation id '" + data[i].id + "'");
    }
  }
  return TreatmentRule::table(std::move(table));
}

}  // namespace

TreatmentRule observed_rule(const MarketDataset& data) {
  std::vector<double> w(data.n());
  for (std::size_t i = 0; i < data.n(); ++i) w[i] = data.treatment(i);
  return id_table(data, w);
}

TreatmentRule propensity_rule(const MarketDataset& data, std::span<const double> e_hat) {
  return id_table(data, e_hat);
}

TreatmentRule PluginRule::rule_for(const MarketDataset& other) const {
  if (!bundle) fail(ErrorCode::InvalidArgument, "plug-in rule has no fitted nuisances");
  std::vector<double> treat(other.n());
  for (std::size_t i = 0; i < other.n(); ++i) {
    treat[i] = estimate_rho(*bundle, nu, other.covariates(i)) > 0.0 ? 1.0 : 0.0;
  }
  return id_table(other, treat);
}

PluginRule plugin_global_rule(const MechanismSpec& spec, const MarketDataset& data, const FoldPlan& plan,
                              const EstimatorConfig& config) {
  auto props = std::make_shared<const FoldPropensities>(fit_fold_propensities(data, plan, config.nuisance));
  const TreatmentRule e_rule = propensity_rule(data, props->e_hat);
  auto bundle = std::make_shared<const NuisanceBundle>(cross_fit(spec, data, e_rule, plan, config.nuisance, props));
  const auto value = estimate_value_ldml(data, *bundle, config);

  PluginRule out;
  out.nu = value.nu;
  out.cutoffs = value.cutoffs;
  out.rho.resize(data.n());
  std::vector<double> treat(data.n());
  double treated = 0.0;
  for (std::size_t i = 0; i < data.n(); ++i) {
    out.rho[i] = estimate_rho_at(*bundle, out.nu, i);
    treat[i] = out.rho[i] > 0.0 ? 1.0 : 0.0;
    treated += treat[i];
  }
  out.share_treated = treated / static_cast<double>(data.n());
  out.rule = id_table(data, treat);
  out.bundle = std::move(bundle);
  return out;
}

}  // namespace gte
