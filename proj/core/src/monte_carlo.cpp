#include "gte/monte_carlo.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "gte/baselines.hpp"
#include "gte/error.hpp"
#include "gte/parallel.hpp"
#include "gte/rng.hpp"

namespace gte {

const char* to_string(DgpKind kind) {
  switch (kind) {
    case DgpKind::AuctionLogNormal: return "auction_lognormal";
    case DgpKind::AuctionTruncNormal: return "auction_truncnormal";
    case DgpKind::School: return "school";
  }
  return "?";
}

const char* to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::Ldml: return "LDML-GTE";
    case EstimatorKind::DrAte: return "DR-ATE";
    case EstimatorKind::SmGte: return "SM-GTE";
    case EstimatorKind::SmdrGte: return "SMDR-GTE";
    case EstimatorKind::LdmlOracle: return "LDML-oracle";
    case EstimatorKind::LdmlZeroMean: return "LDML-zero-mean";
    case EstimatorKind::LdmlHalfScore: return "LDML-half-propensity";
    case EstimatorKind::LdmlBothWrong: return "LDML-both-wrong";
  }
  return "?";
}

DgpKind parse_dgp(const std::string& text) {
  for (auto k : {DgpKind::AuctionLogNormal, DgpKind::AuctionTruncNormal, DgpKind::School}) {
    if (text == to_string(k)) return k;
  }
  if (text == "auction" || text == "lognormal") return DgpKind::AuctionLogNormal;
  if (text == "truncnormal") return DgpKind::AuctionTruncNormal;
  fail(ErrorCode::InvalidConfig, "unknown design '" + text + "'");
}

EstimatorKind parse_estimator(const std::string& text) {
  for (auto k : {EstimatorKind::Ldml, EstimatorKind::DrAte, EstimatorKind::SmGte, EstimatorKind::SmdrGte,
                 EstimatorKind::LdmlOracle, EstimatorKind::LdmlZeroMean, EstimatorKind::LdmlHalfScore,
                 EstimatorKind::LdmlBothWrong}) {
    if (text == to_string(k)) return k;
  }
  if (text == "ldml") return EstimatorKind::Ldml;
  if (text == "dr_ate") return EstimatorKind::DrAte;
  if (text == "sm") return EstimatorKind::SmGte;
  if (text == "smdr") return EstimatorKind::SmdrGte;
  fail(ErrorCode::InvalidConfig, "unknown estimator '" + text + "'");
}

std::uint64_t replication_seed(std::uint64_t master, std::size_t n, std::size_t rep) {
  return derive_seed(derive_seed(master, "mc-data", n), "rep", rep);
}

namespace {

std::uint64_t estimation_seed(std::uint64_t master, std::size_t n, std::size_t rep) {
  return derive_seed(derive_seed(master, "mc-estimation", n), "rep", rep);
}

AuctionDgpConfig auction_config(const ExperimentConfig& c, std::size_t n, std::uint64_t seed) {
  AuctionDgpConfig a;
  a.n = n;
  a.seed = seed;
  a.family = c.dgp == DgpKind::AuctionTruncNormal ? BidFamily::TruncatedNormal : BidFamily::LogNormal;
  if (c.effect >= 0.0) a.effect = c.effect;
  return a;
}

SchoolDgpConfig school_config(const ExperimentConfig& c, std::size_t n, std::uint64_t seed) {
  SchoolDgpConfig s;
  s.n = n;
  s.seed = seed;
  if (c.effect >= 0.0) s.bump = c.effect;
  return s;
}

EstimatorConfig variant_config(const ExperimentConfig& config, EstimatorKind kind) {
  EstimatorConfig ec = config.estimator;
  if (kind == EstimatorKind::Ldml || kind == EstimatorKind::DrAte || kind == EstimatorKind::SmGte ||
      kind == EstimatorKind::SmdrGte) {
    return ec;
  }
  const bool auction = config.dgp != DgpKind::School;
  const auto true_e = std::make_shared<FunctionPropensityLearner>(
      auction ? FunctionPropensityLearner::Fn(auction_propensity) : FunctionPropensityLearner::Fn(school_propensity),
      0.01, "true");
  const auto half = std::make_shared<ConstantPropensityLearner>(0.5);
  const auto zero = std::make_shared<ConstantMeanLearner>(0.0);
  auto true_mu = [&]() -> std::shared_ptr<const MeanLearner> {
    if (config.dgp != DgpKind::AuctionLogNormal) {
      fail(ErrorCode::InvalidConfig, "true conditional means are available for the lognormal auction only");
    }
    return std::make_shared<LogNormalMeanLearner>(auction_bid_models(auction_config(config, 10, 0)));
  };
  ec.nuisance.first_step_propensity = nullptr;
  switch (kind) {
    case EstimatorKind::LdmlOracle:
      ec.nuisance.propensity = true_e;
      ec.nuisance.mean = true_mu();
      break;
    case EstimatorKind::LdmlZeroMean:
      ec.nuisance.propensity = true_e;
      ec.nuisance.mean = zero;
      break;
    case EstimatorKind::LdmlHalfScore:
      ec.nuisance.propensity = half;
      ec.nuisance.mean = true_mu();
      break;
    case EstimatorKind::LdmlBothWrong:
      ec.nuisance.propensity = half;
      ec.nuisance.mean = zero;
      break;
    default: break;
  }
  return ec;
}

}  // namespace

double tau_star_for(const ExperimentConfig& config) {
  if (config.dgp == DgpKind::School) {
    return continuum_gte(school_config(config, 10, 0), config.continuum_draws, config.continuum_seed);
  }
  return continuum_gte(auction_config(config, 10, 0), config.continuum_draws, config.continuum_seed);
}

Replication draw_replication(const ExperimentConfig& config, std::size_t n, std::size_t rep) {
  const std::uint64_t seed = replication_seed(config.seed, n, rep);
  if (config.dgp == DgpKind::School) return {gen_school_market(school_config(config, n, seed)), seed};
  return {gen_auction_market(auction_config(config, n, seed)), seed};
}

RepRecord run_estimator(const ExperimentConfig& config, EstimatorKind kind, const Replication& rd,
                        std::size_t rep, double tau_bar, double tau_star) {
  const auto& data = rd.oracle.data;
  const auto& spec = rd.oracle.spec;
  RepRecord rec;
  rec.estimator = kind;
  rec.n = data.n();
  rec.rep = rep;
  rec.data_seed = rd.data_seed;
  rec.tau_bar = tau_bar;
  rec.tau_star = tau_star;
  const std::uint64_t est_seed = estimation_seed(config.seed, data.n(), rep);
  try {
    const EstimatorConfig ec = variant_config(config, kind);
    const FoldPlan plan = fold_plan_for(data, est_seed, ec);
    switch (kind) {
      case EstimatorKind::DrAte: {
        const auto y = observed_outcomes(spec, data);
        const auto a = estimate_ate_dr(data, y, plan, ec.nuisance, ec.alpha);
        rec.estimate = a.tau;
        rec.se = a.se;
        rec.ci_lo = a.ci_lo;
        rec.ci_hi = a.ci_hi;
        rec.has_ci = true;
        break;
      }
      case EstimatorKind::SmGte:
      case EstimatorKind::SmdrGte: {
        StructuralConfig sc;
        sc.n_sim = config.n_sim;
        sc.estimator = ec;
        const auto variant = kind == EstimatorKind::SmGte ? StructuralVariant::Plain : StructuralVariant::DrCorrected;
        const auto s = estimate_gte_structural(data, spec, variant, est_seed, &plan, sc);
        rec.estimate = s.tau;
        rec.se = s.se;
        rec.ci_lo = s.ci_lo;
        rec.ci_hi = s.ci_hi;
        rec.has_ci = s.has_ci;
        break;
      }
      default: {
        const auto g = estimate_gte_ldml(spec, data, plan, ec);
        rec.estimate = g.tau;
        rec.se = g.se;
        rec.ci_lo = g.ci_lo;
        rec.ci_hi = g.ci_hi;
        rec.has_ci = true;
        break;
      }
    }
  } catch (const std::exception& e) {
    rec.failed = true;
    rec.error = e.what();
  }
  return rec;
}

McRow summarize(EstimatorKind estimator, std::size_t n, const std::vector<RepRecord>& records) {
  McRow row;
  row.estimator = estimator;
  row.n = n;
  std::size_t ok = 0, with_ci = 0, with_dte = 0;
  double err_sum = 0.0, err_sq = 0.0, width = 0.0, se_sum = 0.0, tb = 0.0, tb_sq = 0.0;
  double cov_star = 0.0, cov_bar = 0.0, cov_dte = 0.0;
  for (const auto& r : records) {
    if (r.estimator != estimator || r.n != n) continue;
    ++row.reps;
    row.tau_star = r.tau_star;
    if (r.failed) {
      ++row.failures;
      continue;
    }
    ++ok;
    const double err = r.estimate - r.tau_bar;
    err_sum += err;
    err_sq += err * err;
    tb += r.tau_bar;
    tb_sq += r.tau_bar * r.tau_bar;
    if (r.has_ci) {
      ++with_ci;
      width += r.ci_hi - r.ci_lo;
      se_sum += r.se;
      cov_star += (r.ci_lo <= r.tau_star && r.tau_star <= r.ci_hi) ? 1.0 : 0.0;
      cov_bar += (r.ci_lo <= r.tau_bar && r.tau_bar <= r.ci_hi) ? 1.0 : 0.0;
      if (r.has_dte) {
        ++with_dte;
        cov_dte += (r.ci_lo <= r.tau_dte && r.tau_dte <= r.ci_hi) ? 1.0 : 0.0;
      }
    }
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (ok == 0) {
    row.bias = row.rmse = row.sd = row.mean_tau_bar = row.sd_tau_bar = nan;
  } else {
    const double k = static_cast<double>(ok);
    row.bias = err_sum / k;
    row.rmse = std::sqrt(err_sq / k);
    row.sd = std::sqrt(std::max(err_sq / k - row.bias * row.bias, 0.0));
    row.mean_tau_bar = tb / k;
    row.sd_tau_bar = std::sqrt(std::max(tb_sq / k - row.mean_tau_bar * row.mean_tau_bar, 0.0));
  }
  row.has_ci = with_ci > 0;
  row.has_dte = with_dte > 0;
  if (with_ci > 0) {
    const double k = static_cast<double>(with_ci);
    row.coverage_star = cov_star / k;
    row.coverage_bar = cov_bar / k;
    row.mean_ci_width = width / k;
    row.mean_se = se_sum / k;
  } else {
    row.coverage_star = row.coverage_bar = row.mean_ci_width = row.mean_se = nan;
  }
  row.coverage_dte = with_dte > 0 ? cov_dte / static_cast<double>(with_dte) : nan;
  return row;
}

McResultTable monte_carlo(const ExperimentConfig& config) {
  if (config.reps == 0) fail(ErrorCode::InvalidConfig, "reps must be positive");
  if (config.n_values.empty() || config.estimators.empty()) {
    fail(ErrorCode::InvalidConfig, "need at least one sample size and one estimator");
  }
  const double tau_star = tau_star_for(config);
  const std::size_t E = config.estimators.size();
  const std::size_t tasks = config.n_values.size() * config.reps;
  std::vector<std::vector<RepRecord>> slots(tasks);
  std::vector<std::vector<double>> seconds(tasks, std::vector<double>(E, 0.0));

  parallel_for(tasks, config.workers, [&](std::size_t t) {
    const std::size_t n = config.n_values[t / config.reps];
    const std::size_t rep = t % config.reps;
    const Replication rd = draw_replication(config, n, rep);
    const double tau_bar = true_gte_finite(rd.oracle);
    double dte = 0.0;
    const bool has_dte = config.dte_reps > 0;
    if (has_dte) dte = true_dte_mc(rd.oracle, config.dte_reps, derive_seed(rd.data_seed, "dte"));
    for (std::size_t e = 0; e < E; ++e) {
      const auto start = std::chrono::steady_clock::now();
      RepRecord rec = run_estimator(config, config.estimators[e], rd, rep, tau_bar, tau_star);
      rec.has_dte = has_dte;
      rec.tau_dte = dte;
      seconds[t][e] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      slots[t].push_back(std::move(rec));
    }
  });

  McResultTable table;
  for (auto& s : slots) {
    for (auto& r : s) table.records.push_back(std::move(r));
  }
  for (std::size_t ni = 0; ni < config.n_values.size(); ++ni) {
    for (std::size_t e = 0; e < E; ++e) {
      McRow row = summarize(config.estimators[e], config.n_values[ni], table.records);
      for (std::size_t rep = 0; rep < config.reps; ++rep) row.runtime_seconds += seconds[ni * config.reps + rep][e];
      table.rows.push_back(row);
    }
  }
  return table;
}

}  // namespace gte
