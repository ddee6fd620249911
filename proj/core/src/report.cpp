#include "gte/report.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "json.hpp"

namespace gte {

namespace {

using nlohmann::ordered_json;

std::string join(const std::vector<std::string>& parts, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += sep;
    out += parts[i];
  }
  return out;
}

// Non-finite numbers become strings because JSON has no literal for them.
ordered_json number(double v) {
  if (std::isfinite(v)) return v;
  return format_number(v);
}

ordered_json numbers(std::span<const double> v) {
  ordered_json a = ordered_json::array();
  for (double x : v) a.push_back(number(x));
  return a;
}

ordered_json provenance_json(const Provenance& prov) {
  return ordered_json{{"config_hash", prov.config_hash}, {"seed", prov.seed}, {"version", prov.version}};
}

std::string provenance_header() { return "config_hash,master_seed,version"; }

std::string provenance_fields(const Provenance& prov) {
  return csv_field(prov.config_hash) + "," + std::to_string(prov.seed) + "," + csv_field(prov.version);
}

ordered_json clearing_json(const ClearingReport& r) {
  return ordered_json{{"residual", numbers(r.residual)},
                      {"residual_norm", number(r.residual_norm)},
                      {"iterations", r.iterations},
                      {"converged", r.converged},
                      {"edge_oversubscribed", r.edge_oversubscribed},
                      {"warnings", r.warnings}};
}

ordered_json value_json(const ValueEstimate& v) {
  ordered_json folds = ordered_json::array();
  for (const auto& f : v.folds) {
    folds.push_back(ordered_json{{"fold", f.fold},
                                 {"propensity_rows", f.propensity_rows},
                                 {"mean_rows", f.mean_rows},
                                 {"first_step_cutoffs", numbers(f.first_step_cutoffs)},
                                 {"first_step_converged", f.first_step_converged},
                                 {"first_step_residual_norm", number(f.first_step_residual_norm)}});
  }
  return ordered_json{{"rule", v.rule.describe()},
                      {"value", number(v.value)},
                      {"se", number(v.se)},
                      {"ci", numbers(std::vector<double>{v.ci_lo, v.ci_hi})},
                      {"cutoffs", numbers(v.cutoffs)},
                      {"perturbed_capacities", numbers(v.perturbed_capacities)},
                      {"nu", numbers(v.nu)},
                      {"nu_step", numbers(v.nu_step)},
                      {"clipped_propensities", v.clipped_propensities},
                      {"clearing", clearing_json(v.clearing)},
                      {"folds", folds},
                      {"warnings", v.warnings}};
}

std::string opt_number(bool present, double v) { return present ? format_number(v) : ""; }

}  // namespace

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) return "0";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  return buf;
}

std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\n\r") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string gte_estimate_csv(const GteEstimate& est, const std::string& estimator, const Provenance& prov) {
  std::ostringstream os;
  const std::size_t J = est.treated.cutoffs.size();
  os << "estimator,n,seed,alpha,tau,se,ci_lo,ci_hi,value_treated,value_control";
  for (std::size_t j = 0; j < J; ++j) os << ",cutoff_treated_" << j + 1;
  for (std::size_t j = 0; j < J; ++j) os << ",cutoff_control_" << j + 1;
  os << ",warnings," << provenance_header() << "\n";
  os << csv_field(estimator) << "," << est.n << "," << prov.seed << "," << format_number(est.alpha) << ","
     << format_number(est.tau) << "," << format_number(est.se) << "," << format_number(est.ci_lo) << ","
     << format_number(est.ci_hi) << "," << format_number(est.treated.value) << ","
     << format_number(est.control.value);
  for (double p : est.treated.cutoffs) os << "," << format_number(p);
  for (double p : est.control.cutoffs) os << "," << format_number(p);
  os << "," << csv_field(join(est.warnings, ";")) << "," << provenance_fields(prov) << "\n";
  return os.str();
}

std::string gte_estimate_json(const GteEstimate& est, const std::string& estimator, const Provenance& prov) {
  ordered_json j{{"estimator", estimator},
                 {"n", est.n},
                 {"alpha", number(est.alpha)},
                 {"tau", number(est.tau)},
                 {"se", number(est.se)},
                 {"ci", numbers(std::vector<double>{est.ci_lo, est.ci_hi})},
                 {"treated", value_json(est.treated)},
                 {"control", value_json(est.control)},
                 {"warnings", est.warnings},
                 {"provenance", provenance_json(prov)}};
  return j.dump(2) + "\n";
}

std::string mc_results_csv(const McResultTable& table, DgpKind dgp, const Provenance& prov) {
  std::ostringstream os;
  os << "design,estimator,n,reps,failures,bias,rmse,sd,coverage_tau_star,coverage_tau_bar,coverage_tau_dte,"
        "mean_ci_width,mean_se,mean_tau_bar,sd_tau_bar,tau_star,"
     << provenance_header() << "\n";
  for (const auto& r : table.rows) {
    os << to_string(dgp) << "," << to_string(r.estimator) << "," << r.n << "," << r.reps << "," << r.failures << ","
       << format_number(r.bias) << "," << format_number(r.rmse) << "," << format_number(r.sd) << ","
       << opt_number(r.has_ci, r.coverage_star) << "," << opt_number(r.has_ci, r.coverage_bar) << ","
       << opt_number(r.has_dte, r.coverage_dte) << "," << opt_number(r.has_ci, r.mean_ci_width) << ","
       << opt_number(r.has_ci, r.mean_se) << "," << format_number(r.mean_tau_bar) << ","
       << format_number(r.sd_tau_bar) << "," << format_number(r.tau_star) << "," << provenance_fields(prov)
       << "\n";
  }
  return os.str();
}

std::string mc_provenance_csv(const McResultTable& table, const Provenance& prov) {
  std::ostringstream os;
  os << "estimator,n,rep,data_seed,tau_bar,tau_star,tau_dte,estimate,se,ci_lo,ci_hi,failed,error,"
     << provenance_header() << "\n";
  for (const auto& r : table.records) {
    os << to_string(r.estimator) << "," << r.n << "," << r.rep << "," << r.data_seed << ","
       << format_number(r.tau_bar) << "," << format_number(r.tau_star) << "," << opt_number(r.has_dte, r.tau_dte)
       << "," << (r.failed ? "" : format_number(r.estimate)) << "," << opt_number(r.has_ci && !r.failed, r.se)
       << "," << opt_number(r.has_ci && !r.failed, r.ci_lo) << "," << opt_number(r.has_ci && !r.failed, r.ci_hi)
       << "," << (r.failed ? 1 : 0) << "," << csv_field(r.error) << "," << provenance_fields(prov) << "\n";
  }
  return os.str();
}

std::string mc_long_csv(const McResultTable& table, const Provenance& prov) {
  std::ostringstream os;
  os << "estimator,n,rep,metric,value," << provenance_header() << "\n";
  const std::string tail = "," + provenance_fields(prov) + "\n";
  for (const auto& r : table.records) {
    const std::string head = std::string(to_string(r.estimator)) + "," + std::to_string(r.n) + "," +
                             std::to_string(r.rep) + ",";
    os << head << "tau_bar," << format_number(r.tau_bar) << tail;
    if (r.has_dte) os << head << "tau_dte," << format_number(r.tau_dte) << tail;
    if (r.failed) continue;
    os << head << "estimate," << format_number(r.estimate) << tail;
    if (r.has_ci) {
      os << head << "ci_width," << format_number(r.ci_hi - r.ci_lo) << tail;
      os << head << "covers_tau_star," << ((r.ci_lo <= r.tau_star && r.tau_star <= r.ci_hi) ? 1 : 0) << tail;
      os << head << "covers_tau_bar," << ((r.ci_lo <= r.tau_bar && r.tau_bar <= r.ci_hi) ? 1 : 0) << tail;
      if (r.has_dte) {
        os << head << "covers_tau_dte," << ((r.ci_lo <= r.tau_dte && r.tau_dte <= r.ci_hi) ? 1 : 0) << tail;
      }
    }
  }
  return os.str();
}

std::string mc_metadata_json(const ExperimentConfig& config, const Provenance& prov) {
  ordered_json design{{"name", to_string(config.dgp)}};
  switch (config.dgp) {
    case DgpKind::AuctionLogNormal:
      design["bids"] = "B(0) = exp(0.8 x1 - 0.3 x2 - 0.2 x3 + 0.3 eps), B(1) = effect * B(0)";
      break;
    case DgpKind::AuctionTruncNormal:
      design["bids"] = "B(0) ~ N(0.8 x1 - 0.3 x2 - 0.2 x3, 0.3^2) truncated to (0, inf), B(1) = effect * B(0)";
      design["choice"] = "truncated-normal location and scale are a modelling choice of this implementation";
      break;
    case DgpKind::School:
      design["treatment"] = "W ~ Bernoulli(clip(0.5 x3 - 0.5 x2 + v, 0.02, 0.98)), v ~ Bernoulli(0.5)";
      design["choice"] = "treatment probability clipping to [0.02, 0.98] is a modelling choice of this implementation";
      break;
  }
  if (config.effect >= 0.0) design["effect"] = number(config.effect);
  ordered_json est = ordered_json::array();
  for (auto e : config.estimators) est.push_back(to_string(e));
  ordered_json n = ordered_json::array();
  for (auto v : config.n_values) n.push_back(v);
  ordered_json j{{"design", design},
                 {"estimators", est},
                 {"n_values", n},
                 {"reps", config.reps},
                 {"dte_reps", config.dte_reps},
                 {"continuum_draws", config.continuum_draws},
                 {"continuum_seed", config.continuum_seed},
                 {"n_sim", config.n_sim},
                 {"k_folds", config.estimator.k_folds},
                 {"alpha", number(config.estimator.alpha)},
                 {"provenance", provenance_json(prov)}};
  return j.dump(2) + "\n";
}

std::string leaderboard_csv(std::span<const LeaderboardEntry> entries, const Provenance& prov) {
  std::ostringstream os;
  os << "rank,rule,value,se," << provenance_header() << "\n";
  for (std::size_t r = 0; r < entries.size(); ++r) {
    os << r << "," << csv_field(entries[r].label) << "," << format_number(entries[r].value) << ","
       << format_number(entries[r].se) << "," << provenance_fields(prov) << "\n";
  }
  return os.str();
}

std::string rule_json(const TreatmentRule& rule, const Provenance& prov) {
  ordered_json j;
  switch (rule.kind()) {
    case TreatmentRule::Kind::UniformAll: j["kind"] = "all"; break;
    case TreatmentRule::Kind::UniformNone: j["kind"] = "none"; break;
    case TreatmentRule::Kind::LinearThreshold:
      j["kind"] = "linear_threshold";
      j["weights"] = numbers(rule.weights());
      j["intercept"] = number(rule.intercept());
      break;
    case TreatmentRule::Kind::TableLookup: {
      j["kind"] = "table";
      ordered_json t = ordered_json::object();
      for (const auto& [id, p] : rule.table()) t[id] = number(p);
      j["table"] = t;
      break;
    }
  }
  j["description"] = rule.describe();
  j["provenance"] = provenance_json(prov);
  return j.dump(2) + "\n";
}

}  // namespace gte
