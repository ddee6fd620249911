#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "gte/dgp.hpp"
#include "gte/estimators.hpp"

namespace gte {

enum class DgpKind { AuctionLogNormal, AuctionTruncNormal, School };

enum class EstimatorKind {
  Ldml,
  DrAte,
  SmGte,
  SmdrGte,
  LdmlOracle,      // true propensity and true conditional means
  LdmlZeroMean,    // mean models forced to 0, true propensity
  LdmlHalfScore,   // true conditional means, propensity forced to 0.5
  LdmlBothWrong,   // mean models forced to 0, propensity forced to 0.5
};

const char* to_string(DgpKind kind);
const char* to_string(EstimatorKind kind);
DgpKind parse_dgp(const std::string& text);
EstimatorKind parse_estimator(const std::string& text);

struct ExperimentConfig {
  DgpKind dgp = DgpKind::AuctionLogNormal;
  std::vector<EstimatorKind> estimators{EstimatorKind::Ldml};
  std::vector<std::size_t> n_values{1000};
  std::size_t reps = 100;
  std::uint64_t seed = 7;
  std::size_t workers = 1;
  // Redraws per replication for the direct-effect truth; 0 skips it.
  std::size_t dte_reps = 0;
  std::size_t continuum_draws = 1'000'000;
  std::uint64_t continuum_seed = 2024;
  std::size_t n_sim = 100;
  // Treatment strength: bid multiplier (auction) or utility bump (school).
  double effect = -1.0;  // < 0 means the design default
  EstimatorConfig estimator;
};

// One (estimator, n, replication) outcome.
struct RepRecord {
  EstimatorKind estimator = EstimatorKind::Ldml;
  std::size_t n = 0;
  std::size_t rep = 0;
  std::uint64_t data_seed = 0;
  double tau_bar = 0.0;
  double tau_star = 0.0;
  double tau_dte = 0.0;
  bool has_dte = false;
  double estimate = 0.0;
  double se = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  bool has_ci = false;
  bool failed = false;
  std::string error;
};

struct McRow {
  EstimatorKind estimator = EstimatorKind::Ldml;
  std::size_t n = 0;
  std::size_t reps = 0;
  std::size_t failures = 0;
  double bias = 0.0;  // mean(estimate - tau_bar)
  double rmse = 0.0;
  double sd = 0.0;    // population sd of the error, so rmse^2 = bias^2 + sd^2
  double coverage_star = 0.0;
  double coverage_bar = 0.0;
  double coverage_dte = 0.0;
  bool has_ci = false;
  bool has_dte = false;
  double mean_ci_width = 0.0;
  double mean_se = 0.0;
  double mean_tau_bar = 0.0;
  double sd_tau_bar = 0.0;
  double tau_star = 0.0;
  double runtime_seconds = 0.0;  // logged, never written to artifacts
};

struct McResultTable {
  std::vector<McRow> rows;
  std::vector<RepRecord> records;  // ordered by (n, rep, estimator)
};

// Runs every replication (in parallel across `workers`) and summarizes per
// (estimator, n). Each replication draws its data from its own stream, so
// results do not depend on the worker count.
McResultTable monte_carlo(const ExperimentConfig& config);

McRow summarize(EstimatorKind estimator, std::size_t n, const std::vector<RepRecord>& records);

// Data seed of replication `rep` at sample size n.
std::uint64_t replication_seed(std::uint64_t master, std::size_t n, std::size_t rep);

struct Replication {
  OracleMarket oracle;
  std::uint64_t data_seed = 0;
};

Replication draw_replication(const ExperimentConfig& config, std::size_t n, std::size_t rep);
// Runs one estimator on one replication; failures are recorded, not thrown.
RepRecord run_estimator(const ExperimentConfig& config, EstimatorKind kind, const Replication& rep_data,
                        std::size_t rep, double tau_bar, double tau_star);
double tau_star_for(const ExperimentConfig& config);

}  // namespace gte
