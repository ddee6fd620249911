#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gte/baselines.hpp"
#include "gte/estimators.hpp"
#include "gte/monte_carlo.hpp"
#include "gte/policy.hpp"

namespace gte {

// Stamped on every artifact.
struct Provenance {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string version = GTE_VERSION;
};

// Shortest round-trip-safe text at 15 significant digits; "nan"/"inf"/"-inf"
// for non-finite values.
std::string format_number(double v);
std::string csv_field(const std::string& text);

// Flat row: estimator, n, seed, tau, se, ci_lo, ci_hi, value/cutoff columns
// per arm, warnings joined by ';', provenance.
std::string gte_estimate_csv(const GteEstimate& est, const std::string& estimator, const Provenance& prov);
// Detail record including per-fold diagnostics of both arms.
std::string gte_estimate_json(const GteEstimate& est, const std::string& estimator, const Provenance& prov);

std::string mc_results_csv(const McResultTable& table, DgpKind dgp, const Provenance& prov);
// One row per (estimator, n, rep): seed, truths, estimate, se, CI.
std::string mc_provenance_csv(const McResultTable& table, const Provenance& prov);
// Long format (estimator, n, rep, metric, value) for density and coverage plots.
std::string mc_long_csv(const McResultTable& table, const Provenance& prov);
// Design metadata, including the choices the data-generating processes make.
std::string mc_metadata_json(const ExperimentConfig& config, const Provenance& prov);

std::string leaderboard_csv(std::span<const LeaderboardEntry> entries, const Provenance& prov);
std::string rule_json(const TreatmentRule& rule, const Provenance& prov);

}  // namespace gte
