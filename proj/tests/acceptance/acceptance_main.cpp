// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "commands.hpp"
#include "gte/dgp.hpp"
#include "gte/estimators.hpp"
#include "gte/finite_diff.hpp"
#include "gte/monte_carlo.hpp"
#include "gte/parallel.hpp"
#include "gte/policy.hpp"
#include "gte/rng.hpp"
#include "oracles.hpp"

namespace {

using namespace gte;
namespace fs = std::filesystem;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

std::string num(double v) { return fmt("%.4f", v); }

std::size_t g_workers = 1;

ExperimentConfig experiment(DgpKind dgp, std::vector<EstimatorKind> estimators, std::size_t n, std::size_t reps) {
  ExperimentConfig c;
  c.dgp = dgp;
  c.estimators = std::move(estimators);
  c.n_values = {n};
  c.reps = reps;
  c.seed = 7;
  c.workers = g_workers;
  return c;
}

const McRow& row_of(const McResultTable& t, EstimatorKind k) {
  for (const auto& r : t.rows) {
    if (r.estimator == k) return r;
  }
  throw std::runtime_error(std::string("no row for ") + to_string(k));
}

std::string failures(const McResultTable& t) {
  std::size_t f = 0;
  for (const auto& r : t.rows) f += r.failures;
  return f ? " failures=" + std::to_string(f) : "";
}

// Lognormal auction design at n = 1000. The LDML run has 200 replications; its first 100
// share their data with the other estimators' 100.
const McResultTable& table1_ldml200() {
  static std::optional<McResultTable> t;
  if (!t) t = monte_carlo(experiment(DgpKind::AuctionLogNormal, {EstimatorKind::Ldml}, 1000, 200));
  return *t;
}

const McResultTable& table1_others() {
  static std::optional<McResultTable> t;
  if (!t) {
    t = monte_carlo(experiment(DgpKind::AuctionLogNormal,
                               {EstimatorKind::DrAte, EstimatorKind::SmGte, EstimatorKind::SmdrGte}, 1000, 100));
  }
  return *t;
}

Outcome criterion1() {
  std::vector<RepRecord> first100;
  for (const auto& r : table1_ldml200().records) {
    if (r.rep < 100) first100.push_back(r);
  }
  const auto ldml = summarize(EstimatorKind::Ldml, 1000, first100);
  const auto& others = table1_others();
  const auto& dr = row_of(others, EstimatorKind::DrAte);
  const auto& sm = row_of(others, EstimatorKind::SmGte);
  const bool pass = std::abs(ldml.bias) <= 0.012 && ldml.rmse >= 0.015 && ldml.rmse <= 0.05 && dr.bias >= 0.18 &&
                    dr.bias <= 0.34 && std::abs(sm.bias) <= 0.012 && ldml.failures == 0;
  return {pass, "LDML bias=" + num(ldml.bias) + " rmse=" + num(ldml.rmse) + "; DR-ATE bias=" + num(dr.bias) +
                    "; SM bias=" + num(sm.bias) + failures(others)};
}

Outcome criterion2() {
  const auto t = monte_carlo(experiment(DgpKind::AuctionTruncNormal,
                                        {EstimatorKind::Ldml, EstimatorKind::SmGte, EstimatorKind::SmdrGte}, 1000, 100));
  const auto& ldml = row_of(t, EstimatorKind::Ldml);
  const auto& sm = row_of(t, EstimatorKind::SmGte);
  const auto& smdr = row_of(t, EstimatorKind::SmdrGte);
  const bool pass = sm.bias >= 0.03 && std::abs(ldml.bias) <= 0.012 && std::abs(smdr.bias) <= 0.012;
  return {pass, "SM bias=" + num(sm.bias) + "; LDML bias=" + num(ldml.bias) + "; SMDR bias=" + num(smdr.bias) +
                    failures(t)};
}

Outcome criterion3() {
  const auto t = monte_carlo(experiment(DgpKind::School, {EstimatorKind::Ldml, EstimatorKind::DrAte}, 1000, 100));
  const auto& ldml = row_of(t, EstimatorKind::Ldml);
  const auto& dr = row_of(t, EstimatorKind::DrAte);
  const bool pass = ldml.coverage_star >= 0.90 && ldml.coverage_star <= 0.99 && ldml.mean_ci_width < dr.mean_ci_width;
  return {pass, "GTE coverage=" + num(ldml.coverage_star) + " width=" + num(ldml.mean_ci_width) +
                    "; DR-ATE width=" + num(dr.mean_ci_width) + failures(t)};
}

Outcome criterion4() {
  const auto& row = row_of(table1_ldml200(), EstimatorKind::Ldml);
  const bool pass = row.coverage_bar >= row.coverage_star - 0.02;
  return {pass, "coverage(tau_bar)=" + num(row.coverage_bar) + " coverage(tau*)=" + num(row.coverage_star) +
                    " over " + std::to_string(row.reps) + " reps"};
}

std::vector<BidValue> scalar_bids(const std::vector<double>& values) {
  std::vector<BidValue> out;
  for (double v : values) out.push_back(ScalarBid{v});
  return out;
}

Outcome criterion5() {
  Rng rng(5005);
  std::size_t mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.below(8);
    const Weights g(n, 1.0 / static_cast<double>(n));

    std::vector<double> values(n);
    for (auto& v : values) v = 0.5 + 4.0 * rng.uniform();
    const std::size_t winners = 1 + rng.below(n);
    const auto upa = MechanismSpec::uniform_price_auction(static_cast<double>(winners) / static_cast<double>(n));
    const auto bids = scalar_bids(values);
    const auto got = clear_market(upa, bids, g, upa.capacities, default_tolerance(g));
    const double floor = *std::min_element(values.begin(), values.end()) - 1.0;
    mismatches += got.cutoffs[0] != testing::upa_sorted_cutoff(values, winners, floor);

    const std::size_t J = 1 + rng.below(3);
    const auto students = testing::random_students(rng, n, J);
    std::vector<int> seats(J);
    Capacities caps(J);
    for (std::size_t j = 0; j < J; ++j) {
      seats[j] = static_cast<int>(1 + rng.below(n));
      caps[j] = static_cast<double>(seats[j]) / static_cast<double>(n);
    }
    const auto da = MechanismSpec::deferred_acceptance(caps, {std::vector<double>(J, 1.0)});
    const std::vector<BidValue> ranked(students.begin(), students.end());
    const auto cleared = clear_market(da, ranked, g, caps, default_tolerance(g));
    const auto match = testing::gale_shapley(students, seats);
    for (std::size_t i = 0; i < n; ++i) mismatches += allocated_item(da, ranked[i], cleared.cutoffs) != match[i];
  }
  return {mismatches == 0, std::to_string(mismatches) + " mismatches over 1000 DA and 1000 UPA instances"};
}

Outcome criterion6() {
  Rng rng(6006);
  std::size_t violations = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng.below(60);
    const std::size_t J = 1 + rng.below(3);
    Weights g(n);
    double max_g = 0.0, mass = 0.0;
    for (auto& w : g) {
      w = rng.uniform() < 0.1 ? 0.0 : rng.uniform() * 2.0 / static_cast<double>(n);
      max_g = std::max(max_g, w);
      mass += w;
    }
    if (mass == 0.0) g[0] = max_g = mass = 1.0 / static_cast<double>(n);
    Capacities s(J);
    for (auto& c : s) c = 0.05 + 0.9 * rng.uniform();
    const double tol = default_tolerance(g);

    const auto students = testing::random_students(rng, n, J);
    const std::vector<BidValue> ranked(students.begin(), students.end());
    const auto da = MechanismSpec::deferred_acceptance(s, {std::vector<double>(J, 1.0)});
    const auto res = clear_market(da, ranked, g, s, tol);
    const auto box = default_box(da, ranked);
    violations += !res.report.converged;
    for (std::size_t j = 0; j < J; ++j) {
      const double r = res.report.residual[j];
      if (res.cutoffs[j] > box.lo[j]) {
        worst = std::max(worst, std::abs(r) / (max_g + tol));
        violations += std::abs(r) > max_g + tol;
      }
    }
    if (mass <= *std::min_element(s.begin(), s.end())) violations += res.cutoffs != box.lo;

    std::vector<double> values(n);
    for (auto& v : values) v = 0.1 + rng.uniform();
    const auto upa = MechanismSpec::uniform_price_auction(s[0]);
    const auto bids = scalar_bids(values);
    const auto u = clear_market(upa, bids, g, upa.capacities, tol);
    violations += !u.report.converged;
    if (mass > s[0]) {
      worst = std::max(worst, std::abs(u.report.residual[0]) / (max_g + tol));
      violations += std::abs(u.report.residual[0]) > max_g + tol;
    } else {
      violations += u.cutoffs[0] != default_box(upa, bids).lo[0];
    }
  }
  return {violations == 0, std::to_string(violations) + " violations; worst |residual|/(max gamma + tol)=" + num(worst)};
}

// Capacities large enough that no school binds: cutoffs stay at the floor and
// the estimate must reduce to the AIPW contrast of y(., floor).
Outcome criterion7() {
  double worst = 0.0;
  bool off = true;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto market = gen_school_market({.n = 300 + 20 * seed, .seed = 700 + seed});
    auto spec = market.spec;
    spec.capacities = {2.0, 2.0, 2.0};
    const auto& data = market.data;
    EstimatorConfig cfg;
    const auto plan = fold_plan_for(data, seed, cfg);
    const auto est = estimate_gte_ldml(spec, data, plan, cfg);
    const auto b1 = cross_fit(spec, data, TreatmentRule::all(), plan, cfg.nuisance);
    const auto b0 = cross_fit(spec, data, TreatmentRule::none(), plan, cfg.nuisance, b1.propensities);
    const auto& floor = b1.spec.box.lo;
    off = off && est.treated.cutoffs == floor && est.control.cutoffs == floor;
    double ate = 0.0;
    for (std::size_t i = 0; i < data.n(); ++i) {
      const double w = data.treatment(i), e = b1.e_hat[i];
      const double y = outcome(spec, data.bid(i), data[i].tag, floor);
      const double m1 = b1.cached_mean(i, 1)[0], m0 = b0.cached_mean(i, 0)[0];
      ate += m1 + w / e * (y - m1) - m0 - (1.0 - w) / (1.0 - e) * (y - m0);
    }
    ate /= static_cast<double>(data.n());
    worst = std::max(worst, std::abs(est.tau - ate));
  }
  return {off && worst <= 1e-12, "max |tau - AIPW| = " + fmt("%.3g", worst) + " over 20 datasets" +
                                      (off ? "" : "; cutoffs left the floor")};
}

Outcome criterion8() {
  const VectorFn linear = [](std::span<const double> p, std::span<double> out) {
    out[0] = -p[0];
    out[1] = (1.0 - p[0]) - 0.5;
  };
  const CutoffBox box{{-10.0}, {10.0}};
  const std::vector<std::size_t> active{0};
  bool exact = true;
  for (double p : {-3.0, -0.5, 0.0, 0.25, 1.5, 4.0}) {
    for (double h : {2.0, 1.0, 0.5, 0.125, 1.0 / 1024.0}) {
      exact = exact && estimate_sensitivity(linear, std::vector<double>{p}, std::vector<double>{h}, box, active).nu[0] ==
                           1.0;
    }
  }
  double worst_random = 0.0;
  Rng rng(8008);
  for (int t = 0; t < 500; ++t) {
    const std::vector<double> p{rng.uniform(-5.0, 5.0)};
    const std::vector<double> h{std::pow(10.0, rng.uniform(-6.0, 0.0))};
    worst_random = std::max(worst_random, std::abs(estimate_sensitivity(linear, p, h, box, active).nu[0] - 1.0));
  }
  const VectorFn quad = [](std::span<const double> p, std::span<double> out) {
    out[0] = p[0] * p[0] + 3.0 * p[1];
    out[1] = p[0] * p[1] - p[1] * p[1];
  };
  double worst_jac = 0.0;
  for (int t = 0; t < 200; ++t) {
    const std::vector<double> p{rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)};
    const auto jac = fd_jacobian(quad, 2, p, std::vector<double>{1e-3, 2e-3});
    const double analytic[4] = {2.0 * p[0], 3.0, p[1], p[0] - 2.0 * p[1]};
    for (int k = 0; k < 4; ++k) worst_jac = std::max(worst_jac, std::abs(jac.values[static_cast<std::size_t>(k)] - analytic[k]));
  }
  const bool pass = exact && worst_random <= 1e-9 && worst_jac <= 1e-10;
  return {pass, std::string("nu exact on dyadic grid: ") + (exact ? "yes" : "no") + "; max |nu - 1| on random (p, h)=" +
                    fmt("%.2g", worst_random) + "; max Jacobian error=" + fmt("%.2g", worst_jac)};
}

Outcome criterion9() {
  const auto t = monte_carlo(experiment(DgpKind::AuctionLogNormal,
                                        {EstimatorKind::LdmlZeroMean, EstimatorKind::LdmlHalfScore,
                                         EstimatorKind::LdmlBothWrong},
                                        4000, 100));
  const auto& zero = row_of(t, EstimatorKind::LdmlZeroMean);
  const auto& half = row_of(t, EstimatorKind::LdmlHalfScore);
  const auto& both = row_of(t, EstimatorKind::LdmlBothWrong);
  const bool pass = std::abs(zero.bias) < 0.03 && std::abs(half.bias) < 0.03 && std::abs(both.bias) > 0.05;
  return {pass, "mean wrong bias=" + num(zero.bias) + "; propensity wrong bias=" + num(half.bias) +
                    "; both wrong bias=" + num(both.bias) + failures(t)};
}

std::vector<TreatmentRule> school_rule_class() {
  using R = TreatmentRule;
  return {R::all(),
          R::none(),
          R::linear_threshold({0, 0, 0, 0, 0, 1.0}, -0.5),
          R::linear_threshold({0, 0, 0, 0, 0, -1.0}, 0.5),
          R::linear_threshold({0, 0, 1.0, 0, 0, 0}, 0.0),
          R::linear_threshold({0, 0, -1.0, 0, 0, 0}, 0.0),
          R::linear_threshold({0, 1.0, 0, 0, 0, 0}, 0.0),
          R::linear_threshold({0, 0, 1.0, 0, 0, 1.0}, -1.0)};
}

Outcome criterion10() {
  const auto rules = school_rule_class();
  const auto population = gen_school_market({.n = 100000, .seed = 424242});
  std::vector<double> truth(rules.size());
  for (std::size_t r = 0; r < rules.size(); ++r) {
    std::vector<int> w(population.n());
    for (std::size_t i = 0; i < population.n(); ++i) {
      w[i] = rules[r].evaluate(population.data.covariates(i), population.data[i].id) > 0.5 ? 1 : 0;
    }
    truth[r] = true_value_finite(population, w);
  }
  const double best = *std::max_element(truth.begin(), truth.end());

  const std::size_t reps = 50;
  const std::vector<std::size_t> ns{500, 2000, 8000};
  std::vector<double> mean(ns.size()), se(ns.size());
  for (std::size_t k = 0; k < ns.size(); ++k) {
    std::vector<double> regret(reps);
    parallel_for(reps, g_workers, [&](std::size_t rep) {
      const auto market = gen_school_market({.n = ns[k], .seed = replication_seed(10, ns[k], rep)});
      EstimatorConfig cfg;
      const auto plan = fold_plan_for(market.data, derive_seed(replication_seed(10, ns[k], rep), "folds"), cfg);
      const auto res = learn_policy_ewm(market.spec, market.data, PolicyClass::explicit_set(rules), plan, cfg);
      const auto pos = std::find(rules.begin(), rules.end(), res.best_rule) - rules.begin();
      regret[rep] = best - truth[static_cast<std::size_t>(pos)];
    });
    double s = 0.0, ss = 0.0;
    for (double r : regret) s += r;
    mean[k] = s / reps;
    for (double r : regret) ss += (r - mean[k]) * (r - mean[k]);
    se[k] = std::sqrt(ss / (reps - 1) / reps);
  }
  bool pass = true;
  std::string detail = "mean oracle regret";
  for (std::size_t k = 0; k < ns.size(); ++k) {
    detail += " n=" + std::to_string(ns[k]) + ":" + num(mean[k]) + "(se " + num(se[k]) + ")";
    if (k > 0) pass = pass && mean[k] <= mean[k - 1] + 2.0 * std::sqrt(se[k] * se[k] + se[k - 1] * se[k - 1]);
  }
  return {pass, detail};
}

std::map<std::string, std::string> artifacts(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::ifstream in(entry.path(), std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    out[entry.path().filename().string()] = os.str();
  }
  return out;
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"gte"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  return cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
}

Outcome criterion11() {
  const fs::path root = fs::temp_directory_path() / "gte_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  {
    std::ofstream(root / "repro.json") << R"({"continuum_draws": 50000, "n_sim": 10, "dte_reps": 2})";
    std::ofstream(root / "policy.json") << R"({"directions": 2, "intercepts": 2})";
  }
  const auto sim_dir = (root / "sim1").string();
  const std::vector<std::pair<std::string, std::function<std::vector<std::string>(const std::string&)>>> commands{
      {"simulate", [](const std::string& out) {
         return std::vector<std::string>{"simulate", "--dgp", "school", "--n", "300", "--seed", "3", "--out", out};
       }},
      {"estimate", [&](const std::string& out) {
         return std::vector<std::string>{"estimate", "--data", sim_dir + "/data.csv", "--mechanism",
                                         sim_dir + "/mechanism.json", "--seed", "4", "--out", out};
       }},
      {"policy", [&](const std::string& out) {
         return std::vector<std::string>{"policy", "--config", (root / "policy.json").string(), "--data",
                                         sim_dir + "/data.csv", "--mechanism", sim_dir + "/mechanism.json",
                                         "--seed", "5", "--holdout", "0.3", "--out", out};
       }},
      {"reproduce table1", [&](const std::string& out) {
         return std::vector<std::string>{"reproduce", "table1", "--config", (root / "repro.json").string(), "--n",
                                         "100", "--reps", "2", "--seed", "6", "--out", out};
       }},
      {"reproduce figure1", [&](const std::string& out) {
         return std::vector<std::string>{"reproduce", "figure1", "--config", (root / "repro.json").string(), "--n",
                                         "200", "--reps", "2", "--seed", "6", "--out", out};
       }},
  };
  std::vector<std::string> differing;
  std::size_t files = 0;
  for (std::size_t c = 0; c < commands.size(); ++c) {
    std::map<std::string, std::string> runs[2];
    for (int k = 0; k < 2; ++k) {
      const auto out = c == 0 && k == 0 ? sim_dir : (root / (std::to_string(c) + "_" + std::to_string(k))).string();
      if (run_cli(commands[c].second(out)) != 0) {
        differing.push_back(commands[c].first + " (failed)");
        continue;
      }
      runs[k] = artifacts(out);
    }
    if (runs[0] != runs[1] || runs[0].empty()) differing.push_back(commands[c].first);
    files += runs[0].size();
  }
  fs::remove_all(root);
  std::string detail = std::to_string(files) + " artifacts across " + std::to_string(commands.size()) + " commands";
  for (const auto& d : differing) detail += "; differs: " + d;
  return {differing.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string only;
  g_workers = default_workers();
  app.add_option("--only", only, "Comma-separated criterion numbers");
  app.add_option("--workers", g_workers, "Worker threads for the Monte Carlo criteria");
  CLI11_PARSE(app, argc, argv);
  g_workers = std::max<std::size_t>(g_workers, 1);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"lognormal auction design", criterion1},     {"truncated-normal auction design", criterion2},
      {"school design coverage and width", criterion3}, {"finite-truth coverage is conservative", criterion4},
      {"mechanism oracle equivalence", criterion5},  {"market-clearing residual bound", criterion6},
      {"equilibrium-off equivalence", criterion7},   {"nu and Jacobian sanity", criterion8},
      {"double robustness", criterion9},             {"policy regret decay", criterion10},
      {"determinism", criterion11},
  };
  std::set<std::size_t> selected;
  if (!only.empty()) {
    std::stringstream ss(only);
    std::string part;
    while (std::getline(ss, part, ',')) selected.insert(std::stoul(part));
  }

  bool all = true;
  for (std::size_t c = 0; c < criteria.size(); ++c) {
    if (!selected.empty() && !selected.count(c + 1)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[c].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s criterion %zu (%s): %s [%.0fs]\n", o.pass ? "PASS" : "FAIL", c + 1, criteria[c].first.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
