#include "commands.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>

#include "CLI11.hpp"

#include "gte/dataset_io.hpp"
#include "gte/dgp.hpp"
#include "gte/error.hpp"
#include "gte/monte_carlo.hpp"
#include "gte/parallel.hpp"
#include "gte/policy.hpp"
#include "gte/report.hpp"
#include "gte/rng.hpp"

namespace gte::cli {

using nlohmann::json;

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{
      "seed",          "out",       "reps",         "n",          "alpha",       "workers",
      "holdout",       "data",      "schema",       "mechanism",  "dgp",         "estimators",
      "targeting",     "k_folds",   "nuisance",     "nu_step_scale", "nu_step_basis", "dte_reps",
      "continuum_draws", "continuum_seed", "n_sim", "directions", "intercepts",  "effect",
      "full"};
  return keys;
}

template <typename T>
T setting(const json& s, const char* key, T fallback) {
  const auto it = s.find(key);
  if (it == s.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    fail(ErrorCode::InvalidConfig, std::string("setting '") + key + "': " + e.what());
  }
}

bool has(const json& s, const char* key) { return s.contains(key) && !s.at(key).is_null(); }

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot read " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, what + ": " + e.what());
  }
}

// Either an inline JSON object or a path to a JSON file.
json json_value(const json& v, const std::string& what) {
  if (v.is_object()) return v;
  if (!v.is_string()) fail(ErrorCode::InvalidConfig, what + " must be an object or a path");
  const auto text = v.get<std::string>();
  if (!text.empty() && text.front() == '{') return parse_json(text, what);
  return parse_json(read_text(text), what + " " + text);
}

std::vector<std::size_t> parse_size_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(part, &used);
      if (used != part.size() || v <= 0) throw std::invalid_argument(part);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      fail(ErrorCode::InvalidConfig, "bad sample-size list '" + text + "'");
    }
  }
  if (out.empty()) fail(ErrorCode::InvalidConfig, "empty sample-size list");
  return out;
}

std::vector<std::size_t> n_list(const json& s, std::vector<std::size_t> fallback) {
  if (!has(s, "n")) return fallback;
  const auto& v = s.at("n");
  if (v.is_number_unsigned()) return {v.get<std::size_t>()};
  if (v.is_string()) return parse_size_list(v.get<std::string>());
  return setting<std::vector<std::size_t>>(s, "n", fallback);
}

std::uint64_t required_seed(const json& s, const std::string& command) {
  if (!has(s, "seed")) fail(ErrorCode::InvalidConfig, command + " requires --seed");
  return setting<std::uint64_t>(s, "seed", 0);
}

std::size_t workers_of(const json& s) {
  const auto w = setting<std::size_t>(s, "workers", default_workers());
  return std::max<std::size_t>(w, 1);
}

EstimatorConfig estimator_config(const json& s) {
  EstimatorConfig c;
  c.alpha = setting(s, "alpha", 0.05);
  c.k_folds = setting<std::size_t>(s, "k_folds", 3);
  c.nu_step_scale = setting(s, "nu_step_scale", 0.5);
  const auto basis = setting<std::string>(s, "nu_step_basis", "box_width");
  if (basis == "box_width") {
    c.nu_step_basis = StepBasis::BoxWidth;
  } else if (basis == "atom_spread") {
    c.nu_step_basis = StepBasis::AtomSpread;
  } else {
    fail(ErrorCode::InvalidConfig, "nu_step_basis must be box_width or atom_spread");
  }
  if (!(c.alpha > 0.0 && c.alpha < 1.0)) fail(ErrorCode::InvalidConfig, "alpha must be in (0,1)");
  if (has(s, "nuisance")) {
    const auto& nz = s.at("nuisance");
    if (nz.contains("propensity")) {
      const auto& p = nz.at("propensity");
      const auto kind = p.value("kind", std::string("logistic"));
      const double kappa = p.value("kappa", 0.01);
      if (!(kappa > 0.0 && kappa < 0.5)) fail(ErrorCode::InvalidConfig, "propensity.kappa must be in (0, 0.5)");
      if (kind == "logistic") {
        c.nuisance.propensity = std::make_shared<LogisticRidgeLearner>(kappa, p.value("lambda_scale", 1e-3));
      } else if (kind == "knn") {
        c.nuisance.propensity = std::make_shared<KnnPropensityLearner>(kappa, p.value("k_exponent", 2.0 / 3.0));
      } else {
        fail(ErrorCode::InvalidConfig, "propensity.kind must be logistic or knn");
      }
    }
    if (nz.contains("mean")) {
      const auto& m = nz.at("mean");
      const auto kind = m.value("kind", std::string("knn"));
      if (kind == "knn") {
        c.nuisance.mean = std::make_shared<KnnRegressor>(m.value("k_exponent", 2.0 / 3.0));
      } else if (kind == "lognormal") {
        c.nuisance.mean = std::make_shared<LogNormalMeanLearner>();
      } else {
        fail(ErrorCode::InvalidConfig, "mean.kind must be knn or lognormal");
      }
    }
  }
  return c;
}

Provenance provenance_of(const json& s, std::uint64_t seed) {
  Provenance p;
  p.config_hash = config_hash(s);
  p.seed = seed;
  return p;
}

std::filesystem::path out_dir(const json& s) {
  std::filesystem::path dir = setting<std::string>(s, "out", ".");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorCode::Io, "cannot create output directory " + dir.string());
  return dir;
}

// Writes artifacts and a manifest listing each file's content hash.
class ArtifactWriter {
 public:
  ArtifactWriter(std::filesystem::path dir, Provenance prov, std::string command)
      : dir_(std::move(dir)), prov_(std::move(prov)), command_(std::move(command)) {}

  void write(const std::string& name, const std::string& content) {
    const auto path = dir_ / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
    out << content;
    if (!out) fail(ErrorCode::Io, "failed writing " + path.string());
    files_.push_back({name, git_blob_sha1(content)});
  }

  void finish() {
    json files = json::array();
    for (const auto& [name, hash] : files_) files.push_back(json{{"file", name}, {"sha1", hash}});
    json m{{"command", command_},
           {"files", files},
           {"provenance", json{{"config_hash", prov_.config_hash}, {"seed", prov_.seed}, {"version", prov_.version}}}};
    const auto path = dir_ / "manifest.json";
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
    out << m.dump(2) << "\n";
  }

 private:
  std::filesystem::path dir_;
  Provenance prov_;
  std::string command_;
  std::vector<std::pair<std::string, std::string>> files_;
};

struct Inputs {
  MarketDataset data;
  MechanismSpec spec;
};

Inputs load_inputs(const json& s) {
  if (!has(s, "data")) fail(ErrorCode::InvalidConfig, "missing --data");
  if (!has(s, "mechanism")) fail(ErrorCode::InvalidConfig, "missing --mechanism");
  SchemaConfig schema;
  if (has(s, "schema")) schema = schema_from_json(json_value(s.at("schema"), "schema").dump());
  auto data = load_dataset(setting<std::string>(s, "data", ""), schema);
  auto spec = mechanism_from_json(json_value(s.at("mechanism"), "mechanism"));
  return {std::move(data), std::move(spec)};
}

void log_warnings(std::ostream& log, const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) log << "warning: " << w << "\n";
}

std::string simple_csv(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows,
                       const Provenance& prov) {
  std::ostringstream os;
  for (const auto& h : header) os << h << ",";
  os << "config_hash,master_seed,version\n";
  const std::string tail = csv_field(prov.config_hash) + "," + std::to_string(prov.seed) + "," +
                           csv_field(prov.version) + "\n";
  for (const auto& r : rows) {
    for (const auto& f : r) os << csv_field(f) << ",";
    os << tail;
  }
  return os.str();
}

}  // namespace

std::string git_blob_sha1(const std::string& content) {
  const std::string header = "blob " + std::to_string(content.size()) + std::string(1, '\0');
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr) fail(ErrorCode::Io, "cannot allocate digest context");
  const bool ok = EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, header.data(), header.size()) == 1 &&
                  EVP_DigestUpdate(ctx, content.data(), content.size()) == 1 &&
                  EVP_DigestFinal_ex(ctx, digest, &len) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) fail(ErrorCode::Io, "SHA-1 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xF];
  }
  return out;
}

std::string config_hash(const json& settings) {
  json h = settings;
  h.erase("out");
  h.erase("workers");
  return git_blob_sha1(h.dump());
}

MechanismSpec mechanism_from_json(const json& j) {
  try {
    const auto kind = j.at("kind").get<std::string>();
    CutoffBox box;
    if (j.contains("box")) {
      box.lo = j.at("box").at("lo").get<std::vector<double>>();
      box.hi = j.at("box").at("hi").get<std::vector<double>>();
    }
    MechanismSpec spec;
    if (kind == "uniform_price_auction" || kind == "upa") {
      spec = MechanismSpec::uniform_price_auction(j.at("capacity").get<double>(), box);
    } else if (kind == "deferred_acceptance" || kind == "da") {
      spec = MechanismSpec::deferred_acceptance(j.at("capacities").get<std::vector<double>>(),
                                                j.at("match_values").get<std::vector<std::vector<double>>>(), box);
    } else {
      fail(ErrorCode::InvalidConfig, "unknown mechanism kind '" + kind + "'");
    }
    spec.validate();
    return spec;
  } catch (const json::exception& e) {
    fail(ErrorCode::InvalidConfig, std::string("mechanism: ") + e.what());
  }
}

json mechanism_to_json(const MechanismSpec& spec) {
  json j;
  if (spec.kind == MechanismKind::UniformPriceAuction) {
    j["kind"] = "uniform_price_auction";
    j["capacity"] = spec.capacities.at(0);
  } else {
    j["kind"] = "deferred_acceptance";
    j["capacities"] = spec.capacities;
    j["match_values"] = spec.match_values;
  }
  if (!spec.box.empty()) j["box"] = json{{"lo", spec.box.lo}, {"hi", spec.box.hi}};
  return j;
}

int cmd_simulate(const CommandContext& ctx, std::ostream& log) {
  const auto& s = ctx.settings;
  const std::uint64_t seed = required_seed(s, "simulate");
  const DgpKind dgp = parse_dgp(setting<std::string>(s, "dgp", "auction_lognormal"));
  const auto ns = n_list(s, {1000});
  if (ns.size() != 1) fail(ErrorCode::InvalidConfig, "simulate takes a single --n");
  const double effect = setting(s, "effect", -1.0);

  const auto oracle = [&] {
    if (dgp == DgpKind::School) {
      SchoolDgpConfig c;
      c.n = ns[0];
      c.seed = seed;
      if (effect >= 0.0) c.bump = effect;
      return gen_school_market(c);
    }
    AuctionDgpConfig c;
    c.n = ns[0];
    c.seed = seed;
    c.family = dgp == DgpKind::AuctionTruncNormal ? BidFamily::TruncatedNormal : BidFamily::LogNormal;
    if (effect >= 0.0) c.effect = effect;
    return gen_auction_market(c);
  }();

  const Provenance prov = provenance_of(s, seed);
  ArtifactWriter out(out_dir(s), prov, "simulate");
  std::ostringstream data;
  write_dataset(data, oracle.data);
  out.write("data.csv", data.str());
  out.write("mechanism.json", mechanism_to_json(oracle.spec).dump(2) + "\n");

  const auto observed = clear_uniform(oracle.spec, oracle.data.bids(), oracle.tags);
  const auto treated = clear_uniform(oracle.spec, oracle.bid1, oracle.tags);
  const auto control = clear_uniform(oracle.spec, oracle.bid0, oracle.tags);
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < oracle.n(); ++i) {
    const auto& bid = oracle.data.bid(i);
    rows.push_back({oracle.data[i].id, std::to_string(allocated_item(oracle.spec, bid, observed.cutoffs) + 1),
                    format_number(outcome(oracle.spec, bid, oracle.tags[i], observed.cutoffs))});
  }
  out.write("clearing.csv", simple_csv({"id", "item", "outcome"}, rows, prov));

  auto nums = [](const std::vector<double>& v) {
    json a = json::array();
    for (double x : v) a.push_back(x);
    return a;
  };
  json truth{{"design", to_string(dgp)},
             {"n", oracle.n()},
             {"tau_bar", treated.mean_outcome - control.mean_outcome},
             {"value_all_treated", treated.mean_outcome},
             {"value_all_control", control.mean_outcome},
             {"cutoffs_all_treated", nums(treated.cutoffs)},
             {"cutoffs_all_control", nums(control.cutoffs)},
             {"cutoffs_observed", nums(observed.cutoffs)},
             {"provenance", json{{"config_hash", prov.config_hash}, {"seed", prov.seed}, {"version", prov.version}}}};
  out.write("truth.json", truth.dump(2) + "\n");
  out.finish();
  log << "simulated " << oracle.n() << " units (" << to_string(dgp) << "), tau_bar = "
      << format_number(truth["tau_bar"].get<double>()) << "\n";
  return 0;
}

int cmd_estimate(const CommandContext& ctx, std::ostream& log) {
  const auto& s = ctx.settings;
  const std::uint64_t seed = setting<std::uint64_t>(s, "seed", 0);
  const auto config = estimator_config(s);
  const auto in = load_inputs(s);
  const auto plan = fold_plan_for(in.data, seed, config);
  const auto est = estimate_gte_ldml(in.spec, in.data, plan, config);

  const Provenance prov = provenance_of(s, seed);
  ArtifactWriter out(out_dir(s), prov, "estimate");
  out.write("estimate.csv", gte_estimate_csv(est, "LDML-GTE", prov));
  out.write("estimate.json", gte_estimate_json(est, "LDML-GTE", prov));
  out.finish();

  log_warnings(log, est.warnings);
  if (est.treated.clipped_propensities > 0) {
    log << "warning: " << est.treated.clipped_propensities << " propensity scores clipped to [kappa, 1 - kappa]\n";
  }
  log << "tau = " << format_number(est.tau) << " (se " << format_number(est.se) << ")\n";
  return 0;
}

int cmd_policy(const CommandContext& ctx, std::ostream& log) {
  const auto& s = ctx.settings;
  const std::uint64_t seed = setting<std::uint64_t>(s, "seed", 0);
  const auto config = estimator_config(s);
  const std::size_t workers = workers_of(s);
  const double holdout = setting(s, "holdout", 0.0);
  if (!(holdout >= 0.0 && holdout < 1.0)) fail(ErrorCode::InvalidConfig, "holdout must be in [0, 1)");
  const auto targeting = setting<std::string>(s, "targeting", "thresholds");
  const auto in = load_inputs(s);

  std::optional<MarketDataset> train_store, eval_store;
  if (holdout > 0.0) {
    std::vector<std::size_t> idx(in.data.n());
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng = Rng::stream(seed, "holdout");
    rng.shuffle(idx);
    const auto n_eval = static_cast<std::size_t>(std::llround(holdout * static_cast<double>(idx.size())));
    std::vector<std::size_t> eval_rows(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_eval));
    std::vector<std::size_t> train_rows(idx.begin() + static_cast<std::ptrdiff_t>(n_eval), idx.end());
    std::sort(eval_rows.begin(), eval_rows.end());
    std::sort(train_rows.begin(), train_rows.end());
    train_store.emplace(in.data.subset(train_rows));
    eval_store.emplace(in.data.subset(eval_rows));
  }
  const MarketDataset& train = train_store ? *train_store : in.data;
  const MarketDataset& eval = eval_store ? *eval_store : in.data;
  const auto train_plan = fold_plan_for(train, seed, config);
  const auto eval_plan = fold_plan_for(eval, derive_seed(seed, "holdout-folds"), config);

  PolicyClass cls;
  if (targeting == "thresholds") {
    cls = PolicyClass::linear_thresholds(setting<std::size_t>(s, "directions", 8),
                                         setting<std::size_t>(s, "intercepts", 5), seed);
  } else if (targeting == "uniform" || targeting == "plugin") {
    cls = PolicyClass::explicit_set({});
  } else {
    fail(ErrorCode::InvalidConfig, "targeting must be thresholds, uniform or plugin");
  }

  TreatmentRule learned;
  std::vector<LeaderboardEntry> board;
  std::optional<PolicyResult> ewm;
  if (targeting == "plugin") {
    const auto plug = plugin_global_rule(in.spec, train, train_plan, config);
    learned = holdout > 0.0 ? plug.rule_for(eval) : plug.rule;
    log << "plug-in rule treats " << format_number(plug.share_treated) << " of the training units\n";
  } else {
    ewm = learn_policy_ewm(in.spec, train, cls, train_plan, config, workers);
    learned = ewm->best_rule;
  }

  std::vector<TreatmentRule> rules;
  std::vector<std::string> labels;
  if (ewm && holdout == 0.0) {
    for (const auto& e : ewm->leaderboard) {
      rules.push_back(e.rule);
      labels.push_back(e.label);
    }
  } else {
    rules = {TreatmentRule::all(), TreatmentRule::none()};
    labels = {TreatmentRule::all().describe(), TreatmentRule::none().describe()};
  }
  rules.push_back(observed_rule(eval));
  labels.push_back("observed");
  if (targeting == "plugin" || holdout > 0.0) {
    rules.push_back(learned);
    labels.push_back("learned: " + (targeting == "plugin" ? std::string("plug-in global rule") : learned.describe()));
  }
  const auto values = evaluate_rules(in.spec, eval, rules, eval_plan, config, workers);
  for (std::size_t r = 0; r < rules.size(); ++r) {
    board.push_back({rules[r], labels[r], values[r].value, values[r].se});
    log_warnings(log, values[r].warnings);
  }

  const Provenance prov = provenance_of(s, seed);
  ArtifactWriter out(out_dir(s), prov, "policy");
  out.write("leaderboard.csv", leaderboard_csv(board, prov));
  out.write("rule.json", rule_json(learned, prov));
  out.finish();
  log << "learned rule: " << learned.describe() << "\n";
  return 0;
}

int cmd_reproduce(const CommandContext& ctx, std::ostream& log) {
  const auto& s = ctx.settings;
  ExperimentConfig c;
  c.seed = required_seed(s, "reproduce");
  c.estimator = estimator_config(s);
  std::vector<EstimatorKind> estimators;
  if (ctx.target == "table1") {
    c.dgp = DgpKind::AuctionLogNormal;
    estimators = {EstimatorKind::Ldml, EstimatorKind::DrAte, EstimatorKind::SmGte, EstimatorKind::SmdrGte};
    c.n_values = {100, 1000};
  } else if (ctx.target == "table2") {
    c.dgp = DgpKind::AuctionTruncNormal;
    estimators = {EstimatorKind::Ldml, EstimatorKind::DrAte, EstimatorKind::SmGte, EstimatorKind::SmdrGte};
    c.n_values = {100, 1000};
  } else if (ctx.target == "figure1") {
    c.dgp = DgpKind::School;
    estimators = {EstimatorKind::Ldml, EstimatorKind::DrAte};
    c.n_values = {1000};
    c.dte_reps = 20;
  } else {
    fail(ErrorCode::InvalidConfig, "reproduce target must be table1, table2 or figure1");
  }
  if (has(s, "dgp")) c.dgp = parse_dgp(setting<std::string>(s, "dgp", ""));
  if (has(s, "estimators")) {
    estimators.clear();
    for (const auto& e : setting<std::vector<std::string>>(s, "estimators", {})) {
      estimators.push_back(parse_estimator(e));
    }
  }
  c.estimators = estimators;
  c.n_values = n_list(s, c.n_values);
  if (setting(s, "full", false)) c.n_values.push_back(10000);
  c.reps = setting<std::size_t>(s, "reps", 100);
  c.workers = workers_of(s);
  c.dte_reps = setting<std::size_t>(s, "dte_reps", c.dte_reps);
  c.continuum_draws = setting<std::size_t>(s, "continuum_draws", c.continuum_draws);
  c.continuum_seed = setting<std::uint64_t>(s, "continuum_seed", c.continuum_seed);
  c.n_sim = setting<std::size_t>(s, "n_sim", c.n_sim);
  c.effect = setting(s, "effect", c.effect);
  for (std::size_t n : c.n_values) {
    if (n >= 10000) log << "warning: n = " << n << " replications are slow; expect a long run\n";
  }

  const auto start = std::chrono::steady_clock::now();
  const auto table = monte_carlo(c);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const Provenance prov = provenance_of(s, c.seed);
  ArtifactWriter out(out_dir(s), prov, "reproduce " + ctx.target);
  out.write(ctx.target + "_results.csv", mc_results_csv(table, c.dgp, prov));
  out.write(ctx.target + "_replications.csv", mc_provenance_csv(table, prov));
  out.write(ctx.target + "_metadata.json", mc_metadata_json(c, prov));
  if (ctx.target == "figure1") out.write("figure1_long.csv", mc_long_csv(table, prov));
  out.finish();

  for (const auto& r : table.rows) {
    char line[256];
    std::snprintf(line, sizeof line, "%-22s n=%-6zu bias=%+.4f rmse=%.4f cover*=%s fail=%zu (%.1fs)\n",
                  to_string(r.estimator), r.n, r.bias, r.rmse,
                  r.has_ci ? format_number(r.coverage_star).c_str() : "-", r.failures, r.runtime_seconds);
    log << line;
  }
  log << "total " << format_number(std::round(secs * 10.0) / 10.0) << "s\n";
  return 0;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Global treatment effects in cutoff-mechanism markets"};
  app.set_version_flag("--version", std::string(GTE_VERSION));
  app.require_subcommand(1, 1);

  struct Flags {
    std::string config, out, data, schema, mechanism, dgp, estimators, targeting, n;
    std::uint64_t seed = 0;
    std::size_t reps = 0, workers = 0;
    double alpha = 0.0, holdout = 0.0;
    bool full = false;
  } f;
  std::string target;

  std::vector<CLI::App*> subs;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config, "JSON config file; flags override it");
    sub->add_option("--seed", f.seed, "Master seed");
    sub->add_option("--out", f.out, "Output directory");
    sub->add_option("--alpha", f.alpha, "CI level alpha");
    sub->add_option("--workers", f.workers, "Worker threads");
    subs.push_back(sub);
  };
  auto* sim = app.add_subcommand("simulate", "Draw a synthetic market");
  add_common(sim);
  sim->add_option("--dgp", f.dgp, "auction_lognormal | auction_truncnormal | school");
  sim->add_option("--n", f.n, "Number of units");

  auto* est = app.add_subcommand("estimate", "Estimate the global treatment effect");
  add_common(est);
  est->add_option("--data", f.data, "Dataset CSV");
  est->add_option("--schema", f.schema, "Schema JSON");
  est->add_option("--mechanism", f.mechanism, "Mechanism JSON (file or inline)");

  auto* pol = app.add_subcommand("policy", "Evaluate and learn treatment rules");
  add_common(pol);
  pol->add_option("--data", f.data, "Dataset CSV");
  pol->add_option("--schema", f.schema, "Schema JSON");
  pol->add_option("--mechanism", f.mechanism, "Mechanism JSON (file or inline)");
  pol->add_option("--holdout", f.holdout, "Share of units held out for evaluation");
  pol->add_option("--targeting", f.targeting, "thresholds | uniform | plugin");

  auto* rep = app.add_subcommand("reproduce", "Monte Carlo reproduction of the simulation tables");
  add_common(rep);
  rep->add_option("target", target, "table1 | table2 | figure1")->required();
  rep->add_option("--reps", f.reps, "Replications per sample size");
  rep->add_option("--n", f.n, "Comma-separated sample sizes");
  rep->add_option("--dgp", f.dgp, "Override the design");
  rep->add_option("--estimator", f.estimators, "Comma-separated estimators");
  rep->add_flag("--full", f.full, "Add the n = 10000 column");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    CommandContext ctx;
    CLI::App* chosen = nullptr;
    for (auto* sub : subs) {
      if (sub->parsed()) chosen = sub;
    }
    ctx.command = chosen->get_name();
    ctx.target = target;
    json settings = json::object();
    if (chosen->count("--config") > 0) {
      settings = parse_json(read_text(f.config), "config " + f.config);
      if (!settings.is_object()) fail(ErrorCode::InvalidConfig, "config must be a JSON object");
    }
    auto given = [&](const char* flag) { return chosen->get_option_no_throw(flag) && chosen->count(flag) > 0; };
    if (given("--seed")) settings["seed"] = f.seed;
    if (given("--out")) settings["out"] = f.out;
    if (given("--alpha")) settings["alpha"] = f.alpha;
    if (given("--workers")) settings["workers"] = f.workers;
    if (given("--dgp")) settings["dgp"] = f.dgp;
    if (given("--n")) settings["n"] = parse_size_list(f.n);
    if (given("--data")) settings["data"] = f.data;
    if (given("--schema")) settings["schema"] = f.schema;
    if (given("--mechanism")) settings["mechanism"] = f.mechanism;
    if (given("--holdout")) settings["holdout"] = f.holdout;
    if (given("--targeting")) settings["targeting"] = f.targeting;
    if (given("--reps")) settings["reps"] = f.reps;
    if (given("--full")) settings["full"] = f.full;
    if (given("--estimator")) {
      json list = json::array();
      std::stringstream ss(f.estimators);
      std::string part;
      while (std::getline(ss, part, ',')) list.push_back(part);
      settings["estimators"] = list;
    }
    for (const auto& [key, value] : settings.items()) {
      if (!known_keys().count(key)) fail(ErrorCode::InvalidConfig, "unknown setting '" + key + "'");
    }
    ctx.settings = std::move(settings);

    if (ctx.command == "simulate") return cmd_simulate(ctx, err);
    if (ctx.command == "estimate") return cmd_estimate(ctx, err);
    if (ctx.command == "policy") return cmd_policy(ctx, err);
    return cmd_reproduce(ctx, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.exit_status();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace gte::cli
