#include "gte/dgp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <mutex>
#include <tuple>

#include "gte/error.hpp"
#include "gte/rng.hpp"

namespace gte {

const char* to_string(BidFamily family) {
  return family == BidFamily::LogNormal ? "lognormal" : "truncnormal";
}

std::vector<BidValue> OracleMarket::bids_under(std::span<const int> w) const {
  if (w.size() != n()) fail(ErrorCode::LengthMismatch, "assignment length differs from n");
  std::vector<BidValue> out;
  out.reserve(n());
  for (std::size_t i = 0; i < n(); ++i) out.push_back(w[i] == 1 ? bid1[i] : bid0[i]);
  return out;
}

double auction_propensity(std::span<const double> x) {
  return normal_cdf(x[0] - 0.5 * x[1] + 0.5 * x[2]);
}

double school_propensity(std::span<const double> x) {
  // Mixture over the unobserved v in {0, 1}.
  const double a = 0.5 * x[2] - 0.5 * x[1];
  return 0.5 * std::clamp(a, 0.02, 0.98) + 0.5 * std::clamp(a + 1.0, 0.02, 0.98);
}

std::vector<LogNormalBidModel> auction_bid_models(const AuctionDgpConfig& config) {
  LogNormalBidModel control;
  control.intercept = 0.0;
  control.slopes.assign(config.covariate_dim, 0.0);
  control.slopes[0] = 0.8;
  control.slopes[1] = -0.3;
  control.slopes[2] = -0.2;
  control.sigma = config.sigma;
  LogNormalBidModel treated = control;
  treated.intercept = std::log(config.effect);
  return {control, treated};
}

namespace {

void validate(const AuctionDgpConfig& c) {
  if (c.n < 10) fail(ErrorCode::InvalidConfig, "auction design needs n >= 10");
  if (c.covariate_dim < 3) fail(ErrorCode::InvalidConfig, "auction design needs at least 3 covariates");
  if (!(c.capacity > 0.0 && c.capacity <= 1.0)) fail(ErrorCode::InvalidConfig, "capacity must be in (0,1]");
  if (!(c.effect > 0.0) || !(c.sigma > 0.0)) fail(ErrorCode::InvalidConfig, "effect and sigma must be positive");
}

void validate(const SchoolDgpConfig& c) {
  if (c.n < 10) fail(ErrorCode::InvalidConfig, "school design needs n >= 10");
  if (c.capacities.size() != 3) fail(ErrorCode::InvalidConfig, "school design has three schools");
}

double control_location(std::span<const double> x) { return 0.8 * x[0] - 0.3 * x[1] - 0.2 * x[2]; }

double draw_control_bid(Rng& rng, BidFamily family, double loc, double sigma) {
  if (family == BidFamily::LogNormal) return std::exp(loc + sigma * rng.normal());
  for (;;) {
    const double b = loc + sigma * rng.normal();
    if (b > 0.0) return b;
  }
}

struct SchoolUnit {
  double x[5];
  int c;
  double eps[3];
  double score[3];
  int w;
};

SchoolUnit draw_school_unit(Rng& rng) {
  SchoolUnit u{};
  for (double& v : u.x) v = rng.normal();
  u.c = rng.bernoulli(normal_cdf(1.0 + u.x[2])) ? 1 : 0;
  for (double& v : u.eps) v = rng.normal();
  for (double& v : u.score) v = rng.uniform();
  const int v = rng.bernoulli(0.5) ? 1 : 0;
  const double a = 0.5 * u.x[2] - 0.5 * u.x[1] + v;
  u.w = rng.bernoulli(std::clamp(a, 0.02, 0.98)) ? 1 : 0;
  return u;
}

RankedBid school_bid(const SchoolUnit& u, int w, double bump) {
  static constexpr double mu_l[3] = {0.0, 0.5, 0.5};
  static constexpr double mu_h[3] = {1.0, 0.5, 0.0};
  double util[3];
  for (int j = 0; j < 3; ++j) {
    util[j] = (u.c == 1 ? mu_l[j] : mu_h[j]) + u.eps[j];
  }
  util[0] += bump * u.c * w;
  util[2] += 0.3 * u.x[1];
  RankedBid b;
  b.ranking = {0, 1, 2};
  std::stable_sort(b.ranking.begin(), b.ranking.end(), [&](int a, int c) { return util[a] > util[c]; });
  b.scores.assign(u.score, u.score + 3);
  return b;
}

std::vector<std::vector<double>> school_match_values() { return {{1.0, 1.0, 0.0}, {2.0, 2.0, 0.0}}; }

}  // namespace

OracleMarket gen_auction_market(const AuctionDgpConfig& config) {
  validate(config);
  Rng rng = Rng::stream(config.seed, "auction-dgp");
  const std::size_t m = config.covariate_dim;
  std::vector<MarketObservation> obs;
  std::vector<BidValue> b1, b0;
  std::vector<double> prop;
  obs.reserve(config.n);
  for (std::size_t i = 0; i < config.n; ++i) {
    MarketObservation o;
    o.id = std::to_string(i + 1);
    o.covariates.resize(m);
    for (auto& v : o.covariates) v = rng.uniform();
    const double e = auction_propensity(o.covariates);
    o.treatment = rng.bernoulli(e) ? 1 : 0;
    const double bid0 = draw_control_bid(rng, config.family, control_location(o.covariates), config.sigma);
    const double bid1 = config.effect * bid0;
    b0.push_back(ScalarBid{bid0});
    b1.push_back(ScalarBid{bid1});
    o.bid = ScalarBid{o.treatment == 1 ? bid1 : bid0};
    prop.push_back(e);
    obs.push_back(std::move(o));
  }
  OracleMarket om{MarketDataset(std::move(obs), 1), MechanismSpec::uniform_price_auction(config.capacity),
                  std::move(b1), std::move(b0), std::vector<int>(config.n, 0), std::move(prop)};
  return om;
}

OracleMarket gen_school_market(const SchoolDgpConfig& config) {
  validate(config);
  Rng rng = Rng::stream(config.seed, "school-dgp");
  std::vector<MarketObservation> obs;
  std::vector<BidValue> b1, b0;
  std::vector<int> tags;
  std::vector<double> prop;
  obs.reserve(config.n);
  for (std::size_t i = 0; i < config.n; ++i) {
    const SchoolUnit u = draw_school_unit(rng);
    MarketObservation o;
    o.id = std::to_string(i + 1);
    o.covariates.assign(u.x, u.x + 5);
    o.covariates.push_back(u.c);
    o.treatment = u.w;
    o.tag = u.c;
    b1.push_back(school_bid(u, 1, config.bump));
    b0.push_back(school_bid(u, 0, config.bump));
    o.bid = u.w == 1 ? b1.back() : b0.back();
    prop.push_back(school_propensity(o.covariates));
    tags.push_back(u.c);
    obs.push_back(std::move(o));
  }
  OracleMarket om{MarketDataset(std::move(obs), 3),
                  MechanismSpec::deferred_acceptance(config.capacities, school_match_values()),
                  std::move(b1), std::move(b0), std::move(tags), std::move(prop)};
  return om;
}

double true_value_finite(const OracleMarket& oracle, std::span<const int> w) {
  const auto bids = oracle.bids_under(w);
  return clear_uniform(oracle.spec, bids, oracle.tags).mean_outcome;
}

double true_gte_finite(const OracleMarket& oracle) {
  const double v1 = clear_uniform(oracle.spec, oracle.bid1, oracle.tags).mean_outcome;
  const double v0 = clear_uniform(oracle.spec, oracle.bid0, oracle.tags).mean_outcome;
  return v1 - v0;
}

double true_dte_mc(const OracleMarket& oracle, std::size_t reps, std::uint64_t seed) {
  if (reps == 0) fail(ErrorCode::InvalidArgument, "DTE needs at least one replication");
  const std::size_t n = oracle.n();
  const auto spec = oracle.spec;
  double total = 0.0;
  std::vector<int> w(n);
  for (std::size_t r = 0; r < reps; ++r) {
    Rng rng = Rng::stream(seed, "dte-assignment", r);
    for (std::size_t i = 0; i < n; ++i) w[i] = rng.bernoulli(oracle.propensity[i]) ? 1 : 0;
    const auto bids = oracle.bids_under(w);
    const auto cleared = clear_uniform(spec, bids, oracle.tags);
    double diff = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      diff += outcome(spec, oracle.bid1[i], oracle.tags[i], cleared.cutoffs) -
              outcome(spec, oracle.bid0[i], oracle.tags[i], cleared.cutoffs);
    }
    total += diff / static_cast<double>(n);
  }
  return total / static_cast<double>(reps);
}

namespace {

using CacheKey = std::tuple<std::string, std::size_t, std::uint64_t>;

std::mutex& cache_mutex() {
  static std::mutex m;
  return m;
}
std::map<CacheKey, double>& cache() {
  static std::map<CacheKey, double> c;
  return c;
}

template <typename Compute>
double cached(const std::string& design, std::size_t draws, std::uint64_t seed, Compute&& compute) {
  const CacheKey key{design, draws, seed};
  {
    std::lock_guard<std::mutex> lock(cache_mutex());
    auto it = cache().find(key);
    if (it != cache().end()) return it->second;
  }
  const double v = compute();
  std::lock_guard<std::mutex> lock(cache_mutex());
  cache().emplace(key, v);
  return v;
}

std::string fmt_key(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

double continuum_gte(const AuctionDgpConfig& config, std::size_t draws, std::uint64_t seed) {
  const std::string design = std::string("auction/") + to_string(config.family) + "/" +
                             fmt_key(config.capacity) + "/" + fmt_key(config.effect) + "/" + fmt_key(config.sigma);
  return cached(design, draws, seed, [&] {
    // Only x1..x3 move the bids; the other covariates are not drawn.
    double value[2];
    for (int arm : {0, 1}) {
      Rng rng = Rng::stream(seed, "auction-continuum");
      std::vector<BidValue> bids;
      bids.reserve(draws);
      double x[3];
      for (std::size_t i = 0; i < draws; ++i) {
        for (double& v : x) v = rng.uniform();
        const double b0 = draw_control_bid(rng, config.family, control_location(x), config.sigma);
        bids.push_back(ScalarBid{arm == 1 ? config.effect * b0 : b0});
      }
      value[arm] = clear_uniform(MechanismSpec::uniform_price_auction(config.capacity), bids, {}).mean_outcome;
    }
    return value[1] - value[0];
  });
}

double continuum_gte(const SchoolDgpConfig& config, std::size_t draws, std::uint64_t seed) {
  std::string design = "school/" + fmt_key(config.bump);
  for (double c : config.capacities) design += "/" + fmt_key(c);
  return cached(design, draws, seed, [&] {
    const auto spec = MechanismSpec::deferred_acceptance(config.capacities, school_match_values());
    double value[2];
    for (int arm : {0, 1}) {
      Rng rng = Rng::stream(seed, "school-continuum");
      std::vector<BidValue> bids;
      std::vector<int> tags;
      bids.reserve(draws);
      tags.reserve(draws);
      for (std::size_t i = 0; i < draws; ++i) {
        const SchoolUnit u = draw_school_unit(rng);
        bids.push_back(school_bid(u, arm, config.bump));
        tags.push_back(u.c);
      }
      value[arm] = clear_uniform(spec, bids, tags).mean_outcome;
    }
    return value[1] - value[0];
  });
}

}  // namespace gte
