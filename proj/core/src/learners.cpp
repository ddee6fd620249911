#include "gte/learners.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>

#include "gte/error.hpp"

namespace gte {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double normal_quantile(double u) {
  if (!(u > 0.0 && u < 1.0)) fail(ErrorCode::InvalidArgument, "normal quantile needs 0 < u < 1");
  return boost::math::quantile(boost::math::normal_distribution<double>(), u);
}

Standardizer Standardizer::fit(const MarketDataset& data, std::span<const std::size_t> rows) {
  const std::size_t m = data.covariate_dim();
  Standardizer s;
  s.mean.assign(m, 0.0);
  s.scale.assign(m, 1.0);
  if (rows.empty()) return s;
  for (std::size_t r : rows) {
    const auto x = data.covariates(r);
    for (std::size_t c = 0; c < m; ++c) s.mean[c] += x[c];
  }
  for (auto& v : s.mean) v /= static_cast<double>(rows.size());
  std::vector<double> ss(m, 0.0);
  for (std::size_t r : rows) {
    const auto x = data.covariates(r);
    for (std::size_t c = 0; c < m; ++c) ss[c] += (x[c] - s.mean[c]) * (x[c] - s.mean[c]);
  }
  for (std::size_t c = 0; c < m; ++c) {
    const double sd = std::sqrt(ss[c] / static_cast<double>(rows.size()));
    s.scale[c] = sd > 1e-12 ? sd : 1.0;
  }
  return s;
}

void Standardizer::apply(std::span<const double> x, std::span<double> out) const {
  if (x.size() != mean.size()) {
    fail(ErrorCode::DimensionMismatch, "expected " + std::to_string(mean.size()) + " covariates, got " +
                                           std::to_string(x.size()));
  }
  for (std::size_t c = 0; c < x.size(); ++c) out[c] = (x[c] - mean[c]) / scale[c];
}

namespace {

void require_both_arms(const MarketDataset& data, std::span<const std::size_t> rows) {
  bool t = false, c = false;
  for (std::size_t r : rows) (data.treatment(r) == 1 ? t : c) = true;
  if (!(t && c)) {
    fail(ErrorCode::SingleArmTrainingSet,
         std::string("propensity training set has no ") + (t ? "control" : "treated") + " units");
  }
}

void check_kappa(double kappa) {
  if (!(kappa >= 0.0 && kappa < 0.5)) fail(ErrorCode::InvalidConfig, "propensity clip must be in [0, 0.5)");
}

// Row-major standardized copy of the training covariates.
std::vector<double> standardized_block(const MarketDataset& data, std::span<const std::size_t> rows,
                                       const Standardizer& st) {
  const std::size_t m = data.covariate_dim();
  std::vector<double> z(rows.size() * m);
  for (std::size_t t = 0; t < rows.size(); ++t) {
    st.apply(data.covariates(rows[t]), std::span<double>(z.data() + t * m, m));
  }
  return z;
}

// Indices of the k nearest rows of `z` (n x m) to `q`; ties by lower index.
void nearest(std::span<const double> z, std::size_t m, std::span<const double> q, std::size_t k,
             std::vector<std::pair<double, std::size_t>>& scratch) {
  const std::size_t n = m == 0 ? z.size() : z.size() / m;
  scratch.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    const double* row = z.data() + t * m;
    double d = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
      const double diff = row[c] - q[c];
      d += diff * diff;
    }
    scratch[t] = {d, t};
  }
  if (k < n) {
    std::nth_element(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(k), scratch.end());
    scratch.resize(k);
  }
}

class KnnPropensityModel final : public PropensityModel {
 public:
  KnnPropensityModel(double kappa, Standardizer st, std::vector<double> z, std::vector<double> w,
                     std::size_t k)
      : PropensityModel(kappa), st_(std::move(st)), z_(std::move(z)), w_(std::move(w)), k_(k) {}

  double predict_raw(std::span<const double> x) const override {
    const std::size_t m = st_.mean.size();
    std::vector<double> q(m);
    st_.apply(x, q);
    std::vector<std::pair<double, std::size_t>> nn;
    if (m == 0) {
      nn.resize(w_.size());
      for (std::size_t t = 0; t < w_.size(); ++t) nn[t] = {0.0, t};
      if (k_ < nn.size()) nn.resize(k_);
    } else {
      nearest(z_, m, q, k_, nn);
    }
    double s = 0.0;
    for (const auto& [d, t] : nn) s += w_[t];
    return s / static_cast<double>(nn.size());
  }

 private:
  Standardizer st_;
  std::vector<double> z_;
  std::vector<double> w_;
  std::size_t k_;
};

class ConstantPropensityModel final : public PropensityModel {
 public:
  ConstantPropensityModel(double kappa, double value) : PropensityModel(kappa), value_(value) {}
  double predict_raw(std::span<const double>) const override { return value_; }

 private:
  double value_;
};

class FunctionPropensityModel final : public PropensityModel {
 public:
  FunctionPropensityModel(double kappa, FunctionPropensityLearner::Fn fn)
      : PropensityModel(kappa), fn_(std::move(fn)) {}
  double predict_raw(std::span<const double> x) const override { return fn_(x); }

 private:
  FunctionPropensityLearner::Fn fn_;
};

}  // namespace

double PropensityModel::predict(std::span<const double> x) const {
  return std::clamp(predict_raw(x), kappa_, 1.0 - kappa_);
}

double LogisticRidgeModel::predict_raw(std::span<const double> x) const {
  std::vector<double> z(coefficients_.size());
  standardizer_.apply(x, z);
  double eta = intercept_;
  for (std::size_t c = 0; c < z.size(); ++c) eta += coefficients_[c] * z[c];
  return 1.0 / (1.0 + std::exp(-eta));
}

std::shared_ptr<const PropensityModel> LogisticRidgeLearner::fit(const MarketDataset& data,
                                                                 std::span<const std::size_t> rows) const {
  check_kappa(kappa_);
  require_both_arms(data, rows);
  const std::size_t m = data.covariate_dim();
  const std::size_t n = rows.size();
  Standardizer st = Standardizer::fit(data, rows);
  const auto z = standardized_block(data, rows, st);

  Eigen::MatrixXd X(n, m + 1);
  Eigen::VectorXd y(n);
  for (std::size_t t = 0; t < n; ++t) {
    X(t, 0) = 1.0;
    for (std::size_t c = 0; c < m; ++c) X(t, c + 1) = z[t * m + c];
    y(t) = data.treatment(rows[t]);
  }
  const double lambda = lambda_scale_ * static_cast<double>(n);
  Eigen::VectorXd penalty = Eigen::VectorXd::Constant(m + 1, lambda);
  penalty(0) = 0.0;  // intercept unpenalized

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(m + 1);
  const double share = y.mean();
  beta(0) = std::log(share / (1.0 - share));
  bool done = false;
  for (int it = 0; it < max_iter_ && !done; ++it) {
    const Eigen::VectorXd eta = X * beta;
    Eigen::VectorXd p(n), w(n);
    for (std::size_t t = 0; t < n; ++t) {
      p(t) = 1.0 / (1.0 + std::exp(-eta(t)));
      w(t) = std::max(p(t) * (1.0 - p(t)), 1e-12);
    }
    Eigen::MatrixXd H = X.transpose() * w.asDiagonal() * X;
    H.diagonal() += penalty;
    const Eigen::VectorXd grad = X.transpose() * (y - p) - penalty.cwiseProduct(beta);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
      fail(ErrorCode::IllConditioned, "logistic Hessian is not positive definite");
    }
    const Eigen::VectorXd step = ldlt.solve(grad);
    if (!step.allFinite()) fail(ErrorCode::IllConditioned, "logistic Newton step is not finite");
    beta += step;
    done = step.cwiseAbs().maxCoeff() < 1e-10;
  }
  if (!beta.allFinite()) fail(ErrorCode::IllConditioned, "logistic coefficients diverged");
  std::vector<double> coef(m);
  for (std::size_t c = 0; c < m; ++c) coef[c] = beta(c + 1);
  return std::make_shared<LogisticRidgeModel>(kappa_, std::move(st), beta(0), std::move(coef));
}

std::size_t KnnRegressor::default_k(std::size_t n_train, double exponent) {
  const auto k = static_cast<std::size_t>(std::ceil(std::pow(static_cast<double>(n_train), exponent) - 1e-9));
  return std::clamp<std::size_t>(k, 1, std::max<std::size_t>(n_train, 1));
}

std::shared_ptr<const PropensityModel> KnnPropensityLearner::fit(const MarketDataset& data,
                                                                 std::span<const std::size_t> rows) const {
  check_kappa(kappa_);
  require_both_arms(data, rows);
  Standardizer st = Standardizer::fit(data, rows);
  auto z = standardized_block(data, rows, st);
  std::vector<double> w;
  w.reserve(rows.size());
  for (std::size_t r : rows) w.push_back(data.treatment(r));
  const std::size_t k = KnnRegressor::default_k(rows.size(), k_exponent_);
  return std::make_shared<KnnPropensityModel>(kappa_, std::move(st), std::move(z), std::move(w), k);
}

std::shared_ptr<const PropensityModel> ConstantPropensityLearner::fit(const MarketDataset&,
                                                                      std::span<const std::size_t>) const {
  check_kappa(kappa_);
  if (!(value_ >= 0.0 && value_ <= 1.0)) fail(ErrorCode::InvalidConfig, "constant propensity outside [0,1]");
  return std::make_shared<ConstantPropensityModel>(kappa_, value_);
}

std::shared_ptr<const PropensityModel> FunctionPropensityLearner::fit(const MarketDataset&,
                                                                      std::span<const std::size_t>) const {
  check_kappa(kappa_);
  return std::make_shared<FunctionPropensityModel>(kappa_, fn_);
}

// ---------------------------------------------------------------------------

namespace {

class KnnMeanModel final : public ConditionalMeanModel {
 public:
  KnnMeanModel(Standardizer st, std::vector<double> z, std::vector<double> targets, std::size_t width,
               std::size_t k)
      : st_(std::move(st)), z_(std::move(z)), targets_(std::move(targets)), width_(width), k_(k) {}

  std::size_t width() const override { return width_; }

  void predict(std::span<const double> x, std::span<double> out) const override {
    const std::size_t m = st_.mean.size();
    const std::size_t n = targets_.size() / width_;
    std::vector<std::pair<double, std::size_t>> nn;
    if (m == 0) {
      nn.resize(std::min(k_, n));
      for (std::size_t t = 0; t < nn.size(); ++t) nn[t] = {0.0, t};
    } else {
      std::vector<double> q(m);
      st_.apply(x, q);
      nearest(z_, m, q, k_, nn);
    }
    std::fill(out.begin(), out.end(), 0.0);
    // Sum in training order so the result does not depend on nth_element.
    std::sort(nn.begin(), nn.end(), [](const auto& a, const auto& b) { return a.second < b.second; });
    for (const auto& [d, t] : nn) {
      for (std::size_t c = 0; c < width_; ++c) out[c] += targets_[t * width_ + c];
    }
    for (auto& v : out) v /= static_cast<double>(nn.size());
  }

 private:
  Standardizer st_;
  std::vector<double> z_;
  std::vector<double> targets_;
  std::size_t width_;
  std::size_t k_;
};

class ConstantMeanModel final : public ConditionalMeanModel {
 public:
  explicit ConstantMeanModel(std::vector<double> value) : value_(std::move(value)) {}
  std::size_t width() const override { return value_.size(); }
  void predict(std::span<const double>, std::span<double> out) const override {
    std::copy(value_.begin(), value_.end(), out.begin());
  }

 private:
  std::vector<double> value_;
};

void check_context(const MeanFitContext& ctx) {
  if (!ctx.data) fail(ErrorCode::InvalidArgument, "mean fit context has no dataset");
  if (ctx.width == 0 || ctx.targets.size() != ctx.rows.size() * ctx.width) {
    fail(ErrorCode::LengthMismatch, "target block does not match training rows");
  }
  if (ctx.rows.empty()) {
    fail(ErrorCode::SingleArmTrainingSet, "no training rows in arm " + std::to_string(ctx.arm));
  }
}

struct OlsFit {
  LogNormalBidModel model;
  double ssr = 0.0;
  std::size_t dof_used = 0;
};

OlsFit ols_log_bids(const MarketDataset& data, std::span<const std::size_t> rows) {
  const std::size_t m = data.covariate_dim();
  if (rows.size() <= m + 1) {
    fail(ErrorCode::TooFewObservations, "log-bid regression needs more than " + std::to_string(m + 1) +
                                            " rows, got " + std::to_string(rows.size()));
  }
  Eigen::MatrixXd X(rows.size(), m + 1);
  Eigen::VectorXd y(rows.size());
  for (std::size_t t = 0; t < rows.size(); ++t) {
    const auto* b = std::get_if<ScalarBid>(&data.bid(rows[t]));
    if (!b) fail(ErrorCode::BidKindMismatch, "log-bid regression needs scalar bids");
    if (!(b->value > 0.0)) fail(ErrorCode::NonPositiveBid, "log-bid regression needs positive bids");
    X(t, 0) = 1.0;
    const auto x = data.covariates(rows[t]);
    for (std::size_t c = 0; c < m; ++c) X(t, c + 1) = x[c];
    y(t) = std::log(b->value);
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < static_cast<Eigen::Index>(m + 1)) {
    fail(ErrorCode::IllConditioned, "log-bid design matrix is rank deficient");
  }
  const Eigen::VectorXd beta = qr.solve(y);
  OlsFit fit;
  fit.model.intercept = beta(0);
  fit.model.slopes.resize(m);
  for (std::size_t c = 0; c < m; ++c) fit.model.slopes[c] = beta(c + 1);
  fit.ssr = (y - X * beta).squaredNorm();
  fit.dof_used = m + 1;
  return fit;
}

}  // namespace

std::shared_ptr<const ConditionalMeanModel> KnnRegressor::fit(const MeanFitContext& ctx) const {
  check_context(ctx);
  Standardizer st = Standardizer::fit(*ctx.data, ctx.rows);
  auto z = standardized_block(*ctx.data, ctx.rows, st);
  const std::size_t k = fixed_k_ > 0 ? std::min(fixed_k_, ctx.rows.size())
                                     : default_k(ctx.rows.size(), k_exponent_);
  return std::make_shared<KnnMeanModel>(std::move(st), std::move(z),
                                        std::vector<double>(ctx.targets.begin(), ctx.targets.end()),
                                        ctx.width, k);
}

std::shared_ptr<const ConditionalMeanModel> ConstantMeanLearner::fit(const MeanFitContext& ctx) const {
  if (has_forced_) return std::make_shared<ConstantMeanModel>(std::vector<double>(ctx.width, forced_));
  check_context(ctx);
  std::vector<double> mean(ctx.width, 0.0);
  for (std::size_t t = 0; t < ctx.rows.size(); ++t) {
    for (std::size_t c = 0; c < ctx.width; ++c) mean[c] += ctx.targets[t * ctx.width + c];
  }
  for (auto& v : mean) v /= static_cast<double>(ctx.rows.size());
  return std::make_shared<ConstantMeanModel>(std::move(mean));
}

double LogNormalBidModel::location(std::span<const double> x) const {
  if (x.size() != slopes.size()) fail(ErrorCode::DimensionMismatch, "log-bid model covariate dimension");
  double m = intercept;
  for (std::size_t c = 0; c < x.size(); ++c) m += slopes[c] * x[c];
  return m;
}

double LogNormalBidModel::demand_mean(std::span<const double> x, double p) const {
  if (p <= 0.0) return 1.0;
  return normal_cdf((location(x) - std::log(p)) / sigma);
}

double LogNormalBidModel::surplus_mean(std::span<const double> x, double p) const {
  const double m = location(x);
  const double mean_bid = std::exp(m + 0.5 * sigma * sigma);
  if (p <= 0.0) return mean_bid - p;
  const double lp = std::log(p);
  return mean_bid * normal_cdf((m + sigma * sigma - lp) / sigma) - p * normal_cdf((m - lp) / sigma);
}

std::vector<LogNormalBidModel> fit_lognormal_bids(const MarketDataset& data,
                                                  std::span<const std::size_t> rows) {
  std::vector<std::size_t> arm_rows[2];
  for (std::size_t r : rows) arm_rows[data.treatment(r)].push_back(r);
  for (int w : {0, 1}) {
    if (arm_rows[w].empty()) {
      fail(ErrorCode::SingleArmTrainingSet, "no training rows in arm " + std::to_string(w));
    }
  }
  OlsFit fits[2] = {ols_log_bids(data, arm_rows[0]), ols_log_bids(data, arm_rows[1])};
  const double dof = static_cast<double>(rows.size() - fits[0].dof_used - fits[1].dof_used);
  const double sigma = std::sqrt((fits[0].ssr + fits[1].ssr) / dof);
  std::vector<LogNormalBidModel> out;
  for (auto& f : fits) {
    f.model.sigma = sigma;
    out.push_back(std::move(f.model));
  }
  return out;
}

void LogNormalMeanModel::predict(std::span<const double> x, std::span<double> out) const {
  predict_at(x, cutoffs_, out);
}

void LogNormalMeanModel::predict_at(std::span<const double> x, std::span<const double> p,
                                    std::span<double> out) const {
  out[0] = target_ == TargetKind::Demand ? bids_.demand_mean(x, p[0]) : bids_.surplus_mean(x, p[0]);
}

std::shared_ptr<const ConditionalMeanModel> LogNormalMeanLearner::fit(const MeanFitContext& ctx) const {
  if (ctx.spec && (ctx.spec->kind != MechanismKind::UniformPriceAuction ||
                   ctx.spec->outcome != OutcomeKind::Surplus)) {
    fail(ErrorCode::InvalidConfig, "lognormal means apply to auction surplus only");
  }
  LogNormalBidModel bids;
  if (!known_.empty()) {
    bids = known_.at(static_cast<std::size_t>(ctx.arm));
  } else {
    if (!ctx.data) fail(ErrorCode::InvalidArgument, "mean fit context has no dataset");
    auto fit = ols_log_bids(*ctx.data, ctx.rows);
    fit.model.sigma = std::sqrt(fit.ssr / static_cast<double>(ctx.rows.size() - fit.dof_used));
    bids = std::move(fit.model);
  }
  return std::make_shared<LogNormalMeanModel>(std::move(bids), ctx.target,
                                              std::vector<double>(ctx.cutoffs.begin(), ctx.cutoffs.end()));
}

}  // namespace gte
