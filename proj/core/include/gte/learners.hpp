#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "gte/market_data.hpp"
#include "gte/mechanism.hpp"

namespace gte {

// Per-column centering and scaling computed on a training split. Columns with
// zero spread keep scale 1.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer fit(const MarketDataset& data, std::span<const std::size_t> rows);
  void apply(std::span<const double> x, std::span<double> out) const;
};

// ---------------------------------------------------------------------------
// Propensity scores e(x) = P(W = 1 | X = x).

class PropensityModel {
 public:
  explicit PropensityModel(double kappa) : kappa_(kappa) {}
  virtual ~PropensityModel() = default;

  virtual double predict_raw(std::span<const double> x) const = 0;
  // Clipped to [kappa, 1 - kappa].
  double predict(std::span<const double> x) const;
  double kappa() const { return kappa_; }

 private:
  double kappa_;
};

class PropensityLearner {
 public:
  virtual ~PropensityLearner() = default;
  // Throws SingleArmTrainingSet unless `rows` hold both arms.
  virtual std::shared_ptr<const PropensityModel> fit(const MarketDataset& data,
                                                     std::span<const std::size_t> rows) const = 0;
  virtual std::string name() const = 0;
};

// L2-penalized logistic regression by Newton/IRLS on standardized covariates.
// The intercept is unpenalized; lambda = lambda_scale * n_train.
class LogisticRidgeLearner final : public PropensityLearner {
 public:
  explicit LogisticRidgeLearner(double kappa = 0.01, double lambda_scale = 1e-3, int max_iter = 100)
      : kappa_(kappa), lambda_scale_(lambda_scale), max_iter_(max_iter) {}
  std::shared_ptr<const PropensityModel> fit(const MarketDataset& data,
                                             std::span<const std::size_t> rows) const override;
  std::string name() const override { return "logistic_ridge"; }

 private:
  double kappa_;
  double lambda_scale_;
  int max_iter_;
};

class LogisticRidgeModel final : public PropensityModel {
 public:
  LogisticRidgeModel(double kappa, Standardizer standardizer, double intercept,
                     std::vector<double> coefficients)
      : PropensityModel(kappa),
        standardizer_(std::move(standardizer)),
        intercept_(intercept),
        coefficients_(std::move(coefficients)) {}
  double predict_raw(std::span<const double> x) const override;
  double intercept() const { return intercept_; }
  const std::vector<double>& coefficients() const { return coefficients_; }

 private:
  Standardizer standardizer_;
  double intercept_;
  std::vector<double> coefficients_;
};

// Share of treated among the k nearest training rows; k = ceil(n^exponent).
class KnnPropensityLearner final : public PropensityLearner {
 public:
  explicit KnnPropensityLearner(double kappa = 0.01, double k_exponent = 2.0 / 3.0)
      : kappa_(kappa), k_exponent_(k_exponent) {}
  std::shared_ptr<const PropensityModel> fit(const MarketDataset& data,
                                             std::span<const std::size_t> rows) const override;
  std::string name() const override { return "knn"; }

 private:
  double kappa_;
  double k_exponent_;
};

// Fixed value, no training. kappa may be 0 so a value such as 1 can be injected.
class ConstantPropensityLearner final : public PropensityLearner {
 public:
  explicit ConstantPropensityLearner(double value, double kappa = 0.0) : value_(value), kappa_(kappa) {}
  std::shared_ptr<const PropensityModel> fit(const MarketDataset& data,
                                             std::span<const std::size_t> rows) const override;
  std::string name() const override { return "constant"; }

 private:
  double value_;
  double kappa_;
};

// Known propensity function, e.g. the true e(x) of a simulation design.
class FunctionPropensityLearner final : public PropensityLearner {
 public:
  using Fn = std::function<double(std::span<const double>)>;
  FunctionPropensityLearner(Fn fn, double kappa = 0.0, std::string label = "oracle")
      : fn_(std::move(fn)), kappa_(kappa), label_(std::move(label)) {}
  std::shared_ptr<const PropensityModel> fit(const MarketDataset& data,
                                             std::span<const std::size_t> rows) const override;
  std::string name() const override { return label_; }

 private:
  Fn fn_;
  double kappa_;
  std::string label_;
};

// ---------------------------------------------------------------------------
// Conditional means mu_w(x) of outcome or demand targets.

enum class TargetKind { Outcome, Demand };

// Everything a mean learner may consult. `targets` is row-major with `width`
// columns aligned with `rows`; `cutoffs` are the cutoffs the targets were
// computed at.
struct MeanFitContext {
  const MarketDataset* data = nullptr;
  const MechanismSpec* spec = nullptr;
  std::span<const std::size_t> rows;
  std::span<const double> targets;
  std::size_t width = 1;
  int arm = 1;
  TargetKind target = TargetKind::Outcome;
  std::span<const double> cutoffs;
};

class ConditionalMeanModel {
 public:
  virtual ~ConditionalMeanModel() = default;
  virtual std::size_t width() const = 0;
  virtual void predict(std::span<const double> x, std::span<double> out) const = 0;
  // Models that know how the target moves with the cutoffs override both.
  virtual bool depends_on_cutoffs() const { return false; }
  virtual void predict_at(std::span<const double> x, std::span<const double> /*p*/,
                          std::span<double> out) const {
    predict(x, out);
  }
};

class MeanLearner {
 public:
  virtual ~MeanLearner() = default;
  virtual std::shared_ptr<const ConditionalMeanModel> fit(const MeanFitContext& ctx) const = 0;
  virtual std::string name() const = 0;
};

// Average of the k nearest training targets under Euclidean distance on
// standardized covariates; k = ceil(n_train^exponent). Distance ties go to
// the earlier training row.
class KnnRegressor final : public MeanLearner {
 public:
  explicit KnnRegressor(double k_exponent = 2.0 / 3.0, std::size_t fixed_k = 0)
      : k_exponent_(k_exponent), fixed_k_(fixed_k) {}
  std::shared_ptr<const ConditionalMeanModel> fit(const MeanFitContext& ctx) const override;
  std::string name() const override { return "knn"; }

  static std::size_t default_k(std::size_t n_train, double exponent);

 private:
  double k_exponent_;
  std::size_t fixed_k_;
};

// Training-target mean, or a forced value for every component.
class ConstantMeanLearner final : public MeanLearner {
 public:
  ConstantMeanLearner() = default;
  explicit ConstantMeanLearner(double forced) : forced_(forced), has_forced_(true) {}
  std::shared_ptr<const ConditionalMeanModel> fit(const MeanFitContext& ctx) const override;
  std::string name() const override { return has_forced_ ? "fixed" : "constant"; }

 private:
  double forced_ = 0.0;
  bool has_forced_ = false;
};

// log B | X ~ N(a + b'x, sigma^2) within an arm, for scalar bids. Outcome
// targets use the surplus mean E[(B - p)^+ | x], demand targets P(B > p | x);
// both in closed form for any p.
struct LogNormalBidModel {
  double intercept = 0.0;
  std::vector<double> slopes;
  double sigma = 1.0;

  double location(std::span<const double> x) const;
  double demand_mean(std::span<const double> x, double p) const;
  double surplus_mean(std::span<const double> x, double p) const;
};

// Per-arm OLS of log bids; sigma from the residuals of both arms pooled.
std::vector<LogNormalBidModel> fit_lognormal_bids(const MarketDataset& data,
                                                  std::span<const std::size_t> rows);

class LogNormalMeanModel final : public ConditionalMeanModel {
 public:
  LogNormalMeanModel(LogNormalBidModel bids, TargetKind target, std::vector<double> cutoffs)
      : bids_(std::move(bids)), target_(target), cutoffs_(std::move(cutoffs)) {}
  std::size_t width() const override { return 1; }
  void predict(std::span<const double> x, std::span<double> out) const override;
  bool depends_on_cutoffs() const override { return true; }
  void predict_at(std::span<const double> x, std::span<const double> p,
                  std::span<double> out) const override;

 private:
  LogNormalBidModel bids_;
  TargetKind target_;
  std::vector<double> cutoffs_;
};

// Fits the lognormal bid model on the context rows, or uses the supplied
// per-arm models (index = arm) when given.
class LogNormalMeanLearner final : public MeanLearner {
 public:
  LogNormalMeanLearner() = default;
  explicit LogNormalMeanLearner(std::vector<LogNormalBidModel> known) : known_(std::move(known)) {}
  std::shared_ptr<const ConditionalMeanModel> fit(const MeanFitContext& ctx) const override;
  std::string name() const override { return known_.empty() ? "lognormal" : "lognormal_oracle"; }

 private:
  std::vector<LogNormalBidModel> known_;
};

double normal_cdf(double z);
// Two-sided critical value z_{1 - alpha/2}.
double normal_quantile(double u);

}  // namespace gte
