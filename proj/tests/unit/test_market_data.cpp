#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "gte/dataset_io.hpp"
#include "gte/error.hpp"
#include "gte/market_data.hpp"

namespace gte {
namespace {

template <typename Fn>
ErrorCode code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected a library error";
  return ErrorCode::InvalidArgument;
}

TEST(BidValidation, RejectsNonPositiveAndNonFiniteScalars) {
  EXPECT_EQ(code_of([] { validate_bid(ScalarBid{0.0}, 1); }), ErrorCode::NonPositiveBid);
  EXPECT_EQ(code_of([] { validate_bid(ScalarBid{-1.0}, 1); }), ErrorCode::NonPositiveBid);
  EXPECT_EQ(code_of([] { validate_bid(ScalarBid{1.0 / 0.0}, 1); }), ErrorCode::NonPositiveBid);
  EXPECT_NO_THROW(validate_bid(ScalarBid{0.5}, 1));
}

TEST(BidValidation, RejectsMalformedRankings) {
  EXPECT_EQ(code_of([] { validate_bid(RankedBid{{0, 0}, {0.1, 0.2}}, 2); }), ErrorCode::DuplicateRankEntry);
  EXPECT_EQ(code_of([] { validate_bid(RankedBid{{2}, {0.1, 0.2}}, 2); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([] { validate_bid(RankedBid{{0}, {0.1}}, 2); }), ErrorCode::DimensionMismatch);
  EXPECT_NO_THROW(validate_bid(RankedBid{{1, 0}, {0.1, 0.2}}, 2));
}

TEST(MarketDataset, RejectsMixedDimensionsAndTreatments) {
  auto obs = [](std::vector<double> x, int w) {
    MarketObservation o;
    o.bid = ScalarBid{1.0};
    o.covariates = std::move(x);
    o.treatment = w;
    return o;
  };
  EXPECT_EQ(code_of([&] { MarketDataset({obs({1.0}, 0), obs({1.0, 2.0}, 1)}, 1); }), ErrorCode::DimensionMismatch);
  EXPECT_EQ(code_of([&] { MarketDataset({obs({1.0}, 2)}, 1); }), ErrorCode::NonBinaryTreatment);
  EXPECT_EQ(code_of([&] { MarketDataset({}, 1); }), ErrorCode::EmptyDataset);

  MarketObservation ranked;
  ranked.bid = RankedBid{{0}, {0.5}};
  ranked.covariates = {1.0};
  EXPECT_EQ(code_of([&] { MarketDataset({obs({1.0}, 0), ranked}, 1); }), ErrorCode::BidKindMismatch);
}

TEST(MarketDataset, CovariateBlockIsRowMajor) {
  MarketObservation a, b;
  a.bid = ScalarBid{1.0};
  a.covariates = {1.0, 2.0};
  b.bid = ScalarBid{2.0};
  b.covariates = {3.0, 4.0};
  b.treatment = 1;
  MarketDataset data({a, b}, 1);
  EXPECT_EQ(data.covariate_dim(), 2u);
  EXPECT_EQ(std::vector<double>(data.covariate_block().begin(), data.covariate_block().end()),
            (std::vector<double>{1.0, 2.0, 3.0, 4.0}));
  EXPECT_EQ(data.covariates(1)[0], 3.0);
  EXPECT_TRUE(data.has_both_arms());
  const std::vector<std::size_t> rows{1};
  const auto sub = data.subset(rows);
  EXPECT_EQ(sub.n(), 1u);
  EXPECT_FALSE(sub.has_both_arms());
  EXPECT_EQ(sub.scalar_bids(), std::vector<double>{2.0});
}

TEST(LoadDataset, ParsesScalarCsv) {
  std::istringstream in("w,bid,x1,x2\n0,1.5,0.1,0.2\n1,2.5,0.3,0.4\n0,0.5,0.5,0.6\n1,3.0,0.7,0.8\n");
  const auto data = read_dataset(in);
  EXPECT_EQ(data.n(), 4u);
  EXPECT_EQ(data.bid_kind(), BidKind::Scalar);
  EXPECT_EQ(data.covariate_dim(), 2u);
  EXPECT_EQ(data.treatments(), (std::vector<int>{0, 1, 0, 1}));
  EXPECT_EQ(data.scalar_bids(), (std::vector<double>{1.5, 2.5, 0.5, 3.0}));
}

TEST(LoadDataset, NonBinaryTreatmentNamesTheLine) {
  std::istringstream in("w,bid,x1\n0,1.0,0.1\n2,1.0,0.2\n");
  try {
    read_dataset(in);
    FAIL() << "expected NonBinaryTreatment";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonBinaryTreatment);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(LoadDataset, ParsesRankedRowsWithOneBasedItems) {
  std::istringstream in(
      "w,x1,rank_1,rank_2,rank_3,score_1,score_2,score_3\n"
      "1,0.5,2,1,,0.1,0.2,0.3\n"
      "0,0.7,3,,,0.4,0.5,0.6\n");
  const auto data = read_dataset(in);
  EXPECT_EQ(data.bid_kind(), BidKind::RankedList);
  EXPECT_EQ(data.items(), 3u);
  const auto& r = std::get<RankedBid>(data.bid(0));
  EXPECT_EQ(r.ranking, (std::vector<int>{1, 0}));
  EXPECT_EQ(r.scores, (std::vector<double>{0.1, 0.2, 0.3}));
  EXPECT_EQ(std::get<RankedBid>(data.bid(1)).ranking, std::vector<int>{2});
}

TEST(LoadDataset, MissingColumnsAndEmptyFiles) {
  std::istringstream no_w("bid,x1\n1.0,0.1\n");
  EXPECT_EQ(code_of([&] { read_dataset(no_w); }), ErrorCode::MissingColumn);
  std::istringstream header_only("w,bid,x1\n");
  EXPECT_EQ(code_of([&] { read_dataset(header_only); }), ErrorCode::EmptyDataset);
  std::istringstream bad_bid("w,bid,x1\n0,-1,0.1\n");
  EXPECT_EQ(code_of([&] { read_dataset(bad_bid); }), ErrorCode::NonPositiveBid);
}

TEST(LoadDataset, WriteThenReadIsExact) {
  std::istringstream in("id,w,bid,x1,x2\na,0,0.1234567890123456,1e-3,2\nb,1,3.3333333333333335,4,5\n");
  const auto data = read_dataset(in);
  std::ostringstream out;
  write_dataset(out, data);
  std::istringstream back(out.str());
  const auto again = read_dataset(back);
  ASSERT_EQ(again.n(), data.n());
  for (std::size_t i = 0; i < data.n(); ++i) {
    EXPECT_EQ(again[i].id, data[i].id);
    EXPECT_EQ(again.treatment(i), data.treatment(i));
    EXPECT_EQ(std::get<ScalarBid>(again.bid(i)).value, std::get<ScalarBid>(data.bid(i)).value);
    EXPECT_EQ(again[i].covariates, data[i].covariates);
  }
}

TEST(SplitCsv, HandlesQuotesAndCarriageReturns) {
  EXPECT_EQ(split_csv_line("a,\"b,c\",\"d\"\"e\"\r"), (std::vector<std::string>{"a", "b,c", "d\"e"}));
  EXPECT_EQ(split_csv_line("1,,3"), (std::vector<std::string>{"1", "", "3"}));
}

TEST(TreatmentRule, UniformRulesIgnoreCovariates) {
  const std::vector<double> x{3.0, -2.0};
  EXPECT_EQ(evaluate_rule(TreatmentRule::all(), x, "1"), 1.0);
  EXPECT_EQ(evaluate_rule(TreatmentRule::none(), x, "1"), 0.0);
}

TEST(TreatmentRule, LinearThresholdSign) {
  const auto rule = TreatmentRule::linear_threshold({1.0, -1.0}, 0.0);
  EXPECT_EQ(evaluate_rule(rule, std::vector<double>{2.0, 1.0}, "1"), 1.0);
  EXPECT_EQ(evaluate_rule(rule, std::vector<double>{1.0, 2.0}, "1"), 0.0);
  EXPECT_EQ(code_of([&] { evaluate_rule(rule, std::vector<double>{1.0}, "1"); }), ErrorCode::DimensionMismatch);
}

TEST(TreatmentRule, TableLookup) {
  const auto rule = TreatmentRule::table({{"a", 0.25}, {"b", 1.0}});
  EXPECT_EQ(evaluate_rule(rule, {}, "a"), 0.25);
  EXPECT_EQ(code_of([&] { evaluate_rule(rule, {}, "c"); }), ErrorCode::MissingId);
  EXPECT_EQ(code_of([] { TreatmentRule::table({{"a", 1.5}}); }), ErrorCode::InvalidArgument);
}

TEST(FoldPlan, SixUnitsThreeFolds) {
  const auto plan = make_fold_plan(6, 3, 1);
  ASSERT_EQ(plan.in_fold.size(), 3u);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(plan.in_fold[k].size(), 2u);
    EXPECT_EQ(plan.h_rows[k].size(), 2u);
    EXPECT_EQ(plan.g_rows[k].size(), 2u);
  }
}

TEST(FoldPlan, TooFewObservations) {
  EXPECT_EQ(code_of([] { make_fold_plan(5, 3, 7); }), ErrorCode::TooFewObservations);
}

TEST(FoldPlan, DeterministicGivenSeed) {
  EXPECT_EQ(make_fold_plan(101, 4, 9), make_fold_plan(101, 4, 9));
  EXPECT_NE(make_fold_plan(101, 4, 9).fold_of, make_fold_plan(101, 4, 10).fold_of);
}

// Property: folds partition the rows; H and G split each complement.
TEST(FoldPlan, PartitionLaw) {
  for (std::size_t n : {6u, 7u, 50u, 333u}) {
    for (std::size_t k : {2u, 3u, 5u}) {
      if (n < 2 * k) continue;
      const auto plan = make_fold_plan(n, k, n * 31 + k);
      std::vector<int> seen(n, 0);
      for (std::size_t f = 0; f < k; ++f) {
        for (auto i : plan.in_fold[f]) {
          ++seen[i];
          EXPECT_EQ(plan.fold_of[i], static_cast<int>(f));
        }
        std::set<std::size_t> h(plan.h_rows[f].begin(), plan.h_rows[f].end());
        std::set<std::size_t> g(plan.g_rows[f].begin(), plan.g_rows[f].end());
        for (auto i : h) EXPECT_FALSE(g.count(i));
        std::set<std::size_t> uni = h;
        uni.insert(g.begin(), g.end());
        const auto oof = plan.out_of_fold(f);
        EXPECT_EQ(uni, std::set<std::size_t>(oof.begin(), oof.end()));
        EXPECT_EQ(oof.size(), n - plan.in_fold[f].size());
        EXPECT_TRUE(std::is_sorted(plan.h_rows[f].begin(), plan.h_rows[f].end()));
      }
      for (int c : seen) EXPECT_EQ(c, 1);
    }
  }
}

TEST(FoldPlan, StratifiedBalancesArms) {
  std::vector<int> w(60, 0);
  for (std::size_t i = 0; i < 20; ++i) w[i] = 1;
  const auto plan = make_fold_plan(60, 4, 3, &w);
  for (const auto& fold : plan.in_fold) {
    const auto treated = std::count_if(fold.begin(), fold.end(), [&](std::size_t i) { return w[i] == 1; });
    EXPECT_EQ(treated, 5);
  }
}

}  // namespace
}  // namespace gte
