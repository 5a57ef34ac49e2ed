#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "vlmfair/error.hpp"
#include "vlmfair/metrics.hpp"

namespace vlmfair {
namespace {

// n positives of `cls` in `group`, of which `hits` are predicted correctly.
void add_cell(std::vector<ClassifiedSample>& out, const std::string& cls, const std::string& group,
              int n, int hits, const std::string& wrong = "other") {
  for (int i = 0; i < n; ++i) out.push_back({cls, i < hits ? cls : wrong, group});
}

std::shared_ptr<const CandidateGroups> pool(const std::vector<std::pair<std::string, std::string>>& xs) {
  auto m = std::make_shared<CandidateGroups>();
  for (const auto& [id, g] : xs) (*m)[id] = g;
  return m;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected vlmfair::Error";
  return ErrorCode::kInvalidArgument;
}

TEST(EqualOpportunity, PerfectPredictions) {
  std::vector<ClassifiedSample> s;
  add_cell(s, "A", "m", 3, 3);
  add_cell(s, "A", "f", 3, 3);
  const auto eo = eo_violations(s, {"A"}, {"m", "f"});
  EXPECT_EQ(eo.delta_avg, 0.0);
  EXPECT_EQ(eo.delta_max, 0.0);
}

TEST(EqualOpportunity, TwoClassesTwoGroups) {
  std::vector<ClassifiedSample> s;
  add_cell(s, "A", "m", 10, 10, "B");
  add_cell(s, "A", "f", 10, 5, "B");
  add_cell(s, "B", "m", 5, 4, "A");
  add_cell(s, "B", "f", 5, 4, "A");
  const auto eo = eo_violations(s, {"A", "B"}, {"m", "f"});
  EXPECT_NEAR(eo.delta_avg, 0.25, 1e-15);
  EXPECT_NEAR(eo.delta_max, 0.5, 1e-15);
}

TEST(EqualOpportunity, OneClassThreeGroups) {
  std::vector<ClassifiedSample> s;
  add_cell(s, "A", "g1", 2, 2);
  add_cell(s, "A", "g2", 2, 1);
  add_cell(s, "A", "g3", 2, 1);
  const auto eo = eo_violations(s, {"A"}, {"g1", "g2", "g3"});
  EXPECT_NEAR(eo.delta_avg, 0.5, 1e-15);
  // Mean of the three unordered gaps 0.5, 0.5, 0.
  EXPECT_NEAR(eo.delta_max, (0.5 + 0.5 + 0.0) / 3.0, 1e-15);
}

TEST(EqualOpportunity, TwoGroupsReduceToSingleGap) {
  std::mt19937 gen(3);
  for (int t = 0; t < 100; ++t) {
    std::vector<ClassifiedSample> s;
    std::vector<double> gaps;
    for (const char* cls : {"A", "B", "C"}) {
      const int a = 1 + static_cast<int>(gen() % 9), b = 1 + static_cast<int>(gen() % 9);
      add_cell(s, cls, "m", 10, a);
      add_cell(s, cls, "f", 10, b);
      gaps.push_back(std::abs(a - b) / 10.0);
    }
    const auto eo = eo_violations(s, {"A", "B", "C"}, {"m", "f"});
    EXPECT_NEAR(eo.delta_avg, (gaps[0] + gaps[1] + gaps[2]) / 3.0, 1e-12);
    EXPECT_NEAR(eo.delta_max, *std::max_element(gaps.begin(), gaps.end()), 1e-12);
  }
}

TEST(EqualOpportunity, PermutationInvariant) {
  std::vector<ClassifiedSample> s;
  add_cell(s, "A", "m", 7, 3);
  add_cell(s, "A", "f", 9, 8);
  add_cell(s, "A", "x", 4, 1);
  const auto a = eo_violations(s, {"A"}, {"m", "f", "x"});
  std::reverse(s.begin(), s.end());
  const auto b = eo_violations(s, {"A"}, {"x", "f", "m"});
  EXPECT_DOUBLE_EQ(a.delta_avg, b.delta_avg);
  EXPECT_DOUBLE_EQ(a.delta_max, b.delta_max);
}

TEST(EqualOpportunity, Errors) {
  std::vector<ClassifiedSample> s;
  add_cell(s, "A", "m", 2, 1);
  EXPECT_EQ(code_of([&] { eo_violations(s, {"A"}, {"m", "f"}); }), ErrorCode::kEmptyCell);
  EXPECT_EQ(code_of([&] { eo_violations(s, {"B"}, {"m", "f"}); }), ErrorCode::kUnknownLabel);
  EXPECT_EQ(code_of([&] { eo_violations(s, {"A"}, {"m"}); }), ErrorCode::kInvalidArgument);
}

TEST(MaxSkew, MatchingProportionsGiveZero) {
  auto cands = pool({{"a", "m"}, {"b", "f"}, {"c", "m"}, {"d", "f"}});
  RetrievalOutcome o{"q", {"a", "b", "c", "d"}, "", cands};
  EXPECT_NEAR(max_skew({o}, 2, {"m", "f"}), 0.0, 1e-15);
}

TEST(MaxSkew, AllOneGroup) {
  auto cands = pool({{"a", "m"}, {"b", "m"}, {"c", "f"}, {"d", "f"}});
  RetrievalOutcome o{"q", {"a", "b", "c", "d"}, "", cands};
  EXPECT_NEAR(max_skew({o}, 2, {"m", "f"}), std::log(2.0), 1e-15);
}

TEST(MaxSkew, FourGroupsOneAbsentFromTop) {
  auto cands = pool({{"a1", "A"}, {"a2", "A"}, {"b1", "B"}, {"b2", "B"},
                     {"c1", "C"}, {"c2", "C"}, {"d1", "D"}, {"d2", "D"}});
  RetrievalOutcome o{"q", {"a1", "a2", "b1", "c1", "b2", "c2", "d1", "d2"}, "", cands};
  EXPECT_NEAR(max_skew({o}, 4, {"A", "B", "C", "D"}), std::log(2.0), 1e-15);
}

TEST(MaxSkew, AveragesOverQueries) {
  auto cands = pool({{"a", "m"}, {"b", "m"}, {"c", "f"}, {"d", "f"}});
  RetrievalOutcome skewed{"q1", {"a", "b", "c", "d"}, "", cands};
  RetrievalOutcome even{"q2", {"a", "c", "b", "d"}, "", cands};
  EXPECT_NEAR(max_skew({skewed, even}, 2, {"m", "f"}), std::log(2.0) / 2, 1e-15);
}

TEST(MaxSkew, Errors) {
  auto cands = pool({{"a", "m"}, {"b", "m"}});
  RetrievalOutcome o{"q", {"a", "b"}, "", cands};
  EXPECT_EQ(code_of([&] { max_skew({o}, 2, {"m", "f"}); }), ErrorCode::kGroupAbsentFromCandidates);
  EXPECT_EQ(code_of([&] { max_skew({o}, 3, {"m"}); }), ErrorCode::kMTooLarge);
}

TEST(StatisticalParity, Examples) {
  EXPECT_NEAR(statistical_parity({"p", {{"m", 50}, {"f", 50}}, 100}, {"m", "f"}), 0.0, 1e-15);
  EXPECT_NEAR(statistical_parity({"p", {{"m", 100}, {"f", 0}}, 100}, {"m", "f"}),
              0.70710678118654752, 1e-15);
  EXPECT_NEAR(statistical_parity({"p", {{"a", 25}, {"b", 25}, {"c", 25}, {"d", 25}}, 100},
                                 {"a", "b", "c", "d"}),
              0.0, 1e-15);
}

TEST(StatisticalParity, AbsentGroupCountsAsZeroAndBoundHolds) {
  const double sp = statistical_parity({"p", {{"a", 7}}, 7}, {"a", "b", "c"});
  EXPECT_NEAR(sp, std::sqrt(2.0 / 3.0), 1e-15);
}

TEST(StatisticalParity, EmptyGeneration) {
  EXPECT_EQ(code_of([] { statistical_parity({"p", {{"m", 0}, {"f", 0}}, 0}, {"m", "f"}); }),
            ErrorCode::kEmptyGeneration);
}

TEST(Recall, Examples) {
  RetrievalOutcome first{"q", {"a", "b", "c"}, "a", nullptr};
  EXPECT_EQ(recall_at_k({first}, 5), 1.0);
  std::vector<std::string> ranked;
  for (int i = 0; i < 12; ++i) ranked.push_back("c" + std::to_string(i));
  std::vector<RetrievalOutcome> qs = {{"q1", ranked, "c0", nullptr},
                                      {"q2", ranked, "c5", nullptr},
                                      {"q3", ranked, "c10", nullptr}};
  EXPECT_EQ(recall_at_k(qs, 10), 2.0 / 3.0);
  EXPECT_EQ(recall_at_k(qs, 100), 1.0);
}

TEST(Recall, IgnoresNeutralQueries) {
  std::vector<RetrievalOutcome> qs = {{"q1", {"a", "b"}, "b", nullptr}, {"n", {"a", "b"}, "", nullptr}};
  EXPECT_EQ(recall_at_k(qs, 1), 0.0);
  EXPECT_THROW(recall_at_k({{"n", {"a"}, "", nullptr}}, 1), Error);
}

TEST(F1, PerfectAndBinary) {
  std::vector<ClassifiedSample> perfect = {{"A", "A", "m"}, {"B", "B", "f"}};
  EXPECT_EQ(f1_scores(perfect, {"A", "B"}).macro_f1, 1.0);

  std::vector<ClassifiedSample> s;
  for (int i = 0; i < 4; ++i) s.push_back({"A", "A", "m"});
  s.push_back({"A", "B", "m"});
  for (int i = 0; i < 4; ++i) s.push_back({"B", "B", "m"});
  s.push_back({"B", "A", "m"});
  const auto r = f1_scores(s, {"A", "B"});
  EXPECT_NEAR(r.per_class.at("A"), 0.8, 1e-15);
  EXPECT_NEAR(r.per_class.at("B"), 0.8, 1e-15);
  EXPECT_NEAR(r.macro_f1, 0.8, 1e-15);
  EXPECT_TRUE(r.undefined.empty());
}

TEST(F1, UndefinedClassScoresZeroAndIsFlagged) {
  std::vector<ClassifiedSample> s = {{"A", "A", "m"}};
  const auto r = f1_scores(s, {"A", "Z"});
  EXPECT_EQ(r.per_class.at("Z"), 0.0);
  ASSERT_EQ(r.undefined.size(), 1u);
  EXPECT_EQ(r.undefined[0], "Z");
  EXPECT_EQ(r.macro_f1, 0.5);
}

}  // namespace
}  // namespace vlmfair
