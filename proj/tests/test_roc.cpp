#include <gtest/gtest.h>

#include <cmath>

#include "privsec/roc.hpp"
#include "privsec/rng.hpp"

using namespace privsec;

namespace {
// Mann-Whitney U / (n_pos n_neg), ties counted as one half.
double mann_whitney(const std::vector<ScoredTrip>& s) {
  double u = 0;
  std::size_t np = 0, nn = 0;
  for (const auto& a : s) {
    if (a.truth != Label::Malicious) continue;
    ++np;
    for (const auto& b : s) {
      if (b.truth != Label::Normal) continue;
      u += a.score > b.score ? 1.0 : a.score == b.score ? 0.5 : 0.0;
    }
  }
  for (const auto& b : s) nn += b.truth == Label::Normal;
  return u / static_cast<double>(np * nn);
}

std::vector<ScoredTrip> random_set(Rng& rng, std::size_t n, int levels) {
  std::vector<ScoredTrip> s;
  for (std::size_t i = 0; i < n; ++i) {
    ScoredTrip t;
    t.trip_id = std::to_string(i);
    t.truth = i % 3 == 0 ? Label::Malicious : Label::Normal;
    const double shift = t.truth == Label::Malicious ? 0.7 : 0.0;
    t.score = levels > 0 ? std::floor((rng.uniform() + shift) * levels) : rng.normal() + shift;
    s.push_back(t);
  }
  return s;
}
}  // namespace

TEST(Roc, AucEqualsMannWhitney) {
  Rng rng(21);
  for (int k = 0; k < 200; ++k) {
    const auto s = random_set(rng, 6 + rng.below(60), k % 2 ? 4 : 0);
    EXPECT_NEAR(roc(s).auc, mann_whitney(s), 1e-12);
  }
}

TEST(Roc, PerfectInvertedAndAllTied) {
  std::vector<ScoredTrip> s = {{"a", Label::Normal, 0.1, ""}, {"b", Label::Normal, 0.2, ""},
                               {"c", Label::Malicious, 0.9, ""}};
  EXPECT_DOUBLE_EQ(roc(s).auc, 1.0);
  for (auto& t : s) t.score = -t.score;
  EXPECT_DOUBLE_EQ(roc(s).auc, 0.0);
  for (auto& t : s) t.score = 1.0;
  const auto r = roc(s);
  EXPECT_DOUBLE_EQ(r.auc, 0.5);
  EXPECT_EQ(r.points.size(), 2u);
}

TEST(Roc, InfiniteScoresAreTies) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<ScoredTrip> s = {{"a", Label::Normal, inf, ""}, {"b", Label::Malicious, inf, ""},
                               {"c", Label::Normal, 1.0, ""}, {"d", Label::Malicious, 2.0, ""}};
  EXPECT_NEAR(roc(s).auc, mann_whitney(s), 1e-12);
}

TEST(Roc, InvariantUnderMonotoneTransform) {
  Rng rng(22);
  auto s = random_set(rng, 80, 0);
  const double a = roc(s).auc;
  for (auto& t : s) t.score = std::exp(3 * t.score) + 7;
  EXPECT_DOUBLE_EQ(roc(s).auc, a);
}

TEST(Roc, CurveIsMonotoneFromOriginToOne) {
  Rng rng(23);
  const auto r = roc(random_set(rng, 50, 5));
  EXPECT_EQ(r.points.front().fpr, 0.0);
  EXPECT_EQ(r.points.front().tpr, 0.0);
  EXPECT_EQ(r.points.back().fpr, 1.0);
  EXPECT_EQ(r.points.back().tpr, 1.0);
  for (std::size_t i = 1; i < r.points.size(); ++i) {
    EXPECT_GE(r.points[i].fpr, r.points[i - 1].fpr);
    EXPECT_GE(r.points[i].tpr, r.points[i - 1].tpr);
  }
}

TEST(Roc, RejectsDegenerateInput) {
  EXPECT_THROW(roc({{"a", Label::Normal, 1, ""}}), ValidationError);
  EXPECT_THROW(roc({{"a", Label::Normal, NAN, ""}, {"b", Label::Malicious, 1, ""}}), ValidationError);
}
