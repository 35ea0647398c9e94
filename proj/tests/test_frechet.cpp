#include <gtest/gtest.h>

#include <filesystem>

#include "privsec/frechet.hpp"

using namespace privsec;

namespace {
PlanarPath random_path(Rng& rng, std::size_t n) {
  PlanarPath p;
  for (std::size_t i = 0; i < n; ++i) p.push_back({rng.uniform(-100, 100), rng.uniform(-100, 100)});
  return p;
}
}  // namespace

TEST(Frechet, MatchesBruteForce) {
  Rng rng(11);
  for (int k = 0; k < 300; ++k) {
    const auto a = random_path(rng, 1 + rng.below(5));
    const auto b = random_path(rng, 1 + rng.below(5));
    EXPECT_NEAR(discrete_frechet(a, b), brute_force_frechet(a, b), 1e-9);
  }
}

TEST(Frechet, MetricProperties) {
  Rng rng(12);
  for (int k = 0; k < 100; ++k) {
    const auto a = random_path(rng, 2 + rng.below(10));
    const auto b = random_path(rng, 2 + rng.below(10));
    const auto c = random_path(rng, 2 + rng.below(10));
    EXPECT_EQ(discrete_frechet(a, a), 0.0);
    EXPECT_DOUBLE_EQ(discrete_frechet(a, b), discrete_frechet(b, a));
    EXPECT_LE(discrete_frechet(a, c), discrete_frechet(a, b) + discrete_frechet(b, c) + 1e-9);
  }
}

TEST(Frechet, KnownValues) {
  const PlanarPath a{{0, 0}, {1, 0}, {2, 0}};
  const PlanarPath b{{0, 1}, {1, 1}, {2, 1}};
  EXPECT_DOUBLE_EQ(discrete_frechet(a, b), 1.0);
  const PlanarPath c{{0, 0}, {2, 0}};
  EXPECT_DOUBLE_EQ(discrete_frechet(a, c), 1.0);
}

TEST(Frechet, BruteForceRefusesLargeInput) {
  Rng rng(1);
  EXPECT_THROW(brute_force_frechet(random_path(rng, 9), random_path(rng, 8)), ValidationError);
}

TEST(Pairwise, SymmetricZeroDiagonalAndThreadIndependent) {
  Rng rng(13);
  std::vector<PlanarPath> paths;
  std::vector<std::string> ids;
  for (int i = 0; i < 25; ++i) {
    paths.push_back(random_path(rng, 3 + rng.below(20)));
    ids.push_back("p" + std::to_string(i));
  }
  PairwiseTiming timing;
  const auto m1 = pairwise_matrix(paths, ids, 1000, 1, &timing);
  const auto m3 = pairwise_matrix(paths, ids, 1000, 3);
  EXPECT_EQ(timing.pairs, 300u);
  EXPECT_EQ(m1.values, m3.values);
  for (std::size_t i = 0; i < 25; ++i) {
    EXPECT_EQ(m1.at(i, i), 0.0);
    for (std::size_t j = 0; j < 25; ++j) {
      EXPECT_EQ(m1.at(i, j), m1.at(j, i));
      if (i != j) EXPECT_DOUBLE_EQ(m1.at(i, j), discrete_frechet(paths[i], paths[j]));
    }
  }
}

TEST(Pairwise, BudgetRefusal) {
  std::vector<PlanarPath> paths(50, PlanarPath{{0, 0}});
  std::vector<std::string> ids(50, "x");
  EXPECT_EQ(pair_count(50), 1225u);
  EXPECT_THROW(pairwise_matrix(paths, ids, 1224), BudgetExceeded);
  EXPECT_NO_THROW(pairwise_matrix(paths, ids, 1225));
}

TEST(MatrixCache, RoundTripAndKeyMismatch) {
  Rng rng(14);
  std::vector<PlanarPath> paths;
  std::vector<std::string> ids;
  for (int i = 0; i < 6; ++i) {
    paths.push_back(random_path(rng, 5));
    ids.push_back("id" + std::to_string(i));
  }
  const auto m = pairwise_matrix(paths, ids, 100);
  const auto key = content_hash(paths, ids);
  const auto file = std::filesystem::temp_directory_path() / "privsec_unit_matrix.bin";
  save_matrix(m, key, file.string());
  DistanceMatrix back;
  ASSERT_TRUE(load_matrix(file.string(), key, back));
  EXPECT_EQ(back.ids, m.ids);
  EXPECT_EQ(back.values, m.values);
  paths[0][0].x += 1e-9;
  EXPECT_NE(content_hash(paths, ids), key);
  EXPECT_FALSE(load_matrix(file.string(), content_hash(paths, ids), back));
  EXPECT_FALSE(load_matrix("/nonexistent/matrix.bin", key, back));
}
