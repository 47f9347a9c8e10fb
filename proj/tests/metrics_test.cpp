#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ftol/metrics.hpp"
#include "support.hpp"

namespace ftol {
namespace {

JointCounts random_joint(std::mt19937_64& rng) {
  JointCounts joint(10);
  std::uniform_int_distribution<int> count(0, 40);
  std::bernoulli_distribution sparse(0.3);
  for (int t = 0; t < 10; ++t)
    for (int y = 0; y < 10; ++y) {
      if (sparse(rng)) continue;
      joint.add(t, y, static_cast<std::uint64_t>(count(rng)));
    }
  if (joint.total() == 0) joint.add(0, 0);
  return joint;
}

TEST(JointCounts, Construction) {
  std::vector<int> same(30);
  for (std::size_t i = 0; i < 30; ++i) same[i] = static_cast<int>(i % 10);
  JointCounts diag = joint_counts(same, same);
  for (std::size_t t = 0; t < 10; ++t)
    for (std::size_t y = 0; y < 10; ++y) EXPECT_EQ(diag.at(t, y), t == y ? 3u : 0u);

  JointCounts one = joint_counts(std::vector<int>{3}, std::vector<int>{7});
  EXPECT_EQ(one.at(3, 7), 1u);
  EXPECT_EQ(one.total(), 1u);

  std::mt19937_64 rng(1);
  JointCounts r = random_joint(rng);
  auto rows = r.prediction_histogram();
  for (std::size_t t = 0; t < 10; ++t) {
    std::uint64_t s = 0;
    for (std::size_t y = 0; y < 10; ++y) s += r.at(t, y);
    EXPECT_EQ(rows[t], s);
  }
}

TEST(JointCounts, RejectsBadInput) {
  JointCounts j;
  EXPECT_THROW(j.add(10, 0), LabelRangeError);
  EXPECT_THROW(j.add(0, -1), LabelRangeError);
  EXPECT_THROW(joint_counts(std::vector<int>{1, 2}, std::vector<int>{1}), ShapeError);
}

TEST(MutualInformation, Examples) {
  std::vector<int> same(100);
  for (std::size_t i = 0; i < 100; ++i) same[i] = static_cast<int>(i % 10);
  EXPECT_NEAR(mutual_information(joint_counts(same, same)), 3.321928094887362, 1e-12);

  JointCounts product(10);
  for (int t = 0; t < 10; ++t)
    for (int y = 0; y < 10; ++y) product.add(t, y, static_cast<std::uint64_t>((t + 1) * (y % 3 + 1)));
  EXPECT_NEAR(mutual_information(product), 0.0, 1e-12);

  JointCounts small(2);
  small.add(0, 0, 2);
  small.add(0, 1, 1);
  small.add(1, 1, 1);
  EXPECT_NEAR(mutual_information(small), 0.31127812445913283, 1e-12);
  EXPECT_DOUBLE_EQ(accuracy(small), 0.75);

  EXPECT_THROW(mutual_information(JointCounts(10)), ConfigError);
}

TEST(MutualInformation, MatchesBruteForceOracle) {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 1000; ++i) {
    JointCounts j = random_joint(rng);
    const double mi = mutual_information(j);
    EXPECT_NEAR(mi, testing::brute_force_mi(j), 1e-12);
    EXPECT_GE(mi, 0.0);
    EXPECT_EQ(mi, mutual_information(j.transposed()));
    const double bound = std::min(entropy_bits(j.prediction_histogram()),
                                  entropy_bits(j.label_histogram()));
    EXPECT_LE(mi, bound + 1e-12);
  }
}

TEST(MutualInformation, MergeOfIdenticalJointsIsInvariant) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 20; ++i) {
    JointCounts j = random_joint(rng);
    JointCounts doubled = j;
    doubled.merge(j);
    EXPECT_EQ(doubled.total(), 2 * j.total());
    EXPECT_NEAR(mutual_information(doubled), mutual_information(j), 1e-12);
    EXPECT_DOUBLE_EQ(accuracy(doubled), accuracy(j));
  }
  EXPECT_THROW(JointCounts(10).merge(JointCounts(2)), ShapeError);
}

TEST(Accuracy, Extremes) {
  std::vector<int> y{0, 1, 2, 3};
  EXPECT_EQ(accuracy(joint_counts(y, y)), 1.0);
  std::vector<int> t{1, 2, 3, 0};
  EXPECT_EQ(accuracy(joint_counts(t, y)), 0.0);
}

TEST(Snr, Examples) {
  EXPECT_NEAR(snr_db(5.0, 5.0).value, 6.020599913279624, 1e-12);
  EXPECT_NEAR(snr_db(10.0, 1.0).value, 20.8278537031645, 1e-12);
  EXPECT_NEAR(snr_db(1.0, 1e12).value, 0.0, 1e-9);
  EXPECT_EQ(snr_db(1.0, 0.0).value, kSnrCapDb);
  EXPECT_GE(snr_db(0.0, 1.0).value, 0.0);

  const std::vector<float> x{3, 4}, d{0.3f, 0.4f};
  EXPECT_NEAR(snr_db(x, d).value, 20.8278537031645, 1e-5);
  EXPECT_THROW(snr_db(x, std::vector<float>{1.0f}), ShapeError);
}

TEST(Snr, InverseExamples) {
  EXPECT_NEAR(delta_norm_for_snr(10.0, {20.0}), 1.1111111111111112, 1e-12);
  EXPECT_NEAR(delta_norm_for_snr(7.0, {6.020599913279624}), 7.0, 1e-9);
  EXPECT_THROW(delta_norm_for_snr(1.0, {0.0}), ConfigError);
  EXPECT_THROW(delta_norm_for_snr(1.0, {-3.0}), ConfigError);
}

TEST(Snr, RoundTrip) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> norm(0.1, 100.0), db(0.5, 80.0);
  for (int i = 0; i < 1000; ++i) {
    const double x = norm(rng), s = db(rng);
    EXPECT_NEAR(snr_db(x, delta_norm_for_snr(x, {s})).value, s, 1e-9);
  }
}

}  // namespace
}  // namespace ftol
