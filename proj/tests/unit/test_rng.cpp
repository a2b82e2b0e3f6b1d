#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "ncv/rng.hpp"
#include "ncv/running_stats.hpp"

using namespace ncv;

TEST(Philox, KnownAnswerZero) {
  auto out = philox4x32({0, 0, 0, 0}, {0, 0});
  EXPECT_EQ(out[0], 0x6627e8d5u);
  EXPECT_EQ(out[1], 0xe169c58du);
  EXPECT_EQ(out[2], 0xbc57ac4cu);
  EXPECT_EQ(out[3], 0x9b00dbd8u);
}

TEST(Philox, KnownAnswerAllOnes) {
  auto out = philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                        {0xffffffffu, 0xffffffffu});
  EXPECT_EQ(out[0], 0x408f276du);
  EXPECT_EQ(out[1], 0x41c83b0eu);
  EXPECT_EQ(out[2], 0xa20bc7c6u);
  EXPECT_EQ(out[3], 0x6d5451fdu);
}

TEST(RandomStream, SameIdentitySameSequence) {
  RandomStream a(42, StreamDomain::SecondPass, 17), b(42, StreamDomain::SecondPass, 17);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(RandomStream, DistinctIdentitiesDiffer) {
  std::set<std::uint64_t> firsts;
  for (std::uint64_t idx = 0; idx < 50; ++idx) {
    firsts.insert(RandomStream(42, StreamDomain::SecondPass, idx).next_u64());
    firsts.insert(RandomStream(42, StreamDomain::FirstPass, idx).next_u64());
    firsts.insert(RandomStream(43, StreamDomain::SecondPass, idx).next_u64());
  }
  EXPECT_EQ(firsts.size(), 150u);
}

TEST(RandomStream, UniformIsOpenInterval) {
  RandomStream s(1, StreamDomain::Test, 0);
  RunningStats st;
  for (int i = 0; i < 200000; ++i) {
    double u = s.uniform();
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
    st.add(u);
  }
  EXPECT_NEAR(st.mean(), 0.5, 3 * std::sqrt(1.0 / 12 / 200000));
  EXPECT_NEAR(st.variance(), 1.0 / 12, 2e-3);
}

TEST(RandomStream, NormalMoments) {
  RandomStream s(2, StreamDomain::Test, 0);
  RunningStats st, fourth;
  const int n = 400000;
  for (int i = 0; i < n; ++i) {
    double z = s.normal();
    st.add(z);
    fourth.add(z * z * z * z);
  }
  EXPECT_NEAR(st.mean(), 0.0, 3 / std::sqrt(double(n)));
  EXPECT_NEAR(st.variance(), 1.0, 3 * std::sqrt(2.0 / n));
  EXPECT_NEAR(fourth.mean(), 3.0, 3 * std::sqrt(96.0 / n));
}

TEST(RandomStream, ExponentialMean) {
  RandomStream s(3, StreamDomain::Test, 0);
  RunningStats st;
  const int n = 200000;
  for (int i = 0; i < n; ++i) st.add(s.exponential(4.0));
  EXPECT_NEAR(st.mean(), 0.25, 3 * 0.25 / std::sqrt(double(n)));
}

TEST(RunningStats, MatchesTwoPass) {
  RandomStream s(4, StreamDomain::Test, 0);
  std::vector<double> xs(10007);
  for (auto& x : xs) x = 1e3 + s.normal();
  RunningStats whole, a, b;
  whole.add(xs);
  a.add(std::span<const double>(xs).first(5000));
  b.add(std::span<const double>(xs).subspan(5000));
  a.merge(b);
  double mean = 0;
  for (double x : xs) mean += x;
  mean /= xs.size();
  double var = 0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= xs.size() - 1;
  EXPECT_NEAR(whole.variance(), var, 1e-10 * var);
  EXPECT_NEAR(a.variance(), var, 1e-10 * var);
  EXPECT_NEAR(a.mean(), mean, 1e-12 * mean);
  EXPECT_EQ(a.count(), xs.size());
}
