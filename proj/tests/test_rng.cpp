// Copyright 2026 The TowerForge Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <set>

#include "towerforge/rng.hpp"

using namespace towerforge;

namespace {

// Straight transcription of the published xoshiro256** step, used as an
// oracle against the library's state.
std::uint64_t ref_next(std::array<std::uint64_t, 4>& s) {
  auto rotl = [](std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); };
  const std::uint64_t result = rotl(s[1] * 5, 7) * 9;
  const std::uint64_t t = s[1] << 17;
  s[2] ^= s[0];
  s[3] ^= s[1];
  s[1] ^= s[2];
  s[0] ^= s[3];
  s[2] ^= t;
  s[3] = rotl(s[3], 45);
  return result;
}

}  // namespace

TEST(Rng, SplitMixSeedingMatchesPublishedSequence) {
  // Consecutive SplitMix64 outputs for seed 0.
  Rng r(0);
  EXPECT_EQ(r.state()[0], 0xe220a8397b1dcdafULL);
  EXPECT_EQ(r.state()[1], 0x6e789e6aa1b965f4ULL);
  EXPECT_EQ(r.state()[2], 0x06c45d188009454fULL);
  EXPECT_EQ(r.state()[3], 0xf88bb8a8724c81ecULL);
}

TEST(Rng, XoshiroStepMatchesReference) {
  for (std::uint64_t seed : {0ULL, 1ULL, 42ULL, 0xdeadbeefULL}) {
    Rng r(seed);
    auto s = r.state();
    for (int i = 0; i < 1000; ++i) ASSERT_EQ(r.next(), ref_next(s));
  }
}

TEST(Rng, ReferenceVectorFromSmallState) {
  std::array<std::uint64_t, 4> s{1, 2, 3, 4};
  EXPECT_EQ(ref_next(s), 11520u);
  EXPECT_EQ(ref_next(s), 0u);
}

TEST(Rng, Fnv1aKnownValues) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ULL);
}

TEST(Rng, StreamsAreAddressedIndependently) {
  EXPECT_EQ(stream_seed(7, 3, "mission"), stream_seed(7, 3, "mission"));
  std::set<std::uint64_t> seen;
  for (std::uint64_t seed = 0; seed < 20; ++seed)
    for (std::uint64_t floor = 0; floor < 25; ++floor)
      for (const char* tag : {"mission", "layout", "room", "appearance"})
        for (std::uint64_t retry = 0; retry < 3; ++retry)
          seen.insert(stream_seed(seed, floor, tag, retry));
  EXPECT_EQ(seen.size(), 20u * 25 * 4 * 3);
}

TEST(Rng, BelowIsInRangeAndRoughlyUniform) {
  Rng r(123);
  constexpr int kBins = 7, kDraws = 70000;
  std::array<int, kBins> counts{};
  for (int i = 0; i < kDraws; ++i) {
    auto v = r.below(kBins);
    ASSERT_LT(v, static_cast<std::uint64_t>(kBins));
    ++counts[v];
  }
  // Chi-square with 6 degrees of freedom; 22.46 is the 0.999 quantile.
  double chi = 0;
  const double expected = static_cast<double>(kDraws) / kBins;
  for (int c : counts) chi += (c - expected) * (c - expected) / expected;
  EXPECT_LT(chi, 22.46);
}

TEST(Rng, BetweenIsInclusive) {
  Rng r(5);
  std::set<std::int64_t> seen;
  for (int i = 0; i < 1000; ++i) {
    auto v = r.between(-2, 2);
    ASSERT_GE(v, -2);
    ASSERT_LE(v, 2);
    seen.insert(v);
  }
  EXPECT_EQ(seen.size(), 5u);
  EXPECT_EQ(r.between(9, 9), 9);
}

TEST(Rng, UnitIsHalfOpen) {
  Rng r(11);
  for (int i = 0; i < 10000; ++i) {
    double u = r.unit();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(Rng, WeightedFollowsWeights) {
  Rng r(99);
  const std::array<double, 3> w{0.5, 0.0, 1.5};
  std::array<int, 3> counts{};
  constexpr int n = 40000;
  for (int i = 0; i < n; ++i) ++counts[r.weighted(w)];
  EXPECT_EQ(counts[1], 0);
  // p = 0.25, sd = sqrt(n p (1-p)) ~ 87; allow five sd.
  EXPECT_NEAR(counts[0], n * 0.25, 5 * std::sqrt(n * 0.25 * 0.75));
}

TEST(Rng, ErrorsOnEmptyRanges) {
  Rng r(1);
  EXPECT_THROW(r.below(0), Error);
  EXPECT_THROW(r.between(3, 2), Error);
  const std::array<double, 2> zero{0.0, 0.0};
  EXPECT_THROW(r.weighted(zero), Error);
}

TEST(Rng, EqualSeedsGiveEqualStreams) {
  Rng a(77), b(77), c(78);
  for (int i = 0; i < 100; ++i) ASSERT_EQ(a.next(), b.next());
  EXPECT_NE(Rng(77).next(), c.next());
}
