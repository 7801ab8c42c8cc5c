#include <set>

#include <gtest/gtest.h>

#include "bussim/parallel.hpp"
#include "bussim/rng.hpp"

namespace bussim {
namespace {

TEST(Rng, SplitMixMatchesReferenceSequence) {
  // First two outputs of the reference generator started from state 0.
  EXPECT_EQ(splitmix64(0), 0xE220A8397B1DCDAFULL);
  EXPECT_EQ(splitmix64(0x9E3779B97F4A7C15ULL), 0x6E789E6AA1B965F4ULL);
}

TEST(Rng, DerivedSeedsDependOnKeysAndOrder) {
  EXPECT_EQ(derive_seed(7, {1, 2}), derive_seed(7, {1, 2}));
  EXPECT_NE(derive_seed(7, {1, 2}), derive_seed(7, {2, 1}));
  EXPECT_NE(derive_seed(7, {1}), derive_seed(7, {1, 0}));
  EXPECT_NE(derive_seed(7, {1}), derive_seed(8, {1}));
}

TEST(Rng, DerivedSeedsDoNotCollideOverSmallGrid) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t a = 0; a < 64; ++a)
    for (std::uint64_t b = 0; b < 64; ++b) seen.insert(derive_seed(123, {a, b}));
  EXPECT_EQ(seen.size(), 64u * 64u);
}

TEST(Parallel, CoversEveryIndexOnceForAnyJobCount) {
  for (int jobs : {1, 2, 3, 8}) {
    std::vector<int> hits(37, 0);
    parallel_for(hits.size(), jobs, [&](std::size_t i) { ++hits[i]; });
    for (int h : hits) EXPECT_EQ(h, 1) << "jobs " << jobs;
  }
}

}  // namespace
}  // namespace bussim
