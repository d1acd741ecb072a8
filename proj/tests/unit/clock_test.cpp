#include "gnnpf/clock.hpp"

#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

#include "gnnpf/types.hpp"

namespace gnnpf {
namespace {

TEST(AdvanceClock, AsyncMaxDominates) { EXPECT_EQ(advance_clock(Mode::Async, 10, 4, 3), 10.0); }

TEST(AdvanceClock, SyncSerializesDecisionAndFetch) { EXPECT_EQ(advance_clock(Mode::Sync, 10, 5, 8), 13.0); }

TEST(AdvanceClock, AsyncHidesLongInference) {
  // 250 units of inference span 25 minibatches of 10 each.
  EXPECT_EQ(advance_clock(Mode::Async, 10, 0, 250), 10.0);
  EXPECT_EQ(advance_clock(Mode::Sync, 10, 0, 250), 250.0);
}

TEST(AdvanceClock, AsyncAmortizesUnevenInference) {
  // ceil(25 / 10) = 3 minibatches of max(10, 25/3) = 10.
  EXPECT_EQ(advance_clock(Mode::Async, 10, 2, 25), 10.0);
  // Nothing else to overlap with: inference is the whole step.
  EXPECT_EQ(advance_clock(Mode::Async, 0, 0, 7), 7.0);
}

TEST(AdvanceClock, AsyncNeverSlowerThanSync) {
  Rng rng(5);
  for (int i = 0; i < 10000; ++i) {
    const double d = rng.uniform() * 50;
    const double c = rng.uniform() * 50;
    const double t = rng.uniform() * 500;
    ASSERT_LE(advance_clock(Mode::Async, d, c, t), advance_clock(Mode::Sync, d, c, t));
  }
}

TEST(Barrier, AlignsToMax) {
  std::vector<double> clocks{10, 14, 9};
  EXPECT_EQ(barrier(clocks), 14.0);
  EXPECT_EQ(clocks, (std::vector<double>{14, 14, 14}));
  std::vector<double> one{3.5};
  EXPECT_EQ(barrier(one), 3.5);
  std::vector<double> none;
  EXPECT_EQ(barrier(none), 0.0);
}

TEST(ClockModel, CostsAndValidation) {
  const ClockModel m{0.5, 0.25, 2.0, 1.0};
  EXPECT_EQ(m.ddp_time(10), 5.0);
  EXPECT_EQ(m.comm_time(0), 0.0);
  EXPECT_EQ(m.comm_time(8), 4.0);
  EXPECT_NO_THROW(m.validate());
  EXPECT_THROW((ClockModel{-1, 0, 0, 0}.validate()), std::invalid_argument);
  EXPECT_THROW((ClockModel{0, 0, 0, -0.1}.validate()), std::invalid_argument);
}

TEST(Mode, ParseAndPrint) {
  EXPECT_EQ(parse_mode("sync"), Mode::Sync);
  EXPECT_EQ(parse_mode(to_string(Mode::Async)), Mode::Async);
  EXPECT_THROW(parse_mode("eager"), std::invalid_argument);
}

}  // namespace
}  // namespace gnnpf
