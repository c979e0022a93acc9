#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include <limbosim/detect.hpp>

namespace {

using namespace limbosim;

DetectorConfig falling_safe(double level = 0.0, double a = 1e-4, double b = 1e-2) {
  DetectorConfig cfg;
  cfg.id = "d";
  cfg.level = level;
  cfg.direction = Direction::Falling;
  cfg.kind = SafeKind{a, b};
  return cfg;
}

DetectorConfig rising_safe(double level = 0.0, double a = 1e-4, double b = 1e-2) {
  DetectorConfig cfg = falling_safe(level, a, b);
  cfg.direction = Direction::Rising;
  return cfg;
}

DetectorConfig falling_naive(double eps = 1e-7) {
  DetectorConfig cfg;
  cfg.id = "n";
  cfg.direction = Direction::Falling;
  cfg.kind = NaiveKind{eps};
  return cfg;
}

TEST(Regions, FallingBoundaries) {
  const DetectorConfig cfg = falling_safe();
  EXPECT_EQ(classify_region(1.0, cfg), Region::SafeRegion);
  EXPECT_EQ(classify_region(0.0, cfg), Region::SafeRegion);      // on the zero level
  EXPECT_EQ(classify_region(-5e-5, cfg), Region::SafeRegion);    // above the limbo level
  EXPECT_EQ(classify_region(-1e-4, cfg), Region::LimboRegion);   // exactly on the limbo level
  EXPECT_EQ(classify_region(-5e-3, cfg), Region::LimboRegion);
  EXPECT_EQ(classify_region(-0.0101, cfg), Region::UnsafeRegion);  // exactly on the unsafe level
  EXPECT_EQ(classify_region(-1.0, cfg), Region::UnsafeRegion);
}

TEST(Regions, RisingMirrorsFalling) {
  const DetectorConfig cfg = rising_safe();
  EXPECT_EQ(classify_region(-1.0, cfg), Region::SafeRegion);
  EXPECT_EQ(classify_region(0.0, cfg), Region::SafeRegion);
  EXPECT_EQ(classify_region(1e-4, cfg), Region::LimboRegion);
  EXPECT_EQ(classify_region(5e-3, cfg), Region::LimboRegion);
  EXPECT_EQ(classify_region(0.0101, cfg), Region::UnsafeRegion);
  EXPECT_EQ(classify_region(1.0, cfg), Region::UnsafeRegion);
}

TEST(Levels, OffsetsFollowDirection) {
  const DetectorConfig f = falling_safe(2.0);
  EXPECT_DOUBLE_EQ(f.zero_level(), 2.0);
  EXPECT_DOUBLE_EQ(f.limbo_level(), 2.0 - 1e-4);
  EXPECT_DOUBLE_EQ(f.unsafe_level(), 2.0 - 1e-4 - 1e-2);
  const DetectorConfig r = rising_safe(2.0);
  EXPECT_DOUBLE_EQ(r.limbo_level(), 2.0 + 1e-4);
  EXPECT_DOUBLE_EQ(r.unsafe_level(), 2.0 + 1e-4 + 1e-2);
}

TEST(CheckSafe, SingleLevelCrossings) {
  const DetectorConfig cfg = falling_safe();
  EXPECT_EQ(check_safe(cfg, 0.1, 1e-6),
            (std::vector<CrossingEvent>{}));  // stayed above zero
  EXPECT_EQ(check_safe(cfg, 1e-6, -1e-6),
            (std::vector<CrossingEvent>{CrossingEvent::ZeroCrossed}));
  EXPECT_EQ(check_safe(cfg, -1e-6, -2e-4),
            (std::vector<CrossingEvent>{CrossingEvent::LimboEntered}));
  EXPECT_EQ(check_safe(cfg, -2e-4, -2e-2),
            (std::vector<CrossingEvent>{CrossingEvent::UnsafeEntered}));
}

TEST(CheckSafe, BigStepReportsAllLevelsInTravelOrder) {
  const DetectorConfig cfg = falling_safe();
  EXPECT_EQ(check_safe(cfg, 0.1, -0.02),
            (std::vector<CrossingEvent>{CrossingEvent::ZeroCrossed, CrossingEvent::LimboEntered,
                                        CrossingEvent::UnsafeEntered}));
}

TEST(CheckSafe, LeavingLimboReportsExit) {
  const DetectorConfig cfg = falling_safe();
  EXPECT_EQ(check_safe(cfg, -2e-4, -5e-5),
            (std::vector<CrossingEvent>{CrossingEvent::LimboExited}));
  // Jumping from limbo all the way above zero is still just an exit.
  EXPECT_EQ(check_safe(cfg, -2e-4, 0.1),
            (std::vector<CrossingEvent>{CrossingEvent::LimboExited}));
}

TEST(CheckSafe, PostSideIsInclusive) {
  const DetectorConfig cfg = falling_safe();
  EXPECT_EQ(check_safe(cfg, 1e-6, 0.0),
            (std::vector<CrossingEvent>{CrossingEvent::ZeroCrossed}));
  // Starting exactly on a level is not a new crossing of it.
  EXPECT_EQ(check_safe(cfg, 0.0, -5e-5), (std::vector<CrossingEvent>{}));
}

// Splitting a monotone step at any interior value neither invents nor loses
// crossings: the concatenated event lists equal the whole-step list.
TEST(CheckSafe, RefinementInvarianceOnMonotoneSteps) {
  const DetectorConfig cfg = falling_safe();
  std::mt19937_64 rng(20240817);
  std::uniform_real_distribution<double> value(-0.03, 0.03);
  for (int iter = 0; iter < 5000; ++iter) {
    double a = value(rng), c = value(rng);
    double b = value(rng);
    // Force b between a and c so the path a -> b -> c is monotone.
    const double lo = std::min(a, c), hi = std::max(a, c);
    b = lo + std::abs(b) / 0.03 * (hi - lo) / 2.0;
    ASSERT_GE(b, lo);
    ASSERT_LE(b, hi);
    auto whole = check_safe(cfg, a, c);
    auto part1 = check_safe(cfg, a, b);
    auto part2 = check_safe(cfg, b, c);
    std::vector<CrossingEvent> split = part1;
    split.insert(split.end(), part2.begin(), part2.end());
    EXPECT_EQ(whole, split) << "a=" << a << " b=" << b << " c=" << c;
  }
}

// A safe detector cannot report entering the unsafe region without the limbo
// entry being visible in the same step.
TEST(CheckSafe, NoSilentPathToUnsafe) {
  const DetectorConfig cfg = falling_safe();
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> value(-0.05, 0.05);
  for (int iter = 0; iter < 5000; ++iter) {
    const double pre = value(rng), post = value(rng);
    const auto evs = check_safe(cfg, pre, post);
    const bool entered_unsafe =
        std::find(evs.begin(), evs.end(), CrossingEvent::UnsafeEntered) != evs.end();
    if (entered_unsafe && classify_region(pre, cfg) == Region::SafeRegion) {
      EXPECT_NE(std::find(evs.begin(), evs.end(), CrossingEvent::LimboEntered), evs.end());
    }
  }
}

TEST(CheckNaive, FiresWhenArmedAndDisarms) {
  const DetectorConfig cfg = falling_naive();
  DetectorState st;
  st.armed = true;
  const NaiveCheck r = check_naive(cfg, st, 0.5, -0.01);
  EXPECT_TRUE(r.fired);
  EXPECT_FALSE(r.state.armed);
}

TEST(CheckNaive, SilentWhenDisarmed) {
  const DetectorConfig cfg = falling_naive();
  DetectorState st;
  st.armed = false;
  const NaiveCheck r = check_naive(cfg, st, 0.5, -0.01);
  EXPECT_FALSE(r.fired);
  EXPECT_FALSE(r.state.armed);
}

TEST(CheckNaive, TinyReboundNeverRearms) {
  const DetectorConfig cfg = falling_naive(1e-7);
  DetectorState st;
  st.armed = false;
  const NaiveCheck r = check_naive(cfg, st, -1e-9, 5e-8);  // rebound below the threshold
  EXPECT_FALSE(r.fired);
  EXPECT_FALSE(r.state.armed);
}

TEST(CheckNaive, RearmsPastThreshold) {
  const DetectorConfig cfg = falling_naive(1e-7);
  DetectorState st;
  st.armed = false;
  const NaiveCheck r = check_naive(cfg, st, -1e-9, 2e-7);
  EXPECT_FALSE(r.fired);
  EXPECT_TRUE(r.state.armed);
}

// Geometric rebound decay guarantees tunneling for any positive re-arm
// threshold: once the rebound peak falls below it the detector stays
// disarmed and every later crossing is missed.
TEST(CheckNaive, GeometricDecayEventuallyTunnels) {
  for (double eps : {1e-6, 1e-9, 1e-12}) {
    const DetectorConfig cfg = falling_naive(eps);
    const double c = 0.7;
    double peak = 3.0;  // rebound apex after each bounce, decays as c^2
    DetectorState st;
    st.armed = true;
    bool tunneled = false;
    for (int k = 0; k < 400; ++k) {
      // One bounce: down through zero, then up to the next peak.
      const NaiveCheck down = check_naive(cfg, st, peak, -1e-16);
      st = down.state;
      peak *= c * c;
      const NaiveCheck up = check_naive(cfg, st, -1e-16, peak);
      st = up.state;
      EXPECT_FALSE(up.fired);
      if (down.fired) continue;
      // Missed a crossing while below the re-arm threshold: from here on the
      // detector never fires again.
      EXPECT_LE(peak, eps);
      tunneled = true;
      break;
    }
    EXPECT_TRUE(tunneled) << "re-arm threshold " << eps;
  }
}

TEST(InitialState, NaiveArmedIffBeyondRearmThreshold) {
  const DetectorConfig cfg = falling_naive(1e-7);
  EXPECT_TRUE(initial_detector_state(cfg, 3.0).armed);
  EXPECT_FALSE(initial_detector_state(cfg, 5e-8).armed);
  EXPECT_FALSE(initial_detector_state(cfg, -1.0).armed);
}

TEST(InitialState, SafeRegionClassified) {
  const DetectorConfig cfg = falling_safe();
  EXPECT_EQ(initial_detector_state(cfg, 3.0).region, Region::SafeRegion);
  EXPECT_EQ(initial_detector_state(cfg, -2e-4).region, Region::LimboRegion);
  EXPECT_EQ(initial_detector_state(cfg, -1.0).region, Region::UnsafeRegion);
}

TEST(Config, ValidationRejectsBadOffsets) {
  DetectorConfig cfg = falling_safe();
  cfg.kind = SafeKind{0.0, 1e-2};
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg.kind = SafeKind{1e-4, -1.0};
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg.kind = NaiveKind{0.0};
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg.kind = NaiveKind{1e-7};
  EXPECT_NO_THROW(cfg.validate());
}

}  // namespace
