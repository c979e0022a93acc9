#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include <limbosim/engine.hpp>
#include <limbosim/models.hpp>

namespace {

using namespace limbosim;

// --------------------------------------------------------------------------
// Elastic impact

TEST(ElasticVelocities, KnownUnequalMassExamples) {
  // m=1 at speed 1 hits m=2 at rest.
  const auto [a1, a2] = elastic_velocities(1.0, 1.0, 2.0, 0.0);
  EXPECT_DOUBLE_EQ(a1, -1.0 / 3.0);
  EXPECT_DOUBLE_EQ(a2, 2.0 / 3.0);

  // m=2 at speed 2/3 hits m=1 coming back at speed 1.
  const auto [b1, b2] = elastic_velocities(2.0, 2.0 / 3.0, 1.0, -1.0);
  EXPECT_DOUBLE_EQ(b1, -4.0 / 9.0);
  EXPECT_DOUBLE_EQ(b2, 11.0 / 9.0);
}

TEST(ElasticVelocities, EqualMassesExchangeExactly) {
  std::mt19937_64 rng(20240817);
  std::uniform_real_distribution<double> mass(0.1, 10.0);
  std::uniform_real_distribution<double> vel(-10.0, 10.0);
  for (int i = 0; i < 2000; ++i) {
    const double m = mass(rng);
    const double v1 = vel(rng);
    const double v2 = vel(rng);
    const auto [p1, p2] = elastic_velocities(m, v1, m, v2);
    EXPECT_EQ(p1, v2);
    EXPECT_EQ(p2, v1);
    // Exchanging twice is the identity.
    const auto [q1, q2] = elastic_velocities(m, p1, m, p2);
    EXPECT_EQ(q1, v1);
    EXPECT_EQ(q2, v2);
  }
}

TEST(ElasticVelocities, ConservesMomentumAndEnergy) {
  std::mt19937_64 rng(987654321);
  std::uniform_real_distribution<double> mass(0.1, 10.0);
  std::uniform_real_distribution<double> vel(-10.0, 10.0);
  for (int i = 0; i < 2000; ++i) {
    const double m1 = mass(rng), m2 = mass(rng);
    const double v1 = vel(rng), v2 = vel(rng);
    const auto [p1, p2] = elastic_velocities(m1, v1, m2, v2);
    const double scale_p = m1 * std::abs(v1) + m2 * std::abs(v2) + 1.0;
    EXPECT_LE(std::abs((m1 * p1 + m2 * p2) - (m1 * v1 + m2 * v2)), 1e-12 * scale_p);
    const double e_pre = 0.5 * (m1 * v1 * v1 + m2 * v2 * v2);
    const double e_post = 0.5 * (m1 * p1 * p1 + m2 * p2 * p2);
    EXPECT_LE(std::abs(e_post - e_pre), 1e-12 * (e_pre + 1.0));
  }
}

TEST(ElasticVelocities, RejectsNonPositiveMasses) {
  EXPECT_THROW(elastic_velocities(0.0, 1.0, 1.0, 0.0), NonPositiveMass);
  EXPECT_THROW(elastic_velocities(1.0, 1.0, -2.0, 0.0), NonPositiveMass);
}

// --------------------------------------------------------------------------
// Bouncing ball

TEST(BouncingBallModel, ParamsAreValidated) {
  EXPECT_THROW(bouncing_ball({-1.0, 0.7, 9.81}, BouncingBallVariant::Safe),
               std::invalid_argument);
  EXPECT_THROW(bouncing_ball({3.0, 0.0, 9.81}, BouncingBallVariant::Safe),
               std::invalid_argument);
  EXPECT_THROW(bouncing_ball({3.0, 1.0, 9.81}, BouncingBallVariant::Safe),
               std::invalid_argument);
  EXPECT_THROW(bouncing_ball({3.0, 0.7, 0.0}, BouncingBallVariant::Safe),
               std::invalid_argument);
}

TEST(BouncingBallModel, VariantsDifferOnlyWhereTheyShould) {
  const HybridModel naive = bouncing_ball({}, BouncingBallVariant::UnsafeNaive);
  const HybridModel safe = bouncing_ball({}, BouncingBallVariant::Safe);
  const HybridModel bare = bouncing_ball({}, BouncingBallVariant::SafeNoLimboHandler);
  for (const HybridModel* m : {&naive, &safe, &bare}) {
    EXPECT_NO_THROW(m->validate());
    EXPECT_EQ(m->variable_names, (std::vector<std::string>{"h", "v"}));
    ASSERT_EQ(m->detectors.size(), 1u);
    EXPECT_EQ(m->detectors[0].config.id, "ball-ground");
    EXPECT_EQ(m->initial_state, (StateVec{3.0, 0.0}));
  }
  EXPECT_TRUE(naive.detectors[0].config.is_naive());
  EXPECT_TRUE(safe.detectors[0].config.is_safe());
  EXPECT_TRUE(bare.detectors[0].config.is_safe());
  EXPECT_EQ(naive.modes.size(), 1u);
  EXPECT_EQ(safe.modes.size(), 2u);  // falling + rest
  EXPECT_EQ(bare.modes.size(), 1u);
  EXPECT_EQ(naive.limbo_handlers.size(), 0u);
  EXPECT_EQ(safe.limbo_handlers.count("ball-ground"), 1u);
  EXPECT_EQ(bare.limbo_handlers.size(), 0u);
}

TEST(BouncingBallModel, DynamicsGuardAndActionMatchTheSetup) {
  const HybridModel m = bouncing_ball({}, BouncingBallVariant::Safe);
  const StateVec f = m.modes[0].dynamics(0.0, {3.0, -2.0});
  EXPECT_EQ(f[0], -2.0);
  EXPECT_EQ(f[1], -9.81);
  const StateVec r = m.modes[1].dynamics(0.0, {3.0, -2.0});
  EXPECT_EQ(r[0], 0.0);
  EXPECT_EQ(r[1], 0.0);

  EXPECT_EQ(m.detectors[0].guard(0.0, {1.25, -5.0}), 1.25);
  const auto asg = m.detectors[0].action.apply(0.0, {0.0, -7.0});
  ASSERT_EQ(asg.size(), 1u);
  EXPECT_EQ(asg[0].var, 1u);
  EXPECT_DOUBLE_EQ(asg[0].value, 4.9);  // -0.7 * -7
}

// Drop from h0 in vacuum: first impact at sqrt(2*h0/g), independent of the
// detector flavor.
TEST(BouncingBallModel, FirstBounceMatchesTheClosedForm) {
  const HybridModel m = bouncing_ball({}, BouncingBallVariant::Safe);
  EngineConfig cfg;
  cfg.t_end = 1.0;
  const SimOutcome out = simulate(m, cfg);
  const TraceEvent* bounce = nullptr;
  for (const auto& ev : out.trace.events) {
    if (ev.kind == EventKind::ZeroCrossing) {
      bounce = &ev;
      break;
    }
  }
  ASSERT_NE(bounce, nullptr);
  EXPECT_NEAR(bounce->time, 0.78196, 1e-3);
  EXPECT_NEAR(bounce->time, std::sqrt(2.0 * 3.0 / 9.81), 1e-8);
  ASSERT_EQ(bounce->writes.size(), 1u);
  EXPECT_NEAR(bounce->writes[0].post, 5.3704, 1e-3);
}

// Impact speeds decay geometrically with the restitution factor: the rebound
// write is exactly -c times the incoming velocity, and the ball returns to
// the floor with the speed it left at.
TEST(BouncingBallModel, ImpactSpeedsDecayGeometrically) {
  const HybridModel m = bouncing_ball({}, BouncingBallVariant::Safe);
  EngineConfig cfg;
  cfg.t_end = 10.0;
  const SimOutcome out = simulate(m, cfg);
  std::vector<const TraceEvent*> bounces;
  for (const auto& ev : out.trace.events) {
    if (ev.kind == EventKind::ZeroCrossing) bounces.push_back(&ev);
  }
  ASSERT_GE(bounces.size(), 10u);
  for (std::size_t k = 0; k + 1 < 10; ++k) {
    const WriteRecord& w = bounces[k]->writes[0];
    EXPECT_LE(std::abs(w.post / -w.pre - 0.7), 1e-12);
    const WriteRecord& next = bounces[k + 1]->writes[0];
    EXPECT_NEAR(-next.pre, w.post, 1e-6);
  }
}

// --------------------------------------------------------------------------
// Three balls

TEST(ThreeBallsModel, ParamsAreValidated) {
  ThreeBallsParams p;
  p.b2.m = 0.0;
  EXPECT_THROW(three_balls(p, ThreeBallsVariant::Safe), NonPositiveMass);
  p = ThreeBallsParams{};
  p.b3.r = -0.5;
  EXPECT_THROW(three_balls(p, ThreeBallsVariant::Safe), std::invalid_argument);
  p = ThreeBallsParams{};
  p.b1.x0 = -1.4;  // starts overlapping the middle ball
  EXPECT_THROW(three_balls(p, ThreeBallsVariant::Safe), std::invalid_argument);
}

TEST(ThreeBallsModel, ShapeAndHandlersPerVariant) {
  const HybridModel naive = three_balls({}, ThreeBallsVariant::UnsafeOrdered);
  const HybridModel safe = three_balls({}, ThreeBallsVariant::Safe);
  const HybridModel combined = three_balls({}, ThreeBallsVariant::SafeWithCombinedHandler);
  for (const HybridModel* m : {&naive, &safe, &combined}) {
    EXPECT_NO_THROW(m->validate());
    EXPECT_EQ(m->n_states(), 6u);
    ASSERT_EQ(m->detectors.size(), 2u);
    EXPECT_EQ(m->detectors[0].config.id, "b1-b2");
    EXPECT_EQ(m->detectors[1].config.id, "b2-b3");
    EXPECT_EQ(m->initial_state, (StateVec{-5.0, 1.0, 0.0, 0.0, 5.0, -1.0}));
  }
  EXPECT_TRUE(naive.detectors[0].config.is_naive());
  EXPECT_TRUE(safe.detectors[0].config.is_safe());
  EXPECT_EQ(safe.combined_handlers.size(), 0u);
  EXPECT_EQ(combined.combined_handlers.count({"b1-b2", "b2-b3"}), 1u);
}

TEST(ThreeBallsModel, GuardsMeasureSurfaceSeparation) {
  const HybridModel m = three_balls({}, ThreeBallsVariant::Safe);
  const StateVec x0 = m.initial_state;
  EXPECT_DOUBLE_EQ(m.detectors[0].guard(0.0, x0), 3.5);  // 5 apart, radii 0.5+1.0
  EXPECT_DOUBLE_EQ(m.detectors[1].guard(0.0, x0), 3.5);
  // Touching surfaces means a zero guard.
  EXPECT_DOUBLE_EQ(m.detectors[0].guard(0.0, {-1.5, 1.0, 0.0, 0.0, 5.0, -1.0}), 0.0);
}

TEST(ThreeBallsModel, PairActionsApplyTheElasticImpact) {
  const HybridModel m = three_balls({}, ThreeBallsVariant::Safe);
  const StateVec pre = {-1.5, 1.0, 0.0, 0.0, 1.5, -1.0};
  const auto asg12 = m.detectors[0].action.apply(3.5, pre);
  ASSERT_EQ(asg12.size(), 2u);
  EXPECT_DOUBLE_EQ(asg12[0].value, -1.0 / 3.0);
  EXPECT_DOUBLE_EQ(asg12[1].value, 2.0 / 3.0);
  const auto asg23 = m.detectors[1].action.apply(3.5, pre);
  ASSERT_EQ(asg23.size(), 2u);
  EXPECT_DOUBLE_EQ(asg23[0].value, -2.0 / 3.0);
  EXPECT_DOUBLE_EQ(asg23[1].value, 1.0 / 3.0);
}

// Shifting the first ball closer separates the two impacts in time; the
// collisions then happen strictly one after another and the outcome is the
// chain b1->b2 at t=3.3, b2->b3 at t=3.42, b2->b1 again at t=4.5.
TEST(ThreeBallsModel, AsymmetricSetupCollidesSequentially) {
  ThreeBallsParams p;
  p.b1.x0 = -4.8;
  const HybridModel m = three_balls(p, ThreeBallsVariant::UnsafeOrdered);
  EngineConfig cfg;
  cfg.t_end = 4.0;
  cfg.safety = SafetyMode::UnsafeMode;
  const SimOutcome out = simulate(m, cfg);
  ASSERT_TRUE(out.reached_t_end());

  std::vector<const TraceEvent*> hits;
  for (const auto& ev : out.trace.events) {
    if (ev.kind == EventKind::ZeroCrossing) hits.push_back(&ev);
  }
  ASSERT_EQ(hits.size(), 2u);
  EXPECT_EQ(hits[0]->source, "b1-b2");
  EXPECT_NEAR(hits[0]->time, 3.3, 2e-3);
  EXPECT_EQ(hits[1]->source, "b2-b3");
  EXPECT_NEAR(hits[1]->time, 3.42, 2e-3);

  const TraceSample& last = out.trace.samples.back();
  EXPECT_DOUBLE_EQ(last.state[1], -1.0 / 3.0);
  EXPECT_DOUBLE_EQ(last.state[3], -4.0 / 9.0);
  EXPECT_DOUBLE_EQ(last.state[5], 11.0 / 9.0);
}

TEST(ThreeBallsModel, ThirdCollisionArrivesLater) {
  ThreeBallsParams p;
  p.b1.x0 = -4.8;
  const HybridModel m = three_balls(p, ThreeBallsVariant::UnsafeOrdered);
  EngineConfig cfg;
  cfg.t_end = 5.0;
  cfg.safety = SafetyMode::UnsafeMode;
  const SimOutcome out = simulate(m, cfg);
  ASSERT_TRUE(out.reached_t_end());
  std::vector<const TraceEvent*> hits;
  for (const auto& ev : out.trace.events) {
    if (ev.kind == EventKind::ZeroCrossing) hits.push_back(&ev);
  }
  ASSERT_EQ(hits.size(), 3u);
  EXPECT_EQ(hits[2]->source, "b1-b2");
  // The 1/9 closing speed amplifies the per-event overshoot jitter, so the
  // window is loose; what matters is that it falls beyond t=4.
  EXPECT_GT(hits[2]->time, 4.0);
  EXPECT_NEAR(hits[2]->time, 4.5, 5e-2);
}

// --------------------------------------------------------------------------
// Registry

TEST(ModelRegistry, CatalogListsBothModels) {
  const auto& catalog = model_catalog();
  ASSERT_EQ(catalog.size(), 2u);
  EXPECT_EQ(catalog[0].name, "bouncing-ball");
  EXPECT_EQ(catalog[0].variants.size(), 3u);
  EXPECT_EQ(catalog[1].name, "three-balls");
  EXPECT_EQ(catalog[1].variants.size(), 3u);
}

TEST(ModelRegistry, VariantSafetyIsPartOfTheContract) {
  EXPECT_EQ(variant_safety("bouncing-ball", "unsafe-naive"), SafetyMode::UnsafeMode);
  EXPECT_EQ(variant_safety("bouncing-ball", "safe"), SafetyMode::SafeMode);
  EXPECT_EQ(variant_safety("bouncing-ball", "safe-no-limbo"), SafetyMode::SafeMode);
  EXPECT_EQ(variant_safety("three-balls", "unsafe-ordered"), SafetyMode::UnsafeMode);
  EXPECT_EQ(variant_safety("three-balls", "safe-combined"), SafetyMode::SafeMode);
  EXPECT_THROW(variant_safety("bouncing-ball", "nope"), std::invalid_argument);
  EXPECT_THROW(variant_safety("nope", "safe"), std::invalid_argument);
}

TEST(ModelRegistry, BuildModelAppliesParameterOverrides) {
  const HybridModel ball = build_model("bouncing-ball", "safe", {{"h0", 5.0}, {"c", 0.5}});
  EXPECT_EQ(ball.initial_state[0], 5.0);
  const auto asg = ball.detectors[0].action.apply(0.0, {0.0, -2.0});
  EXPECT_DOUBLE_EQ(asg[0].value, 1.0);  // -0.5 * -2

  const HybridModel balls = build_model("three-balls", "safe", {{"b1.x0", -4.8}});
  EXPECT_EQ(balls.initial_state[0], -4.8);
  EXPECT_EQ(balls.initial_state[4], 5.0);
}

TEST(ModelRegistry, BuildModelRejectsUnknownNames) {
  EXPECT_THROW(build_model("no-such-model", "safe", {}), std::invalid_argument);
  EXPECT_THROW(build_model("bouncing-ball", "no-such-variant", {}), std::invalid_argument);
  EXPECT_THROW(build_model("bouncing-ball", "safe", {{"mass", 1.0}}), std::invalid_argument);
  EXPECT_THROW(build_model("three-balls", "safe", {{"b4.x0", 1.0}}), std::invalid_argument);
}

TEST(ModelRegistry, HelperLookupsWork) {
  const HybridModel m = bouncing_ball({}, BouncingBallVariant::Safe);
  EXPECT_EQ(m.mode_var_index(), 2u);
  EXPECT_EQ(m.variable_index("v"), std::optional<std::size_t>{1});
  EXPECT_EQ(m.variable_index("nope"), std::nullopt);
  EXPECT_NE(m.find_detector("ball-ground"), nullptr);
  EXPECT_EQ(m.find_detector("nope"), nullptr);
  EXPECT_EQ(m.detector_index("ball-ground"), std::optional<std::size_t>{0});
}

}  // namespace
