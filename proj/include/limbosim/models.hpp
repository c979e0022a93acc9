#pragma once

// Built-in models. Both are small enough to reason about by hand and each
// one exists to exercise a specific failure mode of event handling:
//
//  * bouncing-ball: a ball dropped from h0 losing a fraction of its speed at
//    every bounce. The bounce times form a geometric (Zeno-like) sequence,
//    so any fixed re-arm threshold is eventually larger than the rebound and
//    a naive detector stops seeing the floor: the ball tunnels through. The
//    safe variant rests the ball from the limbo region instead.
//
//  * three-balls: three balls on a line; the outer two hit the middle one at
//    the same instant when the setup is symmetric. Both collision actions
//    want to write the middle ball's velocity, so the pair of simultaneous
//    events has no order-independent meaning. Variants: trap the conflict,
//    resolve it with a combined handler, or apply both actions in a chosen
//    order and silently get order-dependent physics.

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "limbosim/engine.hpp"
#include "limbosim/model.hpp"

namespace limbosim {

class NonPositiveMass : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Post-collision velocities of a one-dimensional perfectly elastic impact.
/// Computed in a factored form that conserves momentum and kinetic energy to
/// rounding and makes the equal-mass case an exact velocity exchange.
inline std::pair<double, double> elastic_velocities(double m1, double v1, double m2, double v2) {
  if (!(m1 > 0) || !(m2 > 0)) {
    throw NonPositiveMass("elastic_velocities: masses must be positive");
  }
  const double sum = m1 + m2;
  const double v1p = v2 * (2.0 * m2 / sum) + v1 * ((m1 - m2) / sum);
  const double v2p = v1 * (2.0 * m1 / sum) + v2 * ((m2 - m1) / sum);
  return {v1p, v2p};
}

/// Detector level geometry shared by the built-in models.
struct DetectorLevels {
  double limbo_offset = 1e-4;
  double unsafe_offset = 1e-2;
  double arm_threshold = 1e-7;  ///< naive variants only
};

// ---------------------------------------------------------------------------
// Bouncing ball

struct BouncingBallParams {
  double h0 = 3.0;   ///< drop height
  double c = 0.7;    ///< restitution
  double g = 9.81;   ///< gravity

  void validate() const {
    if (!(h0 > 0)) throw std::invalid_argument("bouncing-ball: h0 must be positive");
    if (!(c > 0) || !(c < 1)) throw std::invalid_argument("bouncing-ball: c must be in (0, 1)");
    if (!(g > 0)) throw std::invalid_argument("bouncing-ball: g must be positive");
  }
};

enum class BouncingBallVariant {
  UnsafeNaive,       ///< single-level detector with arming hysteresis
  Safe,              ///< three levels plus a limbo handler that rests the ball
  SafeNoLimboHandler ///< three levels, nobody recovers: the unsafe level trips
};

inline HybridModel bouncing_ball(const BouncingBallParams& p,
                                 BouncingBallVariant variant,
                                 const DetectorLevels& levels = {}) {
  p.validate();
  HybridModel m;
  m.name = "bouncing-ball";
  m.variable_names = {"h", "v"};
  const double g = p.g;
  m.modes.push_back(ModeDef{"falling", [g](double, const StateVec& x) {
                              return StateVec{x[1], -g};
                            }});
  Detector ground;
  ground.config.id = "ball-ground";
  ground.config.level = 0.0;
  ground.config.direction = Direction::Falling;
  if (variant == BouncingBallVariant::UnsafeNaive) {
    ground.config.kind = NaiveKind{levels.arm_threshold};
  } else {
    ground.config.kind = SafeKind{levels.limbo_offset, levels.unsafe_offset};
  }
  ground.guard = [](double, const StateVec& x) { return x[0]; };
  const double c = p.c;
  ground.action.reads = {1};
  ground.action.writes = {1};
  ground.action.apply = [c](double, const StateVec& pre) {
    return std::vector<Assignment>{{1, -c * pre[1]}};
  };
  m.detectors.push_back(std::move(ground));
  if (variant == BouncingBallVariant::Safe) {
    m.modes.push_back(ModeDef{"rest", [](double, const StateVec&) {
                                return StateVec{0.0, 0.0};
                              }});
    // Rebounds too small to detect mean the ball is done bouncing: kill the
    // velocity and freeze it where it is.
    EventAction rest;
    rest.reads = {};
    rest.writes = {1, m.mode_var_index()};
    const std::size_t mode_var = m.mode_var_index();
    rest.apply = [mode_var](double, const StateVec&) {
      return std::vector<Assignment>{{1, 0.0}, {mode_var, 1.0}};
    };
    m.limbo_handlers.emplace("ball-ground", std::move(rest));
  }
  m.initial_state = {p.h0, 0.0};
  m.initial_mode = 0;
  return m;
}

// ---------------------------------------------------------------------------
// Three balls

struct BallParams {
  double x0 = 0.0;
  double v0 = 0.0;
  double m = 1.0;
  double r = 0.5;
};

struct ThreeBallsParams {
  BallParams b1{-5.0, 1.0, 1.0, 0.5};
  BallParams b2{0.0, 0.0, 2.0, 1.0};
  BallParams b3{5.0, -1.0, 1.0, 0.5};

  void validate() const {
    for (const BallParams* b : {&b1, &b2, &b3}) {
      if (!(b->m > 0)) throw NonPositiveMass("three-balls: masses must be positive");
      if (!(b->r > 0)) throw std::invalid_argument("three-balls: radii must be positive");
    }
    if (!(b2.x0 - b1.x0 > b1.r + b2.r) || !(b3.x0 - b2.x0 > b2.r + b3.r)) {
      throw std::invalid_argument("three-balls: balls must start separated in order 1 < 2 < 3");
    }
  }
};

enum class ThreeBallsVariant {
  UnsafeOrdered,           ///< naive detectors, order-dependent sequential writes
  Safe,                    ///< three-level detectors, conflicts trap
  SafeWithCombinedHandler  ///< like Safe, plus a handler for the joint impact
};

inline HybridModel three_balls(const ThreeBallsParams& p,
                               ThreeBallsVariant variant,
                               const DetectorLevels& levels = {}) {
  p.validate();
  HybridModel m;
  m.name = "three-balls";
  m.variable_names = {"b1.x", "b1.v", "b2.x", "b2.v", "b3.x", "b3.v"};
  m.modes.push_back(ModeDef{"coasting", [](double, const StateVec& x) {
                              return StateVec{x[1], 0.0, x[3], 0.0, x[5], 0.0};
                            }});
  const bool naive = variant == ThreeBallsVariant::UnsafeOrdered;
  auto make_kind = [&]() -> DetectorKind {
    if (naive) return NaiveKind{levels.arm_threshold};
    return SafeKind{levels.limbo_offset, levels.unsafe_offset};
  };

  const double m1 = p.b1.m, m2 = p.b2.m, m3 = p.b3.m;
  const double gap12 = p.b1.r + p.b2.r;
  const double gap23 = p.b2.r + p.b3.r;

  Detector d12;
  d12.config.id = "b1-b2";
  d12.config.direction = Direction::Falling;
  d12.config.kind = make_kind();
  d12.guard = [gap12](double, const StateVec& x) { return (x[2] - x[0]) - gap12; };
  d12.action.reads = {1, 3};
  d12.action.writes = {1, 3};
  d12.action.apply = [m1, m2](double, const StateVec& pre) {
    const auto [v1p, v2p] = elastic_velocities(m1, pre[1], m2, pre[3]);
    return std::vector<Assignment>{{1, v1p}, {3, v2p}};
  };
  m.detectors.push_back(std::move(d12));

  Detector d23;
  d23.config.id = "b2-b3";
  d23.config.direction = Direction::Falling;
  d23.config.kind = make_kind();
  d23.guard = [gap23](double, const StateVec& x) { return (x[4] - x[2]) - gap23; };
  d23.action.reads = {3, 5};
  d23.action.writes = {3, 5};
  d23.action.apply = [m2, m3](double, const StateVec& pre) {
    const auto [v2p, v3p] = elastic_velocities(m2, pre[3], m3, pre[5]);
    return std::vector<Assignment>{{3, v2p}, {5, v3p}};
  };
  m.detectors.push_back(std::move(d23));

  if (variant == ThreeBallsVariant::SafeWithCombinedHandler) {
    // Joint impact of both outer balls on the middle one at the same instant.
    // For the symmetric setup the middle ball stays put and the outer balls
    // rebound with reversed velocities.
    EventAction joint;
    joint.reads = {1, 3, 5};
    joint.writes = {1, 3, 5};
    joint.apply = [](double, const StateVec& pre) {
      return std::vector<Assignment>{{1, -pre[1]}, {3, pre[3]}, {5, -pre[5]}};
    };
    m.combined_handlers.emplace(std::vector<std::string>{"b1-b2", "b2-b3"}, std::move(joint));
  }

  m.initial_state = {p.b1.x0, p.b1.v0, p.b2.x0, p.b2.v0, p.b3.x0, p.b3.v0};
  m.initial_mode = 0;
  return m;
}

// ---------------------------------------------------------------------------
// Registry used by the command line tool and the end-to-end tests

struct VariantInfo {
  std::string name;
  SafetyMode safety = SafetyMode::SafeMode;
  std::string summary;
};

struct ModelInfo {
  std::string name;
  std::string summary;
  std::vector<VariantInfo> variants;
  std::vector<std::string> params;
};

inline const std::vector<ModelInfo>& model_catalog() {
  static const std::vector<ModelInfo> catalog = {
      ModelInfo{
          "bouncing-ball",
          "ball dropped from h0; loses a fraction c of its speed per bounce",
          {
              VariantInfo{"unsafe-naive", SafetyMode::UnsafeMode,
                          "single-level detector; decaying rebounds tunnel through the floor"},
              VariantInfo{"safe", SafetyMode::SafeMode,
                          "three-level detector with a limbo handler that rests the ball"},
              VariantInfo{"safe-no-limbo", SafetyMode::SafeMode,
                          "three-level detector, no recovery: traps at the unsafe level"},
          },
          {"h0", "c", "g"},
      },
      ModelInfo{
          "three-balls",
          "three balls on a line; symmetric setups collide simultaneously",
          {
              VariantInfo{"unsafe-ordered", SafetyMode::UnsafeMode,
                          "simultaneous impacts applied sequentially in event order"},
              VariantInfo{"safe", SafetyMode::SafeMode,
                          "conflicting simultaneous impacts trap the run"},
              VariantInfo{"safe-combined", SafetyMode::SafeMode,
                          "combined handler resolves the joint impact"},
          },
          {"b1.x0", "b1.v0", "b1.m", "b1.r", "b2.x0", "b2.v0", "b2.m", "b2.r", "b3.x0", "b3.v0",
           "b3.m", "b3.r"},
      },
  };
  return catalog;
}

inline SafetyMode variant_safety(const std::string& model, const std::string& variant) {
  for (const auto& info : model_catalog()) {
    if (info.name != model) continue;
    for (const auto& v : info.variants) {
      if (v.name == variant) return v.safety;
    }
    throw std::invalid_argument("unknown variant '" + variant + "' for model '" + model + "'");
  }
  throw std::invalid_argument("unknown model '" + model + "'");
}

/// Build a catalog model by name with parameter overrides.
inline HybridModel build_model(const std::string& model, const std::string& variant,
                               const std::map<std::string, double>& params,
                               const DetectorLevels& levels = {}) {
  auto take = [&params](std::map<std::string, double>& left, const std::string& key,
                        double& slot) {
    auto it = left.find(key);
    if (it != left.end()) {
      slot = it->second;
      left.erase(it);
    }
  };
  std::map<std::string, double> left = params;
  if (model == "bouncing-ball") {
    BouncingBallParams p;
    take(left, "h0", p.h0);
    take(left, "c", p.c);
    take(left, "g", p.g);
    if (!left.empty()) {
      throw std::invalid_argument("unknown parameter '" + left.begin()->first +
                                  "' for bouncing-ball (valid: h0, c, g)");
    }
    BouncingBallVariant v;
    if (variant == "unsafe-naive") {
      v = BouncingBallVariant::UnsafeNaive;
    } else if (variant == "safe") {
      v = BouncingBallVariant::Safe;
    } else if (variant == "safe-no-limbo") {
      v = BouncingBallVariant::SafeNoLimboHandler;
    } else {
      throw std::invalid_argument("unknown variant '" + variant + "' for bouncing-ball");
    }
    return bouncing_ball(p, v, levels);
  }
  if (model == "three-balls") {
    ThreeBallsParams p;
    auto take_ball = [&](const std::string& prefix, BallParams& b) {
      take(left, prefix + ".x0", b.x0);
      take(left, prefix + ".v0", b.v0);
      take(left, prefix + ".m", b.m);
      take(left, prefix + ".r", b.r);
    };
    take_ball("b1", p.b1);
    take_ball("b2", p.b2);
    take_ball("b3", p.b3);
    if (!left.empty()) {
      throw std::invalid_argument("unknown parameter '" + left.begin()->first +
                                  "' for three-balls (valid: bN.x0, bN.v0, bN.m, bN.r)");
    }
    ThreeBallsVariant v;
    if (variant == "unsafe-ordered") {
      v = ThreeBallsVariant::UnsafeOrdered;
    } else if (variant == "safe") {
      v = ThreeBallsVariant::Safe;
    } else if (variant == "safe-combined") {
      v = ThreeBallsVariant::SafeWithCombinedHandler;
    } else {
      throw std::invalid_argument("unknown variant '" + variant + "' for three-balls");
    }
    return three_balls(p, v, levels);
  }
  throw std::invalid_argument("unknown model '" + model + "'");
}

}  // namespace limbosim
