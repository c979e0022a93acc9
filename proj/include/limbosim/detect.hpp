#pragma once

// Zero-crossing detectors.
//
// Two kinds are provided on purpose:
//
//  * NaiveKind reproduces the classic single-threshold detector with arming
//    hysteresis. It fires when the armed guard crosses the zero level within
//    a step, disarms, and re-arms only once the guard has moved back past
//    level + arm_threshold. When the model's rebounds decay geometrically the
//    rebound eventually stays below the re-arm threshold, the detector stays
//    disarmed, and the trajectory tunnels straight through the surface. The
//    failure is silent by construction; it is kept here so the engine can
//    demonstrate and then trap it.
//
//  * SafeKind layers three thresholds along the crossing direction: the zero
//    level itself, a limbo level at zero -/+ limbo_offset, and an unsafe
//    level at zero -/+ (limbo_offset + unsafe_offset). A trajectory that
//    slips past the zero level without being handled must still cross the
//    limbo level (warn, try to recover) and, failing that, the unsafe level
//    (hard stop). Tunneling becomes impossible to miss: either the model
//    recovers in limbo or the run is trapped.
//
// Crossing predicates use strict inequality on the pre side and inclusive on
// the post side, so refining a step never invents or loses a crossing:
// check(a, c) on a monotone guard equals the concatenation of check(a, b) and
// check(b, c) for any interior b.

#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace limbosim {

enum class Direction { Falling, Rising };

/// Single-level detector with arming hysteresis.
struct NaiveKind {
  double arm_threshold = 1e-7;
};

/// Three-level detector: zero, limbo, unsafe along the crossing direction.
struct SafeKind {
  double limbo_offset = 1e-4;
  double unsafe_offset = 1e-2;
};

using DetectorKind = std::variant<NaiveKind, SafeKind>;

struct DetectorConfig {
  std::string id;
  double level = 0.0;
  Direction direction = Direction::Falling;
  DetectorKind kind = SafeKind{};

  bool is_naive() const { return std::holds_alternative<NaiveKind>(kind); }
  bool is_safe() const { return std::holds_alternative<SafeKind>(kind); }
  const NaiveKind& naive() const { return std::get<NaiveKind>(kind); }
  const SafeKind& safe() const { return std::get<SafeKind>(kind); }

  double zero_level() const { return level; }
  double limbo_level() const {
    const auto& k = safe();
    return direction == Direction::Falling ? level - k.limbo_offset : level + k.limbo_offset;
  }
  double unsafe_level() const {
    const auto& k = safe();
    return direction == Direction::Falling ? level - (k.limbo_offset + k.unsafe_offset)
                                           : level + (k.limbo_offset + k.unsafe_offset);
  }

  void validate() const {
    if (id.empty()) throw std::invalid_argument("detector id must not be empty");
    if (is_naive()) {
      if (!(naive().arm_threshold > 0)) {
        throw std::invalid_argument("detector '" + id + "': arm_threshold must be > 0");
      }
    } else {
      if (!(safe().limbo_offset > 0) || !(safe().unsafe_offset > 0)) {
        throw std::invalid_argument("detector '" + id +
                                    "': limbo_offset and unsafe_offset must be > 0");
      }
    }
  }
};

enum class Region { SafeRegion, LimboRegion, UnsafeRegion };

inline std::string_view to_string(Region r) {
  switch (r) {
    case Region::SafeRegion: return "safe";
    case Region::LimboRegion: return "limbo";
    case Region::UnsafeRegion: return "unsafe";
  }
  return "unknown";
}

/// Per-detector mutable state. armed is meaningful for NaiveKind,
/// region for SafeKind.
struct DetectorState {
  bool armed = true;
  Region region = Region::SafeRegion;
};

enum class CrossingEvent { ZeroCrossed, LimboEntered, UnsafeEntered, LimboExited };

inline std::string_view to_string(CrossingEvent e) {
  switch (e) {
    case CrossingEvent::ZeroCrossed: return "zero-crossed";
    case CrossingEvent::LimboEntered: return "limbo-entered";
    case CrossingEvent::UnsafeEntered: return "unsafe-entered";
    case CrossingEvent::LimboExited: return "limbo-exited";
  }
  return "unknown";
}

/// True when (pre, post) crosses the threshold in the given direction.
/// Strict on the pre side, inclusive on the post side.
inline bool crossed(Direction dir, double threshold, double pre, double post) {
  return dir == Direction::Falling ? (pre > threshold && post <= threshold)
                                   : (pre < threshold && post >= threshold);
}

/// Recovery crossing: back out of the region the detector guards against.
inline bool crossed_back(Direction dir, double threshold, double pre, double post) {
  return dir == Direction::Falling ? (pre <= threshold && post > threshold)
                                   : (pre >= threshold && post < threshold);
}

inline Region classify_region(double value, const DetectorConfig& cfg) {
  const auto& k = cfg.safe();
  if (cfg.direction == Direction::Falling) {
    if (value > cfg.level - k.limbo_offset) return Region::SafeRegion;
    if (value > cfg.level - (k.limbo_offset + k.unsafe_offset)) return Region::LimboRegion;
    return Region::UnsafeRegion;
  }
  if (value < cfg.level + k.limbo_offset) return Region::SafeRegion;
  if (value < cfg.level + (k.limbo_offset + k.unsafe_offset)) return Region::LimboRegion;
  return Region::UnsafeRegion;
}

/// Threshold crossings of a SafeKind detector over one step, ordered along
/// the direction of travel. A step that jumps several levels reports all of
/// them; moving back out of the limbo region reports LimboExited.
inline std::vector<CrossingEvent> check_safe(const DetectorConfig& cfg, double pre, double post) {
  std::vector<CrossingEvent> out;
  if (crossed(cfg.direction, cfg.zero_level(), pre, post)) out.push_back(CrossingEvent::ZeroCrossed);
  if (crossed(cfg.direction, cfg.limbo_level(), pre, post)) out.push_back(CrossingEvent::LimboEntered);
  if (crossed(cfg.direction, cfg.unsafe_level(), pre, post)) out.push_back(CrossingEvent::UnsafeEntered);
  if (crossed_back(cfg.direction, cfg.limbo_level(), pre, post)) out.push_back(CrossingEvent::LimboExited);
  return out;
}

struct NaiveCheck {
  bool fired = false;
  DetectorState state;
};

/// One step of the naive detector: fire iff armed and the zero level was
/// crossed; firing disarms; re-arm only past level -/+ arm_threshold.
inline NaiveCheck check_naive(const DetectorConfig& cfg, DetectorState st, double pre, double post) {
  const auto& k = cfg.naive();
  NaiveCheck out;
  const bool rearmed_value = cfg.direction == Direction::Falling
                                 ? post > cfg.level + k.arm_threshold
                                 : post < cfg.level - k.arm_threshold;
  if (st.armed && crossed(cfg.direction, cfg.level, pre, post)) {
    out.fired = true;
    st.armed = false;
  } else if (!st.armed && rearmed_value) {
    st.armed = true;
  }
  out.state = st;
  return out;
}

inline DetectorState initial_detector_state(const DetectorConfig& cfg, double initial_value) {
  DetectorState st;
  if (cfg.is_naive()) {
    st.armed = cfg.direction == Direction::Falling
                   ? initial_value > cfg.level + cfg.naive().arm_threshold
                   : initial_value < cfg.level - cfg.naive().arm_threshold;
  } else {
    st.region = classify_region(initial_value, cfg);
  }
  return st;
}

}  // namespace limbosim
