#pragma once

// Core vocabulary of the simulator: the state vector, trap errors, the
// simulator's own safe/limbo/unsafe status machine, and the recorded trace.
//
// The simulator is modeled as a state machine alongside the model it runs.
// Status transitions are total only over the four legal edges:
//
//   safe  --zero handled--> safe
//   safe  --limbo entered--> limbo
//   limbo --recovered--> safe
//   limbo --unsafe entered--> unsafe (terminal)
//
// Every other (status, event) pair throws IllegalTransition. In particular
// there is no single-step path from safe to unsafe.

#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace limbosim {

using StateVec = std::vector<double>;

inline bool is_finite(const StateVec& x) {
  for (double v : x) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

enum class TrapKind {
  UnsafeLevelCrossed,
  UnhandledSimultaneity,
  UnhandledLimbo,
  NonFiniteState,
};

inline std::string_view to_string(TrapKind k) {
  switch (k) {
    case TrapKind::UnsafeLevelCrossed: return "unsafe-level-crossed";
    case TrapKind::UnhandledSimultaneity: return "unhandled-simultaneity";
    case TrapKind::UnhandledLimbo: return "unhandled-limbo";
    case TrapKind::NonFiniteState: return "non-finite-state";
  }
  return "unknown";
}

/// Diagnostic payload of a trapped error.
struct TrapDetail {
  std::vector<std::string> detectors;  ///< offending detector / handler ids
  std::vector<std::size_t> variables;  ///< contested state variable indices
  std::string note;
};

/// A trapped simulation error: the simulation stopped itself on purpose,
/// with the offending condition identified, instead of producing garbage.
struct TrapError {
  TrapKind kind = TrapKind::NonFiniteState;
  double time = 0.0;  ///< offending condition time, not detection time
  TrapDetail detail;
};

enum class StatusTag { Safe, Limbo, Unsafe };

inline std::string_view to_string(StatusTag t) {
  switch (t) {
    case StatusTag::Safe: return "safe";
    case StatusTag::Limbo: return "limbo";
    case StatusTag::Unsafe: return "unsafe";
  }
  return "unknown";
}

/// Simulator status. limbo_since is populated iff tag == Limbo,
/// trap iff tag == Unsafe.
struct SimulatorStatus {
  StatusTag tag = StatusTag::Safe;
  std::optional<double> limbo_since;
  std::optional<TrapError> trap;

  static SimulatorStatus safe() { return {}; }
};

// Status machine events.
struct ZeroHandled {};
struct LimboEntered {
  double time = 0.0;
};
struct RecoveredSafe {};
struct UnsafeEntered {
  TrapError trap;
};

using StatusEvent = std::variant<ZeroHandled, LimboEntered, RecoveredSafe, UnsafeEntered>;

class IllegalTransition : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

inline std::string_view event_name(const StatusEvent& e) {
  if (std::holds_alternative<ZeroHandled>(e)) return "zero-handled";
  if (std::holds_alternative<LimboEntered>(e)) return "limbo-entered";
  if (std::holds_alternative<RecoveredSafe>(e)) return "recovered-safe";
  return "unsafe-entered";
}

/// Total over the four legal edges; throws IllegalTransition otherwise.
/// Unsafe is absorbing: every event from it throws.
inline SimulatorStatus transition(const SimulatorStatus& status, const StatusEvent& event) {
  auto illegal = [&]() -> IllegalTransition {
    std::string msg = "illegal status transition: ";
    msg += to_string(status.tag);
    msg += " on ";
    msg += event_name(event);
    return IllegalTransition(msg);
  };

  switch (status.tag) {
    case StatusTag::Safe:
      if (std::holds_alternative<ZeroHandled>(event)) return SimulatorStatus::safe();
      if (const auto* le = std::get_if<LimboEntered>(&event)) {
        SimulatorStatus next;
        next.tag = StatusTag::Limbo;
        next.limbo_since = le->time;
        return next;
      }
      throw illegal();
    case StatusTag::Limbo:
      if (std::holds_alternative<RecoveredSafe>(event)) return SimulatorStatus::safe();
      if (const auto* ue = std::get_if<UnsafeEntered>(&event)) {
        SimulatorStatus next;
        next.tag = StatusTag::Unsafe;
        next.trap = ue->trap;
        return next;
      }
      throw illegal();
    case StatusTag::Unsafe:
      throw illegal();
  }
  throw illegal();
}

// ---------------------------------------------------------------------------
// Trace recording

enum class EventKind {
  ZeroCrossing,
  LimboEntered,
  LimboHandled,
  LimboExited,
  RecoveredSafe,
  CombinedHandled,
  UnsafeLevel,
  SimultaneityConflict,
  UnhandledLimbo,
  NonFinite,
};

inline std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::ZeroCrossing: return "zero-crossing";
    case EventKind::LimboEntered: return "limbo-entered";
    case EventKind::LimboHandled: return "limbo-handled";
    case EventKind::LimboExited: return "limbo-exited";
    case EventKind::RecoveredSafe: return "recovered-safe";
    case EventKind::CombinedHandled: return "combined-handled";
    case EventKind::UnsafeLevel: return "unsafe-level";
    case EventKind::SimultaneityConflict: return "simultaneity-conflict";
    case EventKind::UnhandledLimbo: return "unhandled-limbo";
    case EventKind::NonFinite: return "non-finite";
  }
  return "unknown";
}

/// One discrete write performed by an event action. Chained writes at the
/// same instant record the value each write actually replaced.
struct WriteRecord {
  std::size_t var = 0;  ///< state index, or n_states for the mode pseudo-variable
  double pre = 0.0;
  double post = 0.0;
};

struct TraceEvent {
  double time = 0.0;
  EventKind kind = EventKind::ZeroCrossing;
  std::string source;  ///< detector or handler id
  std::vector<WriteRecord> writes;
  std::string note;
};

struct TraceSample {
  double time = 0.0;
  StateVec state;
  StatusTag status = StatusTag::Safe;
  std::size_t mode = 0;
};

class TimeRegression : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Recorded run history. Sample times are nondecreasing; a repeated time is
/// allowed exactly once in a row (the pre/post pair around a discrete event).
struct Trace {
  std::vector<TraceSample> samples;
  std::vector<TraceEvent> events;

  void record(double time, StateVec state, StatusTag status, std::size_t mode) {
    if (!samples.empty()) {
      const double last = samples.back().time;
      if (time < last) {
        throw TimeRegression("trace sample time regressed from " + std::to_string(last) +
                             " to " + std::to_string(time));
      }
      if (time == last) {
        const std::size_t n = samples.size();
        if (n >= 2 && samples[n - 2].time == last) {
          throw TimeRegression("more than one pre/post sample pair at t=" +
                               std::to_string(time));
        }
      }
      if (state.size() != samples.back().state.size()) {
        throw std::logic_error("trace sample dimension changed mid-run");
      }
    }
    if (!is_finite(state)) {
      throw std::logic_error("attempted to record a non-finite trace sample");
    }
    samples.push_back(TraceSample{time, std::move(state), status, mode});
  }

  void log(TraceEvent ev) {
    if (!events.empty() && ev.time < events.back().time) {
      throw TimeRegression("trace event time regressed");
    }
    events.push_back(std::move(ev));
  }
};

/// Replay-style structural check; returns a description of the first
/// violation, or nullopt if the trace is well formed.
inline std::optional<std::string> validate_trace(const Trace& trace) {
  const auto& s = trace.samples;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!is_finite(s[i].state)) return "non-finite state at sample " + std::to_string(i);
    if (i == 0) continue;
    if (s[i].time < s[i - 1].time) return "sample time regression at index " + std::to_string(i);
    if (s[i].time == s[i - 1].time) {
      if (i >= 2 && s[i - 2].time == s[i].time) {
        return "three samples share t=" + std::to_string(s[i].time);
      }
      bool has_event = false;
      for (const auto& ev : trace.events) {
        if (ev.time == s[i].time) {
          has_event = true;
          break;
        }
      }
      if (!has_event) {
        return "pre/post sample pair without an event at t=" + std::to_string(s[i].time);
      }
    }
  }
  // Discrete writes must be reflected as the discontinuity between the pre
  // and post samples at their instant: for each written variable, the first
  // write starts from the pre sample and the last write lands on the post
  // sample (intermediate values belong to the chain, not to samples).
  for (std::size_t i = 1; i < s.size(); ++i) {
    if (s[i].time != s[i - 1].time) continue;
    const TraceSample& pre = s[i - 1];
    const TraceSample& post = s[i];
    std::vector<const WriteRecord*> first(post.state.size(), nullptr);
    std::vector<const WriteRecord*> last(post.state.size(), nullptr);
    for (const auto& ev : trace.events) {
      if (ev.time != pre.time) continue;
      for (const auto& w : ev.writes) {
        if (w.var >= post.state.size()) continue;  // mode pseudo-variable
        if (!first[w.var]) first[w.var] = &w;
        last[w.var] = &w;
      }
    }
    for (std::size_t v = 0; v < post.state.size(); ++v) {
      if (!first[v]) continue;
      if (first[v]->pre != pre.state[v]) {
        return "first write to variable " + std::to_string(v) +
               " does not start from the pre sample at t=" + std::to_string(pre.time);
      }
      if (last[v]->post != post.state[v]) {
        return "post sample does not reflect the last write to variable " +
               std::to_string(v) + " at t=" + std::to_string(pre.time);
      }
    }
  }
  for (const auto& ev : trace.events) {
    if (ev.writes.empty()) continue;
    bool paired = false;
    for (std::size_t i = 1; i < s.size(); ++i) {
      if (s[i].time == ev.time && s[i - 1].time == ev.time) {
        paired = true;
        break;
      }
    }
    if (!paired) return "event with writes has no sample pair at t=" + std::to_string(ev.time);
  }
  return std::nullopt;
}

}  // namespace limbosim
