#pragma once

// The simulation engine. The engine itself runs as a state machine over
// {safe, limbo, unsafe} (see core.hpp) while it advances the model:
//
//  * SafeMode integrates on a fixed grid, localizes every threshold crossing
//    of every three-level detector by bisection, batches zero crossings that
//    land within simultaneity_tol of each other, and analyzes each batch
//    against the actions' declared read/write sets. Disjoint batches apply
//    independently; overlapping batches require a registered combined
//    handler; otherwise the batch is a conflict and the run traps instead of
//    silently picking an order.
//
//  * UnsafeMode deliberately reproduces the classic failure modes: events
//    are detected by endpoint sign checks only and applied at the step end
//    (so the trajectory visibly overshoots), limbo/unsafe levels are ignored,
//    and simultaneous actions are applied sequentially in event_order with
//    later writes overwriting earlier ones. Runs complete even when the
//    result is physically wrong; the comparison tools make the wrongness
//    observable.
//
// Discrete work at one instant is recorded as a pre/post sample pair.
// Actions applied at an instant may make other guards jump; the engine
// re-checks all detectors after each application round and fires the induced
// events at the same instant (in declaration order, or event_order in
// UnsafeMode), up to cascade_limit rounds before trapping.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "limbosim/core.hpp"
#include "limbosim/detect.hpp"
#include "limbosim/integrate.hpp"
#include "limbosim/model.hpp"

namespace limbosim {

enum class SafetyMode { SafeMode, UnsafeMode };

struct EngineConfig {
  StepConfig step;
  double t_end = 10.0;
  /// Zero crossings within this window of each other form one batch.
  double simultaneity_tol = 2e-9;
  /// Permutation of detector indices used by UnsafeMode (and by instant
  /// cascades in UnsafeMode); empty means declaration order.
  std::vector<std::size_t> event_order;
  SafetyMode safety = SafetyMode::SafeMode;
  /// Maximum rounds of induced events at a single instant.
  int cascade_limit = 100;

  void validate(std::size_t n_detectors) const {
    step.validate();
    if (!(t_end > 0) || !std::isfinite(t_end)) {
      throw std::invalid_argument("t_end must be positive and finite");
    }
    // Two crossings localized to within t_tol each can sit 2*t_tol apart and
    // still be the same instant; a smaller window would split them.
    if (!(simultaneity_tol >= 2.0 * step.t_tol)) {
      throw std::invalid_argument("simultaneity_tol must be at least 2*t_tol");
    }
    if (cascade_limit < 1) throw std::invalid_argument("cascade_limit must be at least 1");
    if (!event_order.empty()) {
      if (event_order.size() != n_detectors) {
        throw std::invalid_argument("event_order must permute all detector indices");
      }
      std::vector<bool> seen(n_detectors, false);
      for (std::size_t i : event_order) {
        if (i >= n_detectors || seen[i]) {
          throw std::invalid_argument("event_order is not a permutation");
        }
        seen[i] = true;
      }
    }
  }
};

class WriteSetViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

enum class BatchVerdictKind { Independent, CombinedHandled, Conflict };

struct BatchVerdict {
  BatchVerdictKind kind = BatchVerdictKind::Independent;
  std::vector<std::size_t> contested;  ///< variables with overlapping access
};

struct BatchMember {
  std::size_t detector = 0;  ///< index into model.detectors
  double t_star = 0.0;
};

struct EventBatch {
  double t_batch = 0.0;  ///< earliest member time; the batch applies here
  std::vector<BatchMember> members;
  BatchVerdict verdict;
};

inline std::vector<std::string> batch_ids(const std::vector<BatchMember>& members,
                                          const HybridModel& model) {
  std::vector<std::string> ids;
  ids.reserve(members.size());
  for (const auto& m : members) ids.push_back(model.detectors[m.detector].config.id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

/// Conflict analysis over declared access sets. A batch is independent iff
/// all pairwise write/write and write/read intersections are empty; this
/// holds regardless of whether a combined handler is also registered.
inline BatchVerdict analyze_batch(const std::vector<BatchMember>& members,
                                  const HybridModel& model) {
  BatchVerdict verdict;
  if (members.size() <= 1) return verdict;
  auto contains = [](const std::vector<std::size_t>& set, std::size_t v) {
    return std::find(set.begin(), set.end(), v) != set.end();
  };
  std::vector<std::size_t> contested;
  for (std::size_t i = 0; i < members.size(); ++i) {
    const EventAction& ai = model.detectors[members[i].detector].action;
    for (std::size_t j = i + 1; j < members.size(); ++j) {
      const EventAction& aj = model.detectors[members[j].detector].action;
      for (std::size_t w : ai.writes) {
        if (contains(aj.writes, w) || contains(aj.reads, w)) contested.push_back(w);
      }
      for (std::size_t w : aj.writes) {
        if (contains(ai.reads, w)) contested.push_back(w);
      }
    }
  }
  std::sort(contested.begin(), contested.end());
  contested.erase(std::unique(contested.begin(), contested.end()), contested.end());
  if (contested.empty()) return verdict;
  verdict.contested = std::move(contested);
  verdict.kind = model.combined_handlers.count(batch_ids(members, model))
                     ? BatchVerdictKind::CombinedHandled
                     : BatchVerdictKind::Conflict;
  return verdict;
}

/// Group time-sorted crossings into batches: a crossing joins the current
/// batch when it lies within tol of the batch's earliest member.
inline std::vector<EventBatch> batch_events(const std::vector<BatchMember>& crossings, double tol,
                                            const HybridModel& model) {
  for (std::size_t i = 1; i < crossings.size(); ++i) {
    if (crossings[i].t_star < crossings[i - 1].t_star) {
      throw std::invalid_argument("batch_events: crossings must be sorted by time");
    }
  }
  std::vector<EventBatch> batches;
  for (const auto& c : crossings) {
    if (batches.empty() || c.t_star - batches.back().t_batch > tol) {
      batches.push_back(EventBatch{c.t_star, {c}, {}});
    } else {
      batches.back().members.push_back(c);
    }
  }
  for (auto& b : batches) b.verdict = analyze_batch(b.members, model);
  return batches;
}

inline void enforce_write_set(const EventAction& action, const std::vector<Assignment>& asg,
                              const std::string& owner) {
  for (const auto& a : asg) {
    if (std::find(action.writes.begin(), action.writes.end(), a.var) == action.writes.end()) {
      throw WriteSetViolation(owner + " assigned variable " + std::to_string(a.var) +
                              " outside its declared write set");
    }
  }
}

namespace detail {

inline TrapError conflict_trap(const EventBatch& batch, const HybridModel& model) {
  TrapError err;
  err.kind = TrapKind::UnhandledSimultaneity;
  err.time = batch.t_batch;
  err.detail.detectors = batch_ids(batch.members, model);
  err.detail.variables = batch.verdict.contested;
  err.detail.note = "simultaneous events with conflicting access sets and no combined handler";
  return err;
}

}  // namespace detail

using BatchResolution = std::variant<std::vector<Assignment>, TrapError>;

/// Resolve a batch into assignments (all member actions read the same
/// pre-event state), or into the trap a conflicting batch deserves.
inline BatchResolution resolve_batch(const EventBatch& batch, const HybridModel& model, double t,
                                     const StateVec& pre_state) {
  switch (batch.verdict.kind) {
    case BatchVerdictKind::Conflict:
      return detail::conflict_trap(batch, model);
    case BatchVerdictKind::CombinedHandled: {
      const EventAction& handler = model.combined_handlers.at(batch_ids(batch.members, model));
      auto asg = handler.apply(t, pre_state);
      enforce_write_set(handler, asg, "combined handler");
      return asg;
    }
    case BatchVerdictKind::Independent: {
      std::vector<Assignment> all;
      for (const auto& m : batch.members) {
        const EventAction& action = model.detectors[m.detector].action;
        auto asg = action.apply(t, pre_state);
        enforce_write_set(action, asg,
                          "detector '" + model.detectors[m.detector].config.id + "' action");
        all.insert(all.end(), asg.begin(), asg.end());
      }
      return all;
    }
  }
  throw std::logic_error("unreachable batch verdict");
}

struct AppliedAction {
  std::size_t detector = 0;
  std::vector<Assignment> assignments;
};

/// UnsafeMode resolution: every member action reads the shared pre-state and
/// results are applied in the given detector order, later writes silently
/// overwriting earlier ones. This is the behavior a safe engine refuses to
/// pick implicitly.
inline std::vector<AppliedAction> apply_unsafe_order(const EventBatch& batch,
                                                     const HybridModel& model, double t,
                                                     const StateVec& pre_state,
                                                     const std::vector<std::size_t>& order) {
  std::vector<std::size_t> rank(model.detectors.size());
  if (order.empty()) {
    for (std::size_t i = 0; i < rank.size(); ++i) rank[i] = i;
  } else {
    for (std::size_t pos = 0; pos < order.size(); ++pos) rank[order[pos]] = pos;
  }
  std::vector<BatchMember> members = batch.members;
  std::stable_sort(members.begin(), members.end(), [&](const BatchMember& a, const BatchMember& b) {
    return rank[a.detector] < rank[b.detector];
  });
  std::vector<AppliedAction> out;
  out.reserve(members.size());
  for (const auto& m : members) {
    const EventAction& action = model.detectors[m.detector].action;
    auto asg = action.apply(t, pre_state);
    enforce_write_set(action, asg,
                      "detector '" + model.detectors[m.detector].config.id + "' action");
    out.push_back(AppliedAction{m.detector, std::move(asg)});
  }
  return out;
}

struct SimOutcome {
  Trace trace;
  std::optional<TrapError> trap;

  bool reached_t_end() const { return !trap.has_value(); }
};

namespace detail {

class SimRun {
 public:
  SimRun(const HybridModel& model, const EngineConfig& cfg) : model_(model), cfg_(cfg) {
    model_.validate();
    cfg_.validate(model_.detectors.size());
    x_ = model_.initial_state;
    mode_ = model_.initial_mode;
    dstate_.reserve(model_.detectors.size());
    for (const auto& d : model_.detectors) {
      dstate_.push_back(initial_detector_state(d.config, d.guard(0.0, x_)));
    }
  }

  SimOutcome run() {
    trace_.record(t_, x_, status_.tag, mode_);
    if (cfg_.safety == SafetyMode::SafeMode) {
      run_safe();
    } else {
      run_unsafe();
    }
    return SimOutcome{std::move(trace_), std::move(trap_)};
  }

 private:
  enum class CKind { Zero, LimboIn, UnsafeIn, LimboOut };

  struct Crossing {
    std::size_t det = 0;
    CKind kind = CKind::Zero;
    double t_star = 0.0;
  };

  // --- shared plumbing -----------------------------------------------------

  const DynamicsFn& dynamics() const { return model_.modes[mode_].dynamics; }

  double guard_at(std::size_t i, double t, const StateVec& x) const {
    return model_.detectors[i].guard(t, x);
  }

  std::vector<double> all_guards(double t, const StateVec& x) const {
    std::vector<double> g(model_.detectors.size());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = guard_at(i, t, x);
    return g;
  }

  double next_boundary() {
    const double dt = cfg_.step.dt;
    while ((double)(boundary_ + 1) * dt <= t_) ++boundary_;
    return std::min((double)(boundary_ + 1) * dt, cfg_.t_end);
  }

  void accept(const StepSegment& seg) {
    for (std::size_t i = 0; i < model_.detectors.size(); ++i) {
      const auto& det = model_.detectors[i];
      if (!det.config.is_naive()) continue;
      const double g0 = guard_at(i, seg.t0, seg.x0);
      const double g1 = guard_at(i, seg.t1, seg.x1);
      dstate_[i] = check_naive(det.config, dstate_[i], g0, g1).state;
    }
    t_ = seg.t1;
    x_ = seg.x1;
    trace_.record(t_, x_, status_.tag, mode_);
  }

  StateVec state_at(const StepSegment& seg, double t) const {
    return t == seg.t1 ? seg.x1 : interpolate(seg, t);
  }

  void set_mode(double value, const std::string& source) {
    const double rounded = std::nearbyint(value);
    if (!(rounded == value) || rounded < 0 || rounded >= (double)model_.modes.size()) {
      throw std::invalid_argument(source + " assigned an invalid mode id");
    }
    mode_ = (std::size_t)rounded;
  }

  /// Apply one action's assignments to the live state, recording the write
  /// chain. Returns false when the run trapped on a non-finite value.
  bool apply_action(const EventAction& action, EventKind kind, const std::string& source,
                    double t_ev, const StateVec& pre_state) {
    auto asg = action.apply(t_ev, pre_state);
    enforce_write_set(action, asg, source);
    for (const auto& a : asg) {
      if (!std::isfinite(a.value)) {
        TrapError err;
        err.kind = TrapKind::NonFiniteState;
        err.time = t_ev;
        err.detail.detectors = {source};
        err.detail.variables = {a.var};
        err.detail.note = "event action assigned a non-finite value";
        enter_trap(std::move(err), EventKind::NonFinite, source);
        return false;
      }
    }
    TraceEvent ev;
    ev.time = t_ev;
    ev.kind = kind;
    ev.source = source;
    for (const auto& a : asg) {
      WriteRecord w;
      w.var = a.var;
      w.post = a.value;
      if (a.var == model_.mode_var_index()) {
        w.pre = (double)mode_;
        set_mode(a.value, source);
      } else {
        w.pre = x_[a.var];
        x_[a.var] = a.value;
      }
      ev.writes.push_back(w);
    }
    trace_.log(std::move(ev));
    return true;
  }

  /// Route into unsafe via limbo if needed (there is no direct safe->unsafe
  /// edge), log the trap event, and close the trace with the unsafe sample.
  void enter_trap(TrapError err, EventKind kind, const std::string& source) {
    TraceEvent ev;
    ev.time = t_;
    ev.kind = kind;
    ev.source = source;
    ev.note = err.detail.note;
    trace_.log(std::move(ev));
    if (status_.tag == StatusTag::Safe) {
      status_ = transition(status_, LimboEntered{err.time});
    }
    TrapError copy = err;
    status_ = transition(status_, UnsafeEntered{std::move(copy)});
    const auto& s = trace_.samples;
    if (s.size() >= 2 && s.back().time == t_ && s[s.size() - 2].time == t_) {
      // A pre/post pair already closes this instant; retag the post sample.
      trace_.samples.back().status = StatusTag::Unsafe;
    } else {
      trace_.record(t_, x_, StatusTag::Unsafe, mode_);
    }
    trap_ = std::move(err);
  }

  void log_status(EventKind kind, const std::string& source, double t_ev,
                  std::string note = {}) {
    TraceEvent ev;
    ev.time = t_ev;
    ev.kind = kind;
    ev.source = source;
    ev.note = std::move(note);
    trace_.log(std::move(ev));
  }

  /// Limbo entry of one detector: status edge (when coming from safe) plus
  /// this detector's recovery handler, whose application itself recovers the
  /// run when the handled detector is the one holding it in limbo.
  bool handle_limbo_entry(std::size_t di, double t_ev) {
    const std::string& id = model_.detectors[di].config.id;
    if (status_.tag == StatusTag::Safe) {
      status_ = transition(status_, LimboEntered{t_ev});
      limbo_cause_ = id;
    }
    log_status(EventKind::LimboEntered, id, t_ev);
    auto it = model_.limbo_handlers.find(id);
    if (it == model_.limbo_handlers.end()) return true;
    if (!apply_action(it->second, EventKind::LimboHandled, id, t_ev, x_)) return false;
    if (status_.tag == StatusTag::Limbo && limbo_cause_ == id) {
      status_ = transition(status_, RecoveredSafe{});
      limbo_cause_.reset();
      log_status(EventKind::RecoveredSafe, id, t_ev);
    }
    return true;
  }

  /// After instant assignments, guards may have jumped across their levels.
  /// Fire the induced events at the same instant, round by round, until a
  /// fixpoint; trap when cascade_limit rounds are not enough.
  bool run_cascade(double t_ev, std::vector<double> g_prev) {
    const bool unsafe_engine = cfg_.safety == SafetyMode::UnsafeMode;
    for (int depth = 0;; ++depth) {
      std::vector<double> g_now = all_guards(t_ev, x_);
      std::vector<std::size_t> fires;
      std::vector<std::size_t> limbo_entries;
      for (std::size_t i = 0; i < model_.detectors.size(); ++i) {
        const auto& det = model_.detectors[i];
        if (det.config.is_naive()) {
          NaiveCheck nc = check_naive(det.config, dstate_[i], g_prev[i], g_now[i]);
          dstate_[i] = nc.state;
          if (nc.fired) fires.push_back(i);
          continue;
        }
        if (unsafe_engine) {
          if (crossed(det.config.direction, det.config.zero_level(), g_prev[i], g_now[i])) {
            fires.push_back(i);
          }
          continue;
        }
        for (CrossingEvent ce : check_safe(det.config, g_prev[i], g_now[i])) {
          switch (ce) {
            case CrossingEvent::ZeroCrossed:
              fires.push_back(i);
              break;
            case CrossingEvent::LimboEntered:
              limbo_entries.push_back(i);
              break;
            case CrossingEvent::UnsafeEntered: {
              TrapError err;
              err.kind = TrapKind::UnsafeLevelCrossed;
              err.time = t_ev;
              err.detail.detectors = {det.config.id};
              err.detail.note = "instant assignment jumped a guard across the unsafe level";
              enter_trap(std::move(err), EventKind::UnsafeLevel, det.config.id);
              return false;
            }
            case CrossingEvent::LimboExited:
              if (status_.tag == StatusTag::Limbo && limbo_cause_ == det.config.id) {
                log_status(EventKind::LimboExited, det.config.id, t_ev);
                status_ = transition(status_, RecoveredSafe{});
                limbo_cause_.reset();
                log_status(EventKind::RecoveredSafe, det.config.id, t_ev);
              }
              break;
          }
        }
      }
      if (fires.empty() && limbo_entries.empty()) return true;
      if (depth >= cfg_.cascade_limit) {
        TrapError err;
        err.kind = TrapKind::NonFiniteState;
        err.time = t_ev;
        err.detail.detectors = batch_ids(to_members(fires, t_ev), model_);
        err.detail.note = "event cascade exceeded the per-instant limit";
        enter_trap(std::move(err), EventKind::NonFinite, "cascade");
        return false;
      }
      if (!fires.empty() && !cfg_.event_order.empty() && unsafe_engine) {
        std::vector<std::size_t> rank(model_.detectors.size());
        for (std::size_t pos = 0; pos < cfg_.event_order.size(); ++pos) {
          rank[cfg_.event_order[pos]] = pos;
        }
        std::sort(fires.begin(), fires.end(),
                  [&](std::size_t a, std::size_t b) { return rank[a] < rank[b]; });
      }
      // All actions of one round read the state the round started from.
      const StateVec round_pre = x_;
      for (std::size_t di : fires) {
        const auto& det = model_.detectors[di];
        if (!apply_action(det.action, EventKind::ZeroCrossing, det.config.id, t_ev, round_pre)) {
          return false;
        }
        if (det.config.is_naive()) dstate_[di].armed = false;
        if (status_.tag == StatusTag::Safe) status_ = transition(status_, ZeroHandled{});
      }
      for (std::size_t di : limbo_entries) {
        if (!handle_limbo_entry(di, t_ev)) return false;
      }
      g_prev = std::move(g_now);
    }
  }

  std::vector<BatchMember> to_members(const std::vector<std::size_t>& dets, double t_ev) const {
    std::vector<BatchMember> ms;
    ms.reserve(dets.size());
    for (std::size_t d : dets) ms.push_back(BatchMember{d, t_ev});
    return ms;
  }

  /// Bisect the largest finite prefix of a step that blew up, then trap.
  void trap_nonfinite(const StepSegment& seg) {
    double lo = 0.0;
    double hi = seg.t1 - seg.t0;
    StateVec x_last = seg.x0;
    const DynamicsFn& f = model_.modes[seg.mode].dynamics;
    for (int i = 0; i < cfg_.step.max_bisections && hi - lo > cfg_.step.t_tol; ++i) {
      const double mid = lo + 0.5 * (hi - lo);
      if (mid <= lo || mid >= hi) break;
      StateVec xm = rk4(f, seg.t0, seg.x0, mid, seg.f0);
      if (is_finite(xm)) {
        lo = mid;
        x_last = std::move(xm);
      } else {
        hi = mid;
      }
    }
    t_ = seg.t0 + hi;
    x_ = std::move(x_last);
    trace_.record(t_, x_, status_.tag, mode_);
    TrapError err;
    err.kind = TrapKind::NonFiniteState;
    err.time = t_;
    err.detail.note = "integration produced a non-finite state";
    enter_trap(std::move(err), EventKind::NonFinite, "integrator");
  }

  // --- SafeMode ------------------------------------------------------------

  /// Initial state already inside a limbo or unsafe region is handled before
  /// the first step.
  bool preflight() {
    bool any_limbo = false;
    std::vector<double> g0 = all_guards(t_, x_);
    for (std::size_t i = 0; i < model_.detectors.size(); ++i) {
      const auto& det = model_.detectors[i];
      if (!det.config.is_safe()) continue;
      const Region r = classify_region(g0[i], det.config);
      if (r == Region::UnsafeRegion) {
        TrapError err;
        err.kind = TrapKind::UnsafeLevelCrossed;
        err.time = 0.0;
        err.detail.detectors = {det.config.id};
        err.detail.note = "initial state inside the unsafe region";
        enter_trap(std::move(err), EventKind::UnsafeLevel, det.config.id);
        return false;
      }
      if (r == Region::LimboRegion) {
        if (!handle_limbo_entry(i, 0.0)) return false;
        any_limbo = true;
      }
    }
    if (any_limbo) {
      if (!run_cascade(0.0, std::move(g0))) return false;
      trace_.record(t_, x_, status_.tag, mode_);
    }
    return true;
  }

  std::vector<Crossing> collect_crossings(const StepSegment& seg) {
    std::vector<Crossing> out;
    for (std::size_t i = 0; i < model_.detectors.size(); ++i) {
      const auto& det = model_.detectors[i];
      const double g0 = guard_at(i, seg.t0, seg.x0);
      const double g1 = guard_at(i, seg.t1, seg.x1);
      const Direction dir = det.config.direction;
      if (det.config.is_naive()) {
        if (dstate_[i].armed && crossed(dir, det.config.level, g0, g1)) {
          out.push_back(Crossing{i, CKind::Zero, seg.t1});
        }
        continue;
      }
      if (crossed(dir, det.config.zero_level(), g0, g1)) {
        out.push_back(Crossing{
            i, CKind::Zero, *localize(det.guard, seg, cfg_.step, dir, det.config.zero_level())});
      }
      if (crossed(dir, det.config.limbo_level(), g0, g1)) {
        out.push_back(Crossing{i, CKind::LimboIn,
                               *localize(det.guard, seg, cfg_.step, dir, det.config.limbo_level())});
      }
      if (crossed(dir, det.config.unsafe_level(), g0, g1)) {
        out.push_back(Crossing{i, CKind::UnsafeIn, *localize(det.guard, seg, cfg_.step, dir,
                                                             det.config.unsafe_level())});
      }
      if (status_.tag == StatusTag::Limbo && limbo_cause_ == det.config.id &&
          crossed_back(dir, det.config.limbo_level(), g0, g1)) {
        const Direction rec = dir == Direction::Falling ? Direction::Rising : Direction::Falling;
        double t_star;
        if (g0 == det.config.limbo_level()) {
          // Guard started exactly on the level; the exit begins immediately.
          t_star = std::min(seg.t1, seg.t0 + cfg_.step.t_tol);
        } else {
          t_star = *localize(det.guard, seg, cfg_.step, rec, det.config.limbo_level());
        }
        out.push_back(Crossing{i, CKind::LimboOut, t_star});
      }
    }
    return out;
  }

  static int kind_rank(CKind k) {
    switch (k) {
      case CKind::Zero: return 0;
      case CKind::LimboIn: return 1;
      case CKind::UnsafeIn: return 2;
      case CKind::LimboOut: return 3;
    }
    return 4;
  }

  static Crossing earliest(const std::vector<Crossing>& cs) {
    return *std::min_element(cs.begin(), cs.end(), [](const Crossing& a, const Crossing& b) {
      if (a.t_star != b.t_star) return a.t_star < b.t_star;
      if (a.kind != b.kind) return kind_rank(a.kind) < kind_rank(b.kind);
      return a.det < b.det;
    });
  }

  void process_zero_batch(const StepSegment& seg, const std::vector<Crossing>& crossings) {
    std::vector<BatchMember> members;
    for (const auto& c : crossings) {
      if (c.kind == CKind::Zero) members.push_back(BatchMember{c.det, c.t_star});
    }
    std::sort(members.begin(), members.end(), [](const BatchMember& a, const BatchMember& b) {
      if (a.t_star != b.t_star) return a.t_star < b.t_star;
      return a.detector < b.detector;
    });
    // Later batches in the same segment are recomputed after the resume; only
    // the earliest batch is applied now.
    const EventBatch batch = batch_events(members, cfg_.simultaneity_tol, model_).front();
    const double t_ev = batch.t_batch;
    const StateVec x_pre = state_at(seg, t_ev);
    trace_.record(t_ev, x_pre, status_.tag, mode_);
    std::vector<double> g_before = all_guards(t_ev, x_pre);
    t_ = t_ev;
    x_ = x_pre;

    if (batch.members.size() > 1) {
      std::string joined;
      for (const auto& id : batch_ids(batch.members, model_)) {
        if (!joined.empty()) joined += "+";
        joined += id;
      }
      if (status_.tag == StatusTag::Safe) {
        status_ = transition(status_, LimboEntered{t_ev});
        limbo_cause_ = joined;
        log_status(EventKind::LimboEntered, joined, t_ev, "simultaneous zero crossings");
      }
      if (batch.verdict.kind == BatchVerdictKind::Conflict) {
        TrapError err = conflict_trap(batch, model_);
        enter_trap(std::move(err), EventKind::SimultaneityConflict, joined);
        return;
      }
      if (batch.verdict.kind == BatchVerdictKind::CombinedHandled) {
        const EventAction& handler = model_.combined_handlers.at(batch_ids(batch.members, model_));
        if (!apply_action(handler, EventKind::CombinedHandled, joined, t_ev, x_pre)) return;
        for (const auto& m : batch.members) {
          if (model_.detectors[m.detector].config.is_naive()) dstate_[m.detector].armed = false;
        }
      } else {
        for (const auto& m : batch.members) {
          const auto& det = model_.detectors[m.detector];
          if (!apply_action(det.action, EventKind::ZeroCrossing, det.config.id, t_ev, x_pre)) {
            return;
          }
          if (det.config.is_naive()) dstate_[m.detector].armed = false;
        }
      }
      // Recovery from a simultaneity limbo requires a full return: every
      // three-level guard must be back in its safe region.
      if (status_.tag == StatusTag::Limbo) {
        bool all_safe = true;
        std::string offender;
        for (std::size_t i = 0; i < model_.detectors.size() && all_safe; ++i) {
          const auto& det = model_.detectors[i];
          if (!det.config.is_safe()) continue;
          if (classify_region(guard_at(i, t_ev, x_), det.config) != Region::SafeRegion) {
            all_safe = false;
            offender = det.config.id;
          }
        }
        if (all_safe) {
          status_ = transition(status_, RecoveredSafe{});
          limbo_cause_.reset();
          log_status(EventKind::RecoveredSafe, joined, t_ev);
        } else {
          limbo_cause_ = offender;
        }
      }
    } else {
      const auto& det = model_.detectors[batch.members[0].detector];
      if (!apply_action(det.action, EventKind::ZeroCrossing, det.config.id, t_ev, x_pre)) return;
      if (det.config.is_naive()) dstate_[batch.members[0].detector].armed = false;
      if (status_.tag == StatusTag::Safe) status_ = transition(status_, ZeroHandled{});
    }

    if (!run_cascade(t_ev, std::move(g_before))) return;
    trace_.record(t_ev, x_, status_.tag, mode_);
  }

  void process_limbo_in(const StepSegment& seg, const Crossing& c) {
    const double t_ev = c.t_star;
    StateVec x_pre = state_at(seg, t_ev);
    trace_.record(t_ev, x_pre, status_.tag, mode_);
    std::vector<double> g_before = all_guards(t_ev, x_pre);
    t_ = t_ev;
    x_ = std::move(x_pre);
    if (!handle_limbo_entry(c.det, t_ev)) return;
    if (!run_cascade(t_ev, std::move(g_before))) return;
    trace_.record(t_ev, x_, status_.tag, mode_);
  }

  void process_unsafe_in(const StepSegment& seg, const Crossing& c) {
    const double t_ev = c.t_star;
    StateVec x_pre = state_at(seg, t_ev);
    trace_.record(t_ev, x_pre, status_.tag, mode_);
    t_ = t_ev;
    x_ = std::move(x_pre);
    const std::string& id = model_.detectors[c.det].config.id;
    TrapError err;
    err.kind = TrapKind::UnsafeLevelCrossed;
    err.time = t_ev;
    err.detail.detectors = {id};
    err.detail.note = "guard crossed the unsafe level";
    enter_trap(std::move(err), EventKind::UnsafeLevel, id);
  }

  void process_limbo_out(const StepSegment& seg, const Crossing& c) {
    const double t_ev = c.t_star;
    StateVec x_pre = state_at(seg, t_ev);
    trace_.record(t_ev, x_pre, status_.tag, mode_);
    t_ = t_ev;
    x_ = std::move(x_pre);
    const std::string& id = model_.detectors[c.det].config.id;
    log_status(EventKind::LimboExited, id, t_ev);
    status_ = transition(status_, RecoveredSafe{});
    limbo_cause_.reset();
    log_status(EventKind::RecoveredSafe, id, t_ev);
    trace_.record(t_ev, x_, status_.tag, mode_);
  }

  void run_safe() {
    if (!preflight()) return;
    while (!trap_ && t_ < cfg_.t_end) {
      const double T = next_boundary();
      const StepSegment seg = advance(dynamics(), t_, T, x_, mode_);
      if (!is_finite(seg.x1)) {
        trap_nonfinite(seg);
        break;
      }
      const auto crossings = collect_crossings(seg);
      if (crossings.empty()) {
        accept(seg);
        continue;
      }
      const Crossing first = earliest(crossings);
      switch (first.kind) {
        case CKind::Zero: process_zero_batch(seg, crossings); break;
        case CKind::LimboIn: process_limbo_in(seg, first); break;
        case CKind::UnsafeIn: process_unsafe_in(seg, first); break;
        case CKind::LimboOut: process_limbo_out(seg, first); break;
      }
    }
    finalize_safe();
  }

  void finalize_safe() {
    if (trap_ || status_.tag != StatusTag::Limbo) return;
    const std::string cause = limbo_cause_.value_or("");
    if (!cause.empty() && model_.limbo_handlers.count(cause)) {
      // A handler exists and ran; ending inside the limbo region is not an
      // error, merely an unrecovered episode the trace makes visible.
      return;
    }
    TrapError err;
    err.kind = TrapKind::UnhandledLimbo;
    err.time = status_.limbo_since.value_or(cfg_.t_end);
    if (!cause.empty()) err.detail.detectors = {cause};
    err.detail.note = "simulation ended while still in limbo with no registered handler";
    enter_trap(std::move(err), EventKind::UnhandledLimbo, cause.empty() ? "limbo" : cause);
  }

  // --- UnsafeMode ------------------------------------------------------------

  void run_unsafe() {
    while (!trap_ && t_ < cfg_.t_end) {
      const double T = next_boundary();
      const StepSegment seg = advance(dynamics(), t_, T, x_, mode_);
      if (!is_finite(seg.x1)) {
        trap_nonfinite(seg);
        break;
      }
      std::vector<BatchMember> fired;
      for (std::size_t i = 0; i < model_.detectors.size(); ++i) {
        const auto& det = model_.detectors[i];
        const double g0 = guard_at(i, seg.t0, seg.x0);
        const double g1 = guard_at(i, seg.t1, seg.x1);
        if (det.config.is_naive()) {
          NaiveCheck nc = check_naive(det.config, dstate_[i], g0, g1);
          if (nc.fired) {
            fired.push_back(BatchMember{i, seg.t1});
          } else {
            dstate_[i] = nc.state;
          }
          continue;
        }
        if (crossed(det.config.direction, det.config.zero_level(), g0, g1)) {
          fired.push_back(BatchMember{i, seg.t1});
        }
      }
      if (fired.empty()) {
        t_ = seg.t1;
        x_ = seg.x1;
        trace_.record(t_, x_, status_.tag, mode_);
        continue;
      }
      const double t_ev = seg.t1;
      const StateVec x_pre = seg.x1;
      trace_.record(t_ev, x_pre, status_.tag, mode_);
      std::vector<double> g_before = all_guards(t_ev, x_pre);
      t_ = t_ev;
      x_ = x_pre;
      EventBatch batch{t_ev, fired, analyze_batch(fired, model_)};
      const auto apps = apply_unsafe_order(batch, model_, t_ev, x_pre, cfg_.event_order);
      bool ok = true;
      for (const auto& app : apps) {
        const auto& det = model_.detectors[app.detector];
        // Assignments were already computed against the shared pre-state;
        // route them through a pass-through action to reuse the write chain
        // logging and finiteness trap.
        EventAction precomputed;
        precomputed.writes = det.action.writes;
        precomputed.apply = [&app](double, const StateVec&) { return app.assignments; };
        if (!apply_action(precomputed, EventKind::ZeroCrossing, det.config.id, t_ev, x_pre)) {
          ok = false;
          break;
        }
        if (det.config.is_naive()) dstate_[app.detector].armed = false;
      }
      if (!ok) break;
      status_ = transition(status_, ZeroHandled{});
      if (!run_cascade(t_ev, std::move(g_before))) break;
      trace_.record(t_ev, x_, status_.tag, mode_);
    }
  }

  const HybridModel& model_;
  const EngineConfig& cfg_;
  double t_ = 0.0;
  StateVec x_;
  std::size_t mode_ = 0;
  SimulatorStatus status_;
  std::vector<DetectorState> dstate_;
  std::optional<std::string> limbo_cause_;
  Trace trace_;
  std::optional<TrapError> trap_;
  long long boundary_ = 0;
};

}  // namespace detail

/// Run the model to t_end or to the first trapped error.
inline SimOutcome simulate(const HybridModel& model, const EngineConfig& cfg) {
  detail::SimRun run(model, cfg);
  return run.run();
}

}  // namespace limbosim
