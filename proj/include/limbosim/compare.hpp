#pragma once

// Order-permutation comparison. Runs the same model and configuration under
// several event application orders and reports whether the outcome depends
// on the order. Order-sensitive results mean a simulator that silently
// picks one order produces deterministic but accidental physics; the report
// makes that property visible instead of letting it hide.
//
// Precondition check: the first permutation is run twice and the two traces
// must serialize to identical bytes. If they do not, the engine itself is
// nondeterministic and order comparisons would be meaningless.

#include <cstring>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "limbosim/core.hpp"
#include "limbosim/engine.hpp"
#include "limbosim/model.hpp"
#include "limbosim/trace_io.hpp"

namespace limbosim {

class RepeatRunMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class OrderVerdict { OrderInvariant, OrderSensitive };

inline std::string_view to_string(OrderVerdict v) {
  return v == OrderVerdict::OrderInvariant ? "order-invariant" : "order-sensitive";
}

struct PermutationRun {
  std::vector<std::size_t> order;
  SimOutcome outcome;
};

struct DeterminismReport {
  std::vector<PermutationRun> runs;
  OrderVerdict verdict = OrderVerdict::OrderInvariant;
  std::optional<double> divergence_time;
  std::vector<std::string> diverging;  ///< names of the first differing fields
  /// Two events at one instant wrote the same variable (or a conflict
  /// trapped): agreement between orders, if any, is coincidental.
  bool conflicting_writes_observed = false;
  std::string note;
};

namespace detail {

inline bool bits_equal(double a, double b) {
  return std::memcmp(&a, &b, sizeof(double)) == 0;
}

inline bool sample_equal(const TraceSample& a, const TraceSample& b) {
  if (!bits_equal(a.time, b.time) || a.status != b.status || a.mode != b.mode) return false;
  if (a.state.size() != b.state.size()) return false;
  for (std::size_t i = 0; i < a.state.size(); ++i) {
    if (!bits_equal(a.state[i], b.state[i])) return false;
  }
  return true;
}

inline bool writes_intersect(const TraceEvent& a, const TraceEvent& b) {
  for (const auto& wa : a.writes) {
    for (const auto& wb : b.writes) {
      if (wa.var == wb.var) return true;
    }
  }
  return false;
}

inline bool has_conflicting_writes(const Trace& trace) {
  const auto& evs = trace.events;
  for (std::size_t i = 0; i < evs.size(); ++i) {
    if (evs[i].kind == EventKind::SimultaneityConflict) return true;
    if (evs[i].writes.empty()) continue;
    for (std::size_t j = i + 1; j < evs.size() && evs[j].time == evs[i].time; ++j) {
      if (writes_intersect(evs[i], evs[j])) return true;
    }
  }
  return false;
}

}  // namespace detail

/// Run every permutation and compare traces sample by sample, bit for bit.
inline DeterminismReport compare_order(const HybridModel& model, const EngineConfig& base,
                                       const std::vector<std::vector<std::size_t>>& permutations) {
  if (permutations.empty()) {
    throw std::invalid_argument("compare_order: need at least one permutation");
  }
  auto run_with = [&](const std::vector<std::size_t>& order) {
    EngineConfig cfg = base;
    cfg.event_order = order;
    return simulate(model, cfg);
  };

  // Engine determinism precondition: identical inputs, identical bytes.
  {
    SimOutcome a = run_with(permutations.front());
    SimOutcome b = run_with(permutations.front());
    const bool same =
        trace_csv_string(a.trace, model.variable_names) ==
            trace_csv_string(b.trace, model.variable_names) &&
        events_json_string(a.trace, model.variable_names) ==
            events_json_string(b.trace, model.variable_names);
    if (!same) {
      throw RepeatRunMismatch(
          "two runs with identical inputs produced different traces; "
          "the engine is nondeterministic and order comparison is meaningless");
    }
  }

  DeterminismReport report;
  for (const auto& order : permutations) {
    report.runs.push_back(PermutationRun{order, run_with(order)});
  }
  for (const auto& run : report.runs) {
    if (detail::has_conflicting_writes(run.outcome.trace)) {
      report.conflicting_writes_observed = true;
      break;
    }
  }

  const auto& ref = report.runs.front().outcome.trace.samples;
  for (std::size_t r = 1; r < report.runs.size() && !report.divergence_time; ++r) {
    const auto& other = report.runs[r].outcome.trace.samples;
    const std::size_t n = std::min(ref.size(), other.size());
    for (std::size_t i = 0; i < n; ++i) {
      if (detail::sample_equal(ref[i], other[i])) continue;
      const auto& a = ref[i];
      const auto& b = other[i];
      report.divergence_time = std::min(a.time, b.time);
      if (!detail::bits_equal(a.time, b.time)) report.diverging.push_back("time");
      for (std::size_t v = 0; v < a.state.size() && v < b.state.size(); ++v) {
        if (!detail::bits_equal(a.state[v], b.state[v])) {
          report.diverging.push_back(model.variable_names[v]);
        }
      }
      if (a.status != b.status) report.diverging.push_back("status");
      if (a.mode != b.mode) report.diverging.push_back("mode");
      break;
    }
    if (!report.divergence_time && ref.size() != other.size()) {
      const auto& longer = ref.size() > other.size() ? ref : other;
      report.divergence_time = longer[n].time;
      report.diverging.push_back("length");
    }
  }

  report.verdict =
      report.divergence_time ? OrderVerdict::OrderSensitive : OrderVerdict::OrderInvariant;
  if (report.verdict == OrderVerdict::OrderSensitive) {
    report.note =
        "outcomes depend on event application order; a simulator that silently picks one "
        "order is deterministic by accident, not by design";
  } else if (report.conflicting_writes_observed) {
    report.note =
        "traces agree across orders even though simultaneous events wrote the same variable; "
        "the agreement is coincidental and deserves suspicion";
  } else {
    report.note = "traces agree across all tested orders and simultaneous writes are disjoint";
  }
  return report;
}

}  // namespace limbosim
