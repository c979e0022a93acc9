#pragma once

// Hybrid model description: continuous modes, guarded detectors with event
// actions, and optional handlers for limbo episodes and simultaneous events.
//
// Event actions declare their read and write sets up front. The declarations
// are what makes conflict analysis of simultaneous events possible: two
// actions whose declared writes overlap (or whose writes feed another's
// reads) cannot be applied in an arbitrary order without someone deciding
// what that means. Actions may write the mode pseudo-variable at index
// n_states() to switch the active continuous mode.

#include <algorithm>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "limbosim/core.hpp"
#include "limbosim/detect.hpp"

namespace limbosim {

/// One discrete assignment produced by an event action.
struct Assignment {
  std::size_t var = 0;
  double value = 0.0;
};

/// Discrete action run when a detector fires. apply receives the pre-event
/// state (the left limit at the event instant) and returns assignments; it
/// must only assign variables in the declared write set.
struct EventAction {
  std::vector<std::size_t> reads;
  std::vector<std::size_t> writes;
  std::function<std::vector<Assignment>(double t, const StateVec& pre)> apply;
};

using DynamicsFn = std::function<StateVec(double t, const StateVec& x)>;
using GuardFn = std::function<double(double t, const StateVec& x)>;

struct ModeDef {
  std::string name;
  DynamicsFn dynamics;
};

/// A guard function bound to a detector configuration and an event action.
struct Detector {
  DetectorConfig config;
  GuardFn guard;
  EventAction action;
};

struct HybridModel {
  std::string name;
  std::vector<std::string> variable_names;
  std::vector<ModeDef> modes;
  std::vector<Detector> detectors;
  /// Handlers for simultaneous firings, keyed by the sorted set of detector
  /// ids they resolve.
  std::map<std::vector<std::string>, EventAction> combined_handlers;
  /// Per-detector recovery actions run when that detector's guard enters its
  /// limbo region.
  std::map<std::string, EventAction> limbo_handlers;
  StateVec initial_state;
  std::size_t initial_mode = 0;

  std::size_t n_states() const { return variable_names.size(); }

  /// Index event actions use to reassign the active mode.
  std::size_t mode_var_index() const { return n_states(); }

  std::optional<std::size_t> variable_index(std::string_view name) const {
    for (std::size_t i = 0; i < variable_names.size(); ++i) {
      if (variable_names[i] == name) return i;
    }
    return std::nullopt;
  }

  const Detector* find_detector(std::string_view id) const {
    for (const auto& d : detectors) {
      if (d.config.id == id) return &d;
    }
    return nullptr;
  }

  std::optional<std::size_t> detector_index(std::string_view id) const {
    for (std::size_t i = 0; i < detectors.size(); ++i) {
      if (detectors[i].config.id == id) return i;
    }
    return std::nullopt;
  }

  void validate() const {
    if (variable_names.empty()) throw std::invalid_argument("model has no state variables");
    if (modes.empty()) throw std::invalid_argument("model has no modes");
    if (initial_state.size() != n_states()) {
      throw std::invalid_argument("initial state dimension does not match variable names");
    }
    if (!is_finite(initial_state)) throw std::invalid_argument("initial state is not finite");
    if (initial_mode >= modes.size()) throw std::invalid_argument("initial mode out of range");
    for (const auto& m : modes) {
      if (!m.dynamics) throw std::invalid_argument("mode '" + m.name + "' has no dynamics");
    }
    const std::size_t mode_var = mode_var_index();
    auto check_action = [&](const EventAction& a, const std::string& owner) {
      if (!a.apply) throw std::invalid_argument(owner + " has no apply function");
      for (std::size_t v : a.reads) {
        if (v >= n_states()) throw std::invalid_argument(owner + " reads unknown variable");
      }
      for (std::size_t v : a.writes) {
        if (v > mode_var) throw std::invalid_argument(owner + " writes unknown variable");
      }
    };
    std::vector<std::string> ids;
    for (const auto& d : detectors) {
      d.config.validate();
      if (!d.guard) throw std::invalid_argument("detector '" + d.config.id + "' has no guard");
      check_action(d.action, "detector '" + d.config.id + "' action");
      ids.push_back(d.config.id);
    }
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
      throw std::invalid_argument("duplicate detector id");
    }
    for (const auto& [key, handler] : combined_handlers) {
      if (key.size() < 2) {
        throw std::invalid_argument("combined handler must cover at least two detectors");
      }
      if (!std::is_sorted(key.begin(), key.end())) {
        throw std::invalid_argument("combined handler key must be sorted");
      }
      std::string owner = "combined handler {";
      for (const auto& id : key) {
        if (!find_detector(id)) {
          throw std::invalid_argument("combined handler names unknown detector '" + id + "'");
        }
        owner += id + ",";
      }
      owner += "}";
      check_action(handler, owner);
    }
    for (const auto& [id, handler] : limbo_handlers) {
      const Detector* d = find_detector(id);
      if (!d) throw std::invalid_argument("limbo handler names unknown detector '" + id + "'");
      if (!d->config.is_safe()) {
        throw std::invalid_argument("limbo handler on non-three-level detector '" + id + "'");
      }
      check_action(handler, "limbo handler '" + id + "'");
    }
  }
};

}  // namespace limbosim
