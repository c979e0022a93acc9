// Building a model from scratch: a tank draining through a valve. The level
// guard has a three-level detector; a limbo handler closes the valve if the
// level ever slips past empty undetected.

#include <iostream>

#include <limbosim/limbosim.hpp>

int main() {
  using namespace limbosim;

  HybridModel tank;
  tank.name = "draining-tank";
  tank.variable_names = {"level"};
  tank.modes.push_back(ModeDef{"draining", [](double, const StateVec& x) {
                                 return StateVec{-0.25 * x[0] - 0.05};
                               }});
  tank.modes.push_back(ModeDef{"closed", [](double, const StateVec&) {
                                 return StateVec{0.0};
                               }});

  Detector empty;
  empty.config.id = "tank-empty";
  empty.config.direction = Direction::Falling;
  empty.config.kind = SafeKind{1e-4, 1e-2};
  empty.guard = [](double, const StateVec& x) { return x[0]; };
  empty.action.reads = {};
  empty.action.writes = {1};  // mode pseudo-variable
  empty.action.apply = [](double, const StateVec&) {
    return std::vector<Assignment>{{1, 1.0}};
  };
  tank.detectors.push_back(std::move(empty));

  EventAction close_valve;
  close_valve.writes = {0, 1};
  close_valve.apply = [](double, const StateVec&) {
    return std::vector<Assignment>{{0, 0.0}, {1, 1.0}};
  };
  tank.limbo_handlers.emplace("tank-empty", std::move(close_valve));

  tank.initial_state = {1.0};
  tank.initial_mode = 0;

  EngineConfig cfg;
  cfg.t_end = 12.0;
  SimOutcome out = simulate(tank, cfg);

  for (const auto& ev : out.trace.events) {
    std::cout << "t=" << format_double(ev.time) << "  " << to_string(ev.kind) << "  ["
              << ev.source << "]\n";
  }
  const auto& last = out.trace.samples.back();
  std::cout << "final: t=" << format_double(last.time)
            << " level=" << format_double(last.state[0]) << " mode=" << last.mode
            << " status=" << to_string(last.status) << "\n";
  return 0;
}
