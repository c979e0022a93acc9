// Minimal tour: run the safe bouncing ball, print the bounce events and the
// final state, then show the three-ball conflict being trapped.

#include <iostream>

#include <limbosim/limbosim.hpp>

int main() {
  using namespace limbosim;

  HybridModel ball = bouncing_ball(BouncingBallParams{}, BouncingBallVariant::Safe);
  EngineConfig cfg;
  cfg.t_end = 6.0;
  SimOutcome outcome = simulate(ball, cfg);

  std::cout << "bouncing ball (safe variant)\n";
  for (const auto& ev : outcome.trace.events) {
    std::cout << "  t=" << format_double(ev.time) << "  " << to_string(ev.kind);
    if (!ev.writes.empty()) {
      std::cout << "  v: " << format_double(ev.writes.front().pre) << " -> "
                << format_double(ev.writes.front().post);
    }
    std::cout << "\n";
  }
  const auto& last = outcome.trace.samples.back();
  std::cout << "final: t=" << format_double(last.time) << " h=" << format_double(last.state[0])
            << " v=" << format_double(last.state[1]) << " status=" << to_string(last.status)
            << " mode=" << last.mode << "\n\n";

  HybridModel balls = three_balls(ThreeBallsParams{}, ThreeBallsVariant::Safe);
  EngineConfig cfg2;
  cfg2.t_end = 10.0;
  SimOutcome conflict = simulate(balls, cfg2);
  std::cout << "three balls (safe variant, symmetric setup)\n";
  if (conflict.trap) {
    std::cout << "  trapped: " << to_string(conflict.trap->kind)
              << " at t=" << format_double(conflict.trap->time) << "\n";
    std::cout << "  detectors:";
    for (const auto& id : conflict.trap->detail.detectors) std::cout << ' ' << id;
    std::cout << "\n  contested variables:";
    for (std::size_t v : conflict.trap->detail.variables)
      std::cout << ' ' << balls.variable_names[v];
    std::cout << "\n";
  }
  return 0;
}
