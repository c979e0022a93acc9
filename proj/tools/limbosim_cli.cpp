// Command line front end: run a catalog model, compare event orders, or list
// the catalog. Exit codes: 0 success, 10-13 trapped runs (one code per trap
// kind), 20 nondeterministic engine detected by compare-order, 1-2 usage or
// configuration errors.

#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <limbosim/limbosim.hpp>

namespace {

struct CommonOpts {
  std::string model;
  std::string variant;
  double t_end = 10.0;
  double dt = 1e-3;
  double t_tol = 1e-9;
  double simultaneity_tol = 2e-9;
  double limbo_offset = 1e-4;
  double unsafe_offset = 1e-2;
  double arm_threshold = 1e-7;
  std::vector<std::string> params;
  std::vector<std::string> orders;
};

void add_common_options(CLI::App& cmd, CommonOpts& o, bool multi_order) {
  cmd.add_option("--model", o.model, "model name from the catalog")->required();
  cmd.add_option("--variant", o.variant, "model variant")->required();
  cmd.add_option("--t-end", o.t_end, "simulation end time");
  cmd.add_option("--dt", o.dt, "integration step");
  cmd.add_option("--t-tol", o.t_tol, "event localization tolerance");
  cmd.add_option("--simultaneity-tol", o.simultaneity_tol,
                 "window within which zero crossings count as simultaneous");
  cmd.add_option("--limbo-offset", o.limbo_offset, "limbo level offset from the zero level");
  cmd.add_option("--unsafe-offset", o.unsafe_offset, "unsafe level offset past the limbo level");
  cmd.add_option("--arm-threshold", o.arm_threshold, "re-arm threshold of naive detectors");
  cmd.add_option("--param", o.params, "model parameter override NAME=VALUE")
      ->take_all()
      ->expected(-1);
  auto* order = cmd.add_option("--order", o.orders,
                               "event application order as comma separated detector indices");
  if (multi_order) order->take_all()->expected(-1);
}

std::map<std::string, double> parse_params(const std::vector<std::string>& raw) {
  std::map<std::string, double> out;
  for (const auto& p : raw) {
    const auto eq = p.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw std::invalid_argument("--param expects NAME=VALUE, got '" + p + "'");
    }
    out[p.substr(0, eq)] = limbosim::parse_double(p.substr(eq + 1));
  }
  return out;
}

std::vector<std::size_t> parse_order(const std::string& s) {
  std::vector<std::size_t> order;
  std::size_t start = 0;
  while (start <= s.size()) {
    const std::size_t pos = s.find(',', start);
    const std::string tok = s.substr(start, pos == std::string::npos ? pos : pos - start);
    if (tok.empty()) throw std::invalid_argument("--order: empty index in '" + s + "'");
    std::size_t used = 0;
    const unsigned long v = std::stoul(tok, &used);
    if (used != tok.size()) throw std::invalid_argument("--order: bad index '" + tok + "'");
    order.push_back((std::size_t)v);
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return order;
}

limbosim::HybridModel build(const CommonOpts& o) {
  limbosim::DetectorLevels levels;
  levels.limbo_offset = o.limbo_offset;
  levels.unsafe_offset = o.unsafe_offset;
  levels.arm_threshold = o.arm_threshold;
  return limbosim::build_model(o.model, o.variant, parse_params(o.params), levels);
}

limbosim::EngineConfig engine_config(const CommonOpts& o) {
  limbosim::EngineConfig cfg;
  cfg.step.dt = o.dt;
  cfg.step.t_tol = o.t_tol;
  cfg.t_end = o.t_end;
  cfg.simultaneity_tol = o.simultaneity_tol;
  cfg.safety = limbosim::variant_safety(o.model, o.variant);
  return cfg;
}

std::string variable_name(const limbosim::HybridModel& model, std::size_t var) {
  return var < model.variable_names.size() ? model.variable_names[var] : std::string("mode");
}

void print_trap(std::ostream& os, const limbosim::TrapError& trap,
                const limbosim::HybridModel& model) {
  os << "trapped: " << limbosim::to_string(trap.kind) << " at t=" << limbosim::format_double(trap.time);
  if (!trap.detail.detectors.empty()) {
    os << " [detectors:";
    for (const auto& id : trap.detail.detectors) os << ' ' << id;
    os << ']';
  }
  if (!trap.detail.variables.empty()) {
    os << " [variables:";
    for (std::size_t v : trap.detail.variables) os << ' ' << variable_name(model, v);
    os << ']';
  }
  if (!trap.detail.note.empty()) os << " " << trap.detail.note;
  os << '\n';
}

int run_command(const CommonOpts& o, const std::string& out_trace, const std::string& out_events) {
  const limbosim::HybridModel model = build(o);
  limbosim::EngineConfig cfg = engine_config(o);
  if (!o.orders.empty()) cfg.event_order = parse_order(o.orders.front());
  const limbosim::SimOutcome outcome = limbosim::simulate(model, cfg);

  {
    std::ofstream f(out_trace, std::ios::binary);
    if (!f) {
      std::cerr << "error: cannot open '" << out_trace << "' for writing\n";
      return 2;
    }
    limbosim::write_trace_csv(f, outcome.trace, model.variable_names);
  }
  {
    std::ofstream f(out_events, std::ios::binary);
    if (!f) {
      std::cerr << "error: cannot open '" << out_events << "' for writing\n";
      return 2;
    }
    limbosim::write_events_json(f, outcome.trace, model.variable_names);
  }

  std::cout << "model: " << o.model << " (" << o.variant << ")\n";
  const auto& last = outcome.trace.samples.back();
  if (outcome.reached_t_end()) {
    std::cout << "result: reached t_end=" << limbosim::format_double(cfg.t_end) << "\n";
  } else {
    std::cout << "result: trapped (" << limbosim::to_string(outcome.trap->kind) << ")\n";
  }
  std::cout << "final: t=" << limbosim::format_double(last.time);
  for (std::size_t i = 0; i < model.variable_names.size(); ++i) {
    std::cout << ' ' << model.variable_names[i] << '=' << limbosim::format_double(last.state[i]);
  }
  std::cout << " status=" << limbosim::to_string(last.status) << "\n";
  std::cout << "samples: " << outcome.trace.samples.size()
            << ", events: " << outcome.trace.events.size() << "\n";
  std::cout << "trace: " << out_trace << "\nevents: " << out_events << "\n";

  if (!outcome.reached_t_end()) {
    print_trap(std::cerr, *outcome.trap, model);
    return limbosim::trap_exit_code(outcome.trap->kind);
  }
  return 0;
}

int compare_command(const CommonOpts& o) {
  const limbosim::HybridModel model = build(o);
  const limbosim::EngineConfig cfg = engine_config(o);
  std::vector<std::vector<std::size_t>> perms;
  for (const auto& s : o.orders) perms.push_back(parse_order(s));
  if (perms.empty()) {
    // Identity plus reversed declaration order covers the two-detector case.
    std::vector<std::size_t> identity(model.detectors.size());
    for (std::size_t i = 0; i < identity.size(); ++i) identity[i] = i;
    perms.push_back(identity);
    perms.push_back(std::vector<std::size_t>(identity.rbegin(), identity.rend()));
  }

  const limbosim::DeterminismReport report = limbosim::compare_order(model, cfg, perms);
  std::cout << "verdict: " << limbosim::to_string(report.verdict) << "\n";
  if (report.divergence_time) {
    std::cout << "first divergence: t=" << limbosim::format_double(*report.divergence_time)
              << " fields:";
    for (const auto& name : report.diverging) std::cout << ' ' << name;
    std::cout << "\n";
  }
  std::cout << "conflicting simultaneous writes observed: "
            << (report.conflicting_writes_observed ? "yes" : "no") << "\n";
  std::cout << "note: " << report.note << "\n";
  for (const auto& run : report.runs) {
    std::cout << "order [";
    for (std::size_t i = 0; i < run.order.size(); ++i) {
      if (i) std::cout << ',';
      std::cout << run.order[i];
    }
    std::cout << "]: ";
    if (run.outcome.reached_t_end()) {
      std::cout << "reached t_end;";
    } else {
      std::cout << "trapped " << limbosim::to_string(run.outcome.trap->kind) << " at t="
                << limbosim::format_double(run.outcome.trap->time) << ";";
    }
    const auto& last = run.outcome.trace.samples.back();
    std::cout << " final:";
    for (std::size_t i = 0; i < model.variable_names.size(); ++i) {
      std::cout << ' ' << model.variable_names[i] << '='
                << limbosim::format_double(last.state[i]);
    }
    std::cout << "\n";
  }
  return 0;
}

int list_command() {
  for (const auto& info : limbosim::model_catalog()) {
    std::cout << info.name << ": " << info.summary << "\n";
    std::cout << "  variants:\n";
    for (const auto& v : info.variants) {
      std::cout << "    " << v.name << " ("
                << (v.safety == limbosim::SafetyMode::SafeMode ? "safe engine" : "unsafe engine")
                << "): " << v.summary << "\n";
    }
    std::cout << "  parameters:";
    for (const auto& p : info.params) std::cout << ' ' << p;
    std::cout << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hybrid simulation engine with a safe/limbo/unsafe simulator status machine"};
  app.require_subcommand(1);

  CommonOpts run_opts;
  std::string out_trace = "trace.csv";
  std::string out_events = "events.json";
  CLI::App* run = app.add_subcommand("run", "simulate a model and write trace/event files");
  add_common_options(*run, run_opts, false);
  run->add_option("--out-trace", out_trace, "trace csv output path");
  run->add_option("--out-events", out_events, "event json output path");

  CommonOpts cmp_opts;
  CLI::App* cmp = app.add_subcommand(
      "compare-order", "run several event orders and report whether outcomes depend on order");
  add_common_options(*cmp, cmp_opts, true);

  CLI::App* list = app.add_subcommand("list-models", "print the model catalog");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return run_command(run_opts, out_trace, out_events);
    if (cmp->parsed()) return compare_command(cmp_opts);
    if (list->parsed()) return list_command();
  } catch (const limbosim::RepeatRunMismatch& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 20;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
