#pragma once

// Trace serialization. Doubles are written with the shortest representation
// that round-trips exactly, so identical runs produce identical bytes and a
// parsed trace reproduces the recorded values bit for bit.

#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <nlohmann/json.hpp>

#include "limbosim/core.hpp"

namespace limbosim {

inline std::string format_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  if (res.ec != std::errc{}) throw std::logic_error("format_double: buffer too small");
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw std::invalid_argument("parse_double: invalid number '" + std::string(s) + "'");
  }
  return v;
}

inline StatusTag parse_status(std::string_view s) {
  if (s == "safe") return StatusTag::Safe;
  if (s == "limbo") return StatusTag::Limbo;
  if (s == "unsafe") return StatusTag::Unsafe;
  throw std::invalid_argument("unknown status '" + std::string(s) + "'");
}

inline void write_trace_csv(std::ostream& os, const Trace& trace,
                            const std::vector<std::string>& variable_names) {
  os << "time";
  for (const auto& name : variable_names) os << ',' << name;
  os << ",status,mode\n";
  for (const auto& s : trace.samples) {
    os << format_double(s.time);
    for (double v : s.state) os << ',' << format_double(v);
    os << ',' << to_string(s.status) << ',' << s.mode << '\n';
  }
}

inline std::string trace_csv_string(const Trace& trace,
                                    const std::vector<std::string>& variable_names) {
  std::ostringstream os;
  write_trace_csv(os, trace, variable_names);
  return os.str();
}

struct ParsedTrace {
  std::vector<std::string> variable_names;
  std::vector<TraceSample> samples;
};

inline ParsedTrace read_trace_csv(std::istream& is) {
  auto split = [](const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t pos = line.find(',', start);
      if (pos == std::string::npos) {
        fields.push_back(line.substr(start));
        break;
      }
      fields.push_back(line.substr(start, pos - start));
      start = pos + 1;
    }
    return fields;
  };
  ParsedTrace out;
  std::string line;
  if (!std::getline(is, line)) throw std::invalid_argument("trace csv: missing header");
  auto header = split(line);
  if (header.size() < 3 || header.front() != "time" || header[header.size() - 2] != "status" ||
      header.back() != "mode") {
    throw std::invalid_argument("trace csv: malformed header");
  }
  out.variable_names.assign(header.begin() + 1, header.end() - 2);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto fields = split(line);
    if (fields.size() != header.size()) {
      throw std::invalid_argument("trace csv: row width does not match header");
    }
    TraceSample s;
    s.time = parse_double(fields.front());
    for (std::size_t i = 1; i + 2 < fields.size(); ++i) s.state.push_back(parse_double(fields[i]));
    s.status = parse_status(fields[fields.size() - 2]);
    s.mode = (std::size_t)std::stoul(fields.back());
    out.samples.push_back(std::move(s));
  }
  return out;
}

/// Events as a JSON array: time, kind, source detector or handler id, the
/// write chain with pre/post values, and an optional note.
inline nlohmann::json events_json(const Trace& trace,
                                  const std::vector<std::string>& variable_names) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& ev : trace.events) {
    nlohmann::json e;
    e["t"] = ev.time;
    e["kind"] = std::string(to_string(ev.kind));
    e["detector"] = ev.source;
    nlohmann::json writes = nlohmann::json::array();
    for (const auto& w : ev.writes) {
      nlohmann::json wj;
      wj["var"] = w.var < variable_names.size() ? variable_names[w.var] : std::string("mode");
      wj["pre"] = w.pre;
      wj["post"] = w.post;
      writes.push_back(std::move(wj));
    }
    e["writes"] = std::move(writes);
    if (!ev.note.empty()) e["note"] = ev.note;
    arr.push_back(std::move(e));
  }
  return arr;
}

inline std::string events_json_string(const Trace& trace,
                                      const std::vector<std::string>& variable_names) {
  return events_json(trace, variable_names).dump(2) + "\n";
}

inline void write_events_json(std::ostream& os, const Trace& trace,
                              const std::vector<std::string>& variable_names) {
  os << events_json_string(trace, variable_names);
}

/// Process exit code for a trapped run; unique and nonzero per kind.
inline int trap_exit_code(TrapKind k) {
  switch (k) {
    case TrapKind::UnsafeLevelCrossed: return 10;
    case TrapKind::UnhandledSimultaneity: return 11;
    case TrapKind::UnhandledLimbo: return 12;
    case TrapKind::NonFiniteState: return 13;
  }
  return 13;
}

}  // namespace limbosim
