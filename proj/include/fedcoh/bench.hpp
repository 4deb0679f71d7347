#pragma once

#include <algorithm>
#include <charconv>
#include <limits>
#include <cstdint>
#include <functional>
#include <istream>
#include <ostream>
#include <queue>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"

#include "fedcoh/topology.hpp"
#include "fedcoh/types.hpp"

namespace fedcoh::bench {

// Piecewise-linear coherence overhead as a function of core count.
struct OverheadModel {
  double slope_within_numa = 0.87;
  double slope_cross_numa = 1.19;
  double derivative_per_latency = 0.011125;  // overhead per added core per ns of latency
  double base = 1.0;

  void validate() const {
    if (!(slope_within_numa > 0 && slope_cross_numa > 0 && derivative_per_latency > 0 && base > 0)) {
      throw UsageError("overhead model parameters must be > 0");
    }
  }

  static OverheadModel from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw UsageError("model parameters must be a JSON object");
    OverheadModel m;
    for (const auto& [key, value] : j.items()) {
      if (!value.is_number()) throw UsageError("model parameter " + key + " must be a number");
      const double v = value.get<double>();
      if (key == "slope_within_numa") {
        m.slope_within_numa = v;
      } else if (key == "slope_cross_numa") {
        m.slope_cross_numa = v;
      } else if (key == "derivative_per_latency") {
        m.derivative_per_latency = v;
      } else if (key == "base") {
        m.base = v;
      } else {
        throw UsageError("unknown model parameter " + key);
      }
    }
    m.validate();
    return m;
  }

  nlohmann::ordered_json to_json() const {
    return {{"slope_within_numa", slope_within_numa},
            {"slope_cross_numa", slope_cross_numa},
            {"derivative_per_latency", derivative_per_latency},
            {"base", base}};
  }
};

struct CurvePoint {
  std::uint32_t cores = 0;
  double overhead = 0;

  friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

struct OverheadCurve {
  std::vector<CurvePoint> points;
  TopologySpec topology;
  double lat_disagg = 0;
};

// Marginal overhead of the core at position `idx` (0-based) when cores fill
// the topology in nesting order and further nodes repeat the first one.
inline double core_slope(const OverheadModel& m, const Topology& t, std::uint32_t idx, double lat_disagg) {
  const std::uint32_t per_node = t.procs_per_node();
  if (idx >= per_node) return m.derivative_per_latency * lat_disagg;
  return t.numa_domain(ProcId{idx}) == 0 ? m.slope_within_numa : m.slope_cross_numa;
}

// overhead(1) = base; overhead(n) = overhead(n-1) + slope of core n.
inline OverheadCurve model_overhead(const OverheadModel& m, const Topology& t, std::uint32_t cores,
                                    double lat_disagg) {
  m.validate();
  if (cores == 0) throw UsageError("model_overhead needs at least one core");
  if (lat_disagg < 0) throw UsageError("lat_disagg must be >= 0");
  OverheadCurve curve;
  curve.topology = t.spec();
  curve.lat_disagg = lat_disagg;
  double total = m.base;
  curve.points.push_back({1, total});
  for (std::uint32_t n = 2; n <= cores; ++n) {
    total += core_slope(m, t, n - 1, lat_disagg);
    curve.points.push_back({n, total});
  }
  return curve;
}

// Least-squares k for slope = k * latency (line through the origin).
inline double derivative_fit(const std::vector<std::pair<double, double>>& points) {
  if (points.empty()) throw UsageError("derivative_fit needs at least one point");
  double num = 0, den = 0;
  for (const auto& [lat, slope] : points) {
    if (!(lat > 0)) throw UsageError("derivative_fit latencies must be > 0");
    num += lat * slope;
    den += lat * lat;
  }
  return num / den;
}

struct ContentionParams {
  std::vector<ProcId> placement;
  double local_cost_ns = 1.0;
  double duration_ns = 1e6;
  std::uint64_t seed = 1;
  double think_jitter_ns = 0;  // uniform [0, jitter) pause between a core's increments
  // Cost of moving the line from owner to requester; comm_latency when empty.
  std::function<double(ProcId requester, ProcId owner)> transfer;
};

struct ContentionResult {
  double ratio = 0;
  std::uint64_t increments = 0;
  std::uint64_t transfers = 0;
};

// Cores repeatedly increment one shared counter. The line is owned by one core
// at a time; a request from another core waits in FIFO order, then pays the
// transfer cost plus c and takes ownership. The baseline lets every core
// increment a private counter at cost c.
inline ContentionResult simulate_contention(const ContentionParams& p, const Topology& t) {
  if (p.placement.empty()) throw UsageError("contention placement is empty");
  if (!(p.local_cost_ns > 0)) throw UsageError("local cost must be > 0");
  if (!(p.duration_ns > 0)) throw UsageError("duration must be > 0");
  for (ProcId c : p.placement) {
    if (!t.valid(c)) throw UsageError("placement names unknown processor " + to_string(c));
  }
  auto transfer = [&](ProcId req, ProcId owner) {
    return p.transfer ? p.transfer(req, owner) : t.comm_latency(req, owner);
  };
  std::mt19937_64 rng(p.seed);
  std::uniform_real_distribution<double> think(0.0, p.think_jitter_ns);

  using Request = std::tuple<double, std::size_t>;  // issue time, placement index
  std::priority_queue<Request, std::vector<Request>, std::greater<>> pending;
  for (std::size_t i = 0; i < p.placement.size(); ++i) pending.emplace(0.0, i);

  ContentionResult r;
  ProcId owner = p.placement.front();
  double free_at = 0;
  while (true) {
    const auto [issued, i] = pending.top();
    pending.pop();
    const ProcId core = p.placement[i];
    double cost = p.local_cost_ns;
    if (core != owner) {
      cost += transfer(core, owner);
      ++r.transfers;
    }
    const double done = std::max(issued, free_at) + cost;
    if (done > p.duration_ns) break;
    ++r.increments;
    owner = core;
    free_at = done;
    pending.emplace(done + (p.think_jitter_ns > 0 ? think(rng) : 0.0), i);
  }
  const double baseline = static_cast<double>(p.placement.size()) / p.local_cost_ns;
  const double shared = static_cast<double>(r.increments) / p.duration_ns;
  r.ratio = shared > 0 ? baseline / shared : std::numeric_limits<double>::infinity();
  return r;
}

inline double sim_overhead(const ContentionParams& p, const Topology& t) { return simulate_contention(p, t).ratio; }

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

}  // namespace detail

inline void emit_curve_csv(const OverheadCurve& curve, std::ostream& out) {
  out << "cores,overhead\n";
  for (const auto& pt : curve.points) out << pt.cores << ',' << detail::format_double(pt.overhead) << '\n';
}

inline std::vector<CurvePoint> parse_curve_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "cores,overhead") throw UsageError("curve CSV must start with cores,overhead");
  std::vector<CurvePoint> points;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    CurvePoint pt;
    const char* end = line.data() + line.size();
    bool ok = comma != std::string::npos;
    if (ok) {
      auto a = std::from_chars(line.data(), line.data() + comma, pt.cores);
      auto b = std::from_chars(line.data() + comma + 1, end, pt.overhead);
      ok = a.ec == std::errc{} && a.ptr == line.data() + comma && b.ec == std::errc{} && b.ptr == end;
    }
    if (!ok) throw UsageError("curve CSV line " + std::to_string(lineno) + ": malformed row");
    points.push_back(pt);
  }
  return points;
}

}  // namespace fedcoh::bench
