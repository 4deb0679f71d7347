#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedcoh/types.hpp"
#include "json.hpp"

namespace fedcoh {

// Pairwise communication latency per grouping level, in nanoseconds.
struct Latencies {
  double soft = 25.8;
  double numa = 106.6;
  double cross_numa = 184.9;
  double disagg = 200.0;
};

struct TopologySpec {
  std::uint32_t nodes = 1;
  std::uint32_t numa_per_node = 1;
  std::uint32_t soft_per_numa = 1;
  std::uint32_t cores_per_soft = 1;
  Latencies lat;
};

// Machine shape: nodes > NUMA domains > soft-NUMA domains > processors.
// Processors are numbered 0..N-1 in nesting order. Immutable once built.
class Topology {
 public:
  enum class Level { kSelf, kSoft, kNuma, kCrossNuma, kDisagg };

  explicit Topology(const TopologySpec& spec) : spec_(spec) {
    if (spec.nodes == 0 || spec.numa_per_node == 0 || spec.soft_per_numa == 0 || spec.cores_per_soft == 0) {
      throw UsageError("topology counts must all be >= 1");
    }
    const auto& l = spec.lat;
    if (!(0 < l.soft && l.soft <= l.numa && l.numa <= l.cross_numa && l.cross_numa <= l.disagg)) {
      throw UsageError("latencies must satisfy 0 < soft <= numa <= cross_numa <= disagg");
    }
    const std::uint64_t total =
        std::uint64_t{spec.nodes} * spec.numa_per_node * spec.soft_per_numa * spec.cores_per_soft;
    if (total >= std::uint64_t{1} << 24) throw UsageError("topology too large");
    places_.reserve(total);
    for (std::uint32_t n = 0; n < spec.nodes; ++n) {
      for (std::uint32_t u = 0; u < spec.numa_per_node; ++u) {
        const std::uint32_t numa = n * spec.numa_per_node + u;
        for (std::uint32_t s = 0; s < spec.soft_per_numa; ++s) {
          const std::uint32_t soft = numa * spec.soft_per_numa + s;
          for (std::uint32_t c = 0; c < spec.cores_per_soft; ++c) places_.push_back({n, numa, soft});
        }
      }
    }
  }

  static Topology from_json(const nlohmann::json& j) {
    TopologySpec spec;
    auto count = [&](const char* key, std::uint32_t& out) {
      if (j.contains(key)) out = j.at(key).get<std::uint32_t>();
    };
    count("nodes", spec.nodes);
    count("numa_per_node", spec.numa_per_node);
    count("soft_per_numa", spec.soft_per_numa);
    count("cores_per_soft", spec.cores_per_soft);
    if (j.contains("lat_ns")) {
      const auto& l = j.at("lat_ns");
      if (l.contains("soft")) spec.lat.soft = l.at("soft").get<double>();
      if (l.contains("numa")) spec.lat.numa = l.at("numa").get<double>();
      if (l.contains("cross_numa")) spec.lat.cross_numa = l.at("cross_numa").get<double>();
      if (l.contains("disagg")) spec.lat.disagg = l.at("disagg").get<double>();
    }
    return Topology(spec);
  }

  nlohmann::json to_json() const {
    return {{"nodes", spec_.nodes},
            {"numa_per_node", spec_.numa_per_node},
            {"soft_per_numa", spec_.soft_per_numa},
            {"cores_per_soft", spec_.cores_per_soft},
            {"lat_ns",
             {{"soft", spec_.lat.soft},
              {"numa", spec_.lat.numa},
              {"cross_numa", spec_.lat.cross_numa},
              {"disagg", spec_.lat.disagg}}}};
  }

  const TopologySpec& spec() const { return spec_; }
  const Latencies& latencies() const { return spec_.lat; }
  std::uint32_t num_procs() const { return static_cast<std::uint32_t>(places_.size()); }
  std::uint32_t num_nodes() const { return spec_.nodes; }
  std::uint32_t procs_per_node() const { return num_procs() / spec_.nodes; }

  bool valid(ProcId p) const { return index(p) < places_.size(); }

  NodeId node(ProcId p) const { return NodeId{at(p).node}; }
  std::uint32_t numa_domain(ProcId p) const { return at(p).numa; }
  std::uint32_t soft_domain(ProcId p) const { return at(p).soft; }

  std::vector<ProcId> procs_of(NodeId n) const {
    std::vector<ProcId> out;
    for (std::uint32_t i = 0; i < places_.size(); ++i) {
      if (places_[i].node == index(n)) out.push_back(ProcId{i});
    }
    return out;
  }

  // Innermost grouping shared by a and b.
  Level shared_level(ProcId a, ProcId b) const {
    const auto& pa = at(a);
    const auto& pb = at(b);
    if (a == b) return Level::kSelf;
    if (pa.soft == pb.soft) return Level::kSoft;
    if (pa.numa == pb.numa) return Level::kNuma;
    if (pa.node == pb.node) return Level::kCrossNuma;
    return Level::kDisagg;
  }

  double comm_latency(ProcId a, ProcId b) const {
    switch (shared_level(a, b)) {
      case Level::kSelf: return 0.0;
      case Level::kSoft: return spec_.lat.soft;
      case Level::kNuma: return spec_.lat.numa;
      case Level::kCrossNuma: return spec_.lat.cross_numa;
      case Level::kDisagg: return spec_.lat.disagg;
    }
    return 0.0;
  }

 private:
  struct Place {
    std::uint32_t node;
    std::uint32_t numa;
    std::uint32_t soft;
  };

  const Place& at(ProcId p) const {
    if (!valid(p)) throw UsageError("unknown processor " + to_string(p));
    return places_[index(p)];
  }

  TopologySpec spec_;
  std::vector<Place> places_;
};

inline Topology build_topology(std::uint32_t nodes, std::uint32_t numa_per_node, std::uint32_t soft_per_numa,
                               std::uint32_t cores_per_soft, Latencies lat = {}) {
  return Topology(TopologySpec{nodes, numa_per_node, soft_per_numa, cores_per_soft, lat});
}

}  // namespace fedcoh
