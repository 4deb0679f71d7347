#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fedcoh/topology.hpp"
#include "fedcoh/types.hpp"

namespace fedcoh {

enum class OpKind : std::uint8_t { kWrite, kRead, kFlush, kRmw, kEvict };
enum class RmwKind : std::uint8_t { kCas, kFaa };

struct Event {
  Seq seq = 0;
  ProcId proc{};
  NodeId node{};
  OpKind op = OpKind::kRead;
  LocId loc{};
  // kWrite: value stored. kRead: value returned.
  Value value = 0;
  // kRmw only.
  RmwKind rmw = RmwKind::kCas;
  Value expected = 0;  // CAS
  Value desired = 0;   // CAS
  bool success = false;
  Value delta = 0;     // FAA
  Value observed = 0;  // value seen before the update (CAS observed / FAA old)
  // Cross-processor happens-before predecessors.
  std::vector<Seq> after;

  bool is_init() const { return proc == kInitProc; }
  // Value left in the line by an update, if this event writes.
  std::optional<Value> written() const {
    if (op == OpKind::kWrite) return value;
    if (op == OpKind::kRmw) {
      if (rmw == RmwKind::kFaa) return observed + delta;
      if (success) return desired;
    }
    return std::nullopt;
  }
  // Value observed by a read or an update.
  std::optional<Value> read_value() const {
    if (op == OpKind::kRead) return value;
    if (op == OpKind::kRmw) return observed;
    return std::nullopt;
  }

  friend bool operator==(const Event&, const Event&) = default;
};

struct Trace {
  std::vector<Event> events;
  std::vector<std::string> locations;  // indexed by LocId
  std::map<ProcId, NodeId> node_of;

  LocId loc(std::string_view name) const {
    for (std::size_t i = 0; i < locations.size(); ++i) {
      if (locations[i] == name) return LocId{static_cast<std::uint32_t>(i)};
    }
    throw UsageError("unknown location " + std::string(name));
  }
  const std::string& name(LocId l) const { return locations.at(index(l)); }

  friend bool operator==(const Trace&, const Trace&) = default;
};

struct LineState {
  enum class Kind : std::uint8_t { kInvalid, kClean, kDirty };
  Kind kind = Kind::kInvalid;
  Value value = 0;

  static LineState invalid() { return {}; }
  static LineState clean(Value v) { return {Kind::kClean, v}; }
  static LineState dirty(Value v) { return {Kind::kDirty, v}; }
  bool present() const { return kind != Kind::kInvalid; }

  friend bool operator==(const LineState&, const LineState&) = default;
};

struct EvictionConfig {
  bool enabled = false;
  double rate = 0.0;  // probability of one eviction before each operation
  std::uint64_t seed = 0;

  static EvictionConfig off() { return {}; }
  static EvictionConfig random(double rate, std::uint64_t seed) { return {true, rate, seed}; }
};

struct CasResult {
  bool success;
  Value observed;
  friend bool operator==(const CasResult&, const CasResult&) = default;
};

using InitList = std::vector<std::pair<std::string, Value>>;

// Global memory plus one write-back cache per node. Coherence holds inside a
// node (its processors share the cache); across nodes, values move only through
// memory via flushes and evictions. Every operation is appended to a trace.
//
// All public operations are serialized by one internal mutex, so any number
// of threads may drive disjoint processors concurrently.
class MemorySystem {
 public:
  MemorySystem(Topology topo, const InitList& init, EvictionConfig eviction = {}, bool record = true)
      : topo_(std::move(topo)), eviction_(eviction), rng_(eviction.seed), record_(record) {
    caches_.resize(topo_.num_nodes());
    for (const auto& [name, v] : init) add_location_locked(name, v);
  }

  MemorySystem(const MemorySystem&) = delete;
  MemorySystem& operator=(const MemorySystem&) = delete;

  const Topology& topology() const { return topo_; }

  // Allocates a fresh location; recorded as an init write followed by a flush.
  LocId add_location(std::string name, Value init) {
    std::lock_guard lock(mu_);
    return add_location_locked(std::move(name), init);
  }

  LocId loc(std::string_view name) const {
    std::lock_guard lock(mu_);
    auto it = by_name_.find(std::string(name));
    if (it == by_name_.end()) throw UsageError("unknown location " + std::string(name));
    return it->second;
  }

  std::size_t num_locations() const {
    std::lock_guard lock(mu_);
    return memory_.size();
  }

  Value read(ProcId p, LocId l) {
    std::lock_guard lock(mu_);
    auto [n, line] = begin_op(p, l);
    const Value v = load_locked(line, l);
    Event e = make(p, n, OpKind::kRead, l);
    e.value = v;
    record(std::move(e));
    return v;
  }

  void write(ProcId p, LocId l, Value v) {
    std::lock_guard lock(mu_);
    auto [n, line] = begin_op(p, l);
    *line = LineState::dirty(v);
    Event e = make(p, n, OpKind::kWrite, l);
    e.value = v;
    record(std::move(e));
  }

  void flush_line(ProcId p, LocId l) {
    std::lock_guard lock(mu_);
    auto [n, line] = begin_op(p, l);
    writeback_locked(*line, l);
    record(make(p, n, OpKind::kFlush, l));
  }

  // Flushes every present line of node(p), one Flush event per line.
  void flush_all(ProcId p) {
    std::lock_guard lock(mu_);
    check_proc(p);
    maybe_evict(std::nullopt);
    const NodeId n = topo_.node(p);
    auto& cache = caches_[index(n)];
    for (std::uint32_t i = 0; i < cache.size(); ++i) {
      if (!cache[i].present()) continue;
      writeback_locked(cache[i], LocId{i});
      record(make(p, n, OpKind::kFlush, LocId{i}));
    }
  }

  CasResult atomic_cas(ProcId p, LocId l, Value expected, Value desired) {
    std::lock_guard lock(mu_);
    auto [n, line] = begin_op(p, l);
    const Value observed = load_locked(line, l);
    const bool ok = observed == expected;
    if (ok) *line = LineState::dirty(desired);
    Event e = make(p, n, OpKind::kRmw, l);
    e.rmw = RmwKind::kCas;
    e.expected = expected;
    e.desired = desired;
    e.success = ok;
    e.observed = observed;
    record(std::move(e));
    return {ok, observed};
  }

  Value atomic_faa(ProcId p, LocId l, Value delta) {
    std::lock_guard lock(mu_);
    auto [n, line] = begin_op(p, l);
    const Value old = load_locked(line, l);
    *line = LineState::dirty(old + delta);
    Event e = make(p, n, OpKind::kRmw, l);
    e.rmw = RmwKind::kFaa;
    e.delta = delta;
    e.success = true;
    e.observed = old;
    record(std::move(e));
    return old;
  }

  // Non-temporal access: recorded as Flush+Read.
  Value read_bypass(ProcId p, LocId l) {
    std::lock_guard lock(mu_);
    auto [n, line] = begin_op(p, l);
    writeback_locked(*line, l);
    record(make(p, n, OpKind::kFlush, l));
    const Value v = load_locked(line, l);
    Event e = make(p, n, OpKind::kRead, l);
    e.value = v;
    record(std::move(e));
    return v;
  }

  // Non-temporal store: recorded as Write+Flush. Other nodes' copies are untouched.
  void write_bypass(ProcId p, LocId l, Value v) {
    std::lock_guard lock(mu_);
    auto [n, line] = begin_op(p, l);
    *line = LineState::dirty(v);
    Event e = make(p, n, OpKind::kWrite, l);
    e.value = v;
    record(std::move(e));
    writeback_locked(*line, l);
    record(make(p, n, OpKind::kFlush, l));
  }

  void inject_eviction(NodeId n, LocId l) {
    std::lock_guard lock(mu_);
    check_node(n);
    check_loc(l);
    evict_locked(n, l);
  }

  // Orders the next operation issued by `to` after event `from`.
  void add_edge(Seq from, ProcId to) {
    std::lock_guard lock(mu_);
    check_proc(to);
    pending_edges_[to].push_back(from);
  }

  // Sequence number of the most recent event issued by p, if any.
  std::optional<Seq> last_seq(ProcId p) const {
    std::lock_guard lock(mu_);
    auto it = last_seq_.find(p);
    if (it == last_seq_.end()) return std::nullopt;
    return it->second;
  }

  Trace take_trace() const {
    std::lock_guard lock(mu_);
    Trace t;
    t.events = events_;
    t.locations = names_;
    for (std::uint32_t i = 0; i < topo_.num_procs(); ++i) t.node_of[ProcId{i}] = topo_.node(ProcId{i});
    t.node_of[kInitProc] = kInitNode;
    return t;
  }

  Seq next_seq() const {
    std::lock_guard lock(mu_);
    return next_seq_;
  }

  // Inspection helpers (not recorded).
  Value memory(LocId l) const {
    std::lock_guard lock(mu_);
    check_loc(l);
    return memory_[index(l)];
  }
  LineState line(NodeId n, LocId l) const {
    std::lock_guard lock(mu_);
    check_node(n);
    check_loc(l);
    return caches_[index(n)][index(l)];
  }

 private:
  LocId add_location_locked(std::string name, Value init) {
    if (by_name_.contains(name)) throw UsageError("duplicate location " + name);
    const LocId l{static_cast<std::uint32_t>(memory_.size())};
    memory_.push_back(init);
    names_.push_back(name);
    by_name_.emplace(std::move(name), l);
    for (auto& c : caches_) c.push_back(LineState::invalid());
    Event w = make(kInitProc, kInitNode, OpKind::kWrite, l);
    w.value = init;
    record(std::move(w));
    record(make(kInitProc, kInitNode, OpKind::kFlush, l));
    return l;
  }

  void check_proc(ProcId p) const {
    if (!topo_.valid(p)) throw UsageError("unknown processor " + to_string(p));
  }
  void check_node(NodeId n) const {
    if (index(n) >= caches_.size()) throw UsageError("unknown node " + to_string(n));
  }
  void check_loc(LocId l) const {
    if (index(l) >= memory_.size()) throw UsageError("unknown location id " + std::to_string(index(l)));
  }

  std::pair<NodeId, LineState*> begin_op(ProcId p, LocId l) {
    check_proc(p);
    check_loc(l);
    maybe_evict(l);
    const NodeId n = topo_.node(p);
    return {n, &caches_[index(n)][index(l)]};
  }

  Value load_locked(LineState* line, LocId l) {
    if (!line->present()) *line = LineState::clean(memory_[index(l)]);
    return line->value;
  }

  void writeback_locked(LineState& line, LocId l) {
    if (line.kind == LineState::Kind::kDirty) memory_[index(l)] = line.value;
    line = LineState::invalid();
  }

  void evict_locked(NodeId n, LocId l) {
    writeback_locked(caches_[index(n)][index(l)], l);
    record(make(kSysProc, n, OpKind::kEvict, l));
  }

  // Random fault injection: half the draws target the line about to be used.
  void maybe_evict(std::optional<LocId> hint) {
    if (!eviction_.enabled || eviction_.rate <= 0.0 || memory_.empty()) return;
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    if (coin(rng_) >= eviction_.rate) return;
    std::uniform_int_distribution<std::uint32_t> pick_node(0, static_cast<std::uint32_t>(caches_.size() - 1));
    std::uniform_int_distribution<std::uint32_t> pick_loc(0, static_cast<std::uint32_t>(memory_.size() - 1));
    const NodeId n{pick_node(rng_)};
    const bool use_hint = hint.has_value() && coin(rng_) < 0.5;
    const LocId l = use_hint ? *hint : LocId{pick_loc(rng_)};
    if (caches_[index(n)][index(l)].present()) evict_locked(n, l);
  }

  Event make(ProcId p, NodeId n, OpKind op, LocId l) {
    Event e;
    e.seq = next_seq_++;
    e.proc = p;
    e.node = n;
    e.op = op;
    e.loc = l;
    if (p != kInitProc && p != kSysProc) {
      auto it = pending_edges_.find(p);
      if (it != pending_edges_.end()) {
        e.after = std::move(it->second);
        pending_edges_.erase(it);
      }
      last_seq_[p] = e.seq;
    }
    return e;
  }

  void record(Event e) {
    if (record_) events_.push_back(std::move(e));
  }

  Topology topo_;
  EvictionConfig eviction_;
  std::mt19937_64 rng_;
  bool record_;

  mutable std::mutex mu_;
  std::vector<Value> memory_;
  std::vector<std::string> names_;
  std::unordered_map<std::string, LocId> by_name_;
  std::vector<std::vector<LineState>> caches_;  // [node][loc]
  std::vector<Event> events_;
  std::map<ProcId, std::vector<Seq>> pending_edges_;
  std::map<ProcId, Seq> last_seq_;
  Seq next_seq_ = 0;
};

inline std::string_view to_string(OpKind k) {
  switch (k) {
    case OpKind::kWrite: return "write";
    case OpKind::kRead: return "read";
    case OpKind::kFlush: return "flush";
    case OpKind::kRmw: return "rmw";
    case OpKind::kEvict: return "evict";
  }
  return "?";
}

}  // namespace fedcoh
