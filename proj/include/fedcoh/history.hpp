#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "fedcoh/memcore.hpp"
#include "fedcoh/types.hpp"

namespace fedcoh {

// One location's operations, projected from a trace. The init write and its
// flush are implicit (init_value, init_seqs); `events` holds everything else in
// seq order. Evictions are dropped: the federated checkers rediscover them.
struct History {
  struct Op {
    Seq seq = 0;
    ProcId proc{};
    NodeId node{};
    OpKind op = OpKind::kRead;
    std::optional<Value> reads;   // value observed (read, rmw)
    std::optional<Value> writes;  // value stored (write, successful rmw)
    // Indices into `events` of other processors' operations ordered before this one.
    std::vector<std::size_t> preds;
    std::string label;            // human-readable form, e.g. "cas(0->1)=ok"

    bool is_flush() const { return op == OpKind::kFlush; }
  };

  std::string location = "x";
  Value init_value = 0;
  Seq init_write_seq = 0;
  Seq init_flush_seq = 1;
  std::vector<Op> events;
  std::map<ProcId, NodeId> node_of;

  // Distinct processors in first-appearance order by processor id.
  std::vector<ProcId> procs() const {
    std::vector<ProcId> out;
    for (const auto& e : events) {
      if (std::find(out.begin(), out.end(), e.proc) == out.end()) out.push_back(e.proc);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  std::vector<NodeId> nodes() const {
    std::vector<NodeId> out;
    for (const auto& e : events) {
      if (std::find(out.begin(), out.end(), e.node) == out.end()) out.push_back(e.node);
    }
    std::sort(out.begin(), out.end());
    return out;
  }
};

inline std::string op_label(const Event& e) {
  switch (e.op) {
    case OpKind::kWrite: return "w(" + std::to_string(e.value) + ")";
    case OpKind::kRead: return "r=" + std::to_string(e.value);
    case OpKind::kFlush: return "flush";
    case OpKind::kEvict: return "evict";
    case OpKind::kRmw:
      if (e.rmw == RmwKind::kCas) {
        return "cas(" + std::to_string(e.expected) + "->" + std::to_string(e.desired) + ")=" +
               (e.success ? "ok" : "fail:" + std::to_string(e.observed));
      }
      return "faa(+" + std::to_string(e.delta) + ")=" + std::to_string(e.observed);
  }
  return "?";
}

// Projects one location out of a trace. Cross-processor predecessors are the
// transitive closure of program order and `after` edges over the whole trace,
// so an edge between events on other locations still orders this one.
inline History project(const Trace& t, LocId loc) {
  History h;
  h.location = t.name(loc);
  bool have_init = false;
  bool any_edges = false;
  for (const auto& e : t.events) any_edges |= !e.after.empty();

  // Vector clocks, only when edges exist.
  std::map<ProcId, std::size_t> slot;
  std::vector<std::vector<std::size_t>> clocks;  // per event, indexed by slot
  std::vector<std::size_t> position;             // per event: 1-based index within its processor
  std::unordered_map<Seq, std::size_t> by_seq;
  std::map<ProcId, std::size_t> last_of;
  if (any_edges) {
    for (const auto& e : t.events) {
      if (e.proc != kSysProc) slot.try_emplace(e.proc, slot.size());
    }
    clocks.resize(t.events.size());
    position.resize(t.events.size(), 0);
    std::vector<std::size_t> count(slot.size(), 0);
    for (std::size_t i = 0; i < t.events.size(); ++i) {
      const auto& e = t.events[i];
      by_seq.emplace(e.seq, i);
      if (e.proc == kSysProc) continue;
      const std::size_t s = slot.at(e.proc);
      auto& vc = clocks[i];
      if (auto it = last_of.find(e.proc); it != last_of.end()) {
        vc = clocks[it->second];
      } else {
        vc.assign(slot.size(), 0);
      }
      for (Seq a : e.after) {
        auto it = by_seq.find(a);
        if (it == by_seq.end() || t.events[it->second].proc == kSysProc) continue;
        const auto& other = clocks[it->second];
        for (std::size_t k = 0; k < vc.size(); ++k) vc[k] = std::max(vc[k], other[k]);
      }
      vc[s] = ++count[s];
      position[i] = count[s];
      last_of[e.proc] = i;
    }
  }

  std::vector<std::size_t> trace_index;  // per history op
  for (std::size_t i = 0; i < t.events.size(); ++i) {
    const auto& e = t.events[i];
    if (e.loc != loc || e.op == OpKind::kEvict) continue;
    if (e.is_init()) {
      if (e.op == OpKind::kWrite) {
        h.init_value = e.value;
        h.init_write_seq = e.seq;
        have_init = true;
      } else if (e.op == OpKind::kFlush) {
        h.init_flush_seq = e.seq;
      }
      continue;
    }
    History::Op op;
    op.seq = e.seq;
    op.proc = e.proc;
    op.node = e.node;
    op.op = e.op;
    op.reads = e.read_value();
    op.writes = e.written();
    op.label = op_label(e);
    if (any_edges) {
      const auto& vc = clocks[i];
      for (std::size_t k = 0; k < h.events.size(); ++k) {
        const auto& prev = h.events[k];
        if (prev.proc == e.proc) continue;
        const std::size_t j = trace_index[k];
        if (vc[slot.at(prev.proc)] >= position[j]) op.preds.push_back(k);
      }
    }
    h.node_of[e.proc] = e.node;
    h.events.push_back(std::move(op));
    trace_index.push_back(i);
  }
  if (!have_init) throw UsageError("location " + h.location + " has no init write in the trace");
  return h;
}

inline std::vector<History> project_all(const Trace& t) {
  std::vector<History> out;
  for (std::uint32_t i = 0; i < t.locations.size(); ++i) out.push_back(project(t, LocId{i}));
  return out;
}

// Hand-assembled histories for tests and enumeration.
class HistoryBuilder {
 public:
  explicit HistoryBuilder(Value init = 0, std::string location = "x") {
    h_.location = std::move(location);
    h_.init_value = init;
  }

  HistoryBuilder& proc(ProcId p, NodeId n) {
    h_.node_of[p] = n;
    return *this;
  }

  HistoryBuilder& write(ProcId p, Value v) {
    auto& op = push(p, OpKind::kWrite, "w(" + std::to_string(v) + ")");
    op.writes = v;
    return *this;
  }
  HistoryBuilder& read(ProcId p, Value v) {
    auto& op = push(p, OpKind::kRead, "r=" + std::to_string(v));
    op.reads = v;
    return *this;
  }
  HistoryBuilder& flush(ProcId p) {
    push(p, OpKind::kFlush, "flush");
    return *this;
  }
  HistoryBuilder& cas(ProcId p, Value expected, Value desired, Value observed) {
    const bool ok = observed == expected;
    auto& op = push(p, OpKind::kRmw,
                    "cas(" + std::to_string(expected) + "->" + std::to_string(desired) + ")=" +
                        (ok ? "ok" : "fail:" + std::to_string(observed)));
    op.reads = observed;
    if (ok) op.writes = desired;
    return *this;
  }
  HistoryBuilder& faa(ProcId p, Value delta, Value old) {
    auto& op = push(p, OpKind::kRmw, "faa(+" + std::to_string(delta) + ")=" + std::to_string(old));
    op.reads = old;
    op.writes = old + delta;
    return *this;
  }
  // Orders the most recently added operation after operation `pred` (0-based).
  HistoryBuilder& after(std::size_t pred) {
    if (h_.events.size() < 2 || pred >= h_.events.size() - 1) {
      throw UsageError("edge must point to an earlier operation");
    }
    h_.events.back().preds.push_back(pred);
    return *this;
  }

  History build() const { return h_; }

 private:
  History::Op& push(ProcId p, OpKind k, std::string label) {
    auto it = h_.node_of.find(p);
    if (it == h_.node_of.end()) throw UsageError("processor " + to_string(p) + " has no node");
    History::Op op;
    op.seq = next_++;
    op.proc = p;
    op.node = it->second;
    op.op = k;
    op.label = std::move(label);
    h_.events.push_back(std::move(op));
    return h_.events.back();
  }

  History h_;
  Seq next_ = 2;
};

}  // namespace fedcoh
