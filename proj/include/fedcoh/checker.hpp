#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "fedcoh/history.hpp"
#include "json.hpp"

namespace fedcoh {

enum class Model { kFull, kWeak, kFederated, kFederatedAxiomatic };

inline std::string_view to_string(Model m) {
  switch (m) {
    case Model::kFull: return "full";
    case Model::kWeak: return "weak";
    case Model::kFederated: return "federated";
    case Model::kFederatedAxiomatic: return "federated-axiomatic";
  }
  return "?";
}

// A history too large for exhaustive search. Not a verdict.
class BoundExceeded : public std::runtime_error {
 public:
  BoundExceeded(std::size_t events, std::size_t bound)
      : std::runtime_error("bound exceeded: " + std::to_string(events) + " events > " + std::to_string(bound)) {}
};

struct WitnessStep {
  enum class Kind { kInitWrite, kInitFlush, kEvent, kInsertedFlush };
  Kind kind = Kind::kEvent;
  Seq seq = 0;               // kInitWrite, kInitFlush, kEvent
  std::size_t event = 0;     // index into History::events for kEvent
  std::int64_t domain = -1;  // flushed domain for kInsertedFlush (node or processor id)
  std::string note;          // where a read got its value
};

struct Verdict {
  std::string location;
  Model model = Model::kFull;
  bool accepted = false;
  std::vector<WitnessStep> witness;
  // Rejections: the read that could not be satisfied in the deepest partial order.
  std::optional<Seq> culprit;
  std::string culprit_label;
  std::string rule;
  std::size_t num_events = 0;
  // Labels of history events by index, for explain().
  std::vector<std::string> labels;
  std::vector<std::string> owners;
};

struct CheckOptions {
  std::size_t bound = 20;
  // Federated only: may the search insert system flushes (evictions)?
  bool allow_evictions = true;
};

struct AxiomaticOptions {
  std::size_t bound = 10;
  // Inserted flushes of one domain allowed between two consecutive events.
  std::size_t flush_budget = 1;
  // Restrict insertions to those that can change a later read's value.
  bool pruned = true;
};

namespace detail {

// Per-processor program order and cross-processor predecessors.
struct Schedule {
  std::vector<std::vector<std::size_t>> threads;  // event indices per processor, in order
  std::vector<std::size_t> thread_of;
  std::vector<std::size_t> pos;

  explicit Schedule(const History& h) {
    const auto procs = h.procs();
    thread_of.resize(h.events.size());
    pos.resize(h.events.size());
    threads.resize(procs.size());
    for (std::size_t i = 0; i < h.events.size(); ++i) {
      const auto t = static_cast<std::size_t>(std::find(procs.begin(), procs.end(), h.events[i].proc) - procs.begin());
      thread_of[i] = t;
      pos[i] = threads[t].size();
      threads[t].push_back(i);
    }
  }

  bool consumed(const std::vector<std::uint8_t>& done, std::size_t e) const { return done[thread_of[e]] > pos[e]; }

  // Next event of thread t if its predecessors are all placed.
  std::optional<std::size_t> enabled(const History& h, const std::vector<std::uint8_t>& done, std::size_t t) const {
    if (done[t] >= threads[t].size()) return std::nullopt;
    const std::size_t e = threads[t][done[t]];
    for (std::size_t p : h.events[e].preds) {
      if (!consumed(done, p)) return std::nullopt;
    }
    return e;
  }

  bool finished(const std::vector<std::uint8_t>& done) const {
    for (std::size_t t = 0; t < threads.size(); ++t) {
      if (done[t] < threads[t].size()) return false;
    }
    return true;
  }
};

inline Verdict make_verdict(const History& h, Model m) {
  Verdict v;
  v.location = h.location;
  v.model = m;
  v.num_events = h.events.size();
  for (const auto& e : h.events) {
    v.labels.push_back(e.label);
    v.owners.push_back(to_string(e.proc) + "@" + to_string(e.node));
  }
  return v;
}

inline std::vector<WitnessStep> init_prefix(const History& h) {
  return {{WitnessStep::Kind::kInitWrite, h.init_write_seq, 0, -1, {}},
          {WitnessStep::Kind::kInitFlush, h.init_flush_seq, 0, -1, {}}};
}

inline void check_bound(const History& h, std::size_t bound) {
  if (h.events.size() > bound) throw BoundExceeded(h.events.size(), bound);
  if (h.events.size() > 250) throw BoundExceeded(h.events.size(), 250);
}

// Deepest-failure bookkeeping shared by the searches.
struct Culprit {
  std::size_t depth = 0;
  bool set = false;
  std::size_t event = 0;
  std::string rule;

  void offer(std::size_t d, std::size_t e, std::string r) {
    if (set && d <= depth) return;
    depth = d;
    set = true;
    event = e;
    rule = std::move(r);
  }

  void apply(const History& h, Verdict& v) const {
    if (!set) return;
    v.culprit = h.events[event].seq;
    v.culprit_label = h.events[event].label;
    v.rule = rule;
  }
};

}  // namespace detail

// Definition 1: a total order in which every read returns the latest write.
inline Verdict check_full(const History& h, const CheckOptions& opt = {}) {
  detail::check_bound(h, opt.bound);
  const detail::Schedule sched(h);
  Verdict verdict = detail::make_verdict(h, Model::kFull);
  std::vector<std::uint8_t> done(sched.threads.size(), 0);
  std::vector<WitnessStep> path = detail::init_prefix(h);
  std::unordered_set<std::string> failed;
  detail::Culprit culprit;

  auto key = [&](Value cur) {
    std::string k(done.begin(), done.end());
    k.append(reinterpret_cast<const char*>(&cur), sizeof(cur));
    return k;
  };

  auto dfs = [&](auto&& self, Value cur, std::size_t depth) -> bool {
    if (sched.finished(done)) return true;
    const std::string k = key(cur);
    if (failed.contains(k)) return false;
    for (std::size_t t = 0; t < sched.threads.size(); ++t) {
      const auto e = sched.enabled(h, done, t);
      if (!e) continue;
      const auto& op = h.events[*e];
      if (op.reads && *op.reads != cur) {
        culprit.offer(depth, *e, "last-write");
        continue;
      }
      ++done[t];
      path.push_back({WitnessStep::Kind::kEvent, op.seq, *e, -1, op.reads ? "last write" : ""});
      if (self(self, op.writes.value_or(cur), depth + 1)) return true;
      path.pop_back();
      --done[t];
    }
    failed.insert(k);
    return false;
  };

  verdict.accepted = dfs(dfs, h.init_value, 0);
  if (verdict.accepted) {
    verdict.witness = std::move(path);
  } else {
    culprit.apply(h, verdict);
  }
  return verdict;
}

using NodeMap = std::map<ProcId, NodeId>;

// Definition 2, operationally: interleave the recorded operations over
// per-node caches and a shared memory exactly as MemorySystem does, letting
// any present line be evicted before any step.
inline Verdict check_federated(const History& h, const NodeMap& node_map, const CheckOptions& opt = {}) {
  detail::check_bound(h, opt.bound);
  const detail::Schedule sched(h);
  Verdict verdict = detail::make_verdict(h, Model::kFederated);

  std::vector<NodeId> nodes;
  std::vector<std::size_t> node_of_event(h.events.size());
  for (std::size_t i = 0; i < h.events.size(); ++i) {
    auto it = node_map.find(h.events[i].proc);
    const NodeId n = it == node_map.end() ? h.events[i].node : it->second;
    auto pos = std::find(nodes.begin(), nodes.end(), n);
    if (pos == nodes.end()) {
      nodes.push_back(n);
      pos = nodes.end() - 1;
    }
    node_of_event[i] = static_cast<std::size_t>(pos - nodes.begin());
  }

  std::vector<std::uint8_t> done(sched.threads.size(), 0);
  std::vector<LineState> lines(nodes.size());
  Value memory = h.init_value;
  std::vector<WitnessStep> path = detail::init_prefix(h);
  std::unordered_set<std::string> failed;
  detail::Culprit culprit;

  auto key = [&]() {
    std::string k(done.begin(), done.end());
    for (const auto& l : lines) {
      k.push_back(static_cast<char>(l.kind));
      if (l.present()) k.append(reinterpret_cast<const char*>(&l.value), sizeof(Value));
    }
    k.append(reinterpret_cast<const char*>(&memory), sizeof(memory));
    return k;
  };

  auto dfs = [&](auto&& self, std::size_t depth) -> bool {
    if (sched.finished(done)) return true;
    const std::string k = key();
    if (failed.contains(k)) return false;
    for (std::size_t t = 0; t < sched.threads.size(); ++t) {
      const auto e = sched.enabled(h, done, t);
      if (!e) continue;
      const auto& op = h.events[*e];
      const std::size_t n = node_of_event[*e];
      const LineState saved_line = lines[n];
      const Value saved_mem = memory;
      std::string note;
      if (op.reads) {
        const Value seen = lines[n].present() ? lines[n].value : memory;
        if (seen != *op.reads) {
          culprit.offer(depth, *e, lines[n].present() ? "2(a)" : "2(b)");
          continue;
        }
        note = lines[n].present() ? "cached at " + to_string(nodes[n]) : "from memory";
        if (!lines[n].present()) lines[n] = LineState::clean(memory);
      }
      if (op.writes) {
        lines[n] = LineState::dirty(*op.writes);
      } else if (op.is_flush()) {
        if (lines[n].kind == LineState::Kind::kDirty) memory = lines[n].value;
        lines[n] = LineState::invalid();
      }
      ++done[t];
      path.push_back({WitnessStep::Kind::kEvent, op.seq, *e, -1, note});
      if (self(self, depth + 1)) return true;
      path.pop_back();
      --done[t];
      lines[n] = saved_line;
      memory = saved_mem;
    }
    if (opt.allow_evictions) {
      for (std::size_t n = 0; n < lines.size(); ++n) {
        if (!lines[n].present()) continue;
        const LineState saved_line = lines[n];
        const Value saved_mem = memory;
        if (lines[n].kind == LineState::Kind::kDirty) memory = lines[n].value;
        lines[n] = LineState::invalid();
        path.push_back({WitnessStep::Kind::kInsertedFlush, 0, 0, static_cast<std::int64_t>(index(nodes[n])), {}});
        if (self(self, depth)) return true;
        path.pop_back();
        lines[n] = saved_line;
        memory = saved_mem;
      }
    }
    failed.insert(k);
    return false;
  };

  verdict.accepted = dfs(dfs, 0);
  if (verdict.accepted) {
    verdict.witness = std::move(path);
  } else {
    culprit.apply(h, verdict);
  }
  return verdict;
}

inline Verdict check_federated(const History& h, const CheckOptions& opt = {}) {
  return check_federated(h, h.node_of, opt);
}

// Every processor its own node: the per-processor cache model.
inline NodeMap singleton_nodes(const History& h) {
  NodeMap m;
  for (const auto& e : h.events) m[e.proc] = NodeId{index(e.proc)};
  return m;
}

namespace detail {

// Literal rule evaluation over an explicit total order, scanning backwards.
class RuleOrder {
 public:
  struct Item {
    enum class Kind : std::uint8_t { kInitWrite, kFlush, kEvent };
    Kind kind;
    std::int64_t domain;  // -1 for the init processor
    std::size_t event;    // kEvent
    bool inserted;
  };

  RuleOrder(const History& h, std::vector<std::int64_t> domain_of_event)
      : h_(h), domain_of_event_(std::move(domain_of_event)) {}

  void push_event(std::size_t e) { items_.push_back({Item::Kind::kEvent, domain_of_event_[e], e, false}); }
  void push_flush(std::int64_t domain, bool inserted) { items_.push_back({Item::Kind::kFlush, domain, 0, inserted}); }
  void push_init_write() { items_.push_back({Item::Kind::kInitWrite, -1, 0, false}); }
  void pop() { items_.pop_back(); }
  std::size_t size() const { return items_.size(); }
  const std::vector<Item>& items() const { return items_; }

  std::optional<Value> writes(const Item& it) const {
    if (it.kind == Item::Kind::kInitWrite) return h_.init_value;
    if (it.kind == Item::Kind::kEvent) return h_.events[it.event].writes;
    return std::nullopt;
  }
  std::optional<Value> reads(const Item& it) const {
    if (it.kind == Item::Kind::kEvent) return h_.events[it.event].reads;
    return std::nullopt;
  }
  bool is_flush(const Item& it) const {
    return it.kind == Item::Kind::kFlush || (it.kind == Item::Kind::kEvent && h_.events[it.event].is_flush());
  }

  // Value a read by `domain` appended now would return, and the rule used.
  std::pair<std::optional<Value>, const char*> eval_read(std::int64_t domain) const {
    // Rule 2(a): the domain's last operation is a write or read.
    for (std::size_t i = items_.size(); i-- > 0;) {
      const auto& it = items_[i];
      if (it.domain != domain) continue;
      if (auto w = writes(it)) return {w, "2(a)"};
      if (auto r = reads(it)) return {r, "2(a)"};
      if (is_flush(it)) break;
    }
    // Rule 2(b): the last flush that wrote data back decides the value.
    for (std::size_t i = items_.size(); i-- > 0;) {
      if (!is_flush(items_[i]) || !writes_back(i)) continue;
      const std::int64_t q = items_[i].domain;
      for (std::size_t j = i; j-- > 0;) {
        if (items_[j].domain != q) continue;
        if (auto w = writes(items_[j])) return {w, "2(b)"};
      }
    }
    return {std::nullopt, "2(b)"};
  }

  // Whether the flush at position i follows a write of its domain with no
  // intervening flush of that domain.
  bool writes_back(std::size_t i) const {
    const std::int64_t q = items_[i].domain;
    for (std::size_t j = i; j-- > 0;) {
      if (items_[j].domain != q) continue;
      if (writes(items_[j])) return true;
      if (is_flush(items_[j])) return false;
    }
    return false;
  }

  // Whether flushing `domain` now would write data back.
  bool pending_write(std::int64_t domain) const {
    for (std::size_t i = items_.size(); i-- > 0;) {
      const auto& it = items_[i];
      if (it.domain != domain) continue;
      if (writes(it)) return true;
      if (is_flush(it)) return false;
    }
    return false;
  }

  // Everything later rule evaluation depends on: per domain the value its
  // last read or write left (none after a flush) and whether a write is
  // pending, plus the value the last write-back published.
  void summarize(const std::vector<std::int64_t>& domains, std::string& out) const {
    for (auto d : domains) {
      std::optional<Value> cached;
      bool pending = false;
      for (std::size_t i = items_.size(); i-- > 0;) {
        const auto& it = items_[i];
        if (it.domain != d) continue;
        if (is_flush(it)) break;
        if (!cached) cached = writes(it) ? writes(it) : reads(it);
        if (writes(it)) {
          pending = true;
          break;
        }
      }
      out.push_back(static_cast<char>((cached ? 1 : 0) | (pending ? 2 : 0)));
      if (cached) out.append(reinterpret_cast<const char*>(&*cached), sizeof(Value));
    }
    const auto memory = eval_read(-2).first.value_or(0);
    out.append(reinterpret_cast<const char*>(&memory), sizeof(Value));
  }

  bool last_is_flush(std::int64_t domain) const {
    for (std::size_t i = items_.size(); i-- > 0;) {
      if (items_[i].domain == domain) return is_flush(items_[i]);
    }
    return false;
  }

 private:
  const History& h_;
  std::vector<std::int64_t> domain_of_event_;
  std::vector<Item> items_;
};

inline Verdict axiomatic_search(const History& h, const std::vector<std::int64_t>& domain_of_event,
                                const std::vector<std::int64_t>& domains, bool allow_insert,
                                const AxiomaticOptions& opt, Model model) {
  detail::check_bound(h, opt.bound);
  const Schedule sched(h);
  Verdict verdict = make_verdict(h, model);

  // Out-of-thin-air reads can never be satisfied.
  for (std::size_t i = 0; i < h.events.size(); ++i) {
    const auto& op = h.events[i];
    if (!op.reads || *op.reads == h.init_value) continue;
    const bool written = std::any_of(h.events.begin(), h.events.end(),
                                     [&](const History::Op& o) { return o.writes == op.reads; });
    if (!written) {
      verdict.culprit = op.seq;
      verdict.culprit_label = op.label;
      verdict.rule = "no write of the value";
      return verdict;
    }
  }

  RuleOrder order(h, domain_of_event);
  order.push_init_write();
  order.push_flush(-1, false);
  for (auto d : domains) order.push_flush(d, false);

  std::vector<std::uint8_t> done(sched.threads.size(), 0);
  std::map<std::int64_t, std::size_t> gap;  // inserted flushes per domain since the last event
  Culprit culprit;

  auto place_event = [&](auto&& self, std::size_t t, std::size_t e, std::size_t depth) -> bool {
    const auto& op = h.events[e];
    if (op.reads) {
      auto [got, rule] = order.eval_read(domain_of_event[e]);
      if (got != op.reads) {
        culprit.offer(depth, e, rule);
        return false;
      }
    }
    order.push_event(e);
    ++done[t];
    auto saved_gap = std::move(gap);
    gap.clear();
    if (self(self, depth + 1)) return true;
    gap = std::move(saved_gap);
    --done[t];
    order.pop();
    return false;
  };

  std::unordered_set<std::string> failed;
  auto key = [&] {
    std::string k(done.begin(), done.end());
    order.summarize(domains, k);
    for (auto d : domains) k.push_back(static_cast<char>(gap[d]));
    return k;
  };

  auto dfs = [&](auto&& self, std::size_t depth) -> bool {
    if (sched.finished(done)) return true;
    const std::string k = key();
    if (failed.contains(k)) return false;
    for (std::size_t t = 0; t < sched.threads.size(); ++t) {
      const auto e = sched.enabled(h, done, t);
      if (!e) continue;
      if (place_event(self, t, *e, depth)) return true;
      // A read right after an inserted flush of its own domain.
      const std::int64_t d = domain_of_event[*e];
      if (allow_insert && opt.pruned && h.events[*e].reads && !order.last_is_flush(d) && gap[d] < opt.flush_budget) {
        order.push_flush(d, true);
        ++gap[d];
        if (place_event(self, t, *e, depth)) return true;
        --gap[d];
        order.pop();
      }
    }
    if (allow_insert) {
      for (auto d : domains) {
        if (gap[d] >= opt.flush_budget) continue;
        if (opt.pruned && !order.pending_write(d)) continue;
        order.push_flush(d, true);
        ++gap[d];
        if (self(self, depth)) return true;
        --gap[d];
        order.pop();
      }
    }
    failed.insert(k);
    return false;
  };

  verdict.accepted = dfs(dfs, 0);
  if (verdict.accepted) {
    verdict.witness = init_prefix(h);
    const auto& items = order.items();
    for (std::size_t i = 2 + domains.size(); i < items.size(); ++i) {
      const auto& it = items[i];
      if (it.kind == RuleOrder::Item::Kind::kEvent) {
        verdict.witness.push_back({WitnessStep::Kind::kEvent, h.events[it.event].seq, it.event, -1, {}});
      } else {
        verdict.witness.push_back({WitnessStep::Kind::kInsertedFlush, 0, 0, it.domain, {}});
      }
    }
  } else {
    culprit.apply(h, verdict);
  }
  return verdict;
}

}  // namespace detail

// The weak flush-based condition: each processor owns a private cache and no
// flushes beyond the recorded ones exist.
inline Verdict check_weak(const History& h, const CheckOptions& opt = {}) {
  std::vector<std::int64_t> dom(h.events.size());
  std::vector<std::int64_t> domains;
  for (std::size_t i = 0; i < h.events.size(); ++i) dom[i] = index(h.events[i].proc);
  for (auto p : h.procs()) domains.push_back(index(p));
  AxiomaticOptions ax;
  ax.bound = opt.bound;
  return detail::axiomatic_search(h, dom, domains, false, ax, Model::kWeak);
}

// Definition 2 by brute force over total orders with inserted node flushes,
// evaluating the read rules literally. Independent of check_federated.
inline Verdict check_federated_axiomatic(const History& h, const NodeMap& node_map, const AxiomaticOptions& opt = {}) {
  std::vector<std::int64_t> dom(h.events.size());
  std::vector<std::int64_t> domains;
  for (std::size_t i = 0; i < h.events.size(); ++i) {
    auto it = node_map.find(h.events[i].proc);
    dom[i] = index(it == node_map.end() ? h.events[i].node : it->second);
    if (std::find(domains.begin(), domains.end(), dom[i]) == domains.end()) domains.push_back(dom[i]);
  }
  std::sort(domains.begin(), domains.end());
  return detail::axiomatic_search(h, dom, domains, true, opt, Model::kFederatedAxiomatic);
}

inline Verdict check_federated_axiomatic(const History& h, const AxiomaticOptions& opt = {}) {
  return check_federated_axiomatic(h, h.node_of, opt);
}

inline Verdict check(const History& h, Model m, const CheckOptions& opt = {}) {
  switch (m) {
    case Model::kFull: return check_full(h, opt);
    case Model::kWeak: return check_weak(h, opt);
    case Model::kFederated: return check_federated(h, opt);
    case Model::kFederatedAxiomatic: {
      AxiomaticOptions ax;
      ax.bound = std::min<std::size_t>(opt.bound, 10);
      return check_federated_axiomatic(h, ax);
    }
  }
  throw UsageError("unknown model");
}

// Independent single-pass replay of a witness. Returns an error message, or
// nothing when the witness is a valid order for the model.
inline std::optional<std::string> validate_witness(const History& h, const Verdict& v, const NodeMap& domains) {
  if (!v.accepted) return "verdict is a rejection";
  const bool full = v.model == Model::kFull;
  const bool weak = v.model == Model::kWeak;
  auto domain_of = [&](const History::Op& op) -> std::int64_t {
    if (weak) return index(op.proc);
    auto it = domains.find(op.proc);
    return index(it == domains.end() ? op.node : it->second);
  };

  std::size_t at = 0;
  if (v.witness.size() < 2 || v.witness[0].kind != WitnessStep::Kind::kInitWrite ||
      v.witness[1].kind != WitnessStep::Kind::kInitFlush) {
    return "witness does not start with the init write and flush";
  }
  at = 2;

  std::vector<bool> placed(h.events.size(), false);
  std::map<ProcId, std::size_t> last_placed;  // per processor: index of last placed event + 1
  Value last_write = h.init_value;            // full model
  Value memory = h.init_value;                // flush models
  std::map<std::int64_t, std::optional<Value>> cached;   // value the domain's last op left
  std::map<std::int64_t, std::optional<Value>> pending;  // unflushed write per domain

  for (; at < v.witness.size(); ++at) {
    const auto& s = v.witness[at];
    if (s.kind == WitnessStep::Kind::kInsertedFlush) {
      if (full || weak) return "inserted flush in a model without evictions";
      if (pending[s.domain]) memory = *pending[s.domain];
      pending[s.domain].reset();
      cached[s.domain].reset();
      continue;
    }
    if (s.kind != WitnessStep::Kind::kEvent || s.event >= h.events.size()) return "malformed witness step";
    const auto& op = h.events[s.event];
    if (placed[s.event]) return "event placed twice";
    for (std::size_t j = 0; j < s.event; ++j) {
      if (h.events[j].proc == op.proc && !placed[j]) return "program order violated at seq " + std::to_string(op.seq);
    }
    for (std::size_t p : op.preds) {
      if (!placed[p]) return "ordering edge violated at seq " + std::to_string(op.seq);
    }
    placed[s.event] = true;
    if (full) {
      if (op.reads && *op.reads != last_write) return "read at seq " + std::to_string(op.seq) + " is not the last write";
      if (op.writes) last_write = *op.writes;
      continue;
    }
    const std::int64_t d = domain_of(op);
    if (op.reads) {
      const Value expect = cached[d] ? *cached[d] : memory;
      if (*op.reads != expect) return "read at seq " + std::to_string(op.seq) + " violates the flush rules";
      cached[d] = expect;
    }
    if (op.writes) {
      cached[d] = *op.writes;
      pending[d] = *op.writes;
    } else if (op.is_flush()) {
      if (pending[d]) memory = *pending[d];
      pending[d].reset();
      cached[d].reset();
    }
  }
  for (std::size_t i = 0; i < placed.size(); ++i) {
    if (!placed[i]) return "event seq " + std::to_string(h.events[i].seq) + " missing from witness";
  }
  return std::nullopt;
}

inline std::string explain(const Verdict& v) {
  std::ostringstream os;
  os << "location " << v.location << ", model " << to_string(v.model) << ": ";
  if (v.num_events == 0 && v.accepted) {
    os << "vacuously accepted (no operations)\n";
    return os.str();
  }
  if (!v.accepted) {
    os << "rejected\n";
    if (v.culprit) {
      os << "  culprit: seq " << *v.culprit << " " << v.culprit_label << " cannot be satisfied";
      if (!v.rule.empty()) os << " (rule " << v.rule << ")";
      os << "\n";
    }
    return os.str();
  }
  os << "accepted; witness order:\n";
  for (const auto& s : v.witness) {
    switch (s.kind) {
      case WitnessStep::Kind::kInitWrite: os << "  [" << s.seq << "] init write\n"; break;
      case WitnessStep::Kind::kInitFlush: os << "  [" << s.seq << "] init flush\n"; break;
      case WitnessStep::Kind::kInsertedFlush:
        os << "  [--] inserted flush of "
           << (v.model == Model::kWeak ? to_string(ProcId{static_cast<std::uint32_t>(s.domain)})
                                       : to_string(NodeId{static_cast<std::uint32_t>(s.domain)}))
           << "\n";
        break;
      case WitnessStep::Kind::kEvent:
        os << "  [" << s.seq << "] " << v.owners.at(s.event) << " " << v.labels.at(s.event);
        if (!s.note.empty()) os << "  (" << s.note << ")";
        os << "\n";
        break;
    }
  }
  return os.str();
}

inline nlohmann::ordered_json to_json(const Verdict& v) {
  nlohmann::ordered_json j;
  j["location"] = v.location;
  j["model"] = std::string(to_string(v.model));
  j["accepted"] = v.accepted;
  if (v.accepted) {
    auto w = nlohmann::ordered_json::array();
    for (const auto& s : v.witness) {
      if (s.kind == WitnessStep::Kind::kInsertedFlush) {
        w.push_back("flush@" + (v.model == Model::kWeak ? to_string(ProcId{static_cast<std::uint32_t>(s.domain)})
                                                        : to_string(NodeId{static_cast<std::uint32_t>(s.domain)})));
      } else {
        w.push_back(s.seq);
      }
    }
    j["witness"] = std::move(w);
  } else {
    if (v.culprit) j["culprit"] = *v.culprit;
    if (!v.rule.empty()) j["rule"] = v.rule;
  }
  return j;
}

}  // namespace fedcoh
