#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "fedcoh/checker.hpp"
#include "fedcoh/history.hpp"
#include "fedcoh/memcore.hpp"
#include "fedcoh/sim.hpp"
#include "fedcoh/synclib/bakery.hpp"
#include "fedcoh/synclib/channel.hpp"

namespace fedcoh::litmus {

enum class Expect { kAccept, kReject };

inline const char* to_string(Expect e) { return e == Expect::kAccept ? "accept" : "reject"; }

struct RunResult {
  Trace trace;
  std::string problem;  // scenario-level expectation that failed, if any
};

struct LitmusCase {
  std::string name;
  std::string description;
  TopologySpec topology;
  bool randomized = false;
  Expect full = Expect::kAccept;
  Expect weak = Expect::kAccept;
  Expect federated = Expect::kAccept;
  std::function<RunResult(std::uint64_t seed)> run;
};

struct RunOutcome {
  std::uint64_t seed = 0;
  bool pass = false;
  std::string reason;
};

struct Report {
  std::string name;
  std::size_t runs = 0;
  std::size_t pass = 0;
  std::map<std::string, std::string> verdicts;  // expected, per model
  std::vector<RunOutcome> outcomes;

  bool ok() const { return runs == pass; }
};

namespace detail {

inline Value pick_value(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return std::uniform_int_distribution<Value>(1, 255)(rng);
}

inline bool coin(std::uint64_t seed) { return (std::mt19937_64(seed)() >> 17) & 1; }

inline TopologySpec spec(std::uint32_t nodes, std::uint32_t cores) { return TopologySpec{nodes, 1, 1, cores, {}}; }

// L1: node B caches x, node A writes without flushing and notifies B; B's
// next read still returns the old value.
inline RunResult stale_read(std::uint64_t seed) {
  MemorySystem mem(Topology(spec(2, 1)), {{"x", 0}});
  const LocId x = mem.loc("x");
  Proc a(mem, ProcId{0}), b(mem, ProcId{1});
  sync::Channel ch(a.node(), b.node(), mem.topology().latencies().disagg);
  const Value v = pick_value(seed);
  RunResult r;
  const Value first = mem.read(b.id(), x);
  mem.write(a.id(), x, v);
  ch.send(a, "written");
  if (!ch.try_recv(b)) r.problem = "notification lost";
  const Value second = mem.read(b.id(), x);
  if (first != 0 || second != 0) r.problem = "expected a stale read of 0, got " + std::to_string(second);
  r.trace = mem.take_trace();
  return r;
}

// L2: CAS(0 -> 1) on two nodes, both succeed.
inline RunResult broken_cas(std::uint64_t seed) {
  MemorySystem mem(Topology(spec(2, 1)), {{"x", 0}});
  const LocId x = mem.loc("x");
  const bool swap = coin(seed);
  const ProcId first{swap ? 1u : 0u}, second{swap ? 0u : 1u};
  const auto c1 = mem.atomic_cas(first, x, 0, 1);
  const auto c2 = mem.atomic_cas(second, x, 0, 1);
  RunResult r;
  if (!c1.success || !c2.success) r.problem = "expected both CAS operations to succeed";
  r.trace = mem.take_trace();
  return r;
}

// L3: FAA(+1) on two nodes, both flushed; the counter ends at 1.
inline RunResult broken_faa(std::uint64_t seed) {
  MemorySystem mem(Topology(spec(2, 1)), {{"x", 0}});
  const LocId x = mem.loc("x");
  const bool swap = coin(seed);
  const bool flush_swap = coin(seed ^ 0x9e3779b97f4a7c15ULL);
  const ProcId p{swap ? 1u : 0u}, q{swap ? 0u : 1u};
  const Value o1 = mem.atomic_faa(p, x, 1);
  const Value o2 = mem.atomic_faa(q, x, 1);
  mem.flush_line(flush_swap ? q : p, x);
  mem.flush_line(flush_swap ? p : q, x);
  RunResult r;
  if (o1 != 0 || o2 != 0 || mem.memory(x) != 1) {
    r.problem = "expected both increments to read 0 and the counter to end at 1";
  }
  r.trace = mem.take_trace();
  return r;
}

// L4: two FAAs on the same node are atomic.
inline RunResult local_faa(std::uint64_t seed) {
  MemorySystem mem(Topology(spec(1, 2)), {{"x", 0}});
  const LocId x = mem.loc("x");
  const bool swap = coin(seed);
  mem.atomic_faa(ProcId{swap ? 1u : 0u}, x, 1);
  mem.atomic_faa(ProcId{swap ? 0u : 1u}, x, 1);
  const Value v = mem.read(ProcId{0}, x);
  RunResult r;
  if (v != 2) r.problem = "expected the counter to reach 2, got " + std::to_string(v);
  r.trace = mem.take_trace();
  return r;
}

// L5: a write is visible to its writer and, after a notification, to another
// core of the same node, with no flush.
inline RunResult local_visibility(std::uint64_t seed) {
  MemorySystem mem(Topology(spec(1, 2)), {{"x", 0}});
  const LocId x = mem.loc("x");
  Proc a(mem, ProcId{0}), b(mem, ProcId{1});
  sync::Channel ch(a.node(), b.node(), mem.topology().latencies().soft);
  const Value v = pick_value(seed);
  mem.write(a.id(), x, v);
  const Value own = mem.read(a.id(), x);
  ch.send(a, "written");
  ch.try_recv(b);
  const Value other = mem.read(b.id(), x);
  RunResult r;
  if (own != v || other != v) r.problem = "expected both cores to read " + std::to_string(v);
  r.trace = mem.take_trace();
  return r;
}

// L6: a lock handed between nodes by message, with no flushes around the
// critical sections. The next holder does not see the protected write.
inline RunResult lock_without_flush(std::uint64_t seed) {
  MemorySystem mem(Topology(spec(2, 1)), {{"data", 0}});
  const LocId data = mem.loc("data");
  Proc a(mem, ProcId{0}), b(mem, ProcId{1});
  sync::Channel ab(a.node(), b.node(), mem.topology().latencies().disagg);
  sync::Channel ba(b.node(), a.node(), mem.topology().latencies().disagg);
  const Value v = pick_value(seed);
  // b holds the lock first and reads the data.
  mem.read(b.id(), data);
  ba.send(b, "unlock");
  ba.try_recv(a);
  mem.write(a.id(), data, v);
  ab.send(a, "unlock");
  ab.try_recv(b);
  const Value seen = mem.read(b.id(), data);
  RunResult r;
  if (seen != 0) r.problem = "expected the next holder to miss the protected write";
  r.trace = mem.take_trace();
  return r;
}

// L7: the Bakery lock under a random schedule; critical sections increment a
// shared counter with flushes.
inline RunResult bakery(std::uint64_t seed) {
  MemorySystem mem(Topology(spec(2, 1)), {{"counter", 0}});
  const LocId counter = mem.loc("counter");
  sync::BakeryLock lock(mem, {ProcId{0}, ProcId{1}});
  Proc a(mem, ProcId{0}), b(mem, ProcId{1});
  auto body = [&](Proc& p) -> Task<void> {
    co_await lock.acquire(p);
    co_await p.flush_line(counter);
    const Value c = co_await p.read(counter);
    co_await p.write(counter, c + 1);
    co_await p.flush_line(counter);
    co_await lock.release(p);
  };
  Scheduler sched(seed);
  sched.spawn(a, body(a));
  sched.spawn(b, body(b));
  sched.run(1'000'000);
  RunResult r;
  if (lock.violations() != 0 || mem.memory(counter) != 2) r.problem = "mutual exclusion violated";
  r.trace = mem.take_trace();
  return r;
}

inline std::uint64_t run_seed(std::uint64_t seed, std::size_t i) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (i + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

inline const std::vector<LitmusCase>& litmus_catalog() {
  static const std::vector<LitmusCase> catalog = [] {
    using detail::spec;
    using E = Expect;
    return std::vector<LitmusCase>{
        {"L1", "cross-node stale read after a notification", spec(2, 1), false, E::kReject, E::kAccept, E::kAccept,
         detail::stale_read},
        {"L2", "cross-node CAS from 0 succeeds on both nodes", spec(2, 1), false, E::kReject, E::kAccept,
         E::kAccept, detail::broken_cas},
        {"L3", "cross-node FAA increments the counter by only one", spec(2, 1), false, E::kReject, E::kAccept,
         E::kAccept, detail::broken_faa},
        {"L4", "same-node FAAs are atomic", spec(1, 2), false, E::kAccept, E::kReject, E::kAccept,
         detail::local_faa},
        {"L5", "same-node read-your-writes and read-others-writes", spec(1, 2), false, E::kAccept, E::kReject,
         E::kAccept, detail::local_visibility},
        {"L6", "lock handoff across nodes without flushes hides the protected write", spec(2, 1), false, E::kReject,
         E::kAccept, E::kAccept, detail::lock_without_flush},
        {"L7", "Bakery lock with flushes keeps mutual exclusion", spec(2, 1), true, E::kAccept, E::kAccept,
         E::kAccept, detail::bakery},
    };
  }();
  return catalog;
}

inline const LitmusCase& find_case(const std::string& name) {
  for (const auto& c : litmus_catalog()) {
    if (c.name == name) return c;
  }
  throw UsageError("unknown litmus case " + name);
}

struct ModelVerdicts {
  bool full = true;
  bool weak = true;
  bool federated = true;
};

// Conjunction over every location of the trace.
inline ModelVerdicts check_trace(const Trace& trace, const CheckOptions& opt = {250, true}) {
  ModelVerdicts v;
  for (const auto& h : project_all(trace)) {
    v.full = v.full && check_full(h, opt).accepted;
    v.weak = v.weak && check_weak(h, opt).accepted;
    v.federated = v.federated && check_federated(h, opt).accepted;
  }
  return v;
}

inline Report litmus_run(const std::string& name, std::uint64_t seed, std::size_t runs) {
  const LitmusCase& c = find_case(name);
  Report rep;
  rep.name = c.name;
  rep.runs = runs;
  rep.verdicts = {{"full", to_string(c.full)}, {"weak", to_string(c.weak)}, {"federated", to_string(c.federated)}};
  auto expect = [](bool accepted, Expect e) { return accepted == (e == Expect::kAccept); };
  for (std::size_t i = 0; i < runs; ++i) {
    RunOutcome o;
    o.seed = detail::run_seed(seed, i);
    try {
      const RunResult r = c.run(o.seed);
      const ModelVerdicts v = check_trace(r.trace);
      if (!r.problem.empty()) {
        o.reason = r.problem;
      } else if (!expect(v.full, c.full)) {
        o.reason = std::string("full checker did not ") + to_string(c.full);
      } else if (!expect(v.weak, c.weak)) {
        o.reason = std::string("weak checker did not ") + to_string(c.weak);
      } else if (!expect(v.federated, c.federated)) {
        o.reason = std::string("federated checker did not ") + to_string(c.federated);
      } else {
        o.pass = true;
      }
    } catch (const std::exception& e) {
      o.reason = e.what();
    }
    if (o.pass) ++rep.pass;
    rep.outcomes.push_back(std::move(o));
  }
  return rep;
}

inline nlohmann::ordered_json to_json(const Report& r) {
  nlohmann::ordered_json j;
  j["case"] = r.name;
  j["runs"] = r.runs;
  j["pass"] = r.pass;
  j["verdicts"] = nlohmann::ordered_json::object();
  for (const char* m : {"full", "weak", "federated"}) j["verdicts"][m] = r.verdicts.at(m);
  nlohmann::ordered_json failures = nlohmann::ordered_json::array();
  for (const auto& o : r.outcomes) {
    if (!o.pass) failures.push_back({{"seed", o.seed}, {"reason", o.reason}});
  }
  if (!failures.empty()) j["failures"] = failures;
  return j;
}

}  // namespace fedcoh::litmus
