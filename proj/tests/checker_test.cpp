#include <gtest/gtest.h>

#include <random>

#include "fedcoh/checker.hpp"
#include "fedcoh/history.hpp"
#include "fedcoh/memcore.hpp"
#include "support/enumerate.hpp"

using namespace fedcoh;

namespace {

const ProcId p0{0}, p1{1}, p2{2}, p3{3};
const NodeId n0{0}, n1{1};

HistoryBuilder two_nodes() { return std::move(HistoryBuilder(0).proc(p0, n0).proc(p1, n1)); }

History stale_read_with_edge() {
  return two_nodes().read(p1, 0).write(p0, 2).read(p1, 0).after(1).build();
}

History broken_cas() { return two_nodes().cas(p0, 0, 1, 0).cas(p1, 0, 1, 0).build(); }

void expect_valid_witness(const History& h, const Verdict& v, const NodeMap& domains) {
  if (!v.accepted) return;
  const auto err = validate_witness(h, v, domains);
  EXPECT_FALSE(err.has_value()) << *err;
}

}  // namespace

TEST(CheckFull, SingleRead) {
  const auto h = HistoryBuilder(0).proc(p1, n0).read(p1, 0).build();
  EXPECT_TRUE(check_full(h).accepted);
}

TEST(CheckFull, WritesSeenOutOfOrder) {
  const auto h = two_nodes().write(p0, 1).write(p0, 2).read(p1, 2).read(p1, 1).build();
  const auto v = check_full(h);
  EXPECT_FALSE(v.accepted);
  EXPECT_EQ(v.rule, "last-write");
}

TEST(CheckFull, BrokenCas) { EXPECT_FALSE(check_full(broken_cas()).accepted); }

TEST(CheckFull, StaleReadWithEdge) { EXPECT_FALSE(check_full(stale_read_with_edge()).accepted); }

TEST(CheckFull, StaleReadWithoutEdgeSerializes) {
  const auto h = two_nodes().read(p1, 0).write(p0, 2).read(p1, 0).build();
  EXPECT_TRUE(check_full(h).accepted);
}

TEST(CheckFull, BoundExceeded) {
  HistoryBuilder b(0);
  b.proc(p0, n0);
  for (int i = 0; i < 21; ++i) b.read(p0, 0);
  EXPECT_THROW(check_full(b.build()), BoundExceeded);
  CheckOptions opt;
  opt.bound = 30;
  EXPECT_TRUE(check_full(b.build(), opt).accepted);
}

TEST(CheckWeak, FlushedWriteVisible) {
  const auto h = two_nodes().write(p0, 1).flush(p0).flush(p1).read(p1, 1).build();
  EXPECT_TRUE(check_weak(h).accepted);
}

TEST(CheckWeak, UnflushedWriteInvisible) {
  const auto h = two_nodes().write(p0, 1).flush(p1).read(p1, 1).build();
  EXPECT_FALSE(check_weak(h).accepted);
}

TEST(CheckWeak, PerProcessorCachesEvenOnOneNode) {
  const auto h = HistoryBuilder(0).proc(p0, n0).proc(p1, n0).write(p0, 1).read(p1, 1).after(0).build();
  EXPECT_FALSE(check_weak(h).accepted);
  EXPECT_TRUE(check_federated(h).accepted);
}

TEST(CheckFederated, BrokenCasAccepted) {
  const auto v = check_federated(broken_cas());
  ASSERT_TRUE(v.accepted);
  expect_valid_witness(broken_cas(), v, broken_cas().node_of);
  EXPECT_NE(explain(v).find("from memory"), std::string::npos);
  const auto local = two_nodes().write(p0, 3).read(p0, 3).build();
  EXPECT_NE(explain(check_federated(local)).find("cached at n0"), std::string::npos);
}

TEST(CheckFederated, OutOfThinAir) {
  const auto h = two_nodes().read(p0, 7).build();
  EXPECT_FALSE(check_federated(h).accepted);
  EXPECT_FALSE(check_federated_axiomatic(h).accepted);
}

TEST(CheckFederated, StaleReadWithEdge) {
  const auto h = stale_read_with_edge();
  EXPECT_TRUE(check_federated(h).accepted);
  const auto ax = check_federated_axiomatic(h);
  EXPECT_TRUE(ax.accepted);
  expect_valid_witness(h, ax, h.node_of);
}

TEST(CheckFederated, RuleTwoBCulprit) {
  const auto h = two_nodes().write(p0, 1).flush(p1).read(p1, 1).build();
  CheckOptions opt;
  opt.allow_evictions = false;
  const auto v = check_federated(h, opt);
  EXPECT_FALSE(v.accepted);
  EXPECT_EQ(v.rule, "2(b)");
  EXPECT_NE(explain(v).find("rule 2(b)"), std::string::npos);
  // An eviction of n0 explains the read.
  EXPECT_TRUE(check_federated(h).accepted);
}

TEST(CheckFederated, NodeMapOverride) {
  const auto h = HistoryBuilder(0).proc(p0, n0).proc(p1, n0).write(p0, 1).read(p1, 0).after(0).build();
  CheckOptions opt;
  opt.allow_evictions = false;
  EXPECT_FALSE(check_federated(h, opt).accepted);
  EXPECT_TRUE(check_federated(h, singleton_nodes(h), opt).accepted);
}

TEST(Explain, EmptyHistory) {
  const auto h = HistoryBuilder(0).build();
  EXPECT_NE(explain(check_federated(h)).find("vacuously accepted"), std::string::npos);
}

TEST(VerdictJson, Fields) {
  const auto v = check_full(broken_cas());
  const auto j = to_json(v);
  EXPECT_EQ(j["model"], "full");
  EXPECT_EQ(j["accepted"], false);
  EXPECT_TRUE(j.contains("culprit"));
  const auto a = to_json(check_federated(broken_cas()));
  EXPECT_EQ(a["witness"].size(), 4u);
}

TEST(ValidateWitness, DetectsTampering) {
  const auto h = two_nodes().write(p0, 1).flush(p0).read(p1, 1).build();
  auto v = check_federated(h);
  ASSERT_TRUE(v.accepted);
  expect_valid_witness(h, v, h.node_of);
  std::swap(v.witness[2], v.witness[4]);
  EXPECT_TRUE(validate_witness(h, v, h.node_of).has_value());
}

TEST(Relabeling, SeqShiftInvariant) {
  auto h = two_nodes().write(p0, 1).flush(p0).read(p1, 1).read(p1, 0).build();
  History shifted = h;
  for (auto& e : shifted.events) e.seq += 1000;
  for (Model m : {Model::kFull, Model::kWeak, Model::kFederated, Model::kFederatedAxiomatic}) {
    EXPECT_EQ(check(h, m).accepted, check(shifted, m).accepted);
  }
}

// Small-scale version of the exhaustive agreement run.
TEST(Enumeration, UpToFourOperations) {
  std::size_t total = 0;
  CheckOptions no_evict;
  no_evict.allow_evictions = false;
  testsupport::enumerate_histories(4, [&](const History& h) {
    ++total;
    const auto op = check_federated(h);
    const auto ax = check_federated_axiomatic(h);
    ASSERT_EQ(op.accepted, ax.accepted) << explain(op);
    const auto full = check_full(h);
    if (full.accepted) EXPECT_TRUE(op.accepted);
    const auto weak = check_weak(h);
    EXPECT_EQ(weak.accepted, check_federated(h, singleton_nodes(h), no_evict).accepted);
    expect_valid_witness(h, op, h.node_of);
    expect_valid_witness(h, ax, h.node_of);
    expect_valid_witness(h, full, h.node_of);
    expect_valid_witness(h, weak, singleton_nodes(h));
  });
  // sum over n of C(n+3,3) * 5^n
  std::size_t want = 0;
  for (std::size_t n = 0, pow5 = 1; n <= 4; ++n, pow5 *= 5) want += (n + 1) * (n + 2) * (n + 3) / 6 * pow5;
  EXPECT_EQ(total, want);
}

// The pruned axiomatic search against an unrestricted one (any domain, two
// flushes per gap) on random small histories with atomics and edges.
TEST(Axiomatic, PruningMatchesUnprunedSearch) {
  std::mt19937_64 rng(2024);
  auto pick = [&](int n) { return static_cast<int>(rng() % n); };
  AxiomaticOptions unpruned;
  unpruned.pruned = false;
  unpruned.flush_budget = 2;
  std::size_t accepted = 0;
  for (int iter = 0; iter < 3000; ++iter) {
    HistoryBuilder b(0);
    for (std::uint32_t i = 0; i < 4; ++i) b.proc(ProcId{i}, NodeId{i / 2});
    const int n = 1 + pick(6);
    for (int k = 0; k < n; ++k) {
      const ProcId p{static_cast<std::uint32_t>(pick(4))};
      const Value v = pick(2);
      switch (pick(7)) {
        case 0: b.write(p, v); break;
        case 1:
        case 2: b.read(p, v); break;
        case 3: b.flush(p); break;
        case 4: b.cas(p, pick(2), 1 - v, v); break;
        case 5: b.faa(p, 1, pick(3)); break;
        default:
          b.read(p, pick(3));
          if (k > 0) b.after(static_cast<std::size_t>(pick(k)));
      }
    }
    const auto h = b.build();
    const bool pruned = check_federated_axiomatic(h).accepted;
    ASSERT_EQ(pruned, check_federated_axiomatic(h, unpruned).accepted) << iter;
    ASSERT_EQ(pruned, check_federated(h).accepted) << iter;
    accepted += pruned;
  }
  EXPECT_GT(accepted, 100u);
}

TEST(Projection, FromTrace) {
  MemorySystem mem(build_topology(2, 1, 1, 1), {{"x", 0}, {"y", 5}});
  const LocId x = mem.loc("x");
  mem.read(p1, x);
  mem.write(p0, x, 2);
  mem.add_edge(*mem.last_seq(p0), p1);
  mem.read(p1, x);
  mem.inject_eviction(n0, x);
  const auto hs = project_all(mem.take_trace());
  ASSERT_EQ(hs.size(), 2u);
  EXPECT_EQ(hs[0].events.size(), 3u);
  EXPECT_EQ(hs[0].events[2].preds, (std::vector<std::size_t>{1}));
  EXPECT_EQ(hs[1].init_value, 5u);
  EXPECT_TRUE(hs[1].events.empty());
  EXPECT_FALSE(check_full(hs[0]).accepted);
  EXPECT_TRUE(check_federated(hs[0]).accepted);
}
