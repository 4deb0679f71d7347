#include <gtest/gtest.h>

#include <random>

#include "fedcoh/checker.hpp"
#include "fedcoh/synclib/bakery.hpp"
#include "fedcoh/synclib/channel.hpp"
#include "fedcoh/synclib/items.hpp"
#include "fedcoh/synclib/ownership.hpp"
#include "fedcoh/synclib/pipeline.hpp"
#include "fedcoh/synclib/queue.hpp"
#include "fedcoh/synclib/scenarios.hpp"

using namespace fedcoh;
using namespace fedcoh::sync;
using namespace std::chrono_literals;

namespace {

const NodeId n0{0}, n1{1}, n2{2};

void expect_federated(const Trace& t) {
  for (const auto& h : project_all(t)) {
    AxiomaticOptions opt;
    opt.bound = 250;
    const auto v = check_federated_axiomatic(h, opt);
    EXPECT_TRUE(v.accepted) << explain(v);
  }
}

Payload payload_of(std::uint64_t i) {
  Payload p{};
  for (int b = 0; b < 8; ++b) p[b] = static_cast<std::uint8_t>(i >> (8 * b));
  return p;
}

}  // namespace

TEST(Channel, SendRecv) {
  MemorySystem mem(build_topology(2, 1, 1, 1), {});
  Proc a(mem, ProcId{0}), b(mem, ProcId{1});
  Channel ch(n0, n1, 200);
  notify_send(ch, a, "slot:3");
  EXPECT_EQ(sync_wait(notify_recv(ch, b, 0ns)), "slot:3");
}

TEST(Channel, Fifo) {
  MemorySystem mem(build_topology(2, 1, 1, 1), {});
  Proc a(mem, ProcId{0}), b(mem, ProcId{1});
  Channel ch(n0, n1, 200);
  ch.send(a, "one");
  ch.send(a, "two");
  EXPECT_EQ(ch.try_recv(b), "one");
  EXPECT_EQ(ch.try_recv(b), "two");
  EXPECT_EQ(ch.sent(), 2u);
}

TEST(Channel, TimeoutOnEmpty) {
  MemorySystem mem(build_topology(2, 1, 1, 1), {});
  Proc b(mem, ProcId{1});
  Channel ch(n0, n1, 200);
  EXPECT_FALSE(sync_wait(ch.recv(b, 0ns)).has_value());
}

TEST(Channel, WrongNode) {
  MemorySystem mem(build_topology(2, 1, 1, 1), {});
  Proc a(mem, ProcId{0}), b(mem, ProcId{1});
  Channel ch(n0, n1, 200);
  EXPECT_THROW(ch.send(b, "x"), UsageError);
  EXPECT_THROW(ch.try_recv(a), UsageError);
  EXPECT_THROW(ch.send(a, std::string(65, 'x')), UsageError);
}

TEST(Channel, RecordsHappensBefore) {
  MemorySystem mem(build_topology(2, 1, 1, 1), {{"x", 0}});
  Proc a(mem, ProcId{0}), b(mem, ProcId{1});
  Channel ch(n0, n1, 200);
  mem.write(a.id(), mem.loc("x"), 1);
  const Seq sent = *mem.last_seq(ProcId{0});
  ch.send(a, "go");
  ch.try_recv(b);
  mem.read(b.id(), mem.loc("x"));
  const Trace t = mem.take_trace();
  EXPECT_EQ(t.events.back().after, (std::vector<Seq>{sent}));
}

TEST(Ownership, SharedFlagHandoff) {
  MemorySystem mem(build_topology(2, 1, 1, 1), {{"data", 0}, {"owner", 0}});
  Proc a(mem, ProcId{0}), b(mem, ProcId{1});
  const LocId data = mem.loc("data");
  OwnershipDescriptor d({data}, OwnershipPolicy::kHandoffOnSignal, BySharedFlag{mem.loc("owner")},
                        {TransferAction::kFlushLines}, n0);
  EXPECT_FALSE(sync_wait(d.poll_owned(b)));
  mem.write(a.id(), data, 42);
  sync_wait(ownership_transfer(d, n1, a));
  EXPECT_EQ(d.current_owner(), n1);
  EXPECT_TRUE(sync_wait(d.poll_owned(b)));
  mem.flush_line(b.id(), data);
  EXPECT_EQ(mem.read(b.id(), data), 42u);
  const Trace t = mem.take_trace();
  EXPECT_TRUE(ownership_violations(t, d).empty());
  expect_federated(t);
}

TEST(Ownership, ByMessage) {
  MemorySystem mem(build_topology(2, 1, 1, 1), {{"data", 0}});
  Proc a(mem, ProcId{0}), b(mem, ProcId{1});
  Channel ch(n0, n1, 200);
  OwnershipDescriptor d({mem.loc("data")}, OwnershipPolicy::kHandoffOnPublish, ByMessage{&ch},
                        {TransferAction::kFlushLines, TransferAction::kNotify}, n0);
  sync_wait(d.transfer(a, n1));
  const auto msg = ch.try_recv(b);
  ASSERT_TRUE(msg.has_value());
  EXPECT_TRUE(OwnershipDescriptor::accept_message(*msg, n1));
}

TEST(Ownership, SelfTransferOnlyFlushes) {
  MemorySystem mem(build_topology(2, 1, 1, 1), {{"data", 0}, {"owner", 0}});
  Proc a(mem, ProcId{0});
  OwnershipDescriptor d({mem.loc("data")}, OwnershipPolicy::kHandoffOnSignal, BySharedFlag{mem.loc("owner")}, {}, n0);
  sync_wait(d.transfer(a, n0));
  EXPECT_EQ(d.current_owner(), n0);
  const Trace t = mem.take_trace();
  bool flushed = false;
  for (const auto& e : t.events) flushed |= !e.is_init() && e.op == OpKind::kFlush && e.loc == mem.loc("data");
  EXPECT_TRUE(flushed);
}

TEST(Ownership, NonOwnerTransferFails) {
  MemorySystem mem(build_topology(2, 1, 1, 1), {{"data", 0}, {"owner", 0}});
  Proc b(mem, ProcId{1});
  OwnershipDescriptor d({mem.loc("data")}, OwnershipPolicy::kHandoffOnSignal, BySharedFlag{mem.loc("owner")}, {}, n0);
  EXPECT_THROW(sync_wait(d.transfer(b, n1)), ProtocolError);
  OwnershipDescriptor s({mem.loc("data")}, OwnershipPolicy::kStatic, BySharedFlag{mem.loc("owner")}, {}, n0);
  Proc a(mem, ProcId{0});
  EXPECT_THROW(sync_wait(s.transfer(a, n1)), ProtocolError);
}

TEST(Ownership, MonitorFlagsForeignAccess) {
  MemorySystem mem(build_topology(2, 1, 1, 1), {{"data", 0}, {"owner", 0}});
  Proc b(mem, ProcId{1});
  OwnershipDescriptor d({mem.loc("data")}, OwnershipPolicy::kHandoffOnSignal, BySharedFlag{mem.loc("owner")}, {}, n0);
  mem.write(b.id(), mem.loc("data"), 1);
  EXPECT_EQ(ownership_violations(mem.take_trace(), d).size(), 1u);
}

TEST(SlotFormat, BitExact) {
  Payload p{};
  for (std::size_t i = 0; i < kPayloadBytes; ++i) p[i] = static_cast<std::uint8_t>(i + 1);
  const SlotLine line = encode_slot({true, SlotOwner::kConsumer}, p);
  EXPECT_EQ(line[0] & 0xff, 0x3u);
  EXPECT_EQ((line[0] >> 8) & 0xff, 1u);
  EXPECT_EQ(line[7] >> 56, 63u);
  const auto [meta, back] = decode_slot(line);
  EXPECT_TRUE(meta.used);
  EXPECT_EQ(meta.owner, SlotOwner::kConsumer);
  EXPECT_EQ(back, p);
}

TEST(Queue, CreateChecks) {
  MemorySystem mem(build_topology(2, 1, 1, 1), {});
  const auto q = queue_create(mem, 8, n0, n1);
  EXPECT_EQ(q->capacity(), 8u);
  for (std::size_t s = 0; s < 8; ++s) {
    const auto m = SlotMeta::from_word(mem.memory(q->meta(s)));
    EXPECT_FALSE(m.used);
    EXPECT_EQ(m.owner, SlotOwner::kProducer);
  }
  EXPECT_NO_THROW(queue_create(mem, 1, n0, n1, "one"));
  EXPECT_THROW(queue_create(mem, 4, n0, n0, "same"), UsageError);
  EXPECT_THROW(queue_create(mem, 0, n0, n1, "empty"), UsageError);
}

TEST(Queue, FirstEnqueueNotifiesAndFullRing) {
  MemorySystem mem(build_topology(2, 1, 1, 1), {});
  Proc p(mem, ProcId{0});
  MpmcQueue q(mem, 2, n0, n1);
  EXPECT_EQ(sync_wait(q.enqueue(p, payload_of(1))), 0u);
  EXPECT_EQ(q.stats().notifications, 1u);
  EXPECT_EQ(mem.line(n0, q.meta(0)).kind, LineState::Kind::kInvalid);
  EXPECT_EQ(sync_wait(q.enqueue(p, payload_of(2))), 1u);
  EXPECT_FALSE(sync_wait(q.enqueue(p, payload_of(3))).has_value());
  EXPECT_EQ(q.stats().full, 1u);
}

TEST(Queue, RacingProducersClaimDistinctSlots) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    MemorySystem mem(build_topology(2, 1, 1, 2), {});
    MpmcQueue q(mem, 4, n0, n1);
    Proc a(mem, ProcId{0}), b(mem, ProcId{1});
    std::optional<std::size_t> sa, sb;
    Scheduler sched(seed);
    sched.spawn(a, [](Proc& p, MpmcQueue& q, std::optional<std::size_t>& out) -> Task<void> {
      out = co_await q.enqueue(p, payload_of(1));
    }(a, q, sa));
    sched.spawn(b, [](Proc& p, MpmcQueue& q, std::optional<std::size_t>& out) -> Task<void> {
      out = co_await q.enqueue(p, payload_of(2));
    }(b, q, sb));
    sched.run();
    ASSERT_TRUE(sa && sb);
    EXPECT_NE(*sa, *sb);
    EXPECT_EQ(std::min(*sa, *sb), 0u);
    EXPECT_EQ(std::max(*sa, *sb), 1u);
  }
}

TEST(Queue, OnePayloadOneWinner) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    MemorySystem mem(build_topology(2, 1, 1, 4), {});
    MpmcQueue q(mem, 4, n0, n1);
    Proc prod(mem, ProcId{0});
    sync_wait(q.enqueue(prod, payload_of(7)));
    int got = 0;
    std::vector<std::unique_ptr<Proc>> cores;
    Scheduler sched(seed);
    for (ProcId id : mem.topology().procs_of(n1)) {
      cores.push_back(std::make_unique<Proc>(mem, id));
      sched.spawn(*cores.back(), q.dequeue_loop(
                                     *cores.back(),
                                     [&](Proc&, std::size_t, const Payload& pl) -> Task<void> {
                                       EXPECT_EQ(item_of(pl), 7u);
                                       ++got;
                                       co_return;
                                     },
                                     [&] { return got >= 1; }));
    }
    sched.run(1'000'000);
    EXPECT_EQ(got, 1);
  }
}

TEST(Queue, OneNotificationDrainsSeveralSlots) {
  MemorySystem mem(build_topology(2, 1, 1, 2), {});
  MpmcQueue q(mem, 8, n0, n1);
  Proc prod(mem, ProcId{0});
  for (std::uint64_t i = 0; i < 3; ++i) sync_wait(q.enqueue(prod, payload_of(i)));
  EXPECT_EQ(q.stats().notifications, 1u);
  std::vector<std::uint64_t> got;
  std::vector<std::unique_ptr<Proc>> cores;
  Scheduler sched(3);
  for (ProcId id : mem.topology().procs_of(n1)) {
    cores.push_back(std::make_unique<Proc>(mem, id));
    sched.spawn(*cores.back(), q.dequeue_loop(
                                   *cores.back(),
                                   [&](Proc&, std::size_t, const Payload& pl) -> Task<void> {
                                     got.push_back(item_of(pl));
                                     co_return;
                                   },
                                   [&] { return got.size() >= 3; }));
  }
  sched.run(1'000'000);
  std::sort(got.begin(), got.end());
  EXPECT_EQ(got, (std::vector<std::uint64_t>{0, 1, 2}));
  EXPECT_EQ(q.stats().notifications, 1u);
  EXPECT_EQ(q.stats().delivered, 3u);
}

TEST(Queue, PayloadRoundTrip) {
  QueueDemoConfig cfg;
  cfg.producers = 2;
  cfg.consumers = 3;
  cfg.items = 10'000;
  cfg.capacity = 16;
  cfg.seed = 11;
  const auto r = run_queue_demo(cfg);
  EXPECT_TRUE(r.exactly_once());
  EXPECT_EQ(r.payload_mismatches, 0u);
  EXPECT_EQ(r.delivered, 10'000u);
}

TEST(Queue, ExactlyOnceWithEvictionsAndMonitor) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    QueueDemoConfig cfg;
    cfg.producers = 1 + seed % 3;
    cfg.consumers = 1 + (seed * 7) % 4;
    cfg.items = 300;
    cfg.capacity = 1 + seed % 8;
    cfg.seed = seed;
    cfg.eviction_rate = 0.1;
    cfg.record = true;
    const auto r = run_queue_demo(cfg);
    EXPECT_TRUE(r.exactly_once()) << "seed " << seed;
    EXPECT_EQ(r.protocol_violations, 0u);
    EXPECT_LE(r.stats.notifications, r.stats.sleep_cycles);
  }
}

TEST(Queue, TraceAcceptedByFederatedChecker) {
  MemorySystem mem(build_topology(2, 1, 1, 2), {});
  MpmcQueue q(mem, 2, n0, n1);
  Proc prod(mem, ProcId{0});
  std::vector<std::unique_ptr<Proc>> cores;
  int got = 0;
  Scheduler sched(9);
  sched.spawn(prod, [](Proc& p, MpmcQueue& q, int& got) -> Task<void> {
    for (std::uint64_t i = 0; i < 3; ++i) {
      while (!co_await q.enqueue(p, payload_of(i))) co_await q.producer_poll(p);
    }
    while (got < 3) co_await q.producer_poll(p), co_await p.yield();
  }(prod, q, got));
  for (ProcId id : mem.topology().procs_of(n1)) {
    cores.push_back(std::make_unique<Proc>(mem, id));
    sched.spawn(*cores.back(), q.dequeue_loop(
                                   *cores.back(),
                                   [&](Proc&, std::size_t, const Payload&) -> Task<void> {
                                     ++got;
                                     co_return;
                                   },
                                   [&] { return got >= 3; }));
  }
  sched.run(1'000'000);
  const Trace t = mem.take_trace();
  EXPECT_TRUE(slot_protocol_violations(t, q).empty());
  expect_federated(t);
}

TEST(Bakery, TwoNodesThousandRounds) {
  BakeryRunConfig cfg;
  cfg.nodes = 2;
  cfg.procs_per_node = 1;
  cfg.rounds = 1000;
  cfg.eviction_rate = 0;
  cfg.max_steps = 200'000'000;
  const auto r = run_bakery(cfg);
  ASSERT_TRUE(r.completed);
  EXPECT_EQ(r.counter, 2000u);
  EXPECT_EQ(r.violations, 0u);
}

TEST(Bakery, RandomizedSchedules) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    BakeryRunConfig cfg;
    cfg.seed = seed;
    const auto r = run_bakery(cfg);
    ASSERT_TRUE(r.completed) << seed;
    EXPECT_EQ(r.violations, 0u) << seed;
    EXPECT_EQ(r.counter, r.expected) << seed;
  }
}

TEST(Bakery, SingleParticipant) {
  MemorySystem mem(build_topology(1, 1, 1, 1), {});
  Proc p(mem, ProcId{0});
  BakeryLock lock(mem, {ProcId{0}});
  for (int i = 0; i < 3; ++i) {
    sync_wait(lock.acquire(p));
    sync_wait(lock.release(p));
  }
  EXPECT_EQ(lock.violations(), 0u);
}

TEST(Bakery, ReleaseByNonHolder) {
  MemorySystem mem(build_topology(2, 1, 1, 1), {});
  Proc a(mem, ProcId{0}), b(mem, ProcId{1});
  BakeryLock lock(mem, {ProcId{0}, ProcId{1}});
  EXPECT_THROW(sync_wait(lock.release(a)), ProtocolError);
  sync_wait(lock.acquire(a));
  EXPECT_THROW(sync_wait(lock.release(b)), ProtocolError);
}

TEST(Bakery, NegativeControlFindsViolation) {
  std::uint64_t hits = 0;
  for (std::uint64_t seed = 0; seed < 2000 && hits == 0; ++seed) {
    BakeryRunConfig cfg;
    cfg.seed = seed;
    cfg.read_side_flush = false;
    hits += run_bakery(cfg).violations > 0;
  }
  EXPECT_GT(hits, 0u);
}

TEST(Bakery, TraceAcceptedByFederatedChecker) {
  MemorySystem mem(build_topology(2, 1, 1, 1), {{"counter", 0}});
  BakeryLock lock(mem, {ProcId{0}, ProcId{1}});
  Proc a(mem, ProcId{0}), b(mem, ProcId{1});
  Scheduler sched(4);
  auto body = [](Proc& p, BakeryLock& lock) -> Task<void> {
    co_await lock.acquire(p);
    co_await lock.release(p);
  };
  sched.spawn(a, body(a, lock));
  sched.spawn(b, body(b, lock));
  sched.run();
  expect_federated(mem.take_trace());
}

TEST(Immutable, CrossNodeGet) {
  MemorySystem mem(build_topology(3, 1, 1, 1), {});
  Proc a(mem, ProcId{0}), b(mem, ProcId{1}), c(mem, ProcId{2});
  ImmutableStore store(mem);
  Bytes data(128);
  std::mt19937 rng(5);
  for (auto& x : data) x = static_cast<std::uint8_t>(rng());
  const auto ref = sync_wait(publish_immutable(store, a, data));
  EXPECT_EQ(ref.version, 1u);
  EXPECT_EQ(sync_wait(get_immutable(store, b, ref)), data);
  EXPECT_EQ(sync_wait(get_immutable(store, a, ref)), data);
  sync_wait(free_immutable(store, a, ref));
  EXPECT_EQ(sync_wait(gc_sweep(store, c)), 1u);
  EXPECT_EQ(sync_wait(gc_sweep(store, c)), 0u);
  EXPECT_EQ(store.state(ref), ImmutableStore::State::kFreed);
  expect_federated(mem.take_trace());
}

TEST(Immutable, Errors) {
  MemorySystem mem(build_topology(2, 1, 1, 1), {});
  Proc a(mem, ProcId{0}), b(mem, ProcId{1});
  ImmutableStore store(mem);
  const auto ref = sync_wait(store.publish(a, Bytes{1, 2, 3}));
  sync_wait(store.free(a, ref));
  EXPECT_THROW(sync_wait(store.get(b, ref)), ProtocolError);
  EXPECT_THROW(sync_wait(store.free(b, ref)), ProtocolError);
}

TEST(Versioned, WriteReadAndMismatch) {
  MemorySystem mem(build_topology(2, 1, 1, 1), {});
  Proc a(mem, ProcId{0}), b(mem, ProcId{1});
  VersionedItem item(mem, "v", 64);
  const auto v1 = sync_wait(versioned_write(item, a, Bytes{9, 8, 7}));
  EXPECT_EQ(std::get<Bytes>(sync_wait(versioned_read(item, b, v1))), (Bytes{9, 8, 7}));
  const auto v2 = sync_wait(versioned_write(item, a, Bytes{1}));
  const auto stale = sync_wait(versioned_read(item, b, v1));
  ASSERT_TRUE(std::holds_alternative<VersionMismatch>(stale));
  EXPECT_EQ(std::get<VersionMismatch>(stale).found, v2.version);
}

TEST(Versioned, Monotonic) {
  MemorySystem mem(build_topology(1, 1, 1, 1), {});
  Proc a(mem, ProcId{0});
  VersionedItem item(mem, "v", 8);
  std::uint64_t last = 0;
  for (int i = 0; i < 100; ++i) {
    const auto ref = sync_wait(item.write(a, Bytes{static_cast<std::uint8_t>(i)}));
    EXPECT_GT(ref.version, last);
    last = ref.version;
  }
}

TEST(Versioned, WriterMustOwn) {
  MemorySystem mem(build_topology(2, 1, 1, 1), {{"owner", 0}});
  Proc b(mem, ProcId{1});
  VersionedItem item(mem, "v", 8);
  OwnershipDescriptor d(item.locations(), OwnershipPolicy::kStatic, BySharedFlag{mem.loc("owner")}, {}, n0);
  item.set_owner(&d);
  EXPECT_THROW(sync_wait(item.write(b, Bytes{1})), ProtocolError);
}

TEST(Pipeline, ThreeStages) {
  MemorySystem mem(build_topology(3, 1, 1, 2), {});
  Pipeline pl(mem, {n0, n1, n2}, 1000);
  Scheduler sched(5);
  pl.spawn(sched);
  sched.run(100'000'000);
  ASSERT_TRUE(pl.finished());
  for (Value v : pl.results()) EXPECT_EQ(v, 3u);
  for (auto a : pl.arrivals()) EXPECT_EQ(a, 1u);
}

TEST(Pipeline, SingleStage) {
  MemorySystem mem(build_topology(1, 1, 1, 2), {});
  Pipeline pl(mem, {n0}, 50);
  Scheduler sched(1);
  pl.spawn(sched);
  sched.run(10'000'000);
  for (Value v : pl.results()) EXPECT_EQ(v, 1u);
  for (auto a : pl.arrivals()) EXPECT_EQ(a, 1u);
}

TEST(Pipeline, DistinctNodes) {
  MemorySystem mem(build_topology(2, 1, 1, 1), {});
  EXPECT_THROW(Pipeline(mem, {n0, n0}, 1), UsageError);
}

TEST(Pipeline, NegativeControlGoesStale) {
  MemorySystem mem(build_topology(3, 1, 1, 2), {});
  Pipeline::Options opt;
  opt.invalidate_on_receive = false;
  opt.warm_caches = true;
  Pipeline pl(mem, {n0, n1, n2}, 200, opt);
  Scheduler sched(5);
  pl.spawn(sched);
  sched.run(100'000'000);
  std::size_t stale = 0;
  for (Value v : pl.results()) stale += v != 3;
  EXPECT_GT(stale, 0u);
}
