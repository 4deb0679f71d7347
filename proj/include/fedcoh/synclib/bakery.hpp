#pragma once

#include <algorithm>
#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "fedcoh/memcore.hpp"
#include "fedcoh/sim.hpp"

namespace fedcoh::sync {

// Lamport's Bakery lock across nodes using only plain reads and writes. Every
// shared write is followed by a flush of that line, and every shared read is
// preceded by one, so no stale cached value and no cross-node atomic is ever
// relied upon. Each choosing/number variable has its own location.
class BakeryLock {
 public:
  struct Options {
    // Negative control: drop the flush before each shared read.
    bool read_side_flush = true;
  };

  BakeryLock(MemorySystem& mem, std::vector<ProcId> participants, const std::string& name = "bakery")
      : BakeryLock(mem, std::move(participants), name, Options{}) {}

  BakeryLock(MemorySystem& mem, std::vector<ProcId> participants, const std::string& name, Options opt)
      : participants_(std::move(participants)), opt_(opt) {
    if (participants_.empty()) throw UsageError("bakery lock needs at least one participant");
    for (std::size_t i = 0; i < participants_.size(); ++i) {
      if (!mem.topology().valid(participants_[i])) throw UsageError("unknown participant");
      choosing_.push_back(mem.add_location(name + ".choosing[" + std::to_string(i) + "]", 0));
      number_.push_back(mem.add_location(name + ".number[" + std::to_string(i) + "]", 0));
    }
  }

  const std::vector<ProcId>& participants() const { return participants_; }

  Task<void> acquire(Proc& p) {
    const std::size_t me = slot_of(p.id());
    co_await put(p, choosing_[me], 1);
    Value highest = 0;
    for (std::size_t j = 0; j < participants_.size(); ++j) {
      highest = std::max(highest, co_await get(p, number_[j]));
    }
    const Value ticket = highest + 1;
    co_await put(p, number_[me], ticket);
    co_await put(p, choosing_[me], 0);
    for (std::size_t j = 0; j < participants_.size(); ++j) {
      if (j == me) continue;
      while (co_await get(p, choosing_[j]) != 0) {
      }
      while (true) {
        const Value other = co_await get(p, number_[j]);
        if (other == 0 || other > ticket || (other == ticket && j > me)) break;
      }
    }
    std::lock_guard lock(mu_);
    holders_.push_back(p.id());
    if (holders_.size() > 1) ++violations_;
  }

  Task<void> release(Proc& p) {
    const std::size_t me = slot_of(p.id());
    {
      std::lock_guard lock(mu_);
      auto it = std::find(holders_.begin(), holders_.end(), p.id());
      if (it == holders_.end()) {
        throw ProtocolError("bakery release by " + to_string(p.id()) + " which does not hold the lock");
      }
      holders_.erase(it);
    }
    co_await put(p, number_[me], 0);
  }

  std::optional<ProcId> holder() const {
    std::lock_guard lock(mu_);
    if (holders_.empty()) return std::nullopt;
    return holders_.front();
  }

  // Acquisitions that completed while another participant held the lock.
  std::uint64_t violations() const {
    std::lock_guard lock(mu_);
    return violations_;
  }

 private:
  std::size_t slot_of(ProcId p) const {
    auto it = std::find(participants_.begin(), participants_.end(), p);
    if (it == participants_.end()) throw UsageError(to_string(p) + " is not a bakery participant");
    return static_cast<std::size_t>(it - participants_.begin());
  }

  Task<void> put(Proc& p, LocId l, Value v) {
    co_await p.write(l, v);
    co_await p.flush_line(l);
  }

  Task<Value> get(Proc& p, LocId l) {
    if (opt_.read_side_flush) co_await p.flush_line(l);
    co_return co_await p.read(l);
  }

  std::vector<ProcId> participants_;
  Options opt_;
  std::vector<LocId> choosing_;
  std::vector<LocId> number_;
  mutable std::mutex mu_;
  std::vector<ProcId> holders_;
  std::uint64_t violations_ = 0;
};

}  // namespace fedcoh::sync
