#pragma once

#include <algorithm>
#include <cstdint>
#include <mutex>
#include <string>
#include <variant>
#include <vector>

#include "fedcoh/memcore.hpp"
#include "fedcoh/sim.hpp"
#include "fedcoh/synclib/channel.hpp"

namespace fedcoh::sync {

enum class OwnershipPolicy { kStatic, kHandoffOnSignal, kHandoffOnPublish };
enum class TransferAction { kFlushLines, kNotify };

struct ByMessage {
  Channel* channel;
};
struct BySharedFlag {
  LocId flag;  // holds the owner's node id
};
using ChangeMechanism = std::variant<ByMessage, BySharedFlag>;

// Assigns a set of locations to one node at a time. Inside the owner node the
// data may be cached and updated with node-local atomics; ownership changes
// flush the data and then publish the new owner.
class OwnershipDescriptor {
 public:
  struct Transfer {
    Seq completed_at;  // seq of the publishing operation
    NodeId owner;
  };

  OwnershipDescriptor(std::vector<LocId> granularity, OwnershipPolicy policy, ChangeMechanism mechanism,
                      std::vector<TransferAction> actions, NodeId initial_owner)
      : granularity_(std::move(granularity)),
        policy_(policy),
        mechanism_(mechanism),
        actions_(std::move(actions)),
        owner_(initial_owner) {
    log_.push_back({0, initial_owner});
  }

  const std::vector<LocId>& granularity() const { return granularity_; }
  OwnershipPolicy policy() const { return policy_; }
  const ChangeMechanism& mechanism() const { return mechanism_; }

  NodeId current_owner() const {
    std::lock_guard lock(mu_);
    return owner_;
  }

  std::vector<Transfer> log() const {
    std::lock_guard lock(mu_);
    return log_;
  }

  // Hands the granularity to new_owner. via must run on the current owner.
  Task<void> transfer(Proc& via, NodeId new_owner) {
    if (policy_ == OwnershipPolicy::kStatic) throw ProtocolError("static ownership cannot be transferred");
    if (via.node() != current_owner()) {
      throw ProtocolError("ownership violation: " + to_string(via.node()) + " transfers data owned by " +
                          to_string(current_owner()));
    }
    const bool flush = std::find(actions_.begin(), actions_.end(), TransferAction::kFlushLines) != actions_.end();
    if (flush || new_owner == via.node()) {
      for (LocId l : granularity_) co_await via.flush_line(l);
    }
    if (new_owner == via.node()) co_return;

    if (auto* msg = std::get_if<ByMessage>(&mechanism_)) {
      msg->channel->send(via, "owner:" + std::to_string(index(new_owner)));
    } else {
      const LocId flag = std::get<BySharedFlag>(mechanism_).flag;
      co_await via.write(flag, index(new_owner));
      co_await via.flush_line(flag);
    }
    std::lock_guard lock(mu_);
    owner_ = new_owner;
    log_.push_back({via.mem().last_seq(via.id()).value_or(0), new_owner});
  }

  // Shared-flag mechanism: invalidate and read the owner location.
  Task<bool> poll_owned(Proc& p) const {
    const auto* flag = std::get_if<BySharedFlag>(&mechanism_);
    if (flag == nullptr) throw UsageError("poll_owned requires the shared-flag mechanism");
    co_await p.flush_line(flag->flag);
    const Value v = co_await p.read(flag->flag);
    co_return v == index(p.node());
  }

  // Message mechanism: consume an ownership message addressed to p's node.
  static bool accept_message(const std::string& msg, NodeId self) {
    return msg == "owner:" + std::to_string(index(self));
  }

 private:
  std::vector<LocId> granularity_;
  OwnershipPolicy policy_;
  ChangeMechanism mechanism_;
  std::vector<TransferAction> actions_;
  mutable std::mutex mu_;
  NodeId owner_;
  std::vector<Transfer> log_;
};

inline Task<void> ownership_transfer(OwnershipDescriptor& d, NodeId new_owner, Proc& via) {
  return d.transfer(via, new_owner);
}

// Operations on the granularity issued by a node other than the owner of the
// time. Returns the offending seqs.
inline std::vector<Seq> ownership_violations(const Trace& trace, const OwnershipDescriptor& d) {
  const auto log = d.log();
  std::vector<Seq> bad;
  for (const auto& e : trace.events) {
    if (e.is_init() || e.op == OpKind::kEvict) continue;
    if (std::find(d.granularity().begin(), d.granularity().end(), e.loc) == d.granularity().end()) continue;
    NodeId owner = log.front().owner;
    for (const auto& t : log) {
      if (t.completed_at < e.seq) owner = t.owner;
    }
    if (e.node != owner) bad.push_back(e.seq);
  }
  return bad;
}

}  // namespace fedcoh::sync
