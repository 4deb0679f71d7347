#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "fedcoh/memcore.hpp"
#include "fedcoh/sim.hpp"
#include "fedcoh/synclib/ownership.hpp"

namespace fedcoh::sync {

using Bytes = std::vector<std::uint8_t>;

struct VersionedRef {
  std::size_t item = 0;
  std::uint64_t version = 0;
  NodeId origin{};

  friend bool operator==(const VersionedRef&, const VersionedRef&) = default;
};

struct VersionMismatch {
  std::uint64_t requested;
  std::uint64_t found;
};

namespace detail {

inline std::vector<Value> pack(std::span<const std::uint8_t> bytes) {
  std::vector<Value> words((bytes.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < bytes.size(); ++i) words[i / 8] |= Value{bytes[i]} << (8 * (i % 8));
  return words;
}

inline Bytes unpack(std::span<const Value> words, std::size_t size) {
  Bytes out(size);
  for (std::size_t i = 0; i < size; ++i) out[i] = static_cast<std::uint8_t>(words[i / 8] >> (8 * (i % 8)));
  return out;
}

}  // namespace detail

// Write-once items in shared memory. The publisher flushes the finished item;
// readers on other nodes bypass (or invalidate) their cache. Freeing sets a
// flag that a collector on any node flush-reads and reclaims.
class ImmutableStore {
 public:
  enum class State { kBuilding, kPublished, kFreed };

  explicit ImmutableStore(MemorySystem& mem, std::string name = "imm") : mem_(mem), name_(std::move(name)) {}

  Task<VersionedRef> publish(Proc& p, Bytes bytes) {
    const auto words = detail::pack(bytes);
    std::size_t id;
    Item* item;
    {
      std::lock_guard lock(mu_);
      id = items_.size();
      items_.push_back(std::make_unique<Item>());
      item = items_.back().get();
    }
    const std::string base = name_ + "#" + std::to_string(id);
    item->size = bytes.size();
    item->length = mem_.add_location(base + ".len", 0);
    item->freed = mem_.add_location(base + ".freed", 0);
    for (std::size_t i = 0; i < words.size(); ++i) item->words.push_back(mem_.add_location(base + "." + std::to_string(i), 0));

    co_await p.write(item->length, bytes.size());
    for (std::size_t i = 0; i < words.size(); ++i) co_await p.write(item->words[i], words[i]);
    co_await p.flush_line(item->length);
    for (LocId l : item->words) co_await p.flush_line(l);
    {
      std::lock_guard lock(mu_);
      item->state = State::kPublished;
    }
    co_return VersionedRef{id, 1, p.node()};
  }

  // Same-node readers use plain loads; other nodes load around their caches.
  Task<Bytes> get(Proc& p, VersionedRef ref) {
    Item& item = lookup(ref);
    if (co_await p.read_bypass(item.freed) != 0) throw ProtocolError("get after free of item " + std::to_string(ref.item));
    const bool local = p.node() == ref.origin;
    const Value size = local ? co_await p.read(item.length) : co_await p.read_bypass(item.length);
    std::vector<Value> words;
    for (LocId l : item.words) words.push_back(local ? co_await p.read(l) : co_await p.read_bypass(l));
    co_return detail::unpack(words, static_cast<std::size_t>(size));
  }

  Task<void> free(Proc& p, VersionedRef ref) {
    Item& item = lookup(ref);
    if (co_await p.read_bypass(item.freed) != 0) throw ProtocolError("double free of item " + std::to_string(ref.item));
    co_await p.write(item.freed, 1);
    co_await p.flush_line(item.freed);
    std::lock_guard lock(mu_);
    item.state = State::kFreed;
  }

  // Flush-reads every unreclaimed item's flag; returns how many were reclaimed.
  Task<std::size_t> gc_sweep(Proc& p) {
    std::vector<Item*> pending;
    {
      std::lock_guard lock(mu_);
      for (auto& it : items_) {
        if (!it->reclaimed && it->state != State::kBuilding) pending.push_back(it.get());
      }
    }
    std::size_t count = 0;
    for (Item* item : pending) {
      co_await p.flush_line(item->freed);
      if (co_await p.read(item->freed) == 0) continue;
      std::lock_guard lock(mu_);
      if (!item->reclaimed) {
        item->reclaimed = true;
        ++count;
      }
    }
    co_return count;
  }

  State state(VersionedRef ref) {
    std::lock_guard lock(mu_);
    return lookup_locked(ref).state;
  }

 private:
  struct Item {
    std::size_t size = 0;
    LocId length{};
    LocId freed{};
    std::vector<LocId> words;
    State state = State::kBuilding;
    bool reclaimed = false;
  };

  Item& lookup(VersionedRef ref) {
    std::lock_guard lock(mu_);
    return lookup_locked(ref);
  }
  Item& lookup_locked(VersionedRef ref) {
    if (ref.item >= items_.size() || items_[ref.item]->state == State::kBuilding) {
      throw ProtocolError("get of an unpublished item");
    }
    return *items_[ref.item];
  }

  MemorySystem& mem_;
  std::string name_;
  std::mutex mu_;
  std::vector<std::unique_ptr<Item>> items_;
};

inline Task<VersionedRef> publish_immutable(ImmutableStore& s, Proc& p, Bytes bytes) {
  return s.publish(p, std::move(bytes));
}
inline Task<Bytes> get_immutable(ImmutableStore& s, Proc& p, VersionedRef ref) { return s.get(p, ref); }
inline Task<void> free_immutable(ImmutableStore& s, Proc& p, VersionedRef ref) { return s.free(p, ref); }
inline Task<std::size_t> gc_sweep(ImmutableStore& s, Proc& p) { return s.gc_sweep(p); }

// A mutable item whose stored bytes carry a version number, so readers on
// other nodes can tell whether they see the version they were handed.
class VersionedItem {
 public:
  VersionedItem(MemorySystem& mem, const std::string& name, std::size_t max_bytes) : max_bytes_(max_bytes) {
    version_ = mem.add_location(name + ".version", 0);
    length_ = mem.add_location(name + ".len", 0);
    for (std::size_t i = 0; i < (max_bytes + 7) / 8; ++i) words_.push_back(mem.add_location(name + "." + std::to_string(i), 0));
  }

  std::vector<LocId> locations() const {
    std::vector<LocId> out{version_, length_};
    out.insert(out.end(), words_.begin(), words_.end());
    return out;
  }

  // Writers must run on the owner node of `owner`, when one is attached.
  void set_owner(const OwnershipDescriptor* owner) { owner_ = owner; }

  Task<VersionedRef> write(Proc& p, Bytes bytes) {
    if (bytes.size() > max_bytes_) throw UsageError("versioned write larger than the item");
    if (owner_ != nullptr && owner_->current_owner() != p.node()) {
      throw ProtocolError("versioned write by " + to_string(p.node()) + " which does not own the item");
    }
    co_await p.flush_line(version_);
    const Value next = co_await p.read(version_) + 1;
    const auto words = detail::pack(bytes);
    co_await p.write(length_, bytes.size());
    co_await p.flush_line(length_);
    for (std::size_t i = 0; i < words.size(); ++i) {
      co_await p.write(words_[i], words[i]);
      co_await p.flush_line(words_[i]);
    }
    co_await p.write(version_, next);
    co_await p.flush_line(version_);
    co_return VersionedRef{0, next, p.node()};
  }

  Task<std::variant<Bytes, VersionMismatch>> read(Proc& p, VersionedRef ref) {
    co_await p.flush_line(version_);
    const Value before = co_await p.read(version_);
    if (before != ref.version) co_return VersionMismatch{ref.version, before};
    co_await p.flush_line(length_);
    const Value size = co_await p.read(length_);
    std::vector<Value> words;
    for (std::size_t i = 0; i < (size + 7) / 8 && i < words_.size(); ++i) {
      co_await p.flush_line(words_[i]);
      words.push_back(co_await p.read(words_[i]));
    }
    co_await p.flush_line(version_);
    const Value after = co_await p.read(version_);
    if (after != ref.version) co_return VersionMismatch{ref.version, after};
    co_return detail::unpack(words, static_cast<std::size_t>(size));
  }

 private:
  std::size_t max_bytes_;
  LocId version_{};
  LocId length_{};
  std::vector<LocId> words_;
  const OwnershipDescriptor* owner_ = nullptr;
};

inline Task<VersionedRef> versioned_write(VersionedItem& item, Proc& p, Bytes bytes) {
  return item.write(p, std::move(bytes));
}
inline Task<std::variant<Bytes, VersionMismatch>> versioned_read(VersionedItem& item, Proc& p, VersionedRef ref) {
  return item.read(p, ref);
}

}  // namespace fedcoh::sync
