#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>

namespace fedcoh {

enum class ProcId : std::uint32_t {};
enum class NodeId : std::uint32_t {};
enum class LocId : std::uint32_t {};

using Value = std::uint64_t;
using Seq = std::uint64_t;

// Processor and node of the synthetic initialization writer.
inline constexpr ProcId kInitProc{std::numeric_limits<std::uint32_t>::max()};
inline constexpr NodeId kInitNode{std::numeric_limits<std::uint32_t>::max()};
// Issuer of hardware evictions; evictions carry a real node but no processor.
inline constexpr ProcId kSysProc{std::numeric_limits<std::uint32_t>::max() - 1};

constexpr std::uint32_t index(ProcId p) { return static_cast<std::uint32_t>(p); }
constexpr std::uint32_t index(NodeId n) { return static_cast<std::uint32_t>(n); }
constexpr std::uint32_t index(LocId l) { return static_cast<std::uint32_t>(l); }

inline std::string to_string(ProcId p) {
  if (p == kInitProc) return "init";
  if (p == kSysProc) return "sys";
  return "p" + std::to_string(index(p));
}
inline std::string to_string(NodeId n) {
  return n == kInitNode ? std::string("init") : "n" + std::to_string(index(n));
}

// Raised for malformed input or API misuse (bad ids, zero counts, ...).
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised when a synchronization protocol's precondition is violated at runtime.
class ProtocolError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace fedcoh

template <>
struct std::hash<fedcoh::LocId> {
  std::size_t operator()(fedcoh::LocId l) const noexcept { return std::hash<std::uint32_t>{}(fedcoh::index(l)); }
};
