#pragma once

#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fedcoh/memcore.hpp"
#include "json.hpp"

namespace fedcoh {

// JSON-lines trace format, one event per line with a fixed key order:
//   {"seq":12,"proc":"p3","node":"n1","op":"write","loc":"x","value":2}
//   {"seq":13,"proc":"p3","node":"n1","op":"read","loc":"x","value":2}
//   {"seq":14,"proc":"p3","node":"n1","op":"flush","loc":"x"}
//   {"seq":15,"proc":"p3","node":"n1","op":"rmw","loc":"x","rmw":"cas","expected":0,"new":1,"success":true,"observed":0}
//   {"seq":16,"proc":"p3","node":"n1","op":"rmw","loc":"x","rmw":"faa","delta":1,"old":1}
//   {"seq":17,"node":"n1","op":"evict","loc":"x"}
// An optional trailing "after":[seq,...] lists happens-before predecessors.
namespace trace_io {

using ojson = nlohmann::ordered_json;

inline ojson event_to_json(const Trace& t, const Event& e) {
  ojson j;
  j["seq"] = e.seq;
  if (e.op != OpKind::kEvict) j["proc"] = to_string(e.proc);
  j["node"] = to_string(e.node);
  j["op"] = std::string(to_string(e.op));
  j["loc"] = t.name(e.loc);
  switch (e.op) {
    case OpKind::kWrite:
    case OpKind::kRead:
      j["value"] = e.value;
      break;
    case OpKind::kRmw:
      if (e.rmw == RmwKind::kCas) {
        j["rmw"] = "cas";
        j["expected"] = e.expected;
        j["new"] = e.desired;
        j["success"] = e.success;
        j["observed"] = e.observed;
      } else {
        j["rmw"] = "faa";
        j["delta"] = e.delta;
        j["old"] = e.observed;
      }
      break;
    case OpKind::kFlush:
    case OpKind::kEvict:
      break;
  }
  if (!e.after.empty()) j["after"] = e.after;
  return j;
}

inline void write_jsonl(std::ostream& os, const Trace& t) {
  for (const auto& e : t.events) os << event_to_json(t, e).dump() << '\n';
}

inline std::string to_jsonl(const Trace& t) {
  std::ostringstream os;
  write_jsonl(os, t);
  return os.str();
}

namespace detail {

inline std::uint32_t parse_id(std::string_view s, char prefix, std::string_view what) {
  std::uint32_t v = 0;
  if (s.size() < 2 || s[0] != prefix) throw UsageError("bad " + std::string(what) + " id: " + std::string(s));
  auto [ptr, ec] = std::from_chars(s.data() + 1, s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw UsageError("bad " + std::string(what) + " id: " + std::string(s));
  }
  return v;
}

inline ProcId parse_proc(const std::string& s) {
  if (s == "init") return kInitProc;
  return ProcId{parse_id(s, 'p', "processor")};
}

inline NodeId parse_node(const std::string& s) {
  if (s == "init") return kInitNode;
  return NodeId{parse_id(s, 'n', "node")};
}

inline std::vector<std::string> expected_keys(OpKind op, std::string_view rmw) {
  std::vector<std::string> keys = {"seq", "proc", "node", "op", "loc"};
  switch (op) {
    case OpKind::kWrite:
    case OpKind::kRead: keys.push_back("value"); break;
    case OpKind::kFlush: break;
    case OpKind::kEvict: keys.erase(keys.begin() + 1); break;
    case OpKind::kRmw:
      if (rmw == "cas") {
        keys.insert(keys.end(), {"rmw", "expected", "new", "success", "observed"});
      } else {
        keys.insert(keys.end(), {"rmw", "delta", "old"});
      }
      break;
  }
  return keys;
}

inline OpKind parse_op(const std::string& s) {
  if (s == "write") return OpKind::kWrite;
  if (s == "read") return OpKind::kRead;
  if (s == "flush") return OpKind::kFlush;
  if (s == "rmw") return OpKind::kRmw;
  if (s == "evict") return OpKind::kEvict;
  throw UsageError("unknown op: " + s);
}

}  // namespace detail

inline Trace parse_jsonl(std::istream& is) {
  Trace t;
  std::unordered_map<std::string, LocId> locs;
  std::string line;
  std::size_t lineno = 0;
  bool have_prev = false;
  Seq prev = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "trace line " + std::to_string(lineno) + ": ";
    ojson j;
    try {
      j = ojson::parse(line);
    } catch (const nlohmann::json::exception& ex) {
      throw UsageError(where + ex.what());
    }
    if (!j.is_object() || !j.contains("op") || !j["op"].is_string()) throw UsageError(where + "missing op");
    Event e;
    try {
      e.op = detail::parse_op(j["op"].get<std::string>());
      std::string rmw;
      if (e.op == OpKind::kRmw) {
        rmw = j.at("rmw").get<std::string>();
        if (rmw != "cas" && rmw != "faa") throw UsageError(where + "unknown rmw kind " + rmw);
      }
      auto keys = detail::expected_keys(e.op, rmw);
      if (j.contains("after")) keys.push_back("after");
      std::vector<std::string> got;
      for (auto it = j.begin(); it != j.end(); ++it) got.push_back(it.key());
      if (got != keys) throw UsageError(where + "unexpected fields or field order");

      e.seq = j["seq"].get<Seq>();
      e.proc = e.op == OpKind::kEvict ? kSysProc : detail::parse_proc(j["proc"].get<std::string>());
      e.node = detail::parse_node(j["node"].get<std::string>());
      const auto name = j["loc"].get<std::string>();
      auto [it, inserted] = locs.try_emplace(name, LocId{static_cast<std::uint32_t>(t.locations.size())});
      if (inserted) t.locations.push_back(name);
      e.loc = it->second;
      switch (e.op) {
        case OpKind::kWrite:
        case OpKind::kRead: e.value = j["value"].get<Value>(); break;
        case OpKind::kRmw:
          if (rmw == "cas") {
            e.rmw = RmwKind::kCas;
            e.expected = j["expected"].get<Value>();
            e.desired = j["new"].get<Value>();
            e.success = j["success"].get<bool>();
            e.observed = j["observed"].get<Value>();
            if (e.success != (e.observed == e.expected)) throw UsageError(where + "inconsistent cas result");
          } else {
            e.rmw = RmwKind::kFaa;
            e.delta = j["delta"].get<Value>();
            e.observed = j["old"].get<Value>();
            e.success = true;
          }
          break;
        default: break;
      }
      if (j.contains("after")) e.after = j["after"].get<std::vector<Seq>>();
    } catch (const nlohmann::json::exception& ex) {
      throw UsageError(where + ex.what());
    }
    if (have_prev && e.seq <= prev) throw UsageError(where + "seq not strictly increasing");
    for (Seq a : e.after) {
      if (a >= e.seq) throw UsageError(where + "edge to a later event");
    }
    have_prev = true;
    prev = e.seq;
    if (e.op != OpKind::kEvict) {
      auto [nit, fresh] = t.node_of.try_emplace(e.proc, e.node);
      if (!fresh && nit->second != e.node) throw UsageError(where + "processor changes node");
    }
    t.events.push_back(std::move(e));
  }
  return t;
}

inline Trace parse_jsonl(std::string_view text) {
  std::istringstream is{std::string(text)};
  return parse_jsonl(is);
}

}  // namespace trace_io
}  // namespace fedcoh
