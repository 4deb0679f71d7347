#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "fedcoh/bench.hpp"
#include "fedcoh/checker.hpp"
#include "fedcoh/litmus.hpp"
#include "fedcoh/synclib/scenarios.hpp"
#include "fedcoh/trace_io.hpp"
#include "json.hpp"

using namespace fedcoh;
using json = nlohmann::ordered_json;

namespace {

constexpr int kExitFailed = 1;
constexpr int kExitUsage = 2;

int report_error(const std::string& kind, const std::string& message) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << "\n";
  return kExitUsage;
}

std::uint64_t default_seed() {
  if (const char* s = std::getenv("FEDCOH_SEED")) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(s, &used);
      if (used == std::string(s).size()) return v;
    } catch (const std::exception&) {
    }
    throw UsageError(std::string("FEDCOH_SEED is not an unsigned integer: ") + s);
  }
  return 1;
}

Model parse_model(const std::string& s) {
  if (s == "full") return Model::kFull;
  if (s == "weak") return Model::kWeak;
  if (s == "federated") return Model::kFederated;
  if (s == "federated-axiomatic") return Model::kFederatedAxiomatic;
  throw UsageError("unknown model: " + s);
}

struct CheckArgs {
  std::string trace;
  std::string model = "federated";
  std::string location;
  std::size_t bound = 20;
};

int run_check(const CheckArgs& a) {
  std::ifstream in(a.trace);
  if (!in) throw UsageError("cannot open trace " + a.trace);
  const Trace t = trace_io::parse_jsonl(in);
  const Model model = parse_model(a.model);
  if (!a.location.empty()) t.loc(a.location);  // throws for unknown names
  bool all = true;
  for (const auto& h : project_all(t)) {
    if (!a.location.empty() && h.location != a.location) continue;
    CheckOptions opt;
    opt.bound = a.bound;
    const Verdict v = check(h, model, opt);
    all = all && v.accepted;
    std::cout << to_json(v).dump() << "\n";
  }
  return all ? 0 : kExitFailed;
}

struct LitmusArgs {
  std::string name = "all";
  std::uint64_t seed = 0;
  std::size_t runs = 100;
};

int run_litmus(const LitmusArgs& a) {
  std::vector<std::string> names;
  if (a.name == "all") {
    for (const auto& c : litmus::litmus_catalog()) names.push_back(c.name);
  } else {
    names.push_back(litmus::find_case(a.name).name);
  }
  bool ok = true;
  for (const auto& n : names) {
    const auto rep = litmus::litmus_run(n, a.seed, a.runs);
    ok = ok && rep.ok();
    std::cout << litmus::to_json(rep).dump() << "\n";
  }
  return ok ? 0 : kExitFailed;
}

struct BenchArgs {
  std::string mode = "model";
  std::string params;
  std::string csv;
  double lat_disagg = 200;
  std::uint32_t cores = 256;
  std::uint64_t seed = 0;
};

int run_bench(const BenchArgs& a) {
  bench::OverheadModel m;
  if (!a.params.empty()) {
    std::ifstream in(a.params);
    if (!in) throw UsageError("cannot open params " + a.params);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw UsageError(std::string("params: ") + e.what());
    }
    m = bench::OverheadModel::from_json(j);
  }
  if (a.cores == 0) throw UsageError("--cores must be >= 1");
  Latencies lat;
  lat.disagg = a.lat_disagg;
  const std::uint32_t per_node = 2 * 16 * 8;
  const Topology t = build_topology((a.cores + per_node - 1) / per_node, 2, 16, 8, lat);

  bench::OverheadCurve curve;
  if (a.mode == "model") {
    curve = bench::model_overhead(m, t, a.cores, a.lat_disagg);
  } else if (a.mode == "sim") {
    curve.topology = t.spec();
    curve.lat_disagg = a.lat_disagg;
    for (std::uint32_t n = 1; n <= a.cores; n *= 2) {
      bench::ContentionParams p;
      for (std::uint32_t i = 0; i < n; ++i) p.placement.push_back(ProcId{i});
      p.seed = a.seed;
      curve.points.push_back({n, bench::sim_overhead(p, t)});
      if (n != a.cores && n * 2 > a.cores) n = a.cores / 2;
    }
  } else {
    throw UsageError("unknown bench mode: " + a.mode);
  }

  if (a.csv.empty() || a.csv == "-") {
    bench::emit_curve_csv(curve, std::cout);
  } else {
    std::ofstream out(a.csv);
    if (!out) throw UsageError("cannot write " + a.csv);
    bench::emit_curve_csv(curve, out);
  }
  return 0;
}

int run_queue_cmd(const sync::QueueDemoConfig& cfg) {
  if (cfg.producers == 0 || cfg.consumers == 0) throw UsageError("need at least one producer and one consumer");
  const auto r = sync::run_queue_demo(cfg);
  std::cout << json{{"enqueued", r.enqueued},
                    {"delivered", r.delivered},
                    {"lost", r.lost},
                    {"duplicated", r.duplicated},
                    {"payload_mismatches", r.payload_mismatches},
                    {"notifications", r.stats.notifications},
                    {"sleep_cycles", r.stats.sleep_cycles}}
                   .dump()
            << "\n";
  return r.exactly_once() ? 0 : kExitFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated coherence simulator, checkers and benchmarks"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  try {
    seed = default_seed();
  } catch (const UsageError& e) {
    return report_error("usage", e.what());
  }

  CheckArgs check_args;
  auto* check_cmd = app.add_subcommand("check", "Check a JSONL trace against a coherence model");
  check_cmd->add_option("--trace", check_args.trace, "Trace file")->required();
  check_cmd->add_option("--model", check_args.model, "full | weak | federated | federated-axiomatic")
      ->capture_default_str();
  check_cmd->add_option("--location", check_args.location, "Only check this location");
  check_cmd->add_option("--bound", check_args.bound, "Maximum events per history")->capture_default_str();

  LitmusArgs litmus_args;
  litmus_args.seed = seed;
  auto* litmus_cmd = app.add_subcommand("litmus", "Run litmus cases");
  litmus_cmd->add_option("--name", litmus_args.name, "Case name or all")->capture_default_str();
  litmus_cmd->add_option("--seed", litmus_args.seed, "Base seed");
  litmus_cmd->add_option("--runs", litmus_args.runs, "Runs per case")->capture_default_str();

  BenchArgs bench_args;
  bench_args.seed = seed;
  auto* bench_cmd = app.add_subcommand("bench", "Overhead model or contention simulation as CSV");
  bench_cmd->add_option("--mode", bench_args.mode, "model | sim")->capture_default_str();
  bench_cmd->add_option("--params", bench_args.params, "Model parameters (JSON)");
  bench_cmd->add_option("--csv", bench_args.csv, "Output file (default stdout)");
  bench_cmd->add_option("--lat-disagg", bench_args.lat_disagg, "Disaggregated memory latency in ns")
      ->capture_default_str();
  bench_cmd->add_option("--cores", bench_args.cores, "Largest core count")->capture_default_str();
  bench_cmd->add_option("--seed", bench_args.seed, "Simulation seed");

  sync::QueueDemoConfig queue_cfg;
  queue_cfg.seed = seed;
  auto* queue_cmd = app.add_subcommand("queue-demo", "Run the MPMC queue across two nodes");
  queue_cmd->add_option("--producers", queue_cfg.producers)->capture_default_str();
  queue_cmd->add_option("--consumers", queue_cfg.consumers)->capture_default_str();
  queue_cmd->add_option("--items", queue_cfg.items)->capture_default_str();
  queue_cmd->add_option("--capacity", queue_cfg.capacity)->capture_default_str();
  queue_cmd->add_option("--seed", queue_cfg.seed);
  queue_cmd->add_option("--eviction-rate", queue_cfg.eviction_rate)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("usage", e.what());
  }

  try {
    if (*check_cmd) return run_check(check_args);
    if (*litmus_cmd) return run_litmus(litmus_args);
    if (*bench_cmd) return run_bench(bench_args);
    if (*queue_cmd) return run_queue_cmd(queue_cfg);
  } catch (const BoundExceeded& e) {
    return report_error("bound_exceeded", e.what());
  } catch (const UsageError& e) {
    return report_error("usage", e.what());
  } catch (const std::exception& e) {
    std::cerr << json{{"error", "internal"}, {"message", e.what()}}.dump() << "\n";
    return kExitFailed;
  }
  return kExitUsage;
}
