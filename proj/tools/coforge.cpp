// coforge: joint architecture / operation-mapping search with a device-edge
// co-inference runtime. Single entry point wiring the whole pipeline:
//   profile -> gen-data -> train-pred -> search -> serve-edge / run-device -> report
#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "coforge/cosim.hpp"
#include "coforge/predictor.hpp"
#include "coforge/runtime/device_runner.hpp"
#include "coforge/runtime/edge_server.hpp"
#include "coforge/runtime/profiler.hpp"
#include "coforge/runtime/protocol.hpp"
#include "coforge/search.hpp"
#include "coforge/util.hpp"
#include "coforge/workspace.hpp"

namespace fs = std::filesystem;
using namespace coforge;

namespace {

constexpr int kExitInfeasible = 2;
constexpr int kExitStale = 3;
constexpr int kExitProtocol = 4;

double parse_rate(const std::string& text) {
  if (text.empty()) return 0;
  size_t pos = 0;
  const double value = std::stod(text, &pos);
  std::string unit = text.substr(pos);
  for (auto& c : unit) c = static_cast<char>(std::tolower(c));
  if (unit.empty() || unit == "bps") return value;
  if (unit == "kbps") return value * 1e3;
  if (unit == "mbps") return value * 1e6;
  if (unit == "gbps") return value * 1e9;
  throw ConfigError("unknown rate unit: " + text);
}

std::pair<std::string, int> parse_hostport(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos)
    throw ConfigError("expected host:port, got " + text);
  return {text.substr(0, colon), std::stoi(text.substr(colon + 1))};
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  nlohmann::json j;
  in >> j;
  return j;
}

void write_text(const std::string& path, const std::string& text) {
  fs::create_directories(fs::path(path).parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << text;
}

/// Loads the profiled SystemConfig and attaches the measured LUT when the
/// profile was captured in measurement mode.
SystemConfig load_system(const Workspace& ws) {
  const auto pj = read_json(ws.require("profile"));
  SystemConfig sys = SystemConfig::from_json(pj.at("system"));
  if (pj.at("lut_mode").get<std::string>() == "measured") {
    auto lut = std::make_shared<PerfLUT>(PerfLUT::from_json(read_json(ws.require("lut"))));
    sys.measured_lut = std::move(lut);
  }
  return sys;
}

PerfLUT load_lut(const Workspace& ws) {
  return PerfLUT::from_json(read_json(ws.require("lut")));
}

struct SeedOpt {
  uint64_t seed = 42;
};

int cmd_profile(const std::string& root, std::string pack,
                const std::string& mode, int reps, uint64_t seed) {
  if (pack.empty()) {
    const char* env = std::getenv("COFORGE_PROFILE");
    pack = env ? env : "tx2-gpu";
  }
  SystemConfig sys = default_pack(pack);
  Workspace ws = Workspace::open(root);
  LutGrid grid;
  PerfLUT lut;
  if (mode == "analytic") {
    lut = build_lut({sys.device, sys.edge}, grid);
  } else if (mode == "measure") {
    runtime::ProfileOptions opt;
    opt.repetitions = reps;
    opt.seed = seed;
    auto dev = runtime::profile_endpoint(sys.device.name, sys.device, grid, opt);
    auto edg = runtime::profile_endpoint(sys.edge.name, sys.edge, grid, opt);
    // Merge the two endpoint reports into one LUT.
    lut = PerfLUT::from_json(dev.lut.to_json());
    const auto ej = edg.lut.to_json();
    for (const auto& [name, ops] : ej.at("endpoints").items())
      for (const auto& [opname, tj] : ops.items()) {
        PerfLUT::Table t;
        t.n_axis = tj.at("n_axis").get<std::vector<double>>();
        t.f_axis = tj.at("f_axis").get<std::vector<double>>();
        t.f2_axis = tj.at("f2_axis").get<std::vector<double>>();
        const auto& lats = tj.at("latency_s");
        const auto& es = tj.at("energy_j");
        t.values.resize(lats.size());
        for (size_t i = 0; i < t.values.size(); ++i)
          t.values[i] = {lats[i].get<double>(), es[i].get<double>()};
        lut.set_table(name, op_kind_from_string(opname), std::move(t));
      }
    lut.recompute_stats();
    std::cout << "profiled " << dev.entries + edg.entries << " entries, "
              << dev.low_confidence + edg.low_confidence
              << " low-confidence (machine " << dev.machine << ")\n";
  } else {
    throw ConfigError("mode must be analytic or measure");
  }
  write_text(ws.resolve("lut.json"), lut.to_json().dump(2) + "\n");
  ws.record("lut", "lut.json");
  const nlohmann::json pj = {
      {"system", sys.to_json()},
      {"lut_mode", mode == "measure" ? "measured" : "analytic"}};
  write_text(ws.resolve("profile.json"), pj.dump(2) + "\n");
  ws.record("profile", "profile.json");
  ws.save();
  std::cout << "pack " << pack << ": lut entries " << lut.num_entries() << "\n";
  return 0;
}

int cmd_gen_data(const std::string& root, int samples, int layers,
                 uint64_t seed) {
  Workspace ws = Workspace::open(root);
  const SystemConfig sys = load_system(ws);
  SpaceConfig space;
  space.min_layers = space.max_layers = layers;
  const Dataset ds =
      generate_dataset(space, sys, samples, sub_seed(seed, "dataset"));
  write_dataset(ds, ws.resolve("dataset.ndjson"));
  ws.record("dataset", "dataset.ndjson");
  ws.save();
  std::cout << "dataset: " << ds.train.size() << " train / " << ds.val.size()
            << " val\n";
  return 0;
}

int train_one(Workspace& ws, const SystemConfig& sys, const PerfLUT& lut,
              const Dataset& ds, const std::string& metric, FeatureKind kind,
              const Hyperparams& hp) {
  const auto train_ex = prepare_examples(ds.train, metric, kind, lut, sys);
  const auto val_ex = prepare_examples(ds.val, metric, kind, lut, sys);
  TrainReport rep;
  PredictorModel model = train(train_ex, val_ex, hp, metric, &rep);
  model.dataset_fingerprint = ds.fingerprint();
  const std::string stem = "pred-" + metric;
  model.save(ws.resolve(stem + ".json"));
  ws.record(stem, stem + ".json");
  const nlohmann::json rj = {{"metric", metric},
                             {"features", kind == FeatureKind::Enhanced
                                              ? "enhanced"
                                              : "onehot"},
                             {"train_mape", rep.train_mape},
                             {"val_mape", rep.val_mape},
                             {"within_10", rep.within_10},
                             {"within_20", rep.within_20},
                             {"ranking_accuracy", rep.ranking_accuracy}};
  write_text(ws.resolve(stem + "-report.json"), rj.dump(2) + "\n");
  ws.record(stem + "-report", stem + "-report.json");
  std::cout << metric << ": val MAPE " << rep.val_mape * 100 << "%, ±10% "
            << rep.within_10 * 100 << "%, ±20% " << rep.within_20 * 100
            << "%, ranking " << rep.ranking_accuracy * 100 << "%\n";
  return 0;
}

int cmd_train_pred(const std::string& root, const std::string& metric,
                   const std::string& features, int epochs, int hidden,
                   int batch, double lr, uint64_t seed) {
  Workspace ws = Workspace::open(root);
  const SystemConfig sys = load_system(ws);
  const PerfLUT lut = load_lut(ws);
  const Dataset ds = read_dataset(ws.require("dataset"));
  const FeatureKind kind =
      features == "onehot" ? FeatureKind::OneHotOnly : FeatureKind::Enhanced;
  Hyperparams hp;
  hp.epochs = epochs;
  hp.hidden = hidden;
  hp.batch_size = batch;
  hp.learning_rate = lr;
  for (const std::string m : {"latency", "energy"}) {
    if (metric != "both" && metric != m) continue;
    hp.seed = sub_seed(seed, "train-" + m);
    train_one(ws, sys, lut, ds, m, kind, hp);
  }
  ws.save();
  return 0;
}

int cmd_search(const std::string& root, const std::string& evaluator_name,
               const std::string& algo, int trials, int tuning_trials,
               int layers, int zoo_capacity, uint64_t seed) {
  Workspace ws = Workspace::open(root);
  const SystemConfig sys = load_system(ws);
  SpaceConfig space;
  space.min_layers = space.max_layers = layers;
  SearchConfig cfg;
  cfg.trials = trials;
  cfg.tuning_trials = tuning_trials;
  cfg.zoo_capacity = zoo_capacity;
  cfg.seed = sub_seed(seed, "search");
  SyntheticOracle oracle;

  ArchitectureZoo zoo;
  std::vector<TracePoint> trace;
  bool feasible = false;
  if (algo == "evolution") {
    EvoConfig evo;
    EvoResult res = evolutionary_baseline(space, sys, cfg, evo, oracle);
    zoo = std::move(res.zoo);
    trace = std::move(res.trace);
    feasible = !zoo.empty();
    std::cout << "offspring invalidity rate: " << res.offspring_invalid_rate
              << "\n";
  } else {
    std::unique_ptr<Evaluator> evaluator;
    if (evaluator_name == "predictor") {
      PredictorModel lat = PredictorModel::load(ws.require("pred-latency"));
      PredictorModel en = PredictorModel::load(ws.require("pred-energy"));
      auto lut = std::make_shared<PerfLUT>(load_lut(ws));
      evaluator = std::make_unique<PredictorEvaluator>(std::move(lat),
                                                       std::move(en),
                                                       std::move(lut), sys);
    } else {
      evaluator = std::make_unique<SimulatorEvaluator>(sys);
    }
    SearchResult res = stage1_operation_search(space, sys, cfg, *evaluator, oracle);
    zoo = stage2_function_tuning(res.zoo, space, sys, cfg, oracle);
    trace = std::move(res.trace);
    feasible = res.feasible;
  }
  // Merge into any existing zoo so shelves for other fingerprints survive.
  if (ws.has("zoo")) {
    ArchitectureZoo existing = ArchitectureZoo::load(ws.require("zoo"));
    for (const auto& [fp, shelf] : zoo.shelves)
      for (const auto& e : shelf.by_score) existing.admit(fp, e);
    zoo = std::move(existing);
  }
  zoo.save(ws.resolve("zoo.json"));
  ws.record("zoo", "zoo.json");
  write_trace(trace, ws.resolve("trace.ndjson"));
  ws.record("trace", "trace.ndjson");
  ws.save();
  if (!feasible) {
    std::cerr << "search infeasible: no candidate met both constraints\n";
    return kExitInfeasible;
  }
  const auto& shelf = zoo.shelves.at(sys.fingerprint());
  const auto& best = shelf.by_score.front();
  std::cout << "best score " << best.score << " (acc " << best.accuracy
            << ", lat " << best.latency_s << " s, energy " << best.energy_j
            << " J)\n";
  return 0;
}

int cmd_serve_edge(const std::string& bind, const std::string& throttle) {
  runtime::EdgeConfig cfg;
  std::tie(cfg.bind_host, cfg.port) = parse_hostport(bind);
  cfg.throttle_bps = parse_rate(throttle);
  runtime::EdgeServer server(cfg);
  server.start();
  std::cout << "edge listening on " << cfg.bind_host << ":" << server.port()
            << "\n"
            << std::flush;
  server.serve_forever();
  return 0;
}

int cmd_run_device(const std::string& root, const std::string& edge,
                   const std::string& arch_path, int batches,
                   int pipeline_depth, const std::string& throttle,
                   uint64_t seed) {
  Workspace ws = Workspace::open(root);
  const nlohmann::json aj = read_json(arch_path);
  Architecture arch;
  if (aj.contains("shelves")) {
    const SystemConfig sys = load_system(ws);
    arch = dispatch(ArchitectureZoo::from_json(aj), sys);
    std::cout << "dispatched arch " << arch.hash() << " from zoo\n";
  } else {
    arch = Architecture::from_json(aj);
  }
  runtime::DeviceConfig cfg;
  std::tie(cfg.edge_host, cfg.edge_port) = parse_hostport(edge);
  cfg.num_batches = batches;
  cfg.pipeline_depth = pipeline_depth;
  cfg.throttle_bps = parse_rate(throttle);
  cfg.seed = sub_seed(seed, "run");
  const runtime::RunReport report = runtime::run_device(arch, cfg);
  nlohmann::json rj = report.to_json();
  rj["arch_hash"] = arch.hash();
  write_text(ws.resolve("run-report.json"), rj.dump(2) + "\n");
  ws.record("run-report", "run-report.json");
  ws.save();
  std::cout << "mean latency " << report.mean_latency_s() << " s, throughput "
            << report.throughput_ips << " ips, sent " << report.bytes_sent
            << " B, recv " << report.bytes_received << " B, compression "
            << report.compression_ratio << "\n";
  return report.failed_batches ? kExitProtocol : 0;
}

std::string fmt(double v) {
  std::ostringstream out;
  out.precision(6);
  out << v;
  return out.str();
}

int cmd_report(const std::string& root, const std::string& dot_path) {
  Workspace ws = Workspace::open(root);
  std::ostringstream md, csv;
  md << "# coforge report\n";
  csv << "section,key,value\n";

  if (ws.has("profile")) {
    const auto pj = read_json(ws.require("profile"));
    const SystemConfig sys = SystemConfig::from_json(pj.at("system"));
    md << "\n## System\n\n"
       << "| pack | device | edge | bandwidth (Mbps) | C_lat (s) | C_e (J) |\n"
       << "|---|---|---|---|---|---|\n"
       << "| " << sys.pack_name << " | " << sys.device.name << " | "
       << sys.edge.name << " | " << fmt(sys.net.bandwidth_bps / 1e6) << " | "
       << fmt(sys.constraints.c_lat_s) << " | " << fmt(sys.constraints.c_e_j)
       << " |\n";
    csv << "system,pack," << sys.pack_name << "\n";
  }

  md << "\n## Predictors\n\n"
     << "| metric | features | val MAPE | within 10% | within 20% | ranking |\n"
     << "|---|---|---|---|---|---|\n";
  for (const std::string m : {"latency", "energy"}) {
    const std::string key = "pred-" + m + "-report";
    if (!ws.has(key)) continue;
    const auto rj = read_json(ws.require(key));
    md << "| " << m << " | " << rj.at("features").get<std::string>() << " | "
       << fmt(rj.at("val_mape").get<double>()) << " | "
       << fmt(rj.at("within_10").get<double>()) << " | "
       << fmt(rj.at("within_20").get<double>()) << " | "
       << fmt(rj.at("ranking_accuracy").get<double>()) << " |\n";
    csv << "predictor," << m << "-within10,"
        << fmt(rj.at("within_10").get<double>()) << "\n";
  }

  md << "\n## Search\n\n";
  if (ws.has("zoo")) {
    const ArchitectureZoo zoo = ArchitectureZoo::load(ws.require("zoo"));
    md << "| fingerprint | arch | accuracy | latency (s) | energy (J) | score |\n"
       << "|---|---|---|---|---|---|\n";
    for (const auto& [fp, shelf] : zoo.shelves)
      for (const auto& e : shelf.by_score) {
        md << "| " << fp << " | " << e.arch.hash() << " | " << fmt(e.accuracy)
           << " | " << fmt(e.latency_s) << " | " << fmt(e.energy_j) << " | "
           << fmt(e.score) << " |\n";
        csv << "zoo," << e.arch.hash() << "," << fmt(e.score) << "\n";
      }
  } else {
    md << "(no search results)\n";
  }

  md << "\n## Runs\n\n";
  if (ws.has("run-report")) {
    const auto rj = read_json(ws.require("run-report"));
    md << "| arch | mean latency (s) | throughput (ips) | sent (B) | "
          "recv (B) | compression |\n|---|---|---|---|---|---|\n"
       << "| " << rj.at("arch_hash") << " | "
       << fmt(rj.at("mean_latency_s").get<double>()) << " | "
       << fmt(rj.at("throughput_ips").get<double>()) << " | "
       << rj.at("bytes_sent") << " | " << rj.at("bytes_received") << " | "
       << fmt(rj.at("compression_ratio").get<double>()) << " |\n";
    if (ws.has("profile")) {
      // Surface the gap between the measured compression ratio and the
      // simulator's constant estimate so drift is visible in every report.
      const auto pj = read_json(ws.require("profile"));
      const SystemConfig sys = SystemConfig::from_json(pj.at("system"));
      md << "\nMeasured compression ratio "
         << fmt(rj.at("compression_ratio").get<double>())
         << " vs. simulator estimate "
         << fmt(sys.net.compression_ratio_estimate) << ".\n";
    }
  } else {
    md << "(no runs)\n";
  }

  write_text(ws.resolve("report.md"), md.str());
  write_text(ws.resolve("report.csv"), csv.str());
  if (!dot_path.empty() && ws.has("zoo")) {
    const ArchitectureZoo zoo = ArchitectureZoo::load(ws.require("zoo"));
    std::ostringstream dot;
    for (const auto& [fp, shelf] : zoo.shelves)
      if (!shelf.by_score.empty()) {
        const auto& arch = shelf.by_score.front().arch;
        dot << build_graph(arch).to_dot(arch);
        break;
      }
    write_text(dot_path, dot.str());
  }
  std::cout << "wrote " << ws.resolve("report.md") << " and "
            << ws.resolve("report.csv") << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"joint GNN architecture / device-edge mapping search"};
  app.require_subcommand(1);
  std::string root = "workspace";
  app.add_option("--workspace", root, "artifact directory");
  uint64_t seed = 42;
  app.add_option("--seed", seed, "root seed; all randomness fans out from it");

  auto* profile = app.add_subcommand("profile", "build or measure the LUT");
  std::string pack, mode = "analytic";
  int reps = 5;
  profile->add_option("--pack", pack, "profile pack (or $COFORGE_PROFILE)");
  profile->add_option("--mode", mode, "analytic|measure");
  profile->add_option("--reps", reps, "measurement repetitions");

  auto* gen = app.add_subcommand("gen-data", "simulator-labeled dataset");
  int samples = 9000, layers = 12;
  gen->add_option("--samples", samples);
  gen->add_option("--layers", layers);

  auto* tp = app.add_subcommand("train-pred", "train latency/energy predictors");
  std::string metric = "both", features = "enhanced";
  int epochs = 500, hidden = 64, batch = 64;
  double lr = 1e-3;
  tp->add_option("--metric", metric, "latency|energy|both");
  tp->add_option("--features", features, "enhanced|onehot");
  tp->add_option("--epochs", epochs);
  tp->add_option("--hidden", hidden);
  tp->add_option("--batch", batch);
  tp->add_option("--lr", lr);

  auto* search = app.add_subcommand("search", "two-stage architecture search");
  std::string evaluator = "simulator", algo = "random";
  int trials = 1000, tuning_trials = 200, slayers = 12, zoo_capacity = 10;
  search->add_option("--evaluator", evaluator, "simulator|predictor");
  search->add_option("--algo", algo, "random|evolution");
  search->add_option("--trials", trials);
  search->add_option("--tuning-trials", tuning_trials);
  search->add_option("--layers", slayers);
  search->add_option("--zoo-capacity", zoo_capacity);

  auto* serve = app.add_subcommand("serve-edge", "run the edge endpoint");
  std::string bind = "0.0.0.0:7077", sthrottle = "0bps";
  serve->add_option("--bind", bind);
  serve->add_option("--throttle", sthrottle, "edge sender rate, e.g. 10mbps");

  auto* run = app.add_subcommand("run-device", "run batches against an edge");
  std::string edge = "127.0.0.1:7077", arch_path, rthrottle = "0bps";
  int batches = 64, depth = 2;
  run->add_option("--edge", edge);
  run->add_option("--arch", arch_path, "architecture or zoo JSON")->required();
  run->add_option("--batches", batches);
  run->add_option("--pipeline-depth", depth);
  run->add_option("--throttle", rthrottle, "device sender rate, e.g. 10mbps");

  auto* report = app.add_subcommand("report", "emit Markdown/CSV summary");
  std::string dot_path;
  report->add_option("--dot", dot_path, "write best-arch DOT graph here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (profile->parsed()) return cmd_profile(root, pack, mode, reps, seed);
    if (gen->parsed()) return cmd_gen_data(root, samples, layers, seed);
    if (tp->parsed())
      return cmd_train_pred(root, metric, features, epochs, hidden, batch, lr,
                            seed);
    if (search->parsed())
      return cmd_search(root, evaluator, algo, trials, tuning_trials, slayers,
                        zoo_capacity, seed);
    if (serve->parsed()) return cmd_serve_edge(bind, sthrottle);
    if (run->parsed())
      return cmd_run_device(root, edge, arch_path, batches, depth, rthrottle,
                            seed);
    if (report->parsed()) return cmd_report(root, dot_path);
  } catch (const StalenessError& e) {
    std::cerr << "stale artifact: " << e.what() << "\n";
    return kExitStale;
  } catch (const runtime::ProtocolError& e) {
    std::cerr << "protocol error: " << e.what() << "\n";
    return kExitProtocol;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
