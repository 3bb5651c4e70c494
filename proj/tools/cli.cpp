#include "cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>

#include "ecad/actualize.hpp"
#include "ecad/config.hpp"
#include "ecad/dispatch.hpp"
#include "ecad/engine.hpp"
#include "ecad/hwmodel.hpp"
#include "ecad/network.hpp"
#include "ecad/nnsim.hpp"
#include "ecad/params.hpp"
#include "ecad/store.hpp"
#include "ecad/sysarray.hpp"
#include "ecad/workers.hpp"

namespace ecad::cli {
namespace {

namespace fs = std::filesystem;

// The Arria 10 GX 1150 board from the sample configuration.
HwConfig default_hw() {
  HwConfig hw;
  hw.device_type = "Arria10-1150";
  hw.dsp = 1518;
  hw.freq_mhz = 250;
  hw.sram_kbit = 54260;
  hw.mem_banks = 1;
  hw.mem_speed_mts = 2400;
  hw.mem_rate_bytes = 8;
  return hw;
}

std::string default_mnist_dir() {
  const char* env = std::getenv("ECAD_MNIST_DIR");
  return env != nullptr ? env : "data/mnist";
}

Json metrics_json(const std::map<std::string, double>& metrics) {
  Json j = Json::object();
  for (const auto& [k, v] : metrics) j[k] = v;
  return j;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
  if (!f) throw std::runtime_error("write failed: " + path.string());
}

Matrix<float> random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  Matrix<float> m(rows, cols);
  for (auto& v : m.data()) v = dist(rng);
  return m;
}

struct SearchArgs {
  std::string config;
  std::uint64_t seed = 1;
  std::string out_dir = "ecad-out";
  int generations = 0;
  bool synthetic_accuracy = false;
  std::string mnist = default_mnist_dir();
  std::size_t train_subset = 0;
  std::size_t test_subset = 0;
  int slots = 1;
  bool process_workers = false;
  int timeout_floor_ms = 30000;
  bool verbose = false;
};

int cmd_search(const SearchArgs& a, const std::string& self, std::ostream& out, std::ostream& err) {
  auto cfg = load_config(a.config);
  if (a.generations > 0) cfg.pop.max_generations = a.generations;
  if (cfg.pop.active_eval_types().empty()) throw ConfigError("config has no active evalTypes");

  dispatch::WorkerSetup setup;
  setup.hw = cfg.hw;
  setup.hw_model = cfg.hw_model_or_default();
  setup.synthetic_accuracy = a.synthetic_accuracy;
  const auto* sim = cfg.pop.eval_type(EvalType::kSim);
  const bool needs_data = sim != nullptr && sim->active && !a.synthetic_accuracy;
  if (needs_data && !a.process_workers) {
    setup.data = std::make_shared<const nn::Dataset>(nn::load_mnist(a.mnist));
  }

  std::vector<dispatch::WorkerEndpoint> endpoints;
  for (const auto* et : cfg.pop.active_eval_types()) {
    dispatch::WorkerEndpoint ep;
    ep.eval_type = et->type;
    ep.slots = a.slots;
    if (a.process_workers) {
      ep.transport = dispatch::Transport::kPipe;
      std::vector<std::string> extra{"--config", fs::absolute(a.config).string()};
      if (a.synthetic_accuracy) extra.push_back("--synthetic-accuracy");
      if (needs_data) {
        extra.push_back("--mnist");
        extra.push_back(fs::absolute(a.mnist).string());
      }
      ep.factory = [self, type = et->type, extra] {
        return std::make_unique<dispatch::ProcessWorker>(self, type, extra);
      };
    } else {
      ep.factory = [type = et->type, setup] { return dispatch::make_worker(type, setup); };
    }
    endpoints.push_back(std::move(ep));
  }
  dispatch::DispatchOptions dopts;
  dopts.timeout_floor = std::chrono::milliseconds(a.timeout_floor_ms);
  dispatch::Dispatcher dispatcher(std::move(endpoints), dopts);

  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  const auto db_path = dir / "ecad.db.jsonl";
  // Each search run owns a fresh database.
  fs::remove(db_path);
  store::EcadDb db(db_path);

  engine::SearchOptions sopts;
  sopts.seed = a.seed;
  if (a.train_subset > 0) sopts.sim_params["trainSubset"] = a.train_subset;
  if (a.test_subset > 0) sopts.sim_params["testSubset"] = a.test_subset;
  if (a.verbose) {
    sopts.on_generation = [&err](const engine::GenerationStats& s) {
      err << "generation " << s.generation << " best " << s.best_score << " mean " << s.mean_score
          << " neurons " << s.best_neurons << " cfg " << s.best_cfg << "\n";
    };
  }
  const auto report = engine::run(cfg, dispatcher, &db, sopts);
  write_text(dir / "report.json", engine::to_json(report).dump(2) + "\n");
  engine::write_csv(dir / "generations.csv", report.history);

  out << "generations " << report.generations << " (" << report.stop_reason << ")\n";
  if (const auto* best = report.best()) {
    out << "best genome " << best->genome.id << " score " << *best->score << "\n";
  }
  out << "wrote " << (dir / "report.json").string() << ", " << (dir / "generations.csv").string()
      << ", " << db_path.string() << "\n";
  return 0;
}

struct TrainArgs {
  std::string network;
  std::string dest_dir = ".";
  int epochs = 4;
  int batch_size = 100;
  bool save_wb = false;
  bool verbose = false;
  std::string mnist = default_mnist_dir();
  std::size_t train_subset = 0;
  std::size_t test_subset = 0;
  std::uint64_t seed = 1;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  const auto desc = load_description(a.network);
  const auto data = nn::load_mnist(a.mnist);
  nn::TrainOptions opts;
  opts.epochs = a.epochs;
  opts.batch_size = a.batch_size;
  opts.seed = a.seed;
  opts.verbose = a.verbose;
  if (a.train_subset > 0) opts.train_subset = a.train_subset;
  if (a.test_subset > 0) opts.test_subset = a.test_subset;
  const auto result = nn::train(desc, data, opts);

  const fs::path dir(a.dest_dir);
  fs::create_directories(dir);
  const auto report_text = nn::to_json(result.report).dump(2) + "\n";
  write_text(dir / (desc.id + "_report.json"), report_text);
  if (a.save_wb) {
    std::vector<std::string> names;
    for (const auto& l : desc.layers) names.push_back(l.name);
    save_params(result.model.params(), names, dir);
  }
  out << report_text;
  return 0;
}

struct EvalArgs {
  std::string network;
  std::string config;
  std::string cfg;
  std::int64_t batch = 0;
  bool drain_overlap = false;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  auto desc = load_description(a.network);
  if (a.batch > 0) desc.batch = a.batch;
  if (!a.cfg.empty()) desc.systolic = SystolicConfig::parse(a.cfg);
  if (!desc.systolic) throw std::invalid_argument("no systolic config: pass --cfg R,C,V,I,S");
  HwConfig hw = default_hw();
  HwModelConfig model;
  if (!a.config.empty()) {
    const auto cfg = load_config(a.config);
    hw = cfg.hw;
    model = cfg.hw_model_or_default();
  }
  if (a.drain_overlap) model.drain_overlap = true;
  const auto est = hw::estimate(desc, *desc.systolic, hw, model);

  Json j = Json::object();
  j["network"] = desc.id;
  j["batch"] = desc.batch;
  j["cfg"] = desc.systolic->to_string();
  j["metrics"] = metrics_json(est.metrics());
  Json layers = Json::array();
  for (const auto& l : est.layers) {
    layers.push_back({{"name", l.name},
                      {"m_pad", l.geometry.m_pad},
                      {"k_pad", l.geometry.k_pad},
                      {"n_pad", l.geometry.n_pad},
                      {"compute_cycles", l.compute_cycles},
                      {"drain_cycles", l.drain_cycles},
                      {"bytes", l.bytes},
                      {"bandwidth_bound", l.bandwidth_bound}});
  }
  j["layers"] = std::move(layers);
  out << j.dump(2) << "\n";
  return 0;
}

struct SimArgs {
  std::string cfg;
  std::int64_t m = 0, k = 0, n = 0;
  std::uint64_t seed = 1;
  std::string network;
  std::string weights;
  std::string mnist = default_mnist_dir();
  std::size_t images = 1000;
};

Json stats_json(const sim::CycleStats& s) {
  return {{"compute_cycles", s.compute_cycles}, {"a_blocks_loaded", s.a_blocks_loaded},
          {"b_blocks_loaded", s.b_blocks_loaded}, {"output_blocks", s.output_blocks},
          {"drain_elements", s.drain_elements},   {"flush_events", s.flush_events}};
}

int cmd_simulate(const SimArgs& a, std::ostream& out) {
  Json j = Json::object();
  if (!a.network.empty()) {
    const auto desc = load_description(a.network);
    const auto cfg = a.cfg.empty() ? desc.systolic.value_or(SystolicConfig{})
                                   : SystolicConfig::parse(a.cfg);
    const auto params = load_params(desc, a.weights.empty() ? fs::path(a.network).parent_path()
                                                            : fs::path(a.weights));
    const auto data = nn::load_mnist(a.mnist);
    const std::size_t count = std::min(a.images, data.test_x.rows());
    const auto x = data.test_x.slice_rows(0, count);
    const auto y = data.test_y.slice_rows(0, count);
    const auto run = sim::run_network(desc, params, x, cfg);
    const auto pred = run.predictions();
    const auto truth = sim::argmax_rows(y);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < count; ++i) hits += pred[i] == truth[i];
    j["cfg"] = cfg.to_string();
    j["images"] = count;
    j["accuracy"] = count > 0 ? static_cast<double>(hits) / static_cast<double>(count) : 0.0;
    Json layers = Json::array();
    for (const auto& s : run.layer_stats) layers.push_back(stats_json(s));
    j["layers"] = std::move(layers);
  } else {
    if (a.cfg.empty() || a.m < 1 || a.k < 1 || a.n < 1) {
      throw std::invalid_argument("simulate-array needs --cfg and --m/--k/--n, or --network");
    }
    const auto cfg = SystolicConfig::parse(a.cfg);
    std::mt19937_64 rng(a.seed);
    const auto am = random_matrix(static_cast<std::size_t>(a.m), static_cast<std::size_t>(a.k), rng);
    const auto bm = random_matrix(static_cast<std::size_t>(a.k), static_cast<std::size_t>(a.n), rng);
    const auto run = sim::simulate_layer(am, bm, cfg);
    double max_err = 0.0;
    for (std::int64_t i = 0; i < a.m; ++i) {
      for (std::int64_t c = 0; c < a.n; ++c) {
        double ref = 0.0;
        for (std::int64_t p = 0; p < a.k; ++p) {
          ref += static_cast<double>(am(i, p)) * static_cast<double>(bm(p, c));
        }
        max_err = std::max(max_err, std::abs(ref - static_cast<double>(run.output(i, c))));
      }
    }
    const auto geom = hw::block_geometry(cfg, a.m, a.k, a.n);
    j["cfg"] = cfg.to_string();
    j["m"] = a.m;
    j["k"] = a.k;
    j["n"] = a.n;
    j["stats"] = stats_json(run.stats);
    j["model_compute_cycles"] = hw::compute_cycles(cfg, geom);
    j["max_abs_error_vs_f64"] = max_err;
    if (a.m * a.n <= 64) {
      Json rows = Json::array();
      for (std::int64_t i = 0; i < a.m; ++i) {
        Json r = Json::array();
        for (std::int64_t c = 0; c < a.n; ++c) r.push_back(run.output(i, c));
        rows.push_back(std::move(r));
      }
      j["output"] = std::move(rows);
    }
  }
  out << j.dump(2) << "\n";
  return 0;
}

int cmd_worker(const std::string& type_name, const std::string& config, const std::string& mnist,
               bool synthetic, std::istream& in, std::ostream& out) {
  const auto type = eval_type_from_string(type_name);
  dispatch::WorkerSetup setup;
  setup.hw = default_hw();
  if (!config.empty()) {
    const auto cfg = load_config(config);
    setup.hw = cfg.hw;
    setup.hw_model = cfg.hw_model_or_default();
  }
  setup.synthetic_accuracy = synthetic;
  if (type == EvalType::kSim && !synthetic) {
    setup.data = std::make_shared<const nn::Dataset>(nn::load_mnist(mnist));
  }
  auto worker = dispatch::make_worker(type, setup);
  return dispatch::serve(*worker, in, out);
}

// Worker processes re-run this executable. An argv0 that names a file wins
// over /proc/self/exe so an embedding host can point at the real binary.
std::string self_exe(const std::string& argv0) {
  std::error_code ec;
  if (argv0.find('/') != std::string::npos && fs::is_regular_file(argv0, ec)) {
    return fs::absolute(argv0).string();
  }
  const auto p = fs::read_symlink("/proc/self/exe", ec);
  return ec ? argv0 : p.string();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Evolutionary co-design search for MLPs on a systolic-array accelerator", "ecad"};
  app.require_subcommand(1);

  SearchArgs search;
  auto* s = app.add_subcommand("search", "Run the evolutionary search");
  s->add_option("config", search.config, "Configuration file")->required()->check(CLI::ExistingFile);
  s->add_option("--seed", search.seed, "Random seed");
  s->add_option("--out-dir", search.out_dir, "Directory for report.json, generations.csv, ecad.db.jsonl");
  s->add_option("--generations", search.generations, "Override maxGenerations");
  s->add_flag("--synthetic-accuracy", search.synthetic_accuracy,
              "Score simJob with the width-based stand-in instead of training");
  s->add_option("--mnist", search.mnist, "MNIST IDX directory");
  s->add_option("--train-subset", search.train_subset, "Train on the first N samples");
  s->add_option("--test-subset", search.test_subset, "Score on the first N test samples");
  s->add_option("--slots", search.slots, "Worker slots per evalType")->check(CLI::PositiveNumber);
  s->add_flag("--process-workers", search.process_workers, "Run workers as child processes");
  s->add_option("--timeout-floor-ms", search.timeout_floor_ms, "Minimum job timeout");
  s->add_flag("--verbose", search.verbose, "Log each generation to stderr");

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train a network description on MNIST");
  t->add_option("network", train.network, "NetworkDescription JSON")->required()->check(CLI::ExistingFile);
  t->add_option("--dest-dir", train.dest_dir, "Output directory");
  t->add_option("--epochs", train.epochs)->check(CLI::PositiveNumber);
  t->add_option("--batch-size", train.batch_size)->check(CLI::PositiveNumber);
  t->add_flag("--save-wb", train.save_wb, "Write <layer>_weights.bin / <layer>_biases.bin");
  t->add_flag("--verbose", train.verbose);
  t->add_option("--mnist", train.mnist, "MNIST IDX directory");
  t->add_option("--train-subset", train.train_subset);
  t->add_option("--test-subset", train.test_subset);
  t->add_option("--seed", train.seed);

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "Estimate hardware metrics for a network");
  e->add_option("network", eval.network, "NetworkDescription JSON")->required()->check(CLI::ExistingFile);
  e->add_option("--config", eval.config, "Configuration file supplying hwConfig");
  e->add_option("--cfg", eval.cfg, "Systolic config R,C,V,I,S");
  e->add_option("--batch", eval.batch, "Override batch size");
  e->add_flag("--drain-overlap", eval.drain_overlap, "Hide the drain behind compute");

  SimArgs simargs;
  auto* sa = app.add_subcommand("simulate-array", "Run the systolic array simulator");
  sa->add_option("--cfg", simargs.cfg, "Systolic config R,C,V,I,S");
  sa->add_option("--m", simargs.m);
  sa->add_option("--k", simargs.k);
  sa->add_option("--n", simargs.n);
  sa->add_option("--seed", simargs.seed);
  sa->add_option("--network", simargs.network, "NetworkDescription JSON");
  sa->add_option("--weights", simargs.weights, "Directory with weights/biases .bin files");
  sa->add_option("--mnist", simargs.mnist);
  sa->add_option("--images", simargs.images, "Number of test images");

  std::string db_path, export_out;
  GenomeId export_id = 0;
  std::size_t export_top = 0;
  auto* ex = app.add_subcommand("export", "Export a network from the database");
  ex->add_option("--db", db_path, "ecad.db.jsonl")->required()->check(CLI::ExistingFile);
  auto* id_opt = ex->add_option("--id", export_id, "Genome id");
  ex->add_option("--out", export_out, "Output NetworkDescription JSON")->needs(id_opt);
  ex->add_option("--top", export_top, "List the K best genomes");

  std::string act_network, act_out;
  auto* ac = app.add_subcommand("actualize", "Write the accelerator macro file");
  ac->add_option("network", act_network)->required()->check(CLI::ExistingFile);
  ac->add_option("out", act_out)->required();

  std::string worker_type, worker_config, worker_mnist = default_mnist_dir();
  bool worker_synthetic = false;
  auto* w = app.add_subcommand("worker", "Serve EvalJobs over stdin/stdout");
  w->add_option("--type", worker_type, "simJob, hwDBJob or physJob")->required();
  w->add_option("--config", worker_config);
  w->add_option("--mnist", worker_mnist);
  w->add_flag("--synthetic-accuracy", worker_synthetic);

  std::string compact_db;
  auto* cp = app.add_subcommand("compact", "Rewrite the database keeping latest records");
  cp->add_option("--db", compact_db)->required()->check(CLI::ExistingFile);

  std::vector<const char*> argv;
  for (const auto& arg : args) argv.push_back(arg.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& pe) {
    return app.exit(pe, out, err);
  }

  try {
    if (*s) return cmd_search(search, self_exe(args.empty() ? "ecad" : args[0]), out, err);
    if (*t) return cmd_train(train, out);
    if (*e) return cmd_eval(eval, out);
    if (*sa) return cmd_simulate(simargs, out);
    if (*ex) {
      store::EcadDb db(db_path);
      if (export_top > 0) {
        for (const auto& r : db.top(export_top)) {
          out << r.genome.id << " " << r.score << " generation " << r.generation << "\n";
        }
        return 0;
      }
      if (!*id_opt) throw std::invalid_argument("export needs --id or --top");
      const auto out_path = export_out.empty() ? "genome_" + std::to_string(export_id) + ".json"
                                               : export_out;
      db.export_description(export_id, out_path);
      out << "wrote " << out_path << "\n";
      return 0;
    }
    if (*ac) {
      write_macros(load_description(act_network), act_out);
      return 0;
    }
    if (*w) return cmd_worker(worker_type, worker_config, worker_mnist, worker_synthetic, std::cin, out);
    if (*cp) {
      store::EcadDb db(compact_db);
      db.compact();
      out << "kept " << db.individuals().size() << " individual and " << db.generations().size()
          << " generation records\n";
      return 0;
    }
  } catch (const std::exception& ex_err) {
    err << "ecad: " << ex_err.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace ecad::cli
