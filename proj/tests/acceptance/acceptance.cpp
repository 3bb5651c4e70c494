// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "ecad/engine.hpp"
#include "ecad/hwmodel.hpp"
#include "ecad/nnsim.hpp"
#include "ecad/params.hpp"
#include "ecad/sysarray.hpp"
#include "ecad/workers.hpp"
#include "oracles.hpp"

using namespace ecad;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances.
constexpr double kBatchSweepRelTol = 0.25;
constexpr double kImgPerSRelTol = 0.02;
constexpr double kSimVsF64RelTol = 1e-4;
constexpr double kGradRelTol = 1e-3;
constexpr double kSubsetAccuracyFloor = 0.88;
constexpr int kOracleCases = 120;
constexpr std::size_t kParityImages = 1000;
constexpr int kSearchGenerations = 100;

const fs::path kSource = ECAD_SOURCE_DIR;

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path temp_dir(const std::string& tag) {
  std::random_device rd;
  auto p = fs::temp_directory_path() / ("ecad-accept-" + tag + "-" + std::to_string(rd()));
  fs::create_directories(p);
  return p;
}

HwConfig arria() { return load_config(kSource / "configs" / "mlp_example.ecad.cfg").hw; }

NetworkDescription mlp(std::vector<std::int64_t> widths, std::int64_t batch) {
  NetworkDescription d;
  d.id = "mlp";
  d.batch = batch;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    const bool last = i + 2 == widths.size();
    d.layers.push_back({last ? "output" : "dense" + std::to_string(i), widths[i], widths[i + 1],
                        last ? Activation::kNone : Activation::kRelu, true});
  }
  return d;
}

Verdict efficiency_anchors() {
  const auto g = hw::block_geometry({4, 8, 8, 16, 18}, 1024, 784, 10);
  const bool ok = g.k_pad == 864 && g.k_efficiency() == 784.0 / 864.0 && g.block_height == 64 &&
                  g.m_efficiency() == 1.0;
  return {ok, "K'=" + std::to_string(g.k_pad) + " eff " + fmt("%.4f", g.k_efficiency()) +
                  ", batch eff " + fmt("%.4f", g.m_efficiency())};
}

Verdict batch_sweep() {
  const std::vector<std::pair<std::int64_t, double>> rows{
      {1, 1.16}, {16, 18.6}, {32, 37.2}, {64, 40.3}, {128, 42}, {256, 42.98}, {512, 43.47}, {1024, 43.7}, {2048, 43.84}};
  bool ok = true;
  double prev = 0, worst = 0;
  for (const auto& [batch, want] : rows) {
    const auto est = hw::estimate(mlp({784, 196, 190, 150, 10}, batch), {4, 4, 8, 8, 8}, arria());
    const double rel = std::abs(est.effective_gops - want) / want;
    worst = std::max(worst, rel);
    const double ops_check = std::abs(est.effective_gops * 1e9 * est.total_time_ms * 1e-3 - est.total_ops);
    ok = ok && rel <= kBatchSweepRelTol && est.effective_gops >= prev && est.effective_gops < 64.0 &&
         ops_check <= 1e-9 * est.total_ops;
    prev = est.effective_gops;
  }
  return {ok, "worst deviation " + fmt("%.1f%%", worst * 100) + " (limit 25%), batch 2048 at " + fmt("%.2f GOP/s", prev)};
}

Verdict img_identity() {
  const double got = hw::img_per_s_at(mlp({784, 852, 10}, 508), 174.0);
  const double rel = std::abs(got - 129144.0) / 129144.0;
  return {rel <= kImgPerSRelTol, fmt("%.0f img/s", got) + " vs 129144 (" + fmt("%.2f%%", rel * 100) + ")"};
}

struct OracleSummary {
  bool numeric_ok = true;
  bool cycles_ok = true;
  double worst_rel = 0;
  int cases = 0;
  std::int64_t hand_cycles = 0;
};

OracleSummary oracle_sweep() {
  OracleSummary s;
  std::mt19937_64 rng(2024);
  auto pick = [&](std::int64_t lo, std::int64_t hi) { return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng); };
  std::uniform_real_distribution<float> val(-1.0f, 1.0f);
  for (int c = 0; c < kOracleCases; ++c) {
    const SystolicConfig cfg{pick(1, 8), pick(1, 8), std::int64_t{1} << pick(0, 5), std::int64_t{1} << pick(0, 4), pick(1, 8)};
    const auto m = static_cast<std::size_t>(pick(1, c < 10 ? 512 : 160));
    const auto k = static_cast<std::size_t>(pick(1, 512));
    const auto n = static_cast<std::size_t>(pick(1, c < 10 ? 512 : 160));
    Matrix<float> a(m, k), b(k, n);
    for (auto& v : a.data()) v = val(rng);
    for (auto& v : b.data()) v = val(rng);
    const auto run = sim::simulate_layer(a, b, cfg);
    const auto exact = oracle::ordered_matmul_f32(a.data(), b.data(), m, k, n, cfg.vec, cfg.vec * cfg.scale, nullptr, false);
    const auto ref = oracle::matmul_f64(a.data(), b.data(), m, k, n);
    for (std::size_t i = 0; i < m * n; ++i) {
      const float got = run.output.data()[i];
      if (std::memcmp(&got, &exact[i], sizeof(float)) != 0) s.numeric_ok = false;
      const double want = ref.v[i];
      s.worst_rel = std::max(s.worst_rel, std::abs(got - want) / std::max(1.0, std::abs(want)));
    }
    const auto g = hw::block_geometry(cfg, static_cast<std::int64_t>(m), static_cast<std::int64_t>(k), static_cast<std::int64_t>(n));
    if (run.stats.compute_cycles != hw::compute_cycles(cfg, g)) s.cycles_ok = false;
    ++s.cases;
  }
  s.numeric_ok = s.numeric_ok && s.worst_rel <= kSimVsF64RelTol;
  const Matrix<float> a(2048, 784, 0.5f), b(784, 196, 0.5f);
  s.hand_cycles = sim::simulate_layer(a, b, {4, 4, 8, 8, 8}).stats.compute_cycles;
  s.cycles_ok = s.cycles_ok && s.hand_cycles == 2981888;
  return s;
}

double accuracy_of(const std::vector<std::int64_t>& pred, const Matrix<float>& y) {
  const auto truth = sim::argmax_rows(y);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

struct Trained {
  NetworkDescription desc;
  nn::TrainResult result;
  nn::Dataset data;
};

Trained train_sample() {
  Trained t;
  t.desc = load_description(kSource / "configs" / "networks" / "mlp_784_128_10.json");
  t.data = nn::load_mnist(kSource / "data" / "mnist-sample");
  nn::TrainOptions opts;
  opts.epochs = 4;
  opts.batch_size = 100;
  opts.seed = 1;
  t.result = nn::train(t.desc, t.data, opts);
  return t;
}

Verdict parity(const Trained& t) {
  const auto x = t.data.test_x.slice_rows(0, kParityImages);
  const auto y = t.data.test_y.slice_rows(0, kParityImages);
  const double native = nn::accuracy(t.result.model, x, y);
  const auto run = sim::run_network(t.desc, t.result.model.params(), x);
  const double array = accuracy_of(run.predictions(), y);
  const auto mismatched = [&] {
    const auto a = run.predictions();
    const auto b = nn::argmax_rows(t.result.model.forward(x));
    std::size_t n = 0;
    for (std::size_t i = 0; i < a.size(); ++i) n += a[i] != b[i];
    return n;
  }();
  return {native == array, "array " + fmt("%.3f", array) + " vs trainer " + fmt("%.3f", native) + " on " +
                               std::to_string(kParityImages) + " images, " + std::to_string(mismatched) + " differing predictions"};
}

Verdict trainer_quality(const Trained& t) {
  // Finite differences on the same architecture in 64-bit.
  auto net = t.result.model.cast<double>();
  std::mt19937_64 rng(5);
  const auto x = t.data.train_x.slice_rows(0, 8).cast<double>();
  const auto y = t.data.train_y.slice_rows(0, 8).cast<double>();
  const auto g = net.grad(x, y);
  std::vector<double*> coords;
  std::vector<double> analytic;
  for (int i = 0; i < 300; ++i) {
    const std::size_t l = rng() % net.layers().size();
    auto& layer = net.layers()[l];
    if (rng() % 4 == 0) {
      const std::size_t j = rng() % layer.bias.size();
      coords.push_back(&layer.bias[j]);
      analytic.push_back(g.bias[l][j]);
    } else {
      const std::size_t j = rng() % layer.weights.size();
      coords.push_back(&layer.weights.data()[j]);
      analytic.push_back(g.weights[l].data()[j]);
    }
  }
  const auto numeric = oracle::numeric_gradient([&] { return net.loss(x, y); }, coords, 1e-6);
  double worst = 0;
  for (std::size_t i = 0; i < numeric.size(); ++i) {
    const double scale = std::max(std::abs(analytic[i]), std::abs(numeric[i]));
    if (scale < 1e-7) continue;  // both vanish; nothing to compare
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / scale);
  }
  const double acc = t.result.report.accuracy;
  const bool ok = acc >= kSubsetAccuracyFloor && worst <= kGradRelTol;
  return {ok, "10k-sample subset accuracy " + fmt("%.4f", acc) + " (floor 0.88), gradient rel err " +
                  fmt("%.1e", worst) + "; full-data run is the test_full_mnist check"};
}

engine::SearchReport search(const fs::path& config, std::uint64_t seed) {
  auto cfg = load_config(config);
  cfg.pop.max_generations = kSearchGenerations;
  dispatch::WorkerSetup setup;
  setup.hw = cfg.hw;
  setup.hw_model = cfg.hw_model_or_default();
  setup.synthetic_accuracy = true;
  std::vector<dispatch::WorkerEndpoint> eps;
  for (const auto* et : cfg.pop.active_eval_types()) {
    eps.push_back({et->type, dispatch::Transport::kInProcess, 1,
                   [type = et->type, setup] { return dispatch::make_worker(type, setup); }});
  }
  dispatch::Dispatcher d(std::move(eps));
  engine::SearchOptions opts;
  opts.seed = seed;
  return engine::run(cfg, d, nullptr, opts);
}

Verdict search_pressure() {
  const auto a = search(kSource / "configs" / "imgps_only.ecad.cfg", 1);
  const auto b = search(kSource / "configs" / "accuracy_imgps.ecad.cfg", 1);
  const double a_img = a.best()->card.metric("img_per_s").value_or(0);
  const double b_img = b.best()->card.metric("img_per_s").value_or(0);
  const auto* b_acc = b.best()->card.objective(EvalType::kSim);
  const bool ok_a = a.final_median_neurons < a.initial_median_neurons;
  const bool ok_b = b_acc != nullptr && b_acc->score > 0 && b_img < a_img;
  return {ok_a && ok_b,
          "(a) median neurons " + fmt("%.0f", a.initial_median_neurons) + " -> " + fmt("%.0f", a.final_median_neurons) +
              ", best " + fmt("%.0f img/s", a_img) + "; (b) best accuracy " + fmt("%.4f", b_acc ? b_acc->raw : 0.0) +
              " score " + fmt("%.3f", b_acc ? b_acc->score : 0.0) + ", " + fmt("%.0f img/s", b_img)};
}

Verdict feasibility() {
  const auto hw = arria();
  bool ok = true;
  std::string detail;
  for (const SystolicConfig cfg : {SystolicConfig{2, 8, 16, 16, 2}, SystolicConfig{2, 16, 32, 32, 2}, SystolicConfig{2, 8, 32, 16, 2}}) {
    const auto r = hw::resource_estimate(cfg, hw);
    ok = ok && r.feasible;
    detail += cfg.to_string() + " dsp " + fmt("%.0f", r.dsp) + (r.feasible ? " ok; " : " over; ");
  }
  const auto big = hw::resource_estimate({64, 64, 64, 64, 64}, hw);
  ok = ok && !big.feasible;
  return {ok, detail + "64^5 dsp " + fmt("%.0f", big.dsp) + (big.feasible ? " ok" : " over")};
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), ECAD_EXE);
  std::ostringstream out, err;
  return cli::run(args, out, err);
}

Verdict determinism() {
  const auto dir = temp_dir("det");
  const auto cfg = (kSource / "configs" / "accuracy_imgps.ecad.cfg").string();
  bool ok = true;
  for (const char* sub : {"a", "b"}) {
    ok = ok && cli({"search", cfg, "--synthetic-accuracy", "--seed", "11", "--generations", "20",
                    "--out-dir", (dir / sub).string()}) == 0;
  }
  const bool csv_same = read_file(dir / "a" / "generations.csv") == read_file(dir / "b" / "generations.csv");
  const bool db_same = read_file(dir / "a" / "ecad.db.jsonl") == read_file(dir / "b" / "ecad.db.jsonl");

  const auto text = serialize_config(load_config(kSource / "configs" / "mlp_example.ecad.cfg"));
  const bool cfg_same = serialize_config(parse_config(text, kSource / "configs")) == text;

  const auto desc = mlp({784, 852, 10}, 1);
  const auto params = nn::Mlp<float>::init(desc, 3).params();
  save_params(params, {"dense0", "output"}, dir / "w1");
  save_params(load_params(desc, dir / "w1"), {"dense0", "output"}, dir / "w2");
  const bool wb_same = read_file(dir / "w1" / "dense0_weights.bin") == read_file(dir / "w2" / "dense0_weights.bin") &&
                       read_file(dir / "w1" / "output_biases.bin") == read_file(dir / "w2" / "output_biases.bin");
  const auto size = fs::file_size(dir / "w1" / "dense0_weights.bin");
  const bool size_ok = size == 16u + 784u * 852u * 4u;
  fs::remove_all(dir);
  ok = ok && csv_same && db_same && cfg_same && wb_same && size_ok;
  return {ok, std::string("csv ") + (csv_same ? "same" : "differs") + ", db " + (db_same ? "same" : "differs") +
                  ", config " + (cfg_same ? "same" : "differs") + ", weights " + (wb_same ? "same" : "differs") +
                  ", 784x852 weights file " + std::to_string(size) + " bytes (16 + 784*852*4)"};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int n, const std::function<Verdict()>& check) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %2d: %s  %s [%.1fs]\n", n, v.pass ? "PASS" : "FAIL", v.detail.c_str(), secs);
    std::fflush(stdout);
    if (!v.pass) ++failures;
  };

  report(1, efficiency_anchors);
  report(2, batch_sweep);
  report(3, img_identity);
  OracleSummary sweep;
  report(4, [&] {
    sweep = oracle_sweep();
    return Verdict{sweep.numeric_ok, std::to_string(sweep.cases) + " cases, bit-exact vs ordered oracle, max rel err " +
                                          fmt("%.2e", sweep.worst_rel) + " vs f64"};
  });
  report(5, [&] {
    return Verdict{sweep.cycles_ok, "cycle counts equal the model formula in all cases; hand case " +
                                        std::to_string(sweep.hand_cycles)};
  });
  std::optional<Trained> trained;
  report(6, [&] {
    trained = train_sample();
    return parity(*trained);
  });
  report(7, [&] {
    if (!trained) throw std::runtime_error("training for criterion 6 failed");
    return trainer_quality(*trained);
  });
  report(8, search_pressure);
  report(9, feasibility);
  report(10, determinism);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
