#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "commands.hpp"
#include "dim/adaln.hpp"
#include "dim/alloc_stats.hpp"
#include "dim/attention_baseline.hpp"
#include "json.hpp"
#include "util.hpp"

namespace dimtool {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Measurement {
  int64_t wall_ns = 0;
  int64_t peak_bytes = 0;
};

template <class Fn>
Measurement measure(Fn&& fn) {
  int64_t before = dim::alloc::current_bytes();
  dim::alloc::reset_peak();
  auto t0 = std::chrono::steady_clock::now();
  fn();
  auto t1 = std::chrono::steady_clock::now();
  Measurement m;
  m.wall_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count();
  m.peak_bytes = dim::alloc::peak_bytes() - before;
  return m;
}

dim::Tensor random_matrix(int64_t rows, int64_t cols, dim::Rng& rng) {
  dim::Tensor t({rows, cols});
  for (int64_t i = 0; i < t.numel(); ++i) t.data()[i] = rng.uniform(-1, 1);
  return t;
}

}  // namespace

void run_bench(const BenchOpts& opts) {
  // Desk-scale defaults; override width/depth through --config.
  dim::ModelConfig cfg;
  cfg.n_blocks = 2;
  cfg.d_model = 64;
  cfg.d_state = 64;
  cfg.n_heads = 2;
  cfg.d_cond = 64;
  if (!opts.config_path.empty())
    cfg = dim::ModelConfig::from_json(read_file_bytes(opts.config_path));

  std::vector<int64_t> lengths = opts.lengths;
  if (lengths.empty()) lengths = {400, 800, 1200, 1600, 2000};

  dim::AdaLNStackConfig sc;
  sc.n_blocks = cfg.n_blocks;
  sc.d_model = cfg.d_model;
  sc.d_cond = cfg.cond_dim();
  sc.ff_mult = cfg.ff_mult;
  sc.block.d_state = cfg.d_state;
  sc.block.conv_width = cfg.conv_width;
  sc.block.expand = cfg.expand;
  sc.block.n_heads = cfg.n_heads;

  dim::AttentionStackConfig ac;
  ac.n_blocks = 2 * cfg.n_blocks;  // depth-asymmetric comparison
  ac.d_model = cfg.d_model;
  ac.d_cond = cfg.cond_dim();
  ac.ff_mult = cfg.ff_mult;

  dim::Rng rng(opts.seed);
  dim::AdaLNStack stack(sc, rng);
  dim::AdaLNAttentionStack attention(ac, rng);

  fs::create_directories(opts.out_dir);
  std::ofstream csv(opts.out_dir + "/bench.csv");
  csv << "form,T,d_model,wall_ns,peak_bytes\n";

  if (!dim::alloc::hooks_active())
    std::fprintf(stderr, "warning: allocation hooks inactive; peak_bytes will be 0\n");

  struct Row {
    std::string form;
    int64_t t;
    Measurement m;
  };
  std::vector<Row> rows;
  {
    // Warm-up outside the measured region.
    dim::Tensor x = random_matrix(64, cfg.d_model, rng);
    dim::Tensor c = random_matrix(64, cfg.cond_dim(), rng);
    stack.forward(x, c, nullptr, dim::ScanForm::kLinear);
  }
  for (int64_t T : lengths) {
    dim::Tensor x = random_matrix(T, cfg.d_model, rng);
    dim::Tensor cond = random_matrix(T, cfg.cond_dim(), rng);
    dim::Tensor sink;
    Measurement lin = measure(
        [&] { sink = stack.forward(x, cond, nullptr, dim::ScanForm::kLinear); });
    Measurement quad = measure(
        [&] { sink = stack.forward(x, cond, nullptr, dim::ScanForm::kQuadratic); });
    Measurement attn = measure([&] { sink = attention.forward(x, cond); });
    rows.push_back({"mamba2_linear", T, lin});
    rows.push_back({"mamba2_quadratic", T, quad});
    rows.push_back({"adaln_attention_2x", T, attn});
    std::printf("T=%5ld  linear %8.2f ms  quadratic %8.2f ms  attention(2M) %8.2f ms\n",
                static_cast<long>(T), lin.wall_ns / 1e6, quad.wall_ns / 1e6,
                attn.wall_ns / 1e6);
  }
  for (const auto& r : rows)
    csv << r.form << "," << r.t << "," << cfg.d_model << "," << r.m.wall_ns << ","
        << r.m.peak_bytes << "\n";
  csv.close();

  std::vector<ChartSeries> time_series(3), mem_series(3);
  const char* names[3] = {"mamba2_linear", "mamba2_quadratic", "adaln_attention_2x"};
  for (int s = 0; s < 3; ++s) {
    time_series[static_cast<size_t>(s)].name = names[s];
    mem_series[static_cast<size_t>(s)].name = names[s];
  }
  for (const auto& r : rows)
    for (int s = 0; s < 3; ++s)
      if (r.form == names[s]) {
        time_series[static_cast<size_t>(s)].points.emplace_back(
            static_cast<double>(r.t), r.m.wall_ns / 1e6);
        mem_series[static_cast<size_t>(s)].points.emplace_back(
            static_cast<double>(r.t),
            static_cast<double>(std::max<int64_t>(r.m.peak_bytes, 1)));
      }
  write_svg_chart(opts.out_dir + "/bench_time.svg", "wall time vs sequence length",
                  "T (frames)", "ms", time_series, true, true);
  if (dim::alloc::hooks_active())
    write_svg_chart(opts.out_dir + "/bench_memory.svg",
                    "peak allocation vs sequence length", "T (frames)", "bytes",
                    mem_series, true, true);

  // Parameter counts, both at this configuration and at the reference widths.
  int64_t stack_params = dim::AdaLNStack::param_count(sc);
  int64_t attn_params = dim::AdaLNAttentionStack::param_count(ac);
  dim::AdaLNStackConfig ref_sc;
  ref_sc.n_blocks = 6;
  ref_sc.d_model = 1280;
  ref_sc.block.d_state = 256;
  dim::AttentionStackConfig ref_ac;
  ref_ac.n_blocks = 12;
  ref_ac.d_model = 1280;
  int64_t ref_stack = dim::AdaLNStack::param_count(ref_sc);
  int64_t ref_attn = dim::AdaLNAttentionStack::param_count(ref_ac);
  std::printf("parameters: stack %ld, attention(2M) %ld\n",
              static_cast<long>(stack_params), static_cast<long>(attn_params));
  std::printf("parameters at width 1280: 6-block stack %ld, 12-block attention %ld\n",
              static_cast<long>(ref_stack), static_cast<long>(ref_attn));

  json manifest{{"command", "bench"},
                {"config", json::parse(cfg.to_json())},
                {"lengths", lengths},
                {"parameters",
                 {{"stack", stack_params},
                  {"attention_2x", attn_params},
                  {"stack_width1280_6blocks", ref_stack},
                  {"attention_width1280_12blocks", ref_attn}}},
                {"alloc_hooks", dim::alloc::hooks_active()}};
  std::ofstream mf(opts.out_dir + "/run_manifest.json");
  mf << manifest.dump(2) << "\n";
}

}  // namespace dimtool
