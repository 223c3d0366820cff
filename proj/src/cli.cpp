#include "wpool/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "wpool/costmodel.hpp"
#include "wpool/engine.hpp"
#include "wpool/error.hpp"
#include "wpool/model_io.hpp"
#include "wpool/pool_io.hpp"

namespace wpool::cli {

namespace {

namespace fs = std::filesystem;

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::invalid_config:
    case Errc::capacity_exceeded:
      return 3;
    default:
      return 2;
  }
}

uint64_t default_seed() {
  if (const char* env = std::getenv("WPOOL_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      fail(Errc::invalid_config, "WPOOL_SEED is not a valid integer");
    }
  }
  return kDefaultSeed;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(Errc::io_error, "cannot open for writing: " + path.string());
  out << text;
  if (!out) fail(Errc::io_error, "write failed: " + path.string());
}

struct MemFlags {
  std::string board = "mc-large";
  std::string latency;

  void attach(CLI::App* cmd) {
    cmd->add_option("--board", board, "memory preset: mc-large, mc-small or custom")
        ->check(CLI::IsMember({"mc-large", "mc-small", "custom"}))
        ->capture_default_str();
    cmd->add_option("--mem-latency", latency,
                    "per-access cycle costs, e.g. flash=4,sram=1,alu=1");
    cmd->add_option("--sram-kb", sram_kb, "custom SRAM capacity in kB");
    cmd->add_option("--flash-kb", flash_kb, "custom flash capacity in kB");
  }

  MemoryModel resolve() const {
    MemoryModel mem = board == "mc-small" ? MemoryModel::mc_small() : MemoryModel::mc_large();
    if (board == "custom") {
      mem.sram_bytes = uint64_t(sram_kb) * 1024;
      mem.flash_bytes = uint64_t(flash_kb) * 1024;
    }
    if (!latency.empty()) {
      std::stringstream ss(latency);
      std::string item;
      while (std::getline(ss, item, ',')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos)
          fail(Errc::invalid_config, "bad --mem-latency entry: " + item);
        const std::string key = item.substr(0, eq);
        uint32_t value = 0;
        try {
          value = uint32_t(std::stoul(item.substr(eq + 1)));
        } catch (const std::exception&) {
          fail(Errc::invalid_config, "bad --mem-latency value: " + item);
        }
        if (key == "flash")
          mem.flash_read_cycles = value;
        else if (key == "sram")
          mem.sram_read_cycles = mem.sram_write_cycles = value;
        else if (key == "alu")
          mem.alu_op_cycles = value;
        else
          fail(Errc::invalid_config, "unknown --mem-latency key: " + key);
      }
    }
    mem.validate();
    return mem;
  }

 private:
  uint32_t sram_kb = 128;
  uint32_t flash_kb = 1024;
};

struct EngineFlags {
  uint32_t act_bits = 8;
  uint32_t lut_bits = 8;
  uint32_t weight_bits = 8;
  std::string precompute = "auto";
  std::string order = "input";
  bool no_cache = false;
  bool force_cache = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--act-bits", act_bits, "bit-serial steps to execute (1..8)")
        ->capture_default_str();
    cmd->add_option("--lut-bits", lut_bits, "LUT entry bitwidth: 4, 8, 16 or 32")
        ->capture_default_str();
    cmd->add_option("--weight-bits", weight_bits, "pool weight quantization bitwidth")
        ->capture_default_str();
    cmd->add_option("--precompute", precompute, "pool-result precomputation: auto, on, off")
        ->check(CLI::IsMember({"auto", "on", "off"}))
        ->capture_default_str();
    cmd->add_option("--order", order, "LUT layout: input or weight oriented")
        ->check(CLI::IsMember({"input", "weight"}))
        ->capture_default_str();
    cmd->add_flag("--no-cache", no_cache, "disable LUT block caching");
    cmd->add_flag("--force-cache", force_cache,
                  "fail instead of degrading when the cache cannot fit");
  }

  EngineConfig resolve() const {
    if (no_cache && force_cache)
      fail(Errc::invalid_config, "--no-cache and --force-cache are mutually exclusive");
    EngineConfig cfg;
    cfg.act_bits = uint8_t(act_bits);
    cfg.lut_bits = uint8_t(lut_bits);
    cfg.weight_bits = uint8_t(weight_bits);
    cfg.precompute = precompute == "on"    ? PrecomputeMode::on
                     : precompute == "off" ? PrecomputeMode::off
                                           : PrecomputeMode::automatic;
    cfg.caching = no_cache ? CacheMode::off : force_cache ? CacheMode::forced : CacheMode::on;
    cfg.order = order == "weight" ? LutOrder::weight_oriented : LutOrder::input_oriented;
    return cfg;
  }
};

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

int cmd_compress(const std::string& input, const std::string& output, PoolConfig cfg,
                 uint32_t index_bits, uint32_t lut_bits, uint32_t weight_bits,
                 const std::string& report_path) {
  const ModelGraph graph = load_model(input);
  CompressedModel model = compress_model(graph, cfg);
  print_warnings(model.warnings);
  save_compressed(model, output);

  const CompressionReport report =
      model_compression_report(model, index_bits, weight_bits, lut_bits);
  std::cout << report_to_text(report);
  const std::string json_path = report_path.empty() ? output + ".report.json" : report_path;
  write_text(json_path, report_to_json(report));
  std::cout << "wrote " << output << " and " << json_path << "\n";
  return 0;
}

int cmd_calibrate(const std::string& input, const std::string& calib_dir,
                  const std::string& output, uint32_t act_bits) {
  CompressedModel model = load_compressed(input);

  std::vector<fs::path> files;
  if (!fs::is_directory(calib_dir))
    fail(Errc::io_error, "calibration path is not a directory: " + calib_dir);
  for (const auto& entry : fs::directory_iterator(calib_dir))
    if (entry.is_regular_file()) files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) fail(Errc::insufficient_data, "calibration directory is empty");

  std::vector<Tensor> samples;
  samples.reserve(files.size());
  for (const auto& f : files) samples.push_back(load_tensor_raw(f));

  calibrate_model(model, samples, uint8_t(act_bits));
  print_warnings(model.warnings);
  save_compressed(model, output.empty() ? input : output);
  std::cout << "calibrated " << model.layers.size() << " layers at " << act_bits
            << "-bit activations from " << samples.size() << " samples\n";
  return 0;
}

int cmd_gen_lut(const std::string& input, const std::string& output, bool embed,
                uint32_t lut_bits, uint32_t weight_bits, const std::string& order) {
  if (output.empty() && !embed)
    fail(Errc::invalid_config, "gen-lut needs -o and/or --embed");
  CompressedModel model = load_compressed(input);
  const LutTable lut =
      build_lut(model.pool, uint8_t(lut_bits),
                order == "weight" ? LutOrder::weight_oriented : LutOrder::input_oriented,
                uint8_t(weight_bits));
  if (!output.empty()) {
    save_lut(lut, output);
    std::cout << "wrote " << output << " (" << lut.storage_bits() / 8 << " B, "
              << lut_order_name(lut.order) << "-oriented)\n";
  }
  if (embed) {
    model.lut = lut;
    save_compressed(model, input);
    std::cout << "embedded LUT into " << input << "\n";
  }
  return 0;
}

int cmd_run(const std::string& model_path, const std::string& input_path,
            const std::string& output_path, const std::string& stats_path,
            const std::string& trace_path, const EngineFlags& eng, const MemFlags& memf) {
  const CompressedModel model = load_compressed(model_path);
  const Tensor input = load_tensor_raw(input_path);
  const EngineConfig cfg = eng.resolve();
  const MemoryModel mem = memf.resolve();

  std::ofstream trace;
  if (!trace_path.empty()) {
    trace.open(trace_path, std::ios::trunc);
    if (!trace) fail(Errc::io_error, "cannot open trace file: " + trace_path);
  }

  const RunResult result =
      run_network(model, input, cfg, mem, trace.is_open() ? &trace : nullptr);
  print_warnings(result.warnings);

  if (!output_path.empty()) save_tensor_raw(result.output, output_path);
  const std::string stats = stats_to_json(result, mem);
  if (!stats_path.empty())
    write_text(stats_path, stats);
  else
    std::cout << stats;
  std::cout << "modeled cycles: " << result.total.modeled_cycles << "\n";
  return 0;
}

std::vector<uint32_t> parse_sweep_values(const std::string& body) {
  std::vector<uint32_t> values;
  const auto dots = body.find("..");
  if (dots != std::string::npos) {
    const uint32_t lo = uint32_t(std::stoul(body.substr(0, dots)));
    const uint32_t hi = uint32_t(std::stoul(body.substr(dots + 2)));
    if (lo > hi) fail(Errc::invalid_config, "sweep range is reversed");
    for (uint32_t v = lo; v <= hi; ++v) values.push_back(v);
    return values;
  }
  std::stringstream ss(body);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) values.push_back(uint32_t(std::stoul(item)));
  return values;
}

int cmd_bench(const std::string& sweep, BenchLayer bench, const MemFlags& memf,
              const std::string& output_path) {
  const MemoryModel mem = memf.resolve();
  const auto eq = sweep.find('=');
  if (eq == std::string::npos)
    fail(Errc::invalid_config, "--sweep must look like bits=1..8 or filters=32,64,128");
  const std::string kind = sweep.substr(0, eq);
  std::vector<uint32_t> values;
  try {
    values = parse_sweep_values(sweep.substr(eq + 1));
  } catch (const std::exception&) {
    fail(Errc::invalid_config, "cannot parse sweep values: " + sweep);
  }
  if (values.empty()) fail(Errc::invalid_config, "empty sweep");

  std::string csv;
  if (kind == "bits") {
    std::vector<uint8_t> bits(values.begin(), values.end());
    csv = speedup_curve_to_csv(speedup_curve(bench, mem, bits));
  } else if (kind == "filters") {
    csv = caching_curve_to_csv(caching_curve(bench, mem, values));
  } else {
    fail(Errc::invalid_config, "unknown sweep kind: " + kind);
  }
  if (!output_path.empty())
    write_text(output_path, csv);
  else
    std::cout << csv;
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"weight-pool compression and bit-serial lookup inference"};
  app.require_subcommand(1);

  // compress
  auto* compress = app.add_subcommand("compress", "cluster weights and emit a WPNC container");
  std::string c_input, c_output, c_report;
  PoolConfig pool_cfg;
  uint32_t c_index_bits = 8, c_lut_bits = 8, c_weight_bits = 8;
  bool c_first = false, c_fc = false;
  uint64_t c_seed = 0;
  compress->add_option("input", c_input, "WPNN model")->required();
  compress->add_option("-o,--output", c_output, "WPNC output path")->required();
  compress->add_option("--pool-size", pool_cfg.pool_size, "vectors in the pool (S)")
      ->capture_default_str();
  compress->add_option("--group-size", pool_cfg.group_size, "elements per vector (N)")
      ->capture_default_str();
  auto* seed_opt = compress->add_option("--seed", c_seed, "clustering seed");
  compress->add_option("--max-iter", pool_cfg.max_iter, "k-means iteration cap")
      ->capture_default_str();
  compress->add_flag("--compress-first", c_first, "pool the first layer too");
  compress->add_flag("--compress-fc", c_fc, "pool fully-connected layers too");
  compress->add_option("--index-bits", c_index_bits, "bits per index in the report")
      ->capture_default_str();
  compress->add_option("--lut-bits", c_lut_bits, "LUT bitwidth in the report")
      ->capture_default_str();
  compress->add_option("--weight-bits", c_weight_bits, "baseline weight bitwidth in the report")
      ->capture_default_str();
  compress->add_option("--report", c_report, "write the JSON report here");

  // calibrate
  auto* calibrate = app.add_subcommand("calibrate", "search activation ranges from samples");
  std::string k_input, k_dir, k_output;
  uint32_t k_act_bits = 8;
  calibrate->add_option("model", k_input, "WPNC container")->required();
  calibrate->add_option("calib_dir", k_dir, "directory of raw tensors")->required();
  calibrate->add_option("-o,--output", k_output, "output path (default: in place)");
  calibrate->add_option("--act-bits", k_act_bits, "activation bitwidth")->capture_default_str();

  // gen-lut
  auto* genlut = app.add_subcommand("gen-lut", "build the dot-product lookup table");
  std::string g_input, g_output, g_order = "input";
  uint32_t g_lut_bits = 8, g_weight_bits = 8;
  bool g_embed = false;
  genlut->add_option("model", g_input, "WPNC container")->required();
  genlut->add_option("-o,--output", g_output, "LUT blob output path");
  genlut->add_flag("--embed", g_embed, "embed the table into the container");
  genlut->add_option("--lut-bits", g_lut_bits, "entry bitwidth")->capture_default_str();
  genlut->add_option("--weight-bits", g_weight_bits, "pool quantization bitwidth")
      ->capture_default_str();
  genlut->add_option("--order", g_order, "input or weight oriented")
      ->check(CLI::IsMember({"input", "weight"}))
      ->capture_default_str();

  // run
  auto* runcmd = app.add_subcommand("run", "execute a compressed network");
  std::string r_model, r_input, r_output, r_stats, r_trace;
  EngineFlags r_eng;
  MemFlags r_mem;
  runcmd->add_option("model", r_model, "calibrated WPNC container")->required();
  runcmd->add_option("input", r_input, "raw input tensor")->required();
  runcmd->add_option("-o,--output", r_output, "raw output tensor path");
  runcmd->add_option("--stats", r_stats, "write the JSON stats report here");
  runcmd->add_option("--trace", r_trace, "write a line-oriented access trace");
  r_eng.attach(runcmd);
  r_mem.attach(runcmd);

  // bench
  auto* benchcmd = app.add_subcommand("bench", "sweep modeled runtime curves");
  std::string b_sweep, b_output;
  BenchLayer bench;
  MemFlags b_mem;
  uint64_t b_seed = 0;
  benchcmd->add_option("--sweep", b_sweep, "bits=1..8 or filters=32,64,128,192")->required();
  benchcmd->add_option("-o,--output", b_output, "CSV output path");
  benchcmd->add_option("--channels", bench.channels, "input channels")->capture_default_str();
  benchcmd->add_option("--filters", bench.filters, "filter count")->capture_default_str();
  benchcmd->add_option("--hw", bench.hw, "square input size")->capture_default_str();
  benchcmd->add_option("--kernel", bench.kernel, "kernel extent")->capture_default_str();
  benchcmd->add_option("--pool-size", bench.pool_size, "pool size (S)")->capture_default_str();
  benchcmd->add_option("--group-size", bench.group_size, "group size (N)")
      ->capture_default_str();
  benchcmd->add_option("--act-bits", bench.act_bits, "data bitwidth")->capture_default_str();
  benchcmd->add_option("--lut-bits", bench.lut_bits, "LUT entry bitwidth")
      ->capture_default_str();
  auto* bseed_opt = benchcmd->add_option("--seed", b_seed, "fixture seed");
  b_mem.attach(benchcmd);

  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("wpool");
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    app.parse(int(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (compress->parsed()) {
      pool_cfg.seed = seed_opt->count() ? c_seed : default_seed();
      pool_cfg.exclusions.first_layer = !c_first;
      pool_cfg.exclusions.fully_connected = !c_fc;
      return cmd_compress(c_input, c_output, pool_cfg, c_index_bits, c_lut_bits, c_weight_bits,
                          c_report);
    }
    if (calibrate->parsed()) return cmd_calibrate(k_input, k_dir, k_output, k_act_bits);
    if (genlut->parsed())
      return cmd_gen_lut(g_input, g_output, g_embed, g_lut_bits, g_weight_bits, g_order);
    if (runcmd->parsed())
      return cmd_run(r_model, r_input, r_output, r_stats, r_trace, r_eng, r_mem);
    if (benchcmd->parsed()) {
      bench.seed = bseed_opt->count() ? b_seed : default_seed();
      return cmd_bench(b_sweep, bench, b_mem, b_output);
    }
  } catch (const Error& e) {
    std::cerr << "error (" << errc_name(e.code()) << "): " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace wpool::cli
