#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "wpool/cli.hpp"
#include "wpool/costmodel.hpp"
#include "wpool/engine.hpp"
#include "wpool/error.hpp"
#include "wpool/model_io.hpp"
#include "wpool/pool_io.hpp"

namespace py = pybind11;
using namespace wpool;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

Tensor tensor_from_array(const FloatArray& arr) {
  Tensor t;
  for (py::ssize_t d = 0; d < arr.ndim(); ++d) t.shape.push_back(uint32_t(arr.shape(d)));
  t.data.assign(arr.data(), arr.data() + arr.size());
  t.validate();
  return t;
}

py::array_t<float> array_from_tensor(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape.begin(), t.shape.end());
  py::array_t<float> arr(shape);
  std::copy(t.data.begin(), t.data.end(), arr.mutable_data());
  return arr;
}

LayerKind kind_from_string(const std::string& kind) {
  if (kind == "conv2d") return LayerKind::conv2d;
  if (kind == "depthwise") return LayerKind::depthwise;
  if (kind == "fully_connected") return LayerKind::fully_connected;
  fail(Errc::invalid_config, "unknown layer kind: " + kind);
}

EngineConfig engine_config(uint8_t act_bits, const std::string& precompute,
                           const std::string& caching, const std::string& order,
                           uint8_t lut_bits, uint8_t weight_bits) {
  EngineConfig cfg;
  cfg.act_bits = act_bits;
  cfg.lut_bits = lut_bits;
  cfg.weight_bits = weight_bits;
  if (precompute == "on")
    cfg.precompute = PrecomputeMode::on;
  else if (precompute == "off")
    cfg.precompute = PrecomputeMode::off;
  else
    cfg.precompute = PrecomputeMode::automatic;
  cfg.caching = caching == "off" ? CacheMode::off
                : caching == "forced" ? CacheMode::forced
                                      : CacheMode::on;
  cfg.order = order == "weight" ? LutOrder::weight_oriented : LutOrder::input_oriented;
  return cfg;
}

MemoryModel memory_model(const std::string& board) {
  if (board == "mc-small") return MemoryModel::mc_small();
  return MemoryModel::mc_large();
}

py::dict stats_dict(const ExecStats& s) {
  py::dict d;
  d["flash_reads"] = s.flash_reads;
  d["sram_reads"] = s.sram_reads;
  d["sram_writes"] = s.sram_writes;
  d["lut_lookups"] = s.lut_lookups;
  d["lut_lookups_flash"] = s.lut_lookups_flash;
  d["lut_lookups_sram"] = s.lut_lookups_sram;
  d["shifts"] = s.shifts;
  d["accumulates"] = s.accumulates;
  d["mults"] = s.mults;
  d["unpack_ops"] = s.unpack_ops;
  d["lut_entries_cached"] = s.lut_entries_cached;
  d["cache_bytes_peak"] = s.cache_bytes_peak;
  d["modeled_cycles"] = s.modeled_cycles;
  d["precompute_used"] = s.precompute_used;
  d["caching_used"] = s.caching_used;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "weight-pool compression and bit-serial lookup inference";

  py::register_exception<Error>(m, "WpoolError");

  py::class_<LayerSpec>(m, "LayerSpec")
      .def(py::init([](const std::string& kind, uint32_t in_ch, uint32_t out_ch, uint32_t kh,
                       uint32_t kw, uint32_t stride, uint32_t pad, bool relu) {
             LayerSpec s;
             s.kind = kind_from_string(kind);
             s.in_ch = in_ch;
             s.out_ch = out_ch;
             s.kh = kh;
             s.kw = kw;
             s.stride = stride;
             s.pad = pad;
             s.has_relu = relu;
             s.validate();
             return s;
           }),
           py::arg("kind"), py::arg("in_ch"), py::arg("out_ch"), py::arg("kh") = 1,
           py::arg("kw") = 1, py::arg("stride") = 1, py::arg("pad") = 0, py::arg("relu") = false)
      .def_property_readonly("kind", [](const LayerSpec& s) { return layer_kind_name(s.kind); })
      .def_readonly("in_ch", &LayerSpec::in_ch)
      .def_readonly("out_ch", &LayerSpec::out_ch)
      .def_readonly("kh", &LayerSpec::kh)
      .def_readonly("kw", &LayerSpec::kw)
      .def_readonly("stride", &LayerSpec::stride)
      .def_readonly("pad", &LayerSpec::pad)
      .def_readonly("relu", &LayerSpec::has_relu)
      .def("weight_shape", &LayerSpec::weight_shape);

  py::class_<ModelGraph>(m, "ModelGraph")
      .def(py::init([](const std::vector<uint32_t>& input_shape) {
             ModelGraph g;
             g.input_shape = input_shape;
             return g;
           }),
           py::arg("input_shape"))
      .def("add_layer",
           [](ModelGraph& g, const LayerSpec& spec, const FloatArray& weights,
              std::optional<std::vector<float>> bias) {
             Layer l;
             l.spec = spec;
             l.weights = tensor_from_array(weights);
             l.bias = std::move(bias);
             g.layers.push_back(std::move(l));
           },
           py::arg("spec"), py::arg("weights"), py::arg("bias") = std::nullopt)
      .def("validate", &ModelGraph::validate)
      .def_property_readonly("num_layers", [](const ModelGraph& g) { return g.layers.size(); })
      .def_property_readonly("input_shape", [](const ModelGraph& g) { return g.input_shape; })
      .def("save", &save_model, py::arg("path"))
      .def_static("load", &load_model, py::arg("path"));

  py::class_<CompressedModel>(m, "CompressedModel")
      .def_property_readonly("group_size", [](const CompressedModel& m_) { return m_.group_size; })
      .def_property_readonly("pool_size", [](const CompressedModel& m_) { return m_.pool_size; })
      .def_property_readonly("num_layers",
                             [](const CompressedModel& m_) { return m_.layers.size(); })
      .def_property_readonly("warnings",
                             [](const CompressedModel& m_) { return m_.warnings; })
      .def_property_readonly("calibrated", &CompressedModel::calibrated)
      .def_property_readonly("total_params", &CompressedModel::total_params)
      .def_property_readonly("pool",
                             [](const CompressedModel& m_) {
                               py::array_t<float> arr(
                                   {py::ssize_t(m_.pool.size()), py::ssize_t(m_.pool.n)});
                               std::copy(m_.pool.values.begin(), m_.pool.values.end(),
                                         arr.mutable_data());
                               return arr;
                             })
      .def("layer_excluded",
           [](const CompressedModel& m_, size_t i) { return m_.layers.at(i).excluded; })
      .def("layer_indices",
           [](const CompressedModel& m_, size_t i) { return m_.layers.at(i).indices; })
      .def("reconstruct_layer",
           [](const CompressedModel& m_, size_t i) {
             return array_from_tensor(
                 reconstruct_layer(m_.layers.at(i), m_.pool, m_.group_size));
           },
           py::arg("layer"))
      .def("calibrate",
           [](CompressedModel& m_, const std::vector<FloatArray>& samples, uint8_t act_bits) {
             std::vector<Tensor> tensors;
             tensors.reserve(samples.size());
             for (const auto& s : samples) tensors.push_back(tensor_from_array(s));
             calibrate_model(m_, tensors, act_bits);
           },
           py::arg("samples"), py::arg("act_bits") = 8)
      .def("save", &save_compressed, py::arg("path"))
      .def_static("load", &load_compressed, py::arg("path"));

  m.def(
      "compress",
      [](const ModelGraph& g, uint32_t pool_size, uint32_t group_size, uint64_t seed,
         uint32_t max_iter, bool compress_first, bool compress_fc) {
        PoolConfig cfg;
        cfg.pool_size = pool_size;
        cfg.group_size = group_size;
        cfg.seed = seed;
        cfg.max_iter = max_iter;
        cfg.exclusions.first_layer = !compress_first;
        cfg.exclusions.fully_connected = !compress_fc;
        return compress_model(g, cfg);
      },
      py::arg("model"), py::arg("pool_size") = 64, py::arg("group_size") = 8,
      py::arg("seed") = kDefaultSeed, py::arg("max_iter") = 100,
      py::arg("compress_first") = false, py::arg("compress_fc") = false);

  py::class_<LutTable>(m, "LutTable")
      .def_property_readonly("order",
                             [](const LutTable& t) { return lut_order_name(t.order); })
      .def_readonly("n", &LutTable::n)
      .def_readonly("s", &LutTable::s)
      .def_readonly("entry_bits", &LutTable::entry_bits)
      .def_readonly("entry_scale_exp", &LutTable::entry_scale_exp)
      .def_readonly("weight_scale_exp", &LutTable::weight_scale_exp)
      .def_property_readonly("storage_bits", &LutTable::storage_bits)
      .def("lookup", &lut_lookup, py::arg("pattern"), py::arg("pool_index"))
      .def("save", &save_lut, py::arg("path"))
      .def_static("load", &load_lut, py::arg("path"));

  m.def(
      "build_lut",
      [](const CompressedModel& m_, uint8_t entry_bits, const std::string& order,
         uint8_t weight_bits) {
        return build_lut(m_.pool, entry_bits,
                         order == "weight" ? LutOrder::weight_oriented
                                           : LutOrder::input_oriented,
                         weight_bits);
      },
      py::arg("model"), py::arg("entry_bits") = 8, py::arg("order") = "input",
      py::arg("weight_bits") = 8);

  m.def(
      "quantize",
      [](const FloatArray& arr, uint8_t bits, float hi) {
        const auto [q, params] = quantize_activations(tensor_from_array(arr), bits, {hi});
        std::vector<py::ssize_t> shape(q.shape.begin(), q.shape.end());
        py::array_t<uint8_t> out(shape);
        std::copy(q.data.begin(), q.data.end(), out.mutable_data());
        return py::make_tuple(out, params.scale);
      },
      py::arg("x"), py::arg("bits"), py::arg("hi"));

  m.def(
      "search_activation_range",
      [](const FloatArray& arr, uint8_t bits) {
        std::span<const float> values(arr.data(), size_t(arr.size()));
        return search_activation_range(values, bits).hi;
      },
      py::arg("x"), py::arg("bits") = 8);

  m.def(
      "bit_decompose",
      [](const std::vector<uint8_t>& q, uint8_t bits) {
        const BitPlaneMatrix planes = bit_decompose(q, bits);
        std::vector<uint32_t> rows(planes.bits.begin(), planes.bits.begin() + planes.rows);
        return rows;
      },
      py::arg("q"), py::arg("bits"));

  m.def(
      "run",
      [](const CompressedModel& m_, const FloatArray& input, uint8_t act_bits,
         const std::string& precompute, const std::string& caching, const std::string& order,
         uint8_t lut_bits, uint8_t weight_bits, const std::string& board) {
        const RunResult r =
            run_network(m_, tensor_from_array(input),
                        engine_config(act_bits, precompute, caching, order, lut_bits,
                                      weight_bits),
                        memory_model(board));
        py::list layers;
        for (const auto& s : r.layer_stats) layers.append(stats_dict(s));
        py::dict stats;
        stats["layers"] = layers;
        stats["total"] = stats_dict(r.total);
        stats["warnings"] = r.warnings;
        return py::make_tuple(array_from_tensor(r.output), stats);
      },
      py::arg("model"), py::arg("input"), py::arg("act_bits") = 8,
      py::arg("precompute") = "auto", py::arg("caching") = "on", py::arg("order") = "input",
      py::arg("lut_bits") = 8, py::arg("weight_bits") = 8, py::arg("board") = "mc-large");

  m.def(
      "run_reference",
      [](const CompressedModel& m_, const FloatArray& input) {
        return array_from_tensor(run_network_reference(m_, tensor_from_array(input)));
      },
      py::arg("model"), py::arg("input"));

  m.def(
      "reference_conv",
      [](const FloatArray& input, const LayerSpec& spec, const FloatArray& weights) {
        return array_from_tensor(
            reference_conv_f32(tensor_from_array(input), spec, tensor_from_array(weights)));
      },
      py::arg("input"), py::arg("spec"), py::arg("weights"));

  m.def("lut_storage_bits", &lut_storage_bits, py::arg("group_size"), py::arg("pool_size"),
        py::arg("entry_bits"));
  m.def("compression_ratio", &compression_ratio, py::arg("total_params"),
        py::arg("weight_bits") = 8, py::arg("group_size") = 8, py::arg("pool_size") = 64,
        py::arg("entry_bits") = 8, py::arg("index_bits") = 8);

  m.def(
      "compression_report",
      [](const CompressedModel& m_, uint32_t index_bits, uint32_t weight_bits,
         uint32_t lut_bits) {
        const CompressionReport r = model_compression_report(m_, index_bits, weight_bits,
                                                             lut_bits);
        py::dict d;
        d["total_params"] = r.total_params;
        d["compressed_params"] = r.compressed_params;
        d["excluded_params"] = r.excluded_params;
        d["storage_index_bits"] = r.storage_index_bits;
        d["storage_lut_bits"] = r.storage_lut_bits;
        d["storage_excluded_bits"] = r.storage_excluded_bits;
        d["total_compressed_bits"] = r.total_compressed_bits;
        d["compression_ratio"] = r.cr;
        d["lut_overhead_pct"] = r.lut_overhead_pct;
        return d;
      },
      py::arg("model"), py::arg("index_bits") = 8, py::arg("weight_bits") = 8,
      py::arg("lut_bits") = 8);

  m.def(
      "save_tensor",
      [](const FloatArray& arr, const std::filesystem::path& path) {
        save_tensor_raw(tensor_from_array(arr), path);
      },
      py::arg("x"), py::arg("path"));
  m.def(
      "load_tensor",
      [](const std::filesystem::path& path) { return array_from_tensor(load_tensor_raw(path)); },
      py::arg("path"));

  m.def(
      "cli",
      [](const std::vector<std::string>& args) { return cli::run(args); },
      py::arg("args"), "run a CLI invocation in-process, returns the exit code");
}
