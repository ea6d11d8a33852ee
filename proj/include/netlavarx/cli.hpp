#pragma once

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "netlavarx/error.hpp"
#include "netlavarx/estimator.hpp"
#include "netlavarx/evaluation.hpp"
#include "netlavarx/io.hpp"
#include "netlavarx/model_io.hpp"
#include "netlavarx/model_selection.hpp"
#include "netlavarx/network.hpp"
#include "netlavarx/partition.hpp"
#include "netlavarx/simulator.hpp"
#include "netlavarx/version.hpp"

namespace netlavarx::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kNumericalError = 3 };

inline int exit_code_for(ErrorKind kind) { return is_numerical(kind) ? kNumericalError : kDataError; }

// ---------------------------------------------------------------------------
// Argument parsing helpers

/// "1,2,3" or "1-3" or a mix ("1,4-6").
inline std::vector<std::size_t> parse_count_list(std::string_view text, std::string_view what) {
  std::vector<std::size_t> out;
  auto number = [&](std::string_view t) -> std::size_t {
    std::size_t v = 0;
    const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size()) {
      throw Error(ErrorKind::ConfigError, "bad value '" + std::string(t) + "' in " + std::string(what));
    }
    return v;
  };
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    const std::string_view item = text.substr(pos, comma - pos);
    const std::size_t dash = item.find('-');
    if (dash == std::string_view::npos) {
      out.push_back(number(item));
    } else {
      const std::size_t lo = number(item.substr(0, dash));
      const std::size_t hi = number(item.substr(dash + 1));
      if (hi < lo) throw Error(ErrorKind::ConfigError, "empty range '" + std::string(item) + "' in " + std::string(what));
      for (std::size_t v = lo; v <= hi; ++v) out.push_back(v);
    }
    pos = comma + 1;
  }
  return out;
}

/// Per-node candidate lists separated by ';'. A single list applies to every node.
inline std::vector<std::vector<std::size_t>> parse_candidates(std::string_view text, std::size_t node_count,
                                                              std::string_view what) {
  std::vector<std::vector<std::size_t>> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t semi = std::min(text.find(';', pos), text.size());
    auto list = parse_count_list(text.substr(pos, semi - pos), what);
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
    out.push_back(std::move(list));
    pos = semi + 1;
  }
  if (out.size() == 1) out.resize(node_count, out.front());
  if (out.size() != node_count) {
    throw Error(ErrorKind::ConfigError, std::string(what) + " needs 1 or " + std::to_string(node_count) + " lists");
  }
  return out;
}

inline SplitSpec parse_split(std::string_view text) {
  std::vector<double> f;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    f.push_back(io::parse_double(text.substr(pos, comma - pos), "--split"));
    pos = comma + 1;
  }
  if (f.size() != 3) throw Error(ErrorKind::ConfigError, "--split needs three fractions train,validation,test");
  SplitSpec spec{f[0], f[1], f[2]};
  try {
    spec.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::ConfigError, e.what());
  }
  return spec;
}

/// Rows of `segment` ("all", "train", "validation", "test", "trainval"),
/// preceded by up to `history` rows of lag context for later segments.
inline TimeSeriesDataset select_segment(const TimeSeriesDataset& data, std::string_view segment,
                                        const SplitSpec& spec, std::size_t max_order, std::size_t history) {
  if (segment == "all") return data;
  const Segments seg = split(data, spec, max_order);
  if (segment == "train") return data.slice(seg.train.begin, seg.train.count);
  if (segment == "trainval") return data.slice(0, seg.train.count + seg.validation.count);
  if (segment == "validation") return with_history(data, seg.validation, history);
  if (segment == "test") return with_history(data, seg.test, history);
  throw Error(ErrorKind::ConfigError, "unknown segment '" + std::string(segment) + "'");
}

inline io::CsvTable dataset_to_table(const TimeSeriesDataset& data, std::string_view index_name = "t") {
  io::CsvTable table;
  table.header.emplace_back(index_name);
  Index cols = 0;
  for (const auto& n : data.nodes()) cols += n.outputs.cols() + n.inputs.cols();
  table.values.resize(data.rows(), cols);
  Index at = 0;
  for (const auto& n : data.nodes()) {
    for (const auto& name : n.output_names) table.header.push_back(name);
    for (const auto& name : n.input_names) table.header.push_back(name);
    table.values.middleCols(at, n.outputs.cols()) = n.outputs;
    at += n.outputs.cols();
    table.values.middleCols(at, n.inputs.cols()) = n.inputs;
    at += n.inputs.cols();
  }
  for (Index r = 0; r < data.rows(); ++r) table.row_labels.push_back(std::to_string(r));
  return table;
}

inline std::string format_optional(const std::optional<double>& v) { return v ? io::format_double(*v) : "NA"; }

// ---------------------------------------------------------------------------
// Run manifest

class Manifest {
 public:
  explicit Manifest(std::string subcommand) : subcommand_(std::move(subcommand)), start_(Clock::now()) {}

  void set_argv(std::vector<std::string> argv) { argv_ = std::move(argv); }
  void set_options(io::Json options) { options_ = std::move(options); }
  void set_seed(std::uint64_t seed) { seed_ = seed; }
  void add_input(const std::filesystem::path& path, std::string_view content) {
    inputs_.push_back({{"path", path.string()}, {"fnv1a64", hex(io::fnv1a64(content))}});
  }
  void add_output(const std::filesystem::path& path) { outputs_.push_back(path.string()); }
  void set(const std::string& key, io::Json value) { extra_[key] = std::move(value); }

  /// Starts or stops a named phase timer.
  void phase(const std::string& name) {
    const auto now = Clock::now();
    if (!current_.empty()) timings_[current_] = std::chrono::duration<double, std::milli>(now - phase_start_).count();
    current_ = name;
    phase_start_ = now;
  }

  io::Json to_json() {
    phase("");
    timings_["total"] = std::chrono::duration<double, std::milli>(Clock::now() - start_).count();
    io::Json hashed = {{"subcommand", subcommand_}, {"options", options_}, {"inputs", inputs_}};
    return {{"tool", "netlavarx"},
            {"version", NETLAVARX_VERSION},
            {"libraries",
             {{"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                            std::to_string(EIGEN_MINOR_VERSION)},
              {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                    std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                    std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
              {"cli11", CLI11_VERSION}}},
            {"subcommand", subcommand_},
            {"argv", argv_},
            {"options", options_},
            {"seed", seed_ ? io::Json(*seed_) : io::Json(nullptr)},
            {"config_hash", hex(io::fnv1a64(hashed.dump()))},
            {"inputs", inputs_},
            {"outputs", outputs_},
            {"results", extra_},
            {"timings_ms", timings_}};
  }

  void write(const std::filesystem::path& path) { io::write_file_atomic(path, to_json().dump(1) + "\n"); }

 private:
  using Clock = std::chrono::steady_clock;

  static std::string hex(std::uint64_t v) {
    std::ostringstream ss;
    ss << std::hex << std::setw(16) << std::setfill('0') << v;
    return ss.str();
  }

  std::string subcommand_;
  std::vector<std::string> argv_;
  io::Json options_ = io::Json::object();
  std::optional<std::uint64_t> seed_;
  io::Json inputs_ = io::Json::array();
  std::vector<std::string> outputs_;
  io::Json extra_ = io::Json::object();
  io::Json timings_ = io::Json::object();
  std::string current_;
  Clock::time_point start_;
  Clock::time_point phase_start_;
};

inline std::filesystem::path manifest_path_for(const std::filesystem::path& output) {
  return output.string() + ".manifest.json";
}

/// Resolved option values (explicit or default) of a subcommand.
inline io::Json resolved_options(const CLI::App& sub) {
  io::Json out = io::Json::object();
  for (const CLI::Option* opt : sub.get_options()) {
    if (opt->get_lnames().empty() || opt->get_lnames().front() == "help") continue;
    const std::string& name = opt->get_lnames().front();
    if (opt->count() > 0) {
      const auto& r = opt->results();
      out[name] = r.size() == 1 ? io::Json(r.front()) : io::Json(r);
    } else if (!opt->get_default_str().empty()) {
      out[name] = opt->get_default_str();
    }
  }
  return out;
}

inline std::uint64_t generated_seed() {
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) ^ static_cast<std::uint64_t>(rd());
}

// ---------------------------------------------------------------------------
// Subcommand options

struct FitFlags {
  std::size_t max_iter = 300;
  double tol = 1e-8;
  std::size_t restarts = 0;
  double rank_tol = 0.0;

  FitSettings settings(std::uint64_t seed) const {
    FitSettings s;
    s.max_iter = max_iter;
    s.tol = tol;
    s.random_restarts = restarts;
    s.rank_tolerance = rank_tol;
    s.seed = seed;
    try {
      s.validate();
    } catch (const Error& e) {
      throw Error(ErrorKind::ConfigError, e.what());
    }
    return s;
  }
};

struct SimulateOptions {
  std::size_t nodes = 3;
  std::string p = "6", l = "2", s = "2", m = "1";
  Index samples = 1000;
  std::optional<std::uint64_t> seed;
  double radius = 0.9;
  double dlv_noise = 1.0;
  double static_noise = 0.05;
  double input_std = 1.0;
  bool orthogonal = false;
  std::string out, truth, partition_out;
};

struct FitOptions {
  std::string data, partition, l, s, out, segment = "all", split = "0.6,0.15,0.25";
  std::optional<std::uint64_t> seed;
  FitFlags fit;
};

struct PredictOptions {
  std::string model, data, segment = "all", split = "0.6,0.15,0.25", out, units = "original";
};

struct EvaluateOptions {
  std::string model, data, segment = "all", split = "0.6,0.15,0.25", out, units = "standardized";
};

struct GridOptions {
  std::string data, partition, l, s, metric = "rmse", split = "0.6,0.15,0.25", out_dir;
  bool shared = false;
  std::size_t workers = 1;
  std::optional<std::uint64_t> seed;
  FitFlags fit;
};

struct GraphOptions {
  std::string model, data, segment = "all", split = "0.6,0.15,0.25", format = "dot", out, manifest;
  double threshold = 0.1;
  std::size_t max_lag = 0;
};

// ---------------------------------------------------------------------------
// Subcommands

struct Loaded {
  io::CsvTable table;
  TimeSeriesDataset data;
};

inline Loaded load_with_partition(const std::string& data_path, const PartitionConfig& cfg, Manifest& manifest) {
  const std::string text = io::read_file(data_path);
  manifest.add_input(data_path, text);
  Loaded out;
  out.table = io::parse_csv(text, data_path);
  out.data = dataset_from_table(out.table, cfg);
  return out;
}

inline PartitionConfig load_partition(const std::string& path, Manifest& manifest) {
  const std::string text = io::read_file(path);
  manifest.add_input(path, text);
  return parse_partition(text);
}

inline NetLavarxModel load_model(const std::string& path, Manifest& manifest) {
  const std::string text = io::read_file(path);
  manifest.add_input(path, text);
  return parse_model(text);
}

inline int run_simulate(const SimulateOptions& o, Manifest& manifest, std::ostream& err) {
  const std::uint64_t seed = o.seed ? *o.seed : generated_seed();
  if (!o.seed) err << "seed: " << seed << "\n";
  manifest.set_seed(seed);
  if (o.nodes < 1) throw Error(ErrorKind::ConfigError, "--nodes must be >= 1");
  auto per_node = [&](const std::string& text, const char* what) {
    auto v = parse_count_list(text, what);
    if (v.size() == 1) v.resize(o.nodes, v.front());
    if (v.size() != o.nodes) {
      throw Error(ErrorKind::ConfigError, std::string(what) + " needs 1 or " + std::to_string(o.nodes) + " values");
    }
    return v;
  };
  const auto ps = per_node(o.p, "--p");
  const auto ls = per_node(o.l, "--l");
  const auto ss = per_node(o.s, "--s");
  const auto ms = per_node(o.m, "--m");

  SystemSpec spec;
  spec.topology = NetworkTopology::fully_connected(ls, ss);
  for (std::size_t i = 0; i < o.nodes; ++i) {
    spec.output_dims.push_back(static_cast<Index>(ps[i]));
    spec.input_dims.push_back(static_cast<Index>(ms[i]));
  }
  spec.dlv_noise_std.assign(o.nodes, o.dlv_noise);
  spec.static_noise_std.assign(o.nodes, o.static_noise);
  spec.orthogonal = o.orthogonal;
  try {
    spec.topology.validate(spec.output_dims);
  } catch (const Error& e) {
    throw Error(ErrorKind::ConfigError, e.what());
  }

  manifest.phase("generate");
  const GroundTruthSystem sys = generate_system(spec, seed, o.radius);
  manifest.phase("simulate");
  bool any_input = false;
  for (std::size_t m : ms) any_input = any_input || m > 0;
  const InputPolicy policy =
      any_input && o.input_std > 0.0 ? InputPolicy{WhiteNoiseInput{o.input_std}} : InputPolicy{ZeroInput{}};
  const Trajectory traj = simulate(sys, o.samples, policy, detail::splitmix64(seed ^ 0x5EEDF00DULL));
  const TimeSeriesDataset data = to_dataset(traj);

  manifest.phase("write");
  const std::filesystem::path out = o.out;
  const std::filesystem::path truth = o.truth.empty() ? o.out + ".truth.json" : o.truth;
  const std::filesystem::path part = o.partition_out.empty() ? o.out + ".partition.json" : o.partition_out;
  io::write_file_atomic(out, io::format_csv(dataset_to_table(data)));
  io::write_file_atomic(truth, system_to_json(sys).dump(1) + "\n");
  PartitionConfig cfg;
  for (std::size_t i = 0; i < o.nodes; ++i) {
    const auto& n = data.node(i);
    cfg.nodes.push_back({n.name, n.output_names, n.input_names, std::nullopt, ls[i], ss[i]});
  }
  io::write_file_atomic(part, partition_to_json(cfg).dump(1) + "\n");
  for (const auto& p : {out, truth, part}) manifest.add_output(p);
  manifest.set("spectral_radius", spectral_radius(companion_matrix(sys)));
  manifest.write(manifest_path_for(out));
  return kOk;
}

inline int run_fit(const FitOptions& o, Manifest& manifest, std::ostream& out, std::ostream& err) {
  const std::uint64_t seed = o.seed ? *o.seed : generated_seed();
  if (!o.seed) err << "seed: " << seed << "\n";
  manifest.set_seed(seed);
  manifest.phase("load");
  const PartitionConfig cfg = load_partition(o.partition, manifest);
  const NetworkTopology topo =
      topology_from_partition(cfg, o.l.empty() ? std::vector<std::size_t>{} : parse_count_list(o.l, "--l"),
                              o.s.empty() ? std::vector<std::size_t>{} : parse_count_list(o.s, "--s"));
  const Loaded loaded = load_with_partition(o.data, cfg, manifest);
  try {
    topo.validate(output_dims(loaded.data));
  } catch (const Error& e) {
    throw Error(ErrorKind::ConfigError, e.what());
  }
  const TimeSeriesDataset data =
      select_segment(loaded.data, o.segment, parse_split(o.split), topo.max_order(), 0);

  manifest.phase("fit");
  const NetLavarxModel model = fit(data, topo, o.fit.settings(seed));
  const auto& d = model.diagnostics;
  if (!d.converged) {
    err << "warning: not converged after " << d.iterations << " iterations (subspace change "
        << io::format_double(d.final_subspace_change) << ")\n";
  }

  manifest.phase("write");
  write_model(o.out, model);
  manifest.add_output(o.out);
  manifest.set("iterations", d.iterations);
  manifest.set("converged", d.converged);
  manifest.set("training_rmse", d.training_rmse);
  manifest.write(manifest_path_for(o.out));
  out << "fitted " << model.node_count() << " nodes on " << data.rows() << " rows in " << d.iterations
      << " iterations; training R2 " << io::format_double(d.training_r2) << ", RMSE "
      << io::format_double(d.training_rmse) << "\n";
  return kOk;
}

inline TimeSeriesDataset model_segment(const NetLavarxModel& model, const std::string& data_path,
                                       const std::string& segment, const std::string& split_text,
                                       Manifest& manifest) {
  const Loaded loaded = load_with_partition(data_path, partition_from_layout(model.layout), manifest);
  const TimeSeriesDataset raw =
      select_segment(loaded.data, segment, parse_split(split_text), model.max_order(), model.max_order());
  return model.standardizer.transform(raw);
}

inline PredictionResult units(const PredictionResult& pred, const NetLavarxModel& model, const std::string& u) {
  if (u == "standardized") return pred;
  if (u == "original") return to_original_units(pred, model.standardizer);
  throw Error(ErrorKind::ConfigError, "--units must be 'standardized' or 'original'");
}

inline int run_predict(const PredictOptions& o, Manifest& manifest) {
  manifest.phase("load");
  const NetLavarxModel model = load_model(o.model, manifest);
  const TimeSeriesDataset data = model_segment(model, o.data, o.segment, o.split, manifest);
  manifest.phase("predict");
  const PredictionResult pred = units(predict_one_step(model, data), model, o.units);

  io::CsvTable table;
  table.header.push_back("row");
  Index cols = 0;
  for (const auto& n : pred.nodes) cols += n.predicted_outputs.cols() + n.predicted_dlvs.cols();
  const Index n_rows = pred.nodes.front().predicted_outputs.rows();
  table.values.resize(n_rows, cols);
  Index at = 0;
  for (std::size_t i = 0; i < pred.nodes.size(); ++i) {
    const auto& layout = model.layout[i];
    for (const auto& name : layout.output_names) table.header.push_back(name + "_pred");
    table.values.middleCols(at, pred.nodes[i].predicted_outputs.cols()) = pred.nodes[i].predicted_outputs;
    at += pred.nodes[i].predicted_outputs.cols();
  }
  for (std::size_t i = 0; i < pred.nodes.size(); ++i) {
    for (Index d = 0; d < pred.nodes[i].predicted_dlvs.cols(); ++d) {
      table.header.push_back(dlv_label(i + 1, static_cast<std::size_t>(d) + 1) + "_pred");
    }
    table.values.middleCols(at, pred.nodes[i].predicted_dlvs.cols()) = pred.nodes[i].predicted_dlvs;
    at += pred.nodes[i].predicted_dlvs.cols();
  }
  for (Index r = 0; r < n_rows; ++r) table.row_labels.push_back(std::to_string(r + pred.first_row));

  manifest.phase("write");
  io::write_file_atomic(o.out, io::format_csv(table));
  manifest.add_output(o.out);
  manifest.write(manifest_path_for(o.out));
  return kOk;
}

inline std::string metrics_csv(const MetricsReport& report, const std::vector<NodeLayout>& layout) {
  std::string out = "scope,node,variable,r2,corr,rmse,mae\n";
  auto row = [&](std::string_view scope, const std::string& node, const std::string& var,
                 const std::optional<double>& r2, const std::optional<double>& corr, double rmse, double mae) {
    out += std::string(scope) + "," + node + "," + var + "," + format_optional(r2) + "," + format_optional(corr) +
           "," + io::format_double(rmse) + "," + io::format_double(mae) + "\n";
  };
  for (const auto& c : report.columns) {
    const auto& l = layout.at(c.node);
    row("variable", l.name, l.output_names.at(static_cast<std::size_t>(c.column)), c.r2, c.corr, c.rmse, c.mae);
  }
  for (std::size_t i = 0; i < report.per_node.size(); ++i) {
    const auto& a = report.per_node[i];
    row("node", layout.at(i).name, "", a.r2, a.corr, a.rmse, a.mae);
  }
  row("pooled", "", "", report.pooled.r2, report.pooled.corr, report.pooled.rmse, report.pooled.mae);
  return out;
}

inline std::string metrics_table(const MetricsReport& report, const std::vector<NodeLayout>& layout) {
  std::ostringstream ss;
  auto cell = [](const std::optional<double>& v) {
    std::ostringstream c;
    if (v) {
      c << std::fixed << std::setprecision(4) << *v;
    } else {
      c << "NA";
    }
    return c.str();
  };
  ss << std::left << std::setw(16) << "node" << std::right << std::setw(10) << "R2" << std::setw(10) << "Corr"
     << std::setw(10) << "RMSE" << std::setw(10) << "MAE" << "\n";
  auto line = [&](const std::string& name, const AggregateMetrics& a) {
    ss << std::left << std::setw(16) << name << std::right << std::setw(10) << cell(a.r2) << std::setw(10)
       << cell(a.corr) << std::setw(10) << cell(a.rmse) << std::setw(10) << cell(a.mae) << "\n";
  };
  for (std::size_t i = 0; i < report.per_node.size(); ++i) line(layout.at(i).name, report.per_node[i]);
  line("pooled", report.pooled);
  return ss.str();
}

inline int run_evaluate(const EvaluateOptions& o, Manifest& manifest, std::ostream& out) {
  manifest.phase("load");
  const NetLavarxModel model = load_model(o.model, manifest);
  const TimeSeriesDataset data = model_segment(model, o.data, o.segment, o.split, manifest);
  manifest.phase("evaluate");
  const MetricsReport report = output_metrics(units(predict_one_step(model, data), model, o.units));
  out << metrics_table(report, model.layout);
  if (!o.out.empty()) {
    manifest.phase("write");
    io::write_file_atomic(o.out, metrics_csv(report, model.layout));
    manifest.add_output(o.out);
    manifest.write(manifest_path_for(o.out));
  }
  return kOk;
}

inline std::string grid_results_csv(const GridSearchResult& r, SelectionMetric metric) {
  std::string out = "cell,l,s,ok,selected,parameters,converged,iterations,r2,corr,rmse,mae,metric,error\n";
  auto join = [](const std::vector<std::size_t>& v) {
    std::string s;
    for (std::size_t k = 0; k < v.size(); ++k) s += (k ? ";" : "") + std::to_string(v[k]);
    return s;
  };
  for (const auto& c : r.cells) {
    out += std::to_string(c.index) + "," + join(c.cell.dlv_counts) + "," + join(c.cell.orders) + "," +
           (c.ok ? "1" : "0") + "," + (c.index == r.cells[r.selected].index ? "1" : "0") + "," +
           std::to_string(c.parameter_count) + "," + (c.converged ? "1" : "0") + "," +
           std::to_string(c.iterations) + ",";
    if (c.ok) {
      out += format_optional(c.validation.r2) + "," + format_optional(c.validation.corr) + "," +
             io::format_double(c.validation.rmse) + "," + io::format_double(c.validation.mae) + "," +
             format_optional(metric_value(c.validation, metric)) + ",";
    } else {
      out += "NA,NA,NA,NA,NA," + io::detail::quote_csv(c.error);
    }
    out += "\n";
  }
  return out;
}

inline int run_gridsearch(const GridOptions& o, Manifest& manifest, std::ostream& out, std::ostream& err) {
  const std::uint64_t seed = o.seed ? *o.seed : generated_seed();
  if (!o.seed) err << "seed: " << seed << "\n";
  manifest.set_seed(seed);
  manifest.phase("load");
  PartitionConfig cfg = load_partition(o.partition, manifest);
  for (auto& n : cfg.nodes) {
    if (!n.dlv_count) n.dlv_count = 1;
    if (!n.order) n.order = 1;
  }
  const NetworkTopology base = topology_from_partition(cfg);
  const Loaded loaded = load_with_partition(o.data, cfg, manifest);
  const std::size_t m = cfg.nodes.size();

  GridSpec grid = GridSpec::defaults(output_dims(loaded.data));
  if (!o.l.empty()) grid.dlv_candidates = parse_candidates(o.l, m, "--l");
  if (!o.s.empty()) grid.order_candidates = parse_candidates(o.s, m, "--s");
  grid.shared = o.shared;
  try {
    grid.metric = parse_selection_metric(o.metric);
  } catch (const Error& e) {
    throw Error(ErrorKind::ConfigError, e.what());
  }

  manifest.phase("search");
  const GridSearchResult result =
      grid_search(loaded.data, base, grid, o.fit.settings(seed), parse_split(o.split), std::max<std::size_t>(1, o.workers));

  manifest.phase("write");
  const std::filesystem::path dir = o.out_dir;
  std::filesystem::create_directories(dir);
  const auto results_path = dir / "results.csv";
  const auto model_path = dir / "selected.nlx";
  const auto test_path = dir / "test_metrics.csv";
  io::write_file_atomic(results_path, grid_results_csv(result, grid.metric));
  write_model(model_path, result.final_model);
  io::write_file_atomic(test_path, metrics_csv(result.test_metrics, result.final_model.layout));
  for (const auto& p : {results_path, model_path, test_path}) manifest.add_output(p);
  const auto& sel = result.cells[result.selected];
  manifest.set("selected_cell", sel.index);
  manifest.set("selected_l", sel.cell.dlv_counts);
  manifest.set("selected_s", sel.cell.orders);
  manifest.write(dir / "manifest.json");

  std::size_t failed = 0;
  for (const auto& c : result.cells) failed += c.ok ? 0 : 1;
  out << "evaluated " << result.cells.size() << " cells (" << failed << " failed); selected cell " << sel.index
      << "\n";
  out << metrics_table(result.test_metrics, result.final_model.layout);
  return kOk;
}

inline int run_graph(const GraphOptions& o, Manifest& manifest, std::ostream& out) {
  const GraphFormat format = parse_graph_format(o.format);
  manifest.phase("load");
  const NetLavarxModel model = load_model(o.model, manifest);
  const TimeSeriesDataset data = model_segment(model, o.data, o.segment, o.split, manifest);
  manifest.phase("graph");
  const DlvCorrelation corr = dlv_cross_correlation(model, data, o.max_lag);
  const auto r2 = per_dlv_r2(model, data);
  const DlvGraph g = build_graph(corr.values, r2, model.topology, o.threshold);
  const std::string text = export_graph(g, format);
  manifest.set("edges", g.edges.size());
  if (o.out.empty()) {
    out << text;
  } else {
    io::write_file_atomic(o.out, text);
    manifest.add_output(o.out);
  }
  const std::string manifest_path = !o.manifest.empty() ? o.manifest : o.out.empty() ? "" : manifest_path_for(o.out).string();
  if (!manifest_path.empty()) manifest.write(manifest_path);
  return kOk;
}

// ---------------------------------------------------------------------------
// Dispatch

/// Runs one subcommand; `args` excludes the program name.
inline int dispatch(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Networked latent dynamic system identification", "netlavarx"};
  app.require_subcommand(1);
  app.set_version_flag("--version", NETLAVARX_VERSION);
  app.option_defaults()->always_capture_default();

  SimulateOptions sim;
  auto* s_sim = app.add_subcommand("simulate", "Generate a random stable network and simulate it");
  s_sim->add_option("--nodes", sim.nodes, "Number of nodes");
  s_sim->add_option("--p", sim.p, "Outputs per node (one value or a comma list)");
  s_sim->add_option("--l", sim.l, "DLVs per node");
  s_sim->add_option("--s", sim.s, "VARX order per node");
  s_sim->add_option("--m", sim.m, "Inputs per node");
  s_sim->add_option("--T,--samples", sim.samples, "Samples to keep after burn-in");
  s_sim->add_option("--seed", sim.seed, "Random seed");
  s_sim->add_option("--radius", sim.radius, "Companion spectral radius");
  s_sim->add_option("--dlv-noise", sim.dlv_noise, "DLV innovation standard deviation");
  s_sim->add_option("--static-noise", sim.static_noise, "Static noise standard deviation");
  s_sim->add_option("--input-std", sim.input_std, "White-noise input standard deviation (0 disables)");
  s_sim->add_flag("--orthogonal", sim.orthogonal, "Orthonormal loadings with orthogonal static directions");
  s_sim->add_option("--out", sim.out, "Trajectory CSV")->required();
  s_sim->add_option("--truth", sim.truth, "Ground-truth sidecar (default <out>.truth.json)");
  s_sim->add_option("--partition-out", sim.partition_out, "Partition config (default <out>.partition.json)");

  auto add_fit_flags = [](CLI::App* sub, FitFlags& f) {
    sub->add_option("--max-iter", f.max_iter, "Maximum alternating sweeps");
    sub->add_option("--tol", f.tol, "Subspace convergence tolerance");
    sub->add_option("--restarts", f.restarts, "Additional random restarts");
    sub->add_option("--rank-tol", f.rank_tol, "Relative rank tolerance (0 = default rule)");
  };

  FitOptions fo;
  auto* s_fit = app.add_subcommand("fit", "Fit a model");
  s_fit->add_option("--data", fo.data, "Wide CSV")->required();
  s_fit->add_option("--partition", fo.partition, "Partition config")->required();
  s_fit->add_option("--l", fo.l, "DLV counts overriding the config (one value or one per node)");
  s_fit->add_option("--s", fo.s, "Orders overriding the config");
  s_fit->add_option("--out", fo.out, "Model file (.nlx)")->required();
  s_fit->add_option("--segment", fo.segment, "all|train|trainval|validation|test");
  s_fit->add_option("--split", fo.split, "train,validation,test fractions");
  s_fit->add_option("--seed", fo.seed, "Random seed for restarts");
  add_fit_flags(s_fit, fo.fit);

  PredictOptions po;
  auto* s_pred = app.add_subcommand("predict", "One-step-ahead predictions");
  s_pred->add_option("--model", po.model, "Model file")->required();
  s_pred->add_option("--data", po.data, "Wide CSV")->required();
  s_pred->add_option("--segment", po.segment, "all|train|trainval|validation|test");
  s_pred->add_option("--split", po.split, "train,validation,test fractions");
  s_pred->add_option("--units", po.units, "original|standardized");
  s_pred->add_option("--out", po.out, "Predictions CSV")->required();

  EvaluateOptions eo;
  auto* s_eval = app.add_subcommand("evaluate", "Prediction metrics");
  s_eval->add_option("--model", eo.model, "Model file")->required();
  s_eval->add_option("--data", eo.data, "Wide CSV")->required();
  s_eval->add_option("--segment", eo.segment, "all|train|trainval|validation|test");
  s_eval->add_option("--split", eo.split, "train,validation,test fractions");
  s_eval->add_option("--units", eo.units, "standardized|original");
  s_eval->add_option("--out", eo.out, "Metrics CSV");

  GridOptions go;
  auto* s_grid = app.add_subcommand("gridsearch", "Select DLV counts and orders on a validation block");
  s_grid->add_option("--data", go.data, "Wide CSV")->required();
  s_grid->add_option("--partition", go.partition, "Partition config")->required();
  s_grid->add_option("--l", go.l, "DLV candidates, e.g. 1-3 or 1,2;1,2,3 per node");
  s_grid->add_option("--s", go.s, "Order candidates");
  s_grid->add_flag("--shared", go.shared, "Same (l, s) for every node");
  s_grid->add_option("--metric", go.metric, "rmse|mae|r2|corr");
  s_grid->add_option("--workers", go.workers, "Parallel workers");
  s_grid->add_option("--split", go.split, "train,validation,test fractions");
  s_grid->add_option("--seed", go.seed, "Random seed for restarts");
  s_grid->add_option("--out-dir", go.out_dir, "Output directory")->required();
  add_fit_flags(s_grid, go.fit);

  GraphOptions gr;
  auto* s_graph = app.add_subcommand("graph", "DLV correlation graph");
  s_graph->add_option("--model", gr.model, "Model file")->required();
  s_graph->add_option("--data", gr.data, "Wide CSV")->required();
  s_graph->add_option("--segment", gr.segment, "all|train|trainval|validation|test");
  s_graph->add_option("--split", gr.split, "train,validation,test fractions");
  s_graph->add_option("--threshold", gr.threshold, "Minimum |r| for an edge");
  s_graph->add_option("--format", gr.format, "dot|json");
  s_graph->add_option("--max-lag", gr.max_lag, "Maximum lag for cross-correlation");
  s_graph->add_option("--out", gr.out, "Output file (stdout if absent)");
  s_graph->add_option("--manifest", gr.manifest, "Manifest path (default <out>.manifest.json)");

  const std::vector<std::string> argv = args;
  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  Manifest manifest(sub->get_name());
  manifest.set_argv(argv);
  manifest.set_options(resolved_options(*sub));
  try {
    if (sub == s_sim) return run_simulate(sim, manifest, err);
    if (sub == s_fit) return run_fit(fo, manifest, out, err);
    if (sub == s_pred) return run_predict(po, manifest);
    if (sub == s_eval) return run_evaluate(eo, manifest, out);
    if (sub == s_grid) return run_gridsearch(go, manifest, out, err);
    return run_graph(gr, manifest, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const io::Json::exception& e) {
    err << "error: malformed document: " << e.what() << "\n";
    return kDataError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  }
}

inline int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  return dispatch(std::vector<std::string>(argv + 1, argv + argc), out, err);
}

}  // namespace netlavarx::cli
