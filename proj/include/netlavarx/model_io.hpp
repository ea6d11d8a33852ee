#pragma once

#include <filesystem>
#include <string>

#include "netlavarx/io.hpp"
#include "netlavarx/model.hpp"
#include "netlavarx/simulator.hpp"

namespace netlavarx {

inline constexpr const char* kModelFormat = "netlavarx-model";
inline constexpr int kModelVersion = 1;

namespace detail {

inline io::Json optional_number(double v) { return std::isfinite(v) ? io::Json(v) : io::Json(nullptr); }
inline double number_or_nan(const io::Json& j) { return j.is_null() ? std::nan("") : j.get<double>(); }

}  // namespace detail

inline io::Json model_to_json(const NetLavarxModel& model) {
  io::Json nodes = io::Json::array();
  for (std::size_t i = 0; i < model.node_count(); ++i) {
    const auto& n = model.nodes[i];
    const auto& layout = model.layout.at(i);
    const auto& scale = model.standardizer.node(i);
    io::Json cross = io::Json::array();
    for (const auto& lags : n.cross) cross.push_back(io::matrices_to_json(lags));
    nodes.push_back({
        {"name", layout.name},
        {"outputs", layout.output_names},
        {"inputs", layout.input_names},
        {"scaling",
         {{"output_mean", io::vector_to_json(scale.outputs.mean)},
          {"output_std", io::vector_to_json(scale.outputs.std)},
          {"input_mean", io::vector_to_json(scale.inputs.mean)},
          {"input_std", io::vector_to_json(scale.inputs.std)}}},
        {"R", io::matrix_to_json(n.weights)},
        {"P", io::matrix_to_json(n.loadings)},
        {"W", io::matrix_to_json(n.basis_weights)},
        {"Q", io::matrix_to_json(n.coefficients)},
        {"A", io::matrices_to_json(n.ar)},
        {"B", io::matrices_to_json(n.input)},
        {"C", std::move(cross)},
        {"eigenvalues", io::vector_to_json(n.eigenvalues)},
    });
  }
  const auto& d = model.diagnostics;
  io::Json diagnostics = {
      {"iterations", d.iterations},
      {"converged", d.converged},
      {"final_subspace_change", d.final_subspace_change},
      {"objective_history", d.objective_history},
      {"node_objectives", d.node_objectives},
      {"min_update_eigenvalue", d.min_update_eigenvalue},
      {"max_update_eigenvalue", d.max_update_eigenvalue},
      {"restart_used", d.restart_used},
      {"training_r2", detail::optional_number(d.training_r2)},
      {"training_corr", detail::optional_number(d.training_corr)},
      {"training_rmse", d.training_rmse},
      {"training_mae", d.training_mae},
  };
  return {{"format", kModelFormat},
          {"version", kModelVersion},
          {"training_samples", model.training_samples},
          {"topology", topology_to_json(model.topology)},
          {"nodes", std::move(nodes)},
          {"diagnostics", std::move(diagnostics)}};
}

inline NetLavarxModel model_from_json(const io::Json& j) {
  if (j.value("format", std::string()) != kModelFormat) {
    throw Error(ErrorKind::InvalidFormat, "not a netlavarx model document");
  }
  NetLavarxModel model;
  model.training_samples = j.at("training_samples").get<Index>();
  model.topology = topology_from_json(j.at("topology"));
  std::vector<NodeScaling> scaling;
  for (const auto& e : j.at("nodes")) {
    model.layout.push_back({e.at("name").get<std::string>(), e.at("outputs").get<std::vector<std::string>>(),
                            e.at("inputs").get<std::vector<std::string>>()});
    const auto& sc = e.at("scaling");
    scaling.push_back({{io::vector_from_json(sc.at("output_mean")), io::vector_from_json(sc.at("output_std"))},
                       {io::vector_from_json(sc.at("input_mean")), io::vector_from_json(sc.at("input_std"))}});
    NodeModel n;
    n.weights = io::matrix_from_json(e.at("R"));
    n.loadings = io::matrix_from_json(e.at("P"));
    n.basis_weights = io::matrix_from_json(e.at("W"));
    n.coefficients = io::matrix_from_json(e.at("Q"));
    n.ar = io::matrices_from_json(e.at("A"));
    n.input = io::matrices_from_json(e.at("B"));
    for (const auto& lags : e.at("C")) n.cross.push_back(io::matrices_from_json(lags));
    n.eigenvalues = io::vector_from_json(e.at("eigenvalues"));
    model.nodes.push_back(std::move(n));
  }
  model.standardizer = Standardizer(std::move(scaling));
  const auto& d = j.at("diagnostics");
  auto& diag = model.diagnostics;
  diag.iterations = d.at("iterations").get<std::size_t>();
  diag.converged = d.at("converged").get<bool>();
  diag.final_subspace_change = d.at("final_subspace_change").get<double>();
  diag.objective_history = d.at("objective_history").get<std::vector<double>>();
  diag.node_objectives = d.at("node_objectives").get<std::vector<double>>();
  diag.min_update_eigenvalue = d.at("min_update_eigenvalue").get<double>();
  diag.max_update_eigenvalue = d.at("max_update_eigenvalue").get<double>();
  diag.restart_used = d.at("restart_used").get<std::size_t>();
  diag.training_r2 = detail::number_or_nan(d.at("training_r2"));
  diag.training_corr = detail::number_or_nan(d.at("training_corr"));
  diag.training_rmse = d.at("training_rmse").get<double>();
  diag.training_mae = d.at("training_mae").get<double>();
  if (model.nodes.size() != model.topology.node_count()) {
    throw Error(ErrorKind::InvalidFormat, "model node list does not match topology");
  }
  return model;
}

inline std::string format_model(const NetLavarxModel& model) { return model_to_json(model).dump(1) + "\n"; }

inline NetLavarxModel parse_model(std::string_view text) {
  try {
    return model_from_json(io::Json::parse(text));
  } catch (const io::Json::exception& e) {
    throw Error(ErrorKind::InvalidFormat, std::string("malformed model document: ") + e.what());
  }
}

inline void write_model(const std::filesystem::path& path, const NetLavarxModel& model) {
  io::write_file_atomic(path, format_model(model));
}

inline NetLavarxModel read_model(const std::filesystem::path& path) { return parse_model(io::read_file(path)); }

}  // namespace netlavarx
