#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "netlavarx.hpp"

namespace nlx_test {

using netlavarx::Index;
using netlavarx::Matrix;
using netlavarx::Vector;

/// Three nodes, p = (8, 8, 6), l = (2, 2, 1), s = 2, fully connected, one input each.
inline netlavarx::SystemSpec reference_spec(double static_noise = 0.05, Index inputs = 1) {
  netlavarx::SystemSpec spec;
  spec.topology = netlavarx::NetworkTopology::fully_connected({2, 2, 1}, {2, 2, 2});
  spec.output_dims = {8, 8, 6};
  spec.input_dims = {inputs, inputs, inputs};
  spec.dlv_noise_std = {1.0, 1.0, 1.0};
  spec.static_noise_std = {static_noise, static_noise, static_noise};
  return spec;
}

inline netlavarx::TimeSeriesDataset simulate_dataset(const netlavarx::SystemSpec& spec, std::uint64_t seed,
                                                     Index samples, netlavarx::GroundTruthSystem* truth = nullptr,
                                                     double radius = 0.9) {
  auto sys = netlavarx::generate_system(spec, seed, radius);
  const bool inputs = std::any_of(spec.input_dims.begin(), spec.input_dims.end(), [](Index m) { return m > 0; });
  netlavarx::InputPolicy policy = inputs ? netlavarx::InputPolicy{netlavarx::WhiteNoiseInput{1.0}}
                                         : netlavarx::InputPolicy{netlavarx::ZeroInput{}};
  auto traj = netlavarx::simulate(sys, samples, policy, seed * 7919 + 1);
  if (truth) *truth = sys;
  return netlavarx::to_dataset(traj);
}

/// Every output and input of every node gathered into a single node.
inline netlavarx::TimeSeriesDataset monolithic(const netlavarx::TimeSeriesDataset& data) {
  netlavarx::NodeSeries all;
  all.name = "all";
  Index p = 0, m = 0;
  for (const auto& n : data.nodes()) {
    p += n.outputs.cols();
    m += n.inputs.cols();
  }
  all.outputs.resize(data.rows(), p);
  all.inputs.resize(data.rows(), m);
  Index ap = 0, am = 0;
  for (const auto& n : data.nodes()) {
    all.outputs.middleCols(ap, n.outputs.cols()) = n.outputs;
    all.inputs.middleCols(am, n.inputs.cols()) = n.inputs;
    ap += n.outputs.cols();
    am += n.inputs.cols();
    all.output_names.insert(all.output_names.end(), n.output_names.begin(), n.output_names.end());
    all.input_names.insert(all.input_names.end(), n.input_names.begin(), n.input_names.end());
  }
  return netlavarx::TimeSeriesDataset({all});
}

inline double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

/// Constraint and scaling checks on a fitted model; `standardized` must be
/// the training data on the fitting scale. Returns the largest violation
/// per check: {W^T W - I, score variance - 1, R^T P - I, eigenvalue range}.
struct ConstraintReport {
  double orthonormality = 0.0;
  double unit_variance = 0.0;
  double biorthogonality = 0.0;
  double eigen_excess = 0.0;

  bool ok() const {
    return orthonormality <= 1e-10 && unit_variance <= 1e-8 && biorthogonality <= 1e-8 && eigen_excess <= 1e-9;
  }
};

inline ConstraintReport check_constraints(const netlavarx::NetLavarxModel& model,
                                          const netlavarx::TimeSeriesDataset& standardized) {
  ConstraintReport rep;
  const Index s = static_cast<Index>(model.max_order());
  const Index n = standardized.rows() - s;
  for (std::size_t i = 0; i < model.node_count(); ++i) {
    const auto& node = model.nodes[i];
    const Index l = node.basis_weights.cols();
    rep.orthonormality = std::max(
        rep.orthonormality, max_abs(node.basis_weights.transpose() * node.basis_weights - Matrix::Identity(l, l)));
    const Matrix v = standardized.node(i).outputs.bottomRows(n) * node.weights;
    const Matrix cov = v.transpose() * v / static_cast<double>(n - 1);
    rep.unit_variance = std::max(rep.unit_variance, (cov.diagonal().array() - 1.0).abs().maxCoeff());
    rep.biorthogonality =
        std::max(rep.biorthogonality, max_abs(node.weights.transpose() * node.loadings - Matrix::Identity(l, l)));
    rep.eigen_excess = std::max(rep.eigen_excess, std::max(0.0, -node.eigenvalues.minCoeff()));
    rep.eigen_excess = std::max(rep.eigen_excess, std::max(0.0, node.eigenvalues.maxCoeff() - 1.0));
  }
  const auto& d = model.diagnostics;
  rep.eigen_excess = std::max(rep.eigen_excess, std::max(0.0, -d.min_update_eigenvalue));
  rep.eigen_excess = std::max(rep.eigen_excess, std::max(0.0, d.max_update_eigenvalue - 1.0));
  return rep;
}

/// Lagged regressors built straight from the sample matrices: for node i,
/// [X_i lags 1..s_i | U_i lags 1..s_i | X_j lags 1..s_i for neighbors j],
/// rows t = s .. T-1. X is whatever per-node signal is supplied.
inline Matrix lagged_regressors(const std::vector<Matrix>& signals, const std::vector<Matrix>& inputs,
                                const netlavarx::NetworkTopology& topo, std::size_t i) {
  const Index s = static_cast<Index>(topo.max_order());
  const Index order = static_cast<Index>(topo.nodes[i].order);
  const Index rows = signals[i].rows() - s;
  std::vector<Matrix> blocks;
  auto lags = [&](const Matrix& x) {
    for (Index h = 1; h <= order; ++h) blocks.push_back(x.middleRows(s - h, rows));
  };
  lags(signals[i]);
  lags(inputs[i]);
  for (std::size_t j : topo.nodes[i].neighbors) lags(signals[j]);
  Index cols = 0;
  for (const auto& b : blocks) cols += b.cols();
  Matrix z(rows, cols);
  Index at = 0;
  for (const auto& b : blocks) {
    z.middleCols(at, b.cols()) = b;
    at += b.cols();
  }
  return z;
}

/// Pseudo-inverse via a complete orthogonal decomposition, kept apart from
/// the library's SVD-based routine.
inline Matrix oracle_pinv(const Matrix& a) {
  if (a.cols() == 0) return Matrix(0, a.rows());
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(a);
  return cod.pseudoInverse();
}

/// Full-rank VARX least squares on the outputs themselves.
inline std::vector<Matrix> full_rank_varx_predictions(const netlavarx::TimeSeriesDataset& standardized,
                                                      const netlavarx::NetworkTopology& topo) {
  std::vector<Matrix> ys, us;
  for (const auto& n : standardized.nodes()) {
    ys.push_back(n.outputs);
    us.push_back(n.inputs);
  }
  const Index s = static_cast<Index>(topo.max_order());
  std::vector<Matrix> out;
  for (std::size_t i = 0; i < topo.node_count(); ++i) {
    const Matrix z = lagged_regressors(ys, us, topo, i);
    const Matrix target = ys[i].bottomRows(ys[i].rows() - s);
    out.push_back(z * (oracle_pinv(z) * target));
  }
  return out;
}

/// The generating system packaged as a fitted model on the raw data scale.
inline netlavarx::NetLavarxModel model_from_truth(const netlavarx::GroundTruthSystem& sys,
                                                  const netlavarx::TimeSeriesDataset& data) {
  netlavarx::NetLavarxModel model;
  model.topology = sys.topology;
  model.standardizer = netlavarx::Standardizer::identity(data);
  for (std::size_t i = 0; i < sys.nodes.size(); ++i) {
    const auto& t = sys.nodes[i];
    const auto& n = data.node(i);
    model.layout.push_back({n.name, n.output_names, n.input_names});
    netlavarx::NodeModel nm;
    nm.loadings = t.loadings;
    nm.weights = netlavarx::oblique_projector(t.loadings, t.static_loadings);
    nm.ar = t.ar;
    nm.input = t.input;
    nm.cross = t.cross;
    model.nodes.push_back(std::move(nm));
  }
  model.diagnostics.converged = true;
  return model;
}

inline std::filesystem::path temp_dir(const std::string& tag) {
  static std::mt19937_64 rng(std::random_device{}());
  auto dir = std::filesystem::temp_directory_path() / ("netlavarx_" + tag + "_" + std::to_string(rng()));
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace nlx_test
