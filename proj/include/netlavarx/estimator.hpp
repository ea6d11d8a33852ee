#pragma once

#include <cmath>
#include <limits>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "netlavarx/data.hpp"
#include "netlavarx/error.hpp"
#include "netlavarx/evaluation.hpp"
#include "netlavarx/model.hpp"
#include "netlavarx/numerics.hpp"

namespace netlavarx {

struct FitSettings {
  std::size_t max_iter = 300;
  double tol = 1e-8;
  double rank_tolerance = 0.0;  // <= 0 selects the default numerical-rank rule
  std::size_t random_restarts = 0;
  std::uint64_t seed = 0;       // only used by random restarts

  void validate() const {
    if (max_iter < 1) throw Error(ErrorKind::InvalidInput, "max_iter must be >= 1");
    if (!(tol > 0.0)) throw Error(ErrorKind::InvalidInput, "tol must be positive");
  }
};

/// Regressor matrix Z^i = [own DLV lags | own input lags | neighbor DLV lags],
/// neighbors in ascending index order, lags ascending within each group.
inline Matrix assemble_z(const AugmentedBlocks& blocks) {
  const Index rows = blocks.own_dlv.rows();
  Index cols = blocks.own_dlv.cols() + blocks.own_input.cols();
  if (blocks.own_input.rows() != rows) throw Error(ErrorKind::ShapeMismatch, "input lag block row count differs");
  for (const auto& [j, m] : blocks.neighbor_dlv) {
    if (m.rows() != rows) {
      throw Error(ErrorKind::ShapeMismatch, "neighbor " + std::to_string(j + 1) + " lag block row count differs");
    }
    cols += m.cols();
  }
  Matrix z(rows, cols);
  Index at = 0;
  auto put = [&](const Matrix& m) {
    z.middleCols(at, m.cols()) = m;
    at += m.cols();
  };
  put(blocks.own_dlv);
  put(blocks.own_input);
  for (const auto& nb : blocks.neighbor_dlv) put(nb.second);
  return z;
}

struct WeightUpdate {
  Matrix weights;      // W^i, r_i x l_i, orthonormal columns
  Vector eigenvalues;  // all r_i eigenvalues, descending
  double objective = 0.0;  // sum of the l_i kept eigenvalues
};

/// Leading eigenvectors of U^T Z Z^+ U. Z Z^+ is formed as Q Q^T from the
/// left singular vectors of Z, so the matrix is symmetric PSD by construction.
inline WeightUpdate update_node_weights(const Matrix& left_basis, const Matrix& z, std::size_t dlv_count,
                                        double rank_tolerance = 0.0) {
  const Index r = left_basis.cols();
  const Index ell = static_cast<Index>(dlv_count);
  if (ell > r) {
    throw Error(ErrorKind::InsufficientRank, "requested " + std::to_string(ell) + " DLVs but the output block has rank " +
                                                 std::to_string(r));
  }
  if (z.rows() != left_basis.rows()) throw Error(ErrorKind::ShapeMismatch, "Z and U row counts differ");
  Matrix update = Matrix::Zero(r, r);
  if (z.cols() > 0) {
    const Svd zsvd = economy_svd(z, rank_tolerance);
    if (zsvd.rank > 0) {
      const Matrix b = zsvd.u.transpose() * left_basis;
      update.noalias() = b.transpose() * b;
    }
  }
  SymmetricEigen eig = sym_eig_desc(update);
  WeightUpdate out;
  out.weights = eig.vectors.leftCols(ell);
  out.objective = eig.values.head(ell).sum();
  out.eigenvalues = std::move(eig.values);
  return out;
}

/// max_i || W_i W_i^T - W'_i W'_i^T ||_F
inline double subspace_change(const std::vector<Matrix>& previous, const std::vector<Matrix>& next) {
  if (previous.size() != next.size()) throw Error(ErrorKind::ShapeMismatch, "weight lists differ in length");
  double change = 0.0;
  for (std::size_t i = 0; i < previous.size(); ++i) {
    if (previous[i].rows() != next[i].rows() || previous[i].cols() != next[i].cols()) {
      throw Error(ErrorKind::ShapeMismatch, "weight shapes differ for node " + std::to_string(i + 1));
    }
    const Matrix diff = next[i] * next[i].transpose() - previous[i] * previous[i].transpose();
    change = std::max(change, diff.norm());
  }
  return change;
}

inline bool check_convergence(const std::vector<Matrix>& previous, const std::vector<Matrix>& next, double tol) {
  return subspace_change(previous, next) < tol;
}

/// Minimum-norm least-squares coefficients Q = Z^+ V.
inline Matrix solve_varx_coefficients(const Matrix& z, const Matrix& targets, double rank_tolerance = 0.0) {
  if (z.rows() != targets.rows()) throw Error(ErrorKind::ShapeMismatch, "Z and target row counts differ");
  return pinv(z, rank_tolerance) * targets;
}

struct CoefficientBlocks {
  std::vector<Matrix> ar;
  std::vector<Matrix> input;
  std::vector<std::vector<Matrix>> cross;
};

/// Splits stacked coefficients into per-lag blocks acting on column vectors,
/// i.e. v_hat = sum_h A_h v_{k-h} + B_h u_{k-h} + sum_j C_h v^j_{k-h}.
inline CoefficientBlocks unstack_coefficients(const Matrix& q, const NetworkTopology& topology, std::size_t node,
                                              Index input_dim) {
  const auto& spec = topology.nodes.at(node);
  const Index ell = static_cast<Index>(spec.dlv_count);
  const Index order = static_cast<Index>(spec.order);
  Index expected = order * (ell + input_dim);
  for (std::size_t j : spec.neighbors) expected += order * static_cast<Index>(topology.nodes[j].dlv_count);
  if (q.rows() != expected || q.cols() != ell) {
    throw Error(ErrorKind::ShapeMismatch, "coefficient matrix shape does not match the regressor layout");
  }
  CoefficientBlocks out;
  Index at = 0;
  for (Index h = 0; h < order; ++h, at += ell) out.ar.push_back(q.middleRows(at, ell).transpose());
  for (Index h = 0; h < order; ++h, at += input_dim) out.input.push_back(q.middleRows(at, input_dim).transpose());
  for (std::size_t j : spec.neighbors) {
    const Index lj = static_cast<Index>(topology.nodes[j].dlv_count);
    std::vector<Matrix> lags;
    for (Index h = 0; h < order; ++h, at += lj) lags.push_back(q.middleRows(at, lj).transpose());
    out.cross.push_back(std::move(lags));
  }
  return out;
}

namespace detail {

struct NodeBasis {
  Matrix left;       // U^i_s
  Vector singular;   // D^i_s
  Matrix right;      // V^i_s
};

struct SweepResult {
  std::vector<Matrix> weights;
  std::vector<Vector> eigenvalues;
  std::vector<double> node_objectives;
  std::vector<double> history;
  std::size_t iterations = 0;
  bool converged = false;
  double change = 0.0;
  double min_eig = 0.0;
  double max_eig = 0.0;
  double total_objective() const {
    double t = 0.0;
    for (double v : node_objectives) t += v;
    return t;
  }
};

// Iteration-time weights, scaled so that V^i_s = U^i_s W^i exactly.
inline Matrix iteration_weights(const NodeBasis& b, const Matrix& w) {
  return b.right * b.singular.cwiseInverse().asDiagonal() * w;
}

inline SweepResult alternate(ShiftedMatrices& shifted, const NetworkTopology& topo,
                             const std::vector<NodeBasis>& bases, std::vector<Matrix> weights,
                             const FitSettings& settings) {
  const std::size_t m = topo.node_count();
  SweepResult res;
  res.eigenvalues.resize(m);
  res.node_objectives.assign(m, 0.0);
  res.min_eig = std::numeric_limits<double>::infinity();
  res.max_eig = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < m; ++i) shifted.set_dlvs(i, iteration_weights(bases[i], weights[i]));
  for (std::size_t iter = 1; iter <= settings.max_iter; ++iter) {
    const std::vector<Matrix> previous = weights;
    for (std::size_t i = 0; i < m; ++i) {
      // Node i's own lags still reflect its pre-update weights here.
      const Matrix z = assemble_z(build_augmented(shifted, topo, i));
      WeightUpdate upd = update_node_weights(bases[i].left, z, topo.nodes[i].dlv_count, settings.rank_tolerance);
      res.min_eig = std::min(res.min_eig, upd.eigenvalues.minCoeff());
      res.max_eig = std::max(res.max_eig, upd.eigenvalues.maxCoeff());
      res.node_objectives[i] = upd.objective;
      res.eigenvalues[i] = std::move(upd.eigenvalues);
      weights[i] = std::move(upd.weights);
      shifted.set_dlvs(i, iteration_weights(bases[i], weights[i]));
    }
    res.history.push_back(res.total_objective());
    res.iterations = iter;
    res.change = subspace_change(previous, weights);
    if (res.change < settings.tol) {
      res.converged = true;
      break;
    }
  }
  res.weights = std::move(weights);
  return res;
}

}  // namespace detail

/// Fits on data that is already standardized; `scaler` is stored with the
/// model so that new data can be mapped onto the fitting scale.
inline NetLavarxModel fit_standardized(const TimeSeriesDataset& data, const NetworkTopology& topology,
                                       const FitSettings& settings, Standardizer scaler) {
  settings.validate();
  topology.validate(output_dims(data));
  ShiftedMatrices shifted = build_shifted(data, topology);
  const std::size_t m = topology.node_count();
  const std::size_t s = shifted.max_order;
  const Index n = shifted.samples;

  std::vector<detail::NodeBasis> bases;
  for (std::size_t i = 0; i < m; ++i) {
    Svd svd = economy_svd(shifted.outputs[i][s], settings.rank_tolerance);
    if (svd.rank < static_cast<Index>(topology.nodes[i].dlv_count)) {
      throw Error(ErrorKind::InsufficientRank, "node '" + data.node(i).name + "' output block has rank " +
                                                   std::to_string(svd.rank) + " < " +
                                                   std::to_string(topology.nodes[i].dlv_count) + " DLVs");
    }
    bases.push_back({std::move(svd.u), std::move(svd.singular_values), std::move(svd.v)});
  }

  std::vector<Matrix> initial;
  for (std::size_t i = 0; i < m; ++i) {
    initial.push_back(Matrix::Identity(bases[i].left.cols(), static_cast<Index>(topology.nodes[i].dlv_count)));
  }
  detail::SweepResult best = detail::alternate(shifted, topology, bases, initial, settings);
  std::size_t best_restart = 0;

  std::mt19937_64 rng(settings.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t r = 1; r <= settings.random_restarts; ++r) {
    std::vector<Matrix> start;
    for (std::size_t i = 0; i < m; ++i) {
      Matrix g(bases[i].left.cols(), static_cast<Index>(topology.nodes[i].dlv_count));
      for (Index c = 0; c < g.cols(); ++c) {
        for (Index k = 0; k < g.rows(); ++k) g(k, c) = normal(rng);
      }
      start.push_back(Eigen::HouseholderQR<Matrix>(g).householderQ() * Matrix::Identity(g.rows(), g.cols()));
    }
    detail::SweepResult candidate = detail::alternate(shifted, topology, bases, start, settings);
    if (candidate.total_objective() > best.total_objective()) {
      best = std::move(candidate);
      best_restart = r;
    }
  }

  NetLavarxModel model;
  model.topology = topology;
  model.standardizer = std::move(scaler);
  model.training_samples = n;
  for (const auto& node : data.nodes()) model.layout.push_back({node.name, node.output_names, node.input_names});

  const double root = std::sqrt(static_cast<double>(n - 1));
  for (std::size_t i = 0; i < m; ++i) {
    NodeModel nm;
    const auto& b = bases[i];
    nm.basis_weights = best.weights[i];
    nm.weights = root * (b.right * b.singular.cwiseInverse().asDiagonal() * best.weights[i]);
    nm.loadings = (b.right * b.singular.asDiagonal() * best.weights[i]) / root;
    nm.eigenvalues = best.eigenvalues[i];
    shifted.set_dlvs(i, nm.weights);
    model.nodes.push_back(std::move(nm));
  }
  for (std::size_t i = 0; i < m; ++i) {
    const Matrix z = assemble_z(build_augmented(shifted, topology, i));
    auto& nm = model.nodes[i];
    nm.coefficients = solve_varx_coefficients(z, shifted.dlvs[i][s], settings.rank_tolerance);
    CoefficientBlocks blocks = unstack_coefficients(nm.coefficients, topology, i, data.node(i).input_dim());
    nm.ar = std::move(blocks.ar);
    nm.input = std::move(blocks.input);
    nm.cross = std::move(blocks.cross);
  }

  auto& diag = model.diagnostics;
  diag.iterations = best.iterations;
  diag.converged = best.converged;
  diag.final_subspace_change = best.change;
  diag.objective_history = best.history;
  diag.node_objectives = best.node_objectives;
  diag.min_update_eigenvalue = best.min_eig;
  diag.max_update_eigenvalue = best.max_eig;
  diag.restart_used = best_restart;

  const MetricsReport train = output_metrics(predict_one_step(model, data));
  diag.training_r2 = train.pooled.r2.value_or(std::nan(""));
  diag.training_corr = train.pooled.corr.value_or(std::nan(""));
  diag.training_rmse = train.pooled.rmse;
  diag.training_mae = train.pooled.mae;
  return model;
}

/// Standardizes on the given (training) rows, then fits.
inline NetLavarxModel fit(const TimeSeriesDataset& data, const NetworkTopology& topology,
                          const FitSettings& settings = {}) {
  auto [scaled, scaler] = standardize(data);
  return fit_standardized(scaled, topology, settings, std::move(scaler));
}

/// Single-node latent VARX fit, routed through the network fit with one node
/// and no neighbors.
inline NetLavarxModel fit_single_node(const NodeSeries& series, std::size_t dlv_count, std::size_t order,
                                      const FitSettings& settings = {}) {
  NetworkTopology topo;
  topo.nodes.push_back({dlv_count, order, {}});
  return fit(TimeSeriesDataset({series}), topo, settings);
}

}  // namespace netlavarx
