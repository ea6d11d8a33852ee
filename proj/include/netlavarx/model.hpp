#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "netlavarx/data.hpp"
#include "netlavarx/numerics.hpp"

namespace netlavarx {

/// Names carried with a fitted model so new data can be matched to it.
struct NodeLayout {
  std::string name;
  std::vector<std::string> output_names;
  std::vector<std::string> input_names;
};

struct NodeModel {
  Matrix weights;        // R_i, p_i x l_i
  Matrix loadings;       // P_i, p_i x l_i
  Matrix basis_weights;  // W_i, r_i x l_i (coordinates in the left singular basis)
  Matrix coefficients;   // stacked Q^i = [A; B; C], rows follow the regressor column order
  std::vector<Matrix> ar;                  // A^i_h, l_i x l_i
  std::vector<Matrix> input;               // B^i_h, l_i x m_i
  std::vector<std::vector<Matrix>> cross;  // C^{ij}_h, outer index follows topology neighbors
  Vector eigenvalues;                      // spectrum of the final weight-update matrix, descending
};

struct FitDiagnostics {
  std::size_t iterations = 0;
  bool converged = false;
  double final_subspace_change = 0.0;
  std::vector<double> objective_history;  // sum over nodes of kept eigenvalues, per sweep
  std::vector<double> node_objectives;    // final per-node kept eigenvalue sums
  double min_update_eigenvalue = 0.0;     // extremes observed over all sweeps
  double max_update_eigenvalue = 0.0;
  std::size_t restart_used = 0;
  // One-step prediction on the training rows (standardized scale).
  double training_r2 = 0.0;
  double training_corr = 0.0;
  double training_rmse = 0.0;
  double training_mae = 0.0;
};

struct NetLavarxModel {
  NetworkTopology topology;
  std::vector<NodeLayout> layout;
  Standardizer standardizer;
  std::vector<NodeModel> nodes;
  FitDiagnostics diagnostics;
  Index training_samples = 0;  // N

  std::size_t node_count() const { return nodes.size(); }
  std::size_t max_order() const { return topology.max_order(); }
};

}  // namespace netlavarx
