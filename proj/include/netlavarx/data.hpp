#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "netlavarx/error.hpp"
#include "netlavarx/numerics.hpp"

namespace netlavarx {

/// Output/input samples of one node. Rows are time, columns are variables.
struct NodeSeries {
  std::string name;
  Matrix outputs;  // (s + N) x p_i
  Matrix inputs;   // (s + N) x m_i, m_i may be 0
  std::vector<std::string> output_names;
  std::vector<std::string> input_names;

  Index output_dim() const { return outputs.cols(); }
  Index input_dim() const { return inputs.cols(); }
};

class TimeSeriesDataset {
 public:
  TimeSeriesDataset() = default;

  explicit TimeSeriesDataset(std::vector<NodeSeries> nodes) : nodes_(std::move(nodes)) {
    if (nodes_.empty()) throw Error(ErrorKind::InvalidInput, "dataset has no nodes");
    const Index rows = nodes_.front().outputs.rows();
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      auto& node = nodes_[i];
      if (node.name.empty()) node.name = "N" + std::to_string(i + 1);
      if (node.outputs.cols() < 1) {
        throw Error(ErrorKind::InvalidInput, "node '" + node.name + "' has no output variables");
      }
      if (node.inputs.rows() == 0 && node.inputs.cols() == 0) node.inputs.resize(rows, 0);
      if (node.outputs.rows() != rows || node.inputs.rows() != rows) {
        throw Error(ErrorKind::ShapeMismatch, "node '" + node.name + "' row count differs from other nodes");
      }
      require_finite(node.outputs, "dataset outputs");
      require_finite(node.inputs, "dataset inputs");
      fill_names(node.output_names, node.outputs.cols(), node.name + "_y");
      fill_names(node.input_names, node.inputs.cols(), node.name + "_u");
    }
  }

  std::size_t node_count() const { return nodes_.size(); }
  Index rows() const { return nodes_.empty() ? 0 : nodes_.front().outputs.rows(); }
  const NodeSeries& node(std::size_t i) const { return nodes_.at(i); }
  const std::vector<NodeSeries>& nodes() const { return nodes_; }

  /// Contiguous block of rows [begin, begin + count).
  TimeSeriesDataset slice(Index begin, Index count) const {
    if (begin < 0 || count < 0 || begin + count > rows()) {
      throw Error(ErrorKind::InsufficientData, "row slice out of range");
    }
    std::vector<NodeSeries> out = nodes_;
    for (auto& node : out) {
      node.outputs = node.outputs.middleRows(begin, count).eval();
      node.inputs = node.inputs.middleRows(begin, count).eval();
    }
    TimeSeriesDataset result;
    result.nodes_ = std::move(out);
    return result;
  }

 private:
  static void fill_names(std::vector<std::string>& names, Index count, const std::string& prefix) {
    if (names.empty()) {
      for (Index k = 0; k < count; ++k) names.push_back(prefix + std::to_string(k + 1));
    }
    if (static_cast<Index>(names.size()) != count) {
      throw Error(ErrorKind::ShapeMismatch, "variable name count does not match column count for " + prefix);
    }
  }

  std::vector<NodeSeries> nodes_;
};

struct NodeSpec {
  std::size_t dlv_count = 1;          // l_i
  std::size_t order = 1;              // s_i
  std::vector<std::size_t> neighbors; // N_i, ascending, excludes the node itself
};

struct NetworkTopology {
  std::vector<NodeSpec> nodes;

  std::size_t node_count() const { return nodes.size(); }

  std::size_t max_order() const {
    std::size_t s = 0;
    for (const auto& n : nodes) s = std::max(s, n.order);
    return s;
  }

  std::size_t total_dlvs() const {
    std::size_t total = 0;
    for (const auto& n : nodes) total += n.dlv_count;
    return total;
  }

  /// Every node receives lagged DLVs from every other node.
  static NetworkTopology fully_connected(const std::vector<std::size_t>& dlv_counts,
                                         const std::vector<std::size_t>& orders) {
    if (dlv_counts.size() != orders.size()) {
      throw Error(ErrorKind::InvalidInput, "dlv count and order lists differ in length");
    }
    NetworkTopology topo;
    const std::size_t m = dlv_counts.size();
    for (std::size_t i = 0; i < m; ++i) {
      NodeSpec spec{dlv_counts[i], orders[i], {}};
      for (std::size_t j = 0; j < m; ++j) {
        if (j != i) spec.neighbors.push_back(j);
      }
      topo.nodes.push_back(std::move(spec));
    }
    return topo;
  }

  /// Checks structural invariants; output_dims (p_i) are checked when given.
  void validate(const std::vector<Index>& output_dims = {}) const {
    if (nodes.empty()) throw Error(ErrorKind::InvalidInput, "topology has no nodes");
    if (!output_dims.empty() && output_dims.size() != nodes.size()) {
      throw Error(ErrorKind::ShapeMismatch, "topology node count does not match dataset");
    }
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const auto& n = nodes[i];
      const std::string id = "node " + std::to_string(i + 1);
      if (n.dlv_count < 1) throw Error(ErrorKind::InvalidInput, id + ": DLV count must be >= 1");
      if (!output_dims.empty() && static_cast<Index>(n.dlv_count) > output_dims[i]) {
        throw Error(ErrorKind::InvalidInput, id + ": DLV count exceeds output dimension");
      }
      if (n.order < 1) throw Error(ErrorKind::InvalidInput, id + ": order must be >= 1");
      for (std::size_t k = 0; k < n.neighbors.size(); ++k) {
        const std::size_t j = n.neighbors[k];
        if (j == i) throw Error(ErrorKind::InvalidInput, id + " lists itself as a neighbor");
        if (j >= nodes.size()) throw Error(ErrorKind::InvalidInput, id + ": neighbor index out of range");
        if (k > 0 && n.neighbors[k - 1] >= j) {
          throw Error(ErrorKind::InvalidInput, id + ": neighbors must be strictly ascending");
        }
      }
    }
  }
};

inline std::vector<Index> output_dims(const TimeSeriesDataset& data) {
  std::vector<Index> dims;
  for (const auto& n : data.nodes()) dims.push_back(n.output_dim());
  return dims;
}

// ---------------------------------------------------------------------------
// Standardization

struct ColumnScaling {
  Vector mean;
  Vector std;  // sample standard deviation (divisor n - 1)

  Matrix forward(const Matrix& x) const {
    if (x.cols() != mean.size()) throw Error(ErrorKind::ShapeMismatch, "column count differs from scaler");
    return ((x.rowwise() - mean.transpose()).array().rowwise() / std.transpose().array()).matrix();
  }
  Matrix inverse(const Matrix& z) const {
    if (z.cols() != mean.size()) throw Error(ErrorKind::ShapeMismatch, "column count differs from scaler");
    return ((z.array().rowwise() * std.transpose().array()).matrix().rowwise() + mean.transpose());
  }
};

struct NodeScaling {
  ColumnScaling outputs;
  ColumnScaling inputs;
};

class Standardizer {
 public:
  Standardizer() = default;
  explicit Standardizer(std::vector<NodeScaling> nodes) : nodes_(std::move(nodes)) {}

  /// Statistics of every column; throws ConstantColumn for std <= 1e-12.
  static Standardizer fit(const TimeSeriesDataset& data) {
    if (data.rows() < 2) throw Error(ErrorKind::InsufficientData, "standardization needs at least 2 rows");
    std::vector<NodeScaling> nodes;
    for (const auto& node : data.nodes()) {
      nodes.push_back({column_stats(node.outputs, node.output_names), column_stats(node.inputs, node.input_names)});
    }
    return Standardizer(std::move(nodes));
  }

  /// Identity scaling (mean 0, std 1) matching the dataset shape.
  static Standardizer identity(const TimeSeriesDataset& data) {
    std::vector<NodeScaling> nodes;
    for (const auto& node : data.nodes()) {
      nodes.push_back({{Vector::Zero(node.output_dim()), Vector::Ones(node.output_dim())},
                       {Vector::Zero(node.input_dim()), Vector::Ones(node.input_dim())}});
    }
    return Standardizer(std::move(nodes));
  }

  TimeSeriesDataset transform(const TimeSeriesDataset& data) const {
    check_shape(data);
    std::vector<NodeSeries> out = data.nodes();
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i].outputs = nodes_[i].outputs.forward(out[i].outputs);
      out[i].inputs = nodes_[i].inputs.forward(out[i].inputs);
    }
    return TimeSeriesDataset(std::move(out));
  }

  TimeSeriesDataset inverse(const TimeSeriesDataset& data) const {
    check_shape(data);
    std::vector<NodeSeries> out = data.nodes();
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i].outputs = nodes_[i].outputs.inverse(out[i].outputs);
      out[i].inputs = nodes_[i].inputs.inverse(out[i].inputs);
    }
    return TimeSeriesDataset(std::move(out));
  }

  Matrix inverse_outputs(std::size_t node, const Matrix& z) const { return nodes_.at(node).outputs.inverse(z); }

  std::size_t node_count() const { return nodes_.size(); }
  const NodeScaling& node(std::size_t i) const { return nodes_.at(i); }
  const std::vector<NodeScaling>& nodes() const { return nodes_; }

 private:
  static ColumnScaling column_stats(const Matrix& x, const std::vector<std::string>& names) {
    ColumnScaling s;
    s.mean.resize(x.cols());
    s.std.resize(x.cols());
    for (Index c = 0; c < x.cols(); ++c) {
      s.mean(c) = x.col(c).mean();
      s.std(c) = std::sqrt(sample_variance(x.col(c)));
      if (!(s.std(c) > 1e-12)) {
        throw Error(ErrorKind::ConstantColumn, "column '" + names.at(static_cast<std::size_t>(c)) + "' is constant");
      }
    }
    return s;
  }

  void check_shape(const TimeSeriesDataset& data) const {
    if (data.node_count() != nodes_.size()) {
      throw Error(ErrorKind::ShapeMismatch, "dataset node count differs from standardizer");
    }
  }

  std::vector<NodeScaling> nodes_;
};

inline std::pair<TimeSeriesDataset, Standardizer> standardize(const TimeSeriesDataset& data) {
  Standardizer scaler = Standardizer::fit(data);
  return {scaler.transform(data), std::move(scaler)};
}

// ---------------------------------------------------------------------------
// Time-shifted and augmented matrices

/// Blocks Y^i_j, U^i_j (and V^i_j once DLVs are set) for lags j = 0..s,
/// each with N rows. Row k of block j holds sample j + k (0-based).
struct ShiftedMatrices {
  std::size_t max_order = 0;  // s
  Index samples = 0;          // N
  std::vector<std::vector<Matrix>> outputs;
  std::vector<std::vector<Matrix>> inputs;
  std::vector<std::vector<Matrix>> dlvs;  // empty per node until set

  bool has_dlvs(std::size_t node) const { return !dlvs.at(node).empty(); }

  /// V^i_j = Y^i_j R_i for all lags.
  void set_dlvs(std::size_t node, const Matrix& weights) {
    auto& blocks = dlvs.at(node);
    blocks.clear();
    for (const auto& y : outputs.at(node)) blocks.push_back(y * weights);
  }
};

namespace detail {

inline ShiftedMatrices shift_blocks(const TimeSeriesDataset& data, std::size_t s) {
  ShiftedMatrices out;
  out.max_order = s;
  out.samples = data.rows() - static_cast<Index>(s);
  const std::size_t m = data.node_count();
  out.outputs.resize(m);
  out.inputs.resize(m);
  out.dlvs.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    const auto& node = data.node(i);
    for (std::size_t j = 0; j <= s; ++j) {
      out.outputs[i].push_back(node.outputs.middleRows(static_cast<Index>(j), out.samples));
      out.inputs[i].push_back(node.inputs.middleRows(static_cast<Index>(j), out.samples));
    }
  }
  return out;
}

}  // namespace detail

inline ShiftedMatrices build_shifted(const TimeSeriesDataset& data, const NetworkTopology& topology) {
  const std::size_t s = topology.max_order();
  if (s < 1) throw Error(ErrorKind::InsufficientData, "lag order must be at least 1");
  if (topology.node_count() != data.node_count()) {
    throw Error(ErrorKind::ShapeMismatch, "topology node count does not match dataset");
  }
  if (data.rows() < static_cast<Index>(s) + 2) {
    throw Error(ErrorKind::InsufficientData, "need at least s + 2 = " + std::to_string(s + 2) + " rows, have " +
                                                 std::to_string(data.rows()));
  }
  return detail::shift_blocks(data, s);
}

/// Lagged regressor blocks for node i. Every group uses node i's own order.
struct AugmentedBlocks {
  Matrix own_dlv;    // [V^i_{s-1} ... V^i_{s-s_i}]
  Matrix own_input;  // [U^i_{s-1} ... U^i_{s-s_i}]
  std::vector<std::pair<std::size_t, Matrix>> neighbor_dlv;  // ascending neighbor index
};

namespace detail {

inline Matrix stack_lags(const std::vector<Matrix>& blocks, std::size_t s, std::size_t order) {
  const Index rows = blocks.front().rows();
  const Index width = blocks.front().cols();
  Matrix out(rows, width * static_cast<Index>(order));
  for (std::size_t h = 1; h <= order; ++h) {
    out.middleCols(static_cast<Index>(h - 1) * width, width) = blocks[s - h];
  }
  return out;
}

}  // namespace detail

inline AugmentedBlocks build_augmented(const ShiftedMatrices& shifted, const NetworkTopology& topology,
                                       std::size_t node) {
  const auto& spec = topology.nodes.at(node);
  if (spec.order > shifted.max_order) {
    throw Error(ErrorKind::ShapeMismatch, "node order exceeds shifted lag depth");
  }
  if (!shifted.has_dlvs(node)) {
    throw Error(ErrorKind::DependencyNotReady, "DLVs of node " + std::to_string(node + 1) + " are not available");
  }
  AugmentedBlocks out;
  const std::size_t s = shifted.max_order;
  out.own_dlv = detail::stack_lags(shifted.dlvs[node], s, spec.order);
  out.own_input = detail::stack_lags(shifted.inputs[node], s, spec.order);
  std::vector<std::size_t> neighbors = spec.neighbors;
  std::sort(neighbors.begin(), neighbors.end());
  for (std::size_t j : neighbors) {
    if (!shifted.has_dlvs(j)) {
      throw Error(ErrorKind::DependencyNotReady,
                  "DLVs of neighbor node " + std::to_string(j + 1) + " are not available");
    }
    out.neighbor_dlv.emplace_back(j, detail::stack_lags(shifted.dlvs[j], s, spec.order));
  }
  return out;
}

}  // namespace netlavarx
