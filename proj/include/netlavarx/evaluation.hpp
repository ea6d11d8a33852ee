#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "netlavarx/data.hpp"
#include "netlavarx/error.hpp"
#include "netlavarx/model.hpp"
#include "netlavarx/numerics.hpp"

namespace netlavarx {

struct NodePrediction {
  Matrix predicted_dlvs;     // N_eval - s rows, l_i columns
  Matrix actual_dlvs;        // projected measurements R_i^T y
  Matrix predicted_outputs;  // N_eval - s rows, p_i columns
  Matrix actual_outputs;
};

struct PredictionResult {
  std::vector<NodePrediction> nodes;
  Index first_row = 0;        // row of the evaluation segment the first prediction refers to
  bool standardized = true;   // false once converted to original units
};

/// DLV scores Y^i R_i for every node and row.
inline std::vector<Matrix> dlv_scores(const NetLavarxModel& model, const TimeSeriesDataset& data) {
  if (data.node_count() != model.node_count()) {
    throw Error(ErrorKind::ShapeMismatch, "dataset node count differs from model");
  }
  std::vector<Matrix> scores;
  for (std::size_t i = 0; i < model.node_count(); ++i) {
    if (data.node(i).output_dim() != model.nodes[i].weights.rows()) {
      throw Error(ErrorKind::ShapeMismatch, "output dimension of node " + std::to_string(i + 1) + " differs from model");
    }
    scores.push_back(data.node(i).outputs * model.nodes[i].weights);
  }
  return scores;
}

/// One-step-ahead predictions; DLV histories come from measured outputs.
/// The first s rows of the segment only seed the lags.
inline PredictionResult predict_one_step(const NetLavarxModel& model, const TimeSeriesDataset& data) {
  const Index s = static_cast<Index>(model.max_order());
  if (data.rows() < s + 1) {
    throw Error(ErrorKind::InsufficientData, "evaluation segment needs at least s + 1 = " + std::to_string(s + 1) +
                                                 " rows");
  }
  const std::vector<Matrix> scores = dlv_scores(model, data);
  const Index n = data.rows() - s;
  PredictionResult result;
  result.first_row = s;
  for (std::size_t i = 0; i < model.node_count(); ++i) {
    const auto& spec = model.topology.nodes[i];
    const auto& node = model.nodes[i];
    const Matrix& inputs = data.node(i).inputs;
    if (inputs.cols() != (node.input.empty() ? 0 : node.input.front().cols())) {
      throw Error(ErrorKind::ShapeMismatch, "input dimension of node " + std::to_string(i + 1) + " differs from model");
    }
    Matrix vhat = Matrix::Zero(n, static_cast<Index>(spec.dlv_count));
    for (std::size_t h = 1; h <= spec.order; ++h) {
      const Index start = s - static_cast<Index>(h);
      vhat.noalias() += scores[i].middleRows(start, n) * node.ar[h - 1].transpose();
      if (inputs.cols() > 0) vhat.noalias() += inputs.middleRows(start, n) * node.input[h - 1].transpose();
      for (std::size_t k = 0; k < spec.neighbors.size(); ++k) {
        vhat.noalias() += scores[spec.neighbors[k]].middleRows(start, n) * node.cross[k][h - 1].transpose();
      }
    }
    NodePrediction pred;
    pred.predicted_outputs = vhat * node.loadings.transpose();
    pred.predicted_dlvs = std::move(vhat);
    pred.actual_dlvs = scores[i].bottomRows(n);
    pred.actual_outputs = data.node(i).outputs.bottomRows(n);
    result.nodes.push_back(std::move(pred));
  }
  return result;
}

/// Converts predicted and actual outputs back to original units.
inline PredictionResult to_original_units(const PredictionResult& pred, const Standardizer& scaler) {
  if (!pred.standardized) return pred;
  PredictionResult out = pred;
  for (std::size_t i = 0; i < out.nodes.size(); ++i) {
    out.nodes[i].predicted_outputs = scaler.inverse_outputs(i, pred.nodes[i].predicted_outputs);
    out.nodes[i].actual_outputs = scaler.inverse_outputs(i, pred.nodes[i].actual_outputs);
  }
  out.standardized = false;
  return out;
}

/// Oblique-projection reconstruction Y R P^T per node.
inline std::vector<Matrix> reconstruct(const NetLavarxModel& model, const TimeSeriesDataset& data) {
  std::vector<Matrix> out = dlv_scores(model, data);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = out[i] * model.nodes[i].loadings.transpose();
  return out;
}

// ---------------------------------------------------------------------------
// Metrics

struct ColumnMetrics {
  std::size_t node = 0;
  Index column = 0;
  std::optional<double> r2;    // undefined for a constant actual column
  std::optional<double> corr;  // undefined when either column is constant
  double rmse = 0.0;
  double mae = 0.0;
};

struct AggregateMetrics {
  std::optional<double> r2;
  std::optional<double> corr;
  double rmse = 0.0;
  double mae = 0.0;
};

struct MetricsReport {
  std::vector<ColumnMetrics> columns;
  std::vector<AggregateMetrics> per_node;
  AggregateMetrics pooled;
};

namespace detail {

inline AggregateMetrics average(const std::vector<const ColumnMetrics*>& cols) {
  AggregateMetrics agg;
  double r2 = 0.0, corr = 0.0;
  std::size_t n_r2 = 0, n_corr = 0;
  for (const auto* c : cols) {
    agg.rmse += c->rmse;
    agg.mae += c->mae;
    if (c->r2) {
      r2 += *c->r2;
      ++n_r2;
    }
    if (c->corr) {
      corr += *c->corr;
      ++n_corr;
    }
  }
  if (!cols.empty()) {
    agg.rmse /= static_cast<double>(cols.size());
    agg.mae /= static_cast<double>(cols.size());
  }
  if (n_r2) agg.r2 = r2 / static_cast<double>(n_r2);
  if (n_corr) agg.corr = corr / static_cast<double>(n_corr);
  return agg;
}

}  // namespace detail

inline ColumnMetrics column_metrics(const Eigen::Ref<const Vector>& actual, const Eigen::Ref<const Vector>& predicted) {
  ColumnMetrics m;
  const double n = static_cast<double>(actual.size());
  const Vector err = actual - predicted;
  const double sse = err.squaredNorm();
  m.rmse = std::sqrt(sse / n);
  m.mae = err.cwiseAbs().sum() / n;
  const Vector a = actual.array() - actual.mean();
  const Vector p = predicted.array() - predicted.mean();
  const double sst = a.squaredNorm();
  const double spp = p.squaredNorm();
  if (sst > 0.0) m.r2 = 1.0 - sse / sst;
  if (sst > 0.0 && spp > 0.0) m.corr = std::clamp(a.dot(p) / std::sqrt(sst * spp), -1.0, 1.0);
  return m;
}

/// Per-column, per-node and pooled metrics. Pooled and per-node values are
/// unweighted means over columns; undefined R2/Corr entries are skipped.
inline MetricsReport compute_metrics(const std::vector<Matrix>& actual, const std::vector<Matrix>& predicted) {
  if (actual.size() != predicted.size()) throw Error(ErrorKind::ShapeMismatch, "node counts differ");
  MetricsReport report;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    if (actual[i].rows() != predicted[i].rows() || actual[i].cols() != predicted[i].cols()) {
      throw Error(ErrorKind::ShapeMismatch, "actual and predicted shapes differ for node " + std::to_string(i + 1));
    }
    if (actual[i].rows() < 2) throw Error(ErrorKind::InsufficientData, "metrics need at least 2 rows");
    for (Index c = 0; c < actual[i].cols(); ++c) {
      ColumnMetrics m = column_metrics(actual[i].col(c), predicted[i].col(c));
      m.node = i;
      m.column = c;
      report.columns.push_back(m);
    }
  }
  std::vector<const ColumnMetrics*> all;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    std::vector<const ColumnMetrics*> node_cols;
    for (const auto& c : report.columns) {
      if (c.node == i) node_cols.push_back(&c);
    }
    report.per_node.push_back(detail::average(node_cols));
  }
  for (const auto& c : report.columns) all.push_back(&c);
  report.pooled = detail::average(all);
  return report;
}

inline MetricsReport compute_metrics(const Matrix& actual, const Matrix& predicted) {
  return compute_metrics(std::vector<Matrix>{actual}, std::vector<Matrix>{predicted});
}

inline MetricsReport output_metrics(const PredictionResult& pred) {
  std::vector<Matrix> actual, predicted;
  for (const auto& n : pred.nodes) {
    actual.push_back(n.actual_outputs);
    predicted.push_back(n.predicted_outputs);
  }
  return compute_metrics(actual, predicted);
}

}  // namespace netlavarx
