#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "netlavarx/error.hpp"
#include "netlavarx/evaluation.hpp"
#include "netlavarx/io.hpp"
#include "netlavarx/model.hpp"

namespace netlavarx {

/// Pearson correlations among all DLV score columns. Columns with zero
/// variance are flagged and their off-diagonal entries are NaN.
struct DlvCorrelation {
  Matrix values;
  std::vector<bool> degenerate;
};

namespace detail {

inline double pearson(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) {
  const Vector x = a.array() - a.mean();
  const Vector y = b.array() - b.mean();
  const double den = std::sqrt(x.squaredNorm() * y.squaredNorm());
  if (!(den > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return std::clamp(x.dot(y) / den, -1.0, 1.0);
}

inline Matrix stacked_scores(const NetLavarxModel& model, const TimeSeriesDataset& data) {
  const std::vector<Matrix> scores = dlv_scores(model, data);
  Index total = 0;
  for (const auto& s : scores) total += s.cols();
  Matrix out(data.rows(), total);
  Index at = 0;
  for (const auto& s : scores) {
    out.middleCols(at, s.cols()) = s;
    at += s.cols();
  }
  return out;
}

}  // namespace detail

/// Correlation of the columns of `scores`. With max_lag > 0 each off-diagonal
/// entry is the signed correlation of largest magnitude over lags -L..L.
inline DlvCorrelation correlate_columns(const Matrix& scores, std::size_t max_lag = 0) {
  const Index k = scores.cols();
  const Index n = scores.rows();
  DlvCorrelation out;
  out.values = Matrix::Identity(k, k);
  out.degenerate.assign(static_cast<std::size_t>(k), false);
  for (Index a = 0; a < k; ++a) {
    const Vector c = scores.col(a).array() - scores.col(a).mean();
    if (!(c.squaredNorm() > 0.0)) out.degenerate[static_cast<std::size_t>(a)] = true;
  }
  const Index lag_limit = std::min<Index>(static_cast<Index>(max_lag), n - 2);
  for (Index a = 0; a < k; ++a) {
    for (Index b = a + 1; b < k; ++b) {
      double best = std::numeric_limits<double>::quiet_NaN();
      if (!out.degenerate[static_cast<std::size_t>(a)] && !out.degenerate[static_cast<std::size_t>(b)]) {
        best = detail::pearson(scores.col(a), scores.col(b));
        for (Index lag = 1; lag <= lag_limit; ++lag) {
          const double fwd = detail::pearson(scores.col(a).tail(n - lag), scores.col(b).head(n - lag));
          const double bwd = detail::pearson(scores.col(a).head(n - lag), scores.col(b).tail(n - lag));
          for (double r : {fwd, bwd}) {
            if (std::isfinite(r) && (!std::isfinite(best) || std::abs(r) > std::abs(best))) best = r;
          }
        }
      }
      out.values(a, b) = best;
      out.values(b, a) = best;
    }
  }
  for (Index a = 0; a < k; ++a) {
    if (out.degenerate[static_cast<std::size_t>(a)]) out.values(a, a) = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

/// Lag-0 (or max-|r| over +-max_lag) cross-correlation of the DLV scores
/// V = Y R of all nodes, in node order then DLV order.
inline DlvCorrelation dlv_cross_correlation(const NetLavarxModel& model, const TimeSeriesDataset& data,
                                            std::size_t max_lag = 0) {
  return correlate_columns(detail::stacked_scores(model, data), max_lag);
}

/// R2 of each DLV's one-step prediction against its projected actual value.
inline std::vector<std::optional<double>> per_dlv_r2(const NetLavarxModel& model, const TimeSeriesDataset& data) {
  const PredictionResult pred = predict_one_step(model, data);
  std::vector<std::optional<double>> out;
  for (const auto& n : pred.nodes) {
    for (Index c = 0; c < n.actual_dlvs.cols(); ++c) {
      out.push_back(column_metrics(n.actual_dlvs.col(c), n.predicted_dlvs.col(c)).r2);
    }
  }
  return out;
}

/// Nodes whose per-DLV R2 is not non-increasing in DLV order.
inline std::vector<std::size_t> r2_ordering_warnings(const NetworkTopology& topo,
                                                     const std::vector<std::optional<double>>& r2) {
  std::vector<std::size_t> flagged;
  std::size_t at = 0;
  for (std::size_t i = 0; i < topo.node_count(); ++i) {
    const std::size_t l = topo.nodes[i].dlv_count;
    for (std::size_t d = 1; d < l; ++d) {
      const auto& prev = r2.at(at + d - 1);
      const auto& cur = r2.at(at + d);
      if (prev && cur && *cur > *prev + 1e-12) {
        flagged.push_back(i);
        break;
      }
    }
    at += l;
  }
  return flagged;
}

// ---------------------------------------------------------------------------
// Graph

struct DlvVertex {
  std::string label;  // "N<node>.<index>", 1-based
  std::size_t node = 0;  // 1-based node number
  std::size_t index = 0; // 1-based DLV index within the node
  std::optional<double> r2;

  bool operator==(const DlvVertex&) const = default;
};

struct DlvEdge {
  std::size_t a = 0;  // vertex positions, a < b
  std::size_t b = 0;
  double weight = 0.0;  // |r|

  bool operator==(const DlvEdge&) const = default;
};

struct DlvGraph {
  std::vector<DlvVertex> vertices;
  std::vector<DlvEdge> edges;
  double threshold = 0.1;

  bool operator==(const DlvGraph&) const = default;
};

inline std::string dlv_label(std::size_t node, std::size_t index) {
  return "N" + std::to_string(node) + "." + std::to_string(index);
}

/// Vertices in node then DLV order; edge (a, b) iff a != b and |r_ab| >= threshold.
inline DlvGraph build_graph(const Matrix& corr, const std::vector<std::optional<double>>& r2,
                            const NetworkTopology& topo, double threshold = 0.1) {
  const std::size_t total = topo.total_dlvs();
  if (corr.rows() != corr.cols() || static_cast<std::size_t>(corr.rows()) != total) {
    throw Error(ErrorKind::ShapeMismatch, "correlation matrix size does not match DLV count");
  }
  if (!r2.empty() && r2.size() != total) throw Error(ErrorKind::ShapeMismatch, "R2 list does not match DLV count");
  DlvGraph g;
  g.threshold = threshold;
  for (std::size_t i = 0; i < topo.node_count(); ++i) {
    for (std::size_t d = 0; d < topo.nodes[i].dlv_count; ++d) {
      const std::size_t pos = g.vertices.size();
      g.vertices.push_back({dlv_label(i + 1, d + 1), i + 1, d + 1, r2.empty() ? std::nullopt : r2[pos]});
    }
  }
  for (std::size_t a = 0; a < total; ++a) {
    for (std::size_t b = a + 1; b < total; ++b) {
      const double r = corr(static_cast<Index>(a), static_cast<Index>(b));
      if (std::isfinite(r) && std::abs(r) >= threshold) g.edges.push_back({a, b, std::abs(r)});
    }
  }
  return g;
}

enum class GraphFormat { Dot, Json };

inline GraphFormat parse_graph_format(std::string_view name) {
  if (name == "dot") return GraphFormat::Dot;
  if (name == "json") return GraphFormat::Json;
  throw Error(ErrorKind::InvalidFormat, "unknown graph format '" + std::string(name) + "'");
}

inline io::Json graph_to_json(const DlvGraph& g) {
  io::Json vertices = io::Json::array();
  for (const auto& v : g.vertices) {
    vertices.push_back({{"label", v.label},
                        {"node", v.node},
                        {"index", v.index},
                        {"r2", v.r2 ? io::Json(*v.r2) : io::Json(nullptr)}});
  }
  io::Json edges = io::Json::array();
  for (const auto& e : g.edges) {
    edges.push_back({{"source", g.vertices[e.a].label}, {"target", g.vertices[e.b].label}, {"weight", e.weight}});
  }
  return {{"format", "netlavarx-dlv-graph"},
          {"threshold", g.threshold},
          {"vertices", std::move(vertices)},
          {"edges", std::move(edges)}};
}

inline DlvGraph graph_from_json(const io::Json& j) {
  DlvGraph g;
  g.threshold = j.at("threshold").get<double>();
  for (const auto& v : j.at("vertices")) {
    DlvVertex vertex{v.at("label").get<std::string>(), v.at("node").get<std::size_t>(),
                     v.at("index").get<std::size_t>(), std::nullopt};
    if (!v.at("r2").is_null()) vertex.r2 = v.at("r2").get<double>();
    g.vertices.push_back(std::move(vertex));
  }
  auto position = [&](const std::string& label) {
    for (std::size_t k = 0; k < g.vertices.size(); ++k) {
      if (g.vertices[k].label == label) return k;
    }
    throw Error(ErrorKind::InvalidFormat, "edge references unknown vertex '" + label + "'");
  };
  for (const auto& e : j.at("edges")) {
    g.edges.push_back({position(e.at("source").get<std::string>()), position(e.at("target").get<std::string>()),
                       e.at("weight").get<double>()});
  }
  return g;
}

inline DlvGraph parse_graph_json(std::string_view text) {
  try {
    return graph_from_json(io::Json::parse(text));
  } catch (const io::Json::exception& e) {
    throw Error(ErrorKind::InvalidFormat, std::string("malformed graph document: ") + e.what());
  }
}

/// DOT (undirected, penwidth = 10 |r|) or the lossless JSON document.
inline std::string export_graph(const DlvGraph& g, GraphFormat format) {
  if (format == GraphFormat::Json) return graph_to_json(g).dump(1) + "\n";
  std::string out = "graph dlv_network {\n";
  out += "  // threshold " + io::format_double(g.threshold) + "\n";
  for (const auto& v : g.vertices) {
    out += "  \"" + v.label + "\" [label=\"" + v.label + "\", group=" + std::to_string(v.node);
    if (v.r2) out += ", r2=" + io::format_double(*v.r2);
    out += "];\n";
  }
  for (const auto& e : g.edges) {
    out += "  \"" + g.vertices[e.a].label + "\" -- \"" + g.vertices[e.b].label +
           "\" [weight=" + io::format_double(e.weight) + ", penwidth=" + io::format_double(10.0 * e.weight) + "];\n";
  }
  out += "}\n";
  return out;
}

inline std::string export_graph(const DlvGraph& g, std::string_view format) {
  return export_graph(g, parse_graph_format(format));
}

}  // namespace netlavarx
