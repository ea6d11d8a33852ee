#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "netlavarx/data.hpp"
#include "netlavarx/error.hpp"
#include "netlavarx/estimator.hpp"
#include "netlavarx/evaluation.hpp"

namespace netlavarx {

// ---------------------------------------------------------------------------
// Chronological splitting

struct SplitSpec {
  double train = 0.60;
  double validation = 0.15;
  double test = 0.25;

  void validate() const {
    if (!(train > 0.0 && validation > 0.0 && test > 0.0)) {
      throw Error(ErrorKind::InvalidInput, "split fractions must be positive");
    }
    if (std::abs(train + validation + test - 1.0) > 1e-9) {
      throw Error(ErrorKind::InvalidInput, "split fractions must sum to 1");
    }
  }
};

struct RowRange {
  Index begin = 0;
  Index count = 0;
  Index end() const { return begin + count; }
};

struct Segments {
  RowRange train;
  RowRange validation;
  RowRange test;
};

/// Contiguous train/validation/test blocks; floor of each fraction, with the
/// remainder assigned to test. Every segment must exceed s + 1 rows.
inline Segments split(Index rows, const SplitSpec& spec, std::size_t max_order) {
  spec.validate();
  // The small offset keeps exact products such as 0.6 * 100 from flooring down.
  const Index n_train = static_cast<Index>(std::floor(spec.train * static_cast<double>(rows) + 1e-9));
  const Index n_val = static_cast<Index>(std::floor(spec.validation * static_cast<double>(rows) + 1e-9));
  Segments seg;
  seg.train = {0, n_train};
  seg.validation = {n_train, n_val};
  seg.test = {n_train + n_val, rows - n_train - n_val};
  const Index min_rows = static_cast<Index>(max_order) + 1;
  for (const RowRange* r : {&seg.train, &seg.validation, &seg.test}) {
    if (r->count <= min_rows) {
      throw Error(ErrorKind::InsufficientData, "split segment of " + std::to_string(r->count) +
                                                   " rows is too short for lag order " + std::to_string(max_order));
    }
  }
  return seg;
}

inline Segments split(const TimeSeriesDataset& data, const SplitSpec& spec, std::size_t max_order) {
  return split(data.rows(), spec, max_order);
}

/// Evaluation view of a segment: the s rows preceding it seed the lags.
inline TimeSeriesDataset with_history(const TimeSeriesDataset& data, const RowRange& range, std::size_t max_order) {
  const Index lead = std::min<Index>(static_cast<Index>(max_order), range.begin);
  return data.slice(range.begin - lead, range.count + lead);
}

// ---------------------------------------------------------------------------
// Grid search

enum class SelectionMetric { Rmse, Mae, R2, Corr };

inline std::string_view to_string(SelectionMetric m) {
  switch (m) {
    case SelectionMetric::Rmse: return "rmse";
    case SelectionMetric::Mae: return "mae";
    case SelectionMetric::R2: return "r2";
    case SelectionMetric::Corr: return "corr";
  }
  return "rmse";
}

inline SelectionMetric parse_selection_metric(std::string_view name) {
  if (name == "rmse") return SelectionMetric::Rmse;
  if (name == "mae") return SelectionMetric::Mae;
  if (name == "r2") return SelectionMetric::R2;
  if (name == "corr") return SelectionMetric::Corr;
  throw Error(ErrorKind::ConfigError, "unknown selection metric '" + std::string(name) + "'");
}

inline bool is_minimized(SelectionMetric m) { return m == SelectionMetric::Rmse || m == SelectionMetric::Mae; }

struct GridSpec {
  std::vector<std::vector<std::size_t>> dlv_candidates;    // per node
  std::vector<std::vector<std::size_t>> order_candidates;  // per node
  bool shared = false;  // one (l, s) applied to every node, candidates taken from node 1
  SelectionMetric metric = SelectionMetric::Rmse;
  double tie_tolerance = 1e-12;

  /// l in 1..min(p_i - 1, 10), s in 1..8.
  static GridSpec defaults(const std::vector<Index>& output_dims) {
    GridSpec g;
    for (Index p : output_dims) {
      std::vector<std::size_t> ls, ss;
      const Index top = std::max<Index>(1, std::min<Index>(p - 1, 10));
      for (Index l = 1; l <= top; ++l) ls.push_back(static_cast<std::size_t>(l));
      for (std::size_t s = 1; s <= 8; ++s) ss.push_back(s);
      g.dlv_candidates.push_back(std::move(ls));
      g.order_candidates.push_back(std::move(ss));
    }
    return g;
  }
};

struct GridCell {
  std::vector<std::size_t> dlv_counts;
  std::vector<std::size_t> orders;
};

struct CellResult {
  std::size_t index = 0;
  GridCell cell;
  bool ok = false;
  std::string error;
  AggregateMetrics validation;
  std::size_t parameter_count = 0;
  bool converged = false;
  std::size_t iterations = 0;
};

struct GridSearchResult {
  std::vector<CellResult> cells;  // ordered by cell index
  std::size_t selected = 0;       // index into cells
  NetLavarxModel final_model;     // refit on train + validation
  MetricsReport test_metrics;
  Segments segments;
};

inline std::vector<GridCell> enumerate_cells(const GridSpec& grid, std::size_t node_count) {
  if (grid.dlv_candidates.empty() || grid.order_candidates.empty()) {
    throw Error(ErrorKind::ConfigError, "grid has no candidates");
  }
  std::vector<GridCell> cells;
  if (grid.shared) {
    for (std::size_t l : grid.dlv_candidates.front()) {
      for (std::size_t s : grid.order_candidates.front()) {
        cells.push_back({std::vector<std::size_t>(node_count, l), std::vector<std::size_t>(node_count, s)});
      }
    }
  } else {
    if (grid.dlv_candidates.size() != node_count || grid.order_candidates.size() != node_count) {
      throw Error(ErrorKind::ConfigError, "per-node grid must list candidates for every node");
    }
    // Odometer over [l_1 .. l_M, s_1 .. s_M], last position fastest.
    std::vector<const std::vector<std::size_t>*> axes;
    for (const auto& c : grid.dlv_candidates) axes.push_back(&c);
    for (const auto& c : grid.order_candidates) axes.push_back(&c);
    for (const auto* a : axes) {
      if (a->empty()) throw Error(ErrorKind::ConfigError, "grid axis has no candidates");
    }
    std::vector<std::size_t> pos(axes.size(), 0);
    while (true) {
      GridCell cell;
      for (std::size_t k = 0; k < node_count; ++k) cell.dlv_counts.push_back((*axes[k])[pos[k]]);
      for (std::size_t k = 0; k < node_count; ++k) cell.orders.push_back((*axes[node_count + k])[pos[node_count + k]]);
      cells.push_back(std::move(cell));
      std::size_t k = axes.size();
      while (k > 0) {
        --k;
        if (++pos[k] < axes[k]->size()) break;
        pos[k] = 0;
        if (k == 0) return cells;
      }
      if (axes.empty()) break;
    }
  }
  if (cells.empty()) throw Error(ErrorKind::ConfigError, "grid has no cells");
  return cells;
}

inline NetworkTopology apply_cell(const NetworkTopology& base, const GridCell& cell) {
  NetworkTopology topo = base;
  for (std::size_t i = 0; i < topo.node_count(); ++i) {
    topo.nodes[i].dlv_count = cell.dlv_counts.at(i);
    topo.nodes[i].order = cell.orders.at(i);
  }
  return topo;
}

/// Loadings plus VARX coefficients.
inline std::size_t parameter_count(const NetworkTopology& topo, const std::vector<Index>& output_dims,
                                   const std::vector<Index>& input_dims) {
  std::size_t total = 0;
  for (std::size_t i = 0; i < topo.node_count(); ++i) {
    const auto& n = topo.nodes[i];
    std::size_t regressors = n.dlv_count + static_cast<std::size_t>(input_dims.at(i));
    for (std::size_t j : n.neighbors) regressors += topo.nodes[j].dlv_count;
    total += static_cast<std::size_t>(output_dims.at(i)) * n.dlv_count + n.dlv_count * n.order * regressors;
  }
  return total;
}

inline std::optional<double> metric_value(const AggregateMetrics& m, SelectionMetric metric) {
  switch (metric) {
    case SelectionMetric::Rmse: return m.rmse;
    case SelectionMetric::Mae: return m.mae;
    case SelectionMetric::R2: return m.r2;
    case SelectionMetric::Corr: return m.corr;
  }
  return std::nullopt;
}

/// True if a should be preferred over b: better metric beyond the tie
/// tolerance, then fewer parameters, then lexicographically smaller (l, s),
/// then lower cell index.
inline bool prefer(const CellResult& a, const CellResult& b, SelectionMetric metric, double tie_tolerance) {
  const double va = *metric_value(a.validation, metric);
  const double vb = *metric_value(b.validation, metric);
  if (std::abs(va - vb) > tie_tolerance) return is_minimized(metric) ? va < vb : va > vb;
  if (a.parameter_count != b.parameter_count) return a.parameter_count < b.parameter_count;
  if (a.cell.dlv_counts != b.cell.dlv_counts) return a.cell.dlv_counts < b.cell.dlv_counts;
  if (a.cell.orders != b.cell.orders) return a.cell.orders < b.cell.orders;
  return a.index < b.index;
}

/// Index of the preferred successful cell; throws GridExhausted if none.
inline std::size_t select_best(const std::vector<CellResult>& cells, SelectionMetric metric,
                               double tie_tolerance = 1e-12) {
  std::optional<std::size_t> best;
  for (std::size_t k = 0; k < cells.size(); ++k) {
    if (!cells[k].ok || !metric_value(cells[k].validation, metric)) continue;
    if (!best || prefer(cells[k], cells[*best], metric, tie_tolerance)) best = k;
  }
  if (!best) {
    std::string log;
    for (const auto& c : cells) log += "\n  cell " + std::to_string(c.index) + ": " + c.error;
    throw Error(ErrorKind::GridExhausted, "no grid cell could be fitted and scored" + log);
  }
  return *best;
}

inline CellResult evaluate_cell(const TimeSeriesDataset& data, const Segments& seg, const NetworkTopology& base,
                                const GridCell& cell, const FitSettings& settings, std::size_t index) {
  CellResult res;
  res.index = index;
  res.cell = cell;
  try {
    const NetworkTopology topo = apply_cell(base, cell);
    std::vector<Index> in_dims;
    for (const auto& n : data.nodes()) in_dims.push_back(n.input_dim());
    res.parameter_count = parameter_count(topo, output_dims(data), in_dims);
    const NetLavarxModel model = fit(data.slice(seg.train.begin, seg.train.count), topo, settings);
    const TimeSeriesDataset val =
        model.standardizer.transform(with_history(data, seg.validation, topo.max_order()));
    res.validation = output_metrics(predict_one_step(model, val)).pooled;
    res.converged = model.diagnostics.converged;
    res.iterations = model.diagnostics.iterations;
    res.ok = true;
  } catch (const std::exception& e) {
    res.error = e.what();
  }
  return res;
}

/// Fits every cell on the training block, scores it on validation, selects
/// the best, refits on train + validation and scores on test. Cells run on
/// up to `workers` threads; results are ordered by cell index.
inline GridSearchResult grid_search(const TimeSeriesDataset& data, const NetworkTopology& topology_template,
                                    const GridSpec& grid, const FitSettings& settings, const SplitSpec& split_spec = {},
                                    std::size_t workers = 1) {
  const std::vector<GridCell> cells = enumerate_cells(grid, topology_template.node_count());
  std::size_t max_order = 1;
  for (const auto& c : cells) max_order = std::max(max_order, *std::max_element(c.orders.begin(), c.orders.end()));

  GridSearchResult result;
  result.segments = split(data, split_spec, max_order);
  result.cells.resize(cells.size());

  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t k = next++; k < cells.size(); k = next++) {
      result.cells[k] = evaluate_cell(data, result.segments, topology_template, cells[k], settings, k);
    }
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(workers, cells.size()));
  if (n_threads == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(work);
  }

  result.selected = select_best(result.cells, grid.metric, grid.tie_tolerance);
  const NetworkTopology topo = apply_cell(topology_template, result.cells[result.selected].cell);
  const Segments& seg = result.segments;
  const RowRange train_val{0, seg.train.count + seg.validation.count};
  result.final_model = fit(data.slice(train_val.begin, train_val.count), topo, settings);
  const TimeSeriesDataset test =
      result.final_model.standardizer.transform(with_history(data, seg.test, topo.max_order()));
  result.test_metrics = output_metrics(predict_one_step(result.final_model, test));
  return result;
}

}  // namespace netlavarx
