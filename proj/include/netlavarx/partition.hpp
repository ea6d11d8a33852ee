#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "netlavarx/data.hpp"
#include "netlavarx/error.hpp"
#include "netlavarx/io.hpp"
#include "netlavarx/model.hpp"

namespace netlavarx {

// Partition config document:
//   {"nodes": [{"name": "reactor", "outputs": [...], "inputs": [...],
//               "neighbors": ["separator", ...], "l": 2, "s": 2}, ...]}
// "neighbors" may list node names or 1-based node numbers; when omitted the
// node receives every other node. "inputs", "l" and "s" are optional.

struct PartitionNode {
  std::string name;
  std::vector<std::string> outputs;
  std::vector<std::string> inputs;
  std::optional<std::vector<std::string>> neighbors;
  std::optional<std::size_t> dlv_count;
  std::optional<std::size_t> order;
};

struct PartitionConfig {
  std::vector<PartitionNode> nodes;

  std::optional<std::size_t> find(std::string_view name) const {
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (nodes[i].name == name) return i;
    }
    return std::nullopt;
  }
};

inline PartitionConfig partition_from_json(const io::Json& j) {
  PartitionConfig cfg;
  if (!j.contains("nodes") || !j.at("nodes").is_array() || j.at("nodes").empty()) {
    throw Error(ErrorKind::ConfigError, "partition config needs a non-empty 'nodes' array");
  }
  for (const auto& e : j.at("nodes")) {
    PartitionNode n;
    n.name = e.value("name", "N" + std::to_string(cfg.nodes.size() + 1));
    if (!e.contains("outputs") || e.at("outputs").empty()) {
      throw Error(ErrorKind::ConfigError, "partition node '" + n.name + "' lists no outputs");
    }
    n.outputs = e.at("outputs").get<std::vector<std::string>>();
    if (e.contains("inputs")) n.inputs = e.at("inputs").get<std::vector<std::string>>();
    if (e.contains("neighbors")) {
      std::vector<std::string> nb;
      for (const auto& x : e.at("neighbors")) {
        nb.push_back(x.is_number_integer() ? "#" + std::to_string(x.get<long long>()) : x.get<std::string>());
      }
      n.neighbors = std::move(nb);
    }
    if (e.contains("l")) n.dlv_count = e.at("l").get<std::size_t>();
    if (e.contains("s")) n.order = e.at("s").get<std::size_t>();
    cfg.nodes.push_back(std::move(n));
  }
  for (std::size_t i = 0; i < cfg.nodes.size(); ++i) {
    for (std::size_t k = 0; k < i; ++k) {
      if (cfg.nodes[k].name == cfg.nodes[i].name) {
        throw Error(ErrorKind::ConfigError, "duplicate partition node name '" + cfg.nodes[i].name + "'");
      }
    }
  }
  return cfg;
}

inline PartitionConfig parse_partition(std::string_view text) {
  try {
    return partition_from_json(io::Json::parse(text));
  } catch (const io::Json::exception& e) {
    throw Error(ErrorKind::ConfigError, std::string("malformed partition config: ") + e.what());
  }
}

inline io::Json partition_to_json(const PartitionConfig& cfg) {
  io::Json nodes = io::Json::array();
  for (const auto& n : cfg.nodes) {
    io::Json e = {{"name", n.name}, {"outputs", n.outputs}, {"inputs", n.inputs}};
    if (n.neighbors) e["neighbors"] = *n.neighbors;
    if (n.dlv_count) e["l"] = *n.dlv_count;
    if (n.order) e["s"] = *n.order;
    nodes.push_back(std::move(e));
  }
  return {{"nodes", std::move(nodes)}};
}

inline PartitionConfig partition_from_layout(const std::vector<NodeLayout>& layout) {
  PartitionConfig cfg;
  for (const auto& l : layout) cfg.nodes.push_back({l.name, l.output_names, l.input_names, std::nullopt, {}, {}});
  return cfg;
}

/// Maps CSV columns onto nodes; a missing column is a ConfigError naming it.
inline TimeSeriesDataset dataset_from_table(const io::CsvTable& table, const PartitionConfig& cfg) {
  std::vector<NodeSeries> nodes;
  auto gather = [&](const std::vector<std::string>& names) {
    Matrix m(table.values.rows(), static_cast<Index>(names.size()));
    for (std::size_t k = 0; k < names.size(); ++k) {
      const auto col = table.find(names[k]);
      if (!col) throw Error(ErrorKind::ConfigError, "column '" + names[k] + "' referenced by partition not found");
      m.col(static_cast<Index>(k)) = table.values.col(*col);
    }
    return m;
  };
  for (const auto& n : cfg.nodes) {
    NodeSeries s;
    s.name = n.name;
    s.outputs = gather(n.outputs);
    s.inputs = gather(n.inputs);
    s.output_names = n.outputs;
    s.input_names = n.inputs;
    nodes.push_back(std::move(s));
  }
  return TimeSeriesDataset(std::move(nodes));
}

/// Topology from the config; non-empty override lists (one value, or one per
/// node) replace the per-node l and s entries.
inline NetworkTopology topology_from_partition(const PartitionConfig& cfg,
                                               const std::vector<std::size_t>& dlv_override = {},
                                               const std::vector<std::size_t>& order_override = {}) {
  const std::size_t m = cfg.nodes.size();
  auto pick = [&](const std::vector<std::size_t>& over, std::size_t i, const std::optional<std::size_t>& fallback,
                  const char* what) -> std::size_t {
    if (!over.empty()) {
      if (over.size() == 1) return over.front();
      if (over.size() != m) {
        throw Error(ErrorKind::ConfigError, std::string(what) + " override needs 1 or " + std::to_string(m) + " values");
      }
      return over[i];
    }
    if (!fallback) {
      throw Error(ErrorKind::ConfigError, std::string(what) + " not given for node '" + cfg.nodes[i].name + "'");
    }
    return *fallback;
  };
  NetworkTopology topo;
  for (std::size_t i = 0; i < m; ++i) {
    const auto& n = cfg.nodes[i];
    NodeSpec spec;
    spec.dlv_count = pick(dlv_override, i, n.dlv_count, "l");
    spec.order = pick(order_override, i, n.order, "s");
    if (!n.neighbors) {
      for (std::size_t j = 0; j < m; ++j) {
        if (j != i) spec.neighbors.push_back(j);
      }
    } else {
      for (const auto& ref : *n.neighbors) {
        std::optional<std::size_t> j;
        if (!ref.empty() && ref.front() == '#') {
          const long long k = std::stoll(ref.substr(1));
          if (k >= 1 && static_cast<std::size_t>(k) <= m) j = static_cast<std::size_t>(k - 1);
        } else {
          j = cfg.find(ref);
        }
        if (!j) throw Error(ErrorKind::ConfigError, "node '" + n.name + "' lists unknown neighbor '" + ref + "'");
        if (*j == i) throw Error(ErrorKind::ConfigError, "node '" + n.name + "' lists itself as a neighbor");
        spec.neighbors.push_back(*j);
      }
      std::sort(spec.neighbors.begin(), spec.neighbors.end());
      spec.neighbors.erase(std::unique(spec.neighbors.begin(), spec.neighbors.end()), spec.neighbors.end());
    }
    topo.nodes.push_back(std::move(spec));
  }
  return topo;
}

}  // namespace netlavarx
