#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <tuple>
#include <cstdint>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Eigenvalues>

#include "netlavarx/data.hpp"
#include "netlavarx/error.hpp"
#include "netlavarx/io.hpp"
#include "netlavarx/numerics.hpp"

namespace netlavarx {

// ---------------------------------------------------------------------------
// Geometry: oblique projector and subspace distances

/// Weights R with R^T P = I and R^T Pbar = 0, so P R^T is the oblique
/// projection onto range(P) along range(Pbar).
inline Matrix oblique_projector(const Matrix& loadings, const Matrix& static_loadings) {
  const Index p = loadings.rows();
  const Index ell = loadings.cols();
  if (static_loadings.rows() != p || static_loadings.cols() != p - ell) {
    throw Error(ErrorKind::ShapeMismatch, "loadings and static loadings must together form a square matrix");
  }
  require_finite(loadings, "loadings");
  require_finite(static_loadings, "static loadings");
  const Matrix complement = orthogonal_complement(static_loadings);
  if (complement.cols() != ell) {
    throw Error(ErrorKind::DegenerateGeometry, "static loadings are rank deficient");
  }
  const Matrix cross = loadings.transpose() * complement;  // l x l
  Eigen::FullPivLU<Matrix> lu(cross);
  const Eigen::JacobiSVD<Matrix> svd(cross);
  const Vector& sigma = svd.singularValues();
  if (ell > 0 && (!lu.isInvertible() || sigma(ell - 1) <= sigma(0) * 1e-12)) {
    throw Error(ErrorKind::DegenerateGeometry, "[P Pbar] is singular");
  }
  // R = Pbar_perp (P^T Pbar_perp)^{-1}
  return complement * lu.inverse();
}

/// Principal angles in degrees, ascending. Small angles are resolved from
/// sines so that nearly identical subspaces report angles near zero rather
/// than the sqrt(eps) floor of arccos.
inline Vector principal_angles(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw Error(ErrorKind::ShapeMismatch, "subspaces live in different ambient spaces");
  const Matrix qa = orthonormal_basis(a);
  const Matrix qb = orthonormal_basis(b);
  const Matrix inner = qa.transpose() * qb;
  Eigen::JacobiSVD<Matrix> cos_svd(inner);
  const Vector cosines = cos_svd.singularValues();  // descending
  const Index k = cosines.size();
  const Matrix residual = qb - qa * inner;
  Eigen::JacobiSVD<Matrix> sin_svd(residual);
  Vector sines = sin_svd.singularValues();  // descending
  const double rad_to_deg = 180.0 / std::numbers::pi;
  Vector angles(k);
  for (Index i = 0; i < k; ++i) {
    const double c = std::clamp(cosines(i), 0.0, 1.0);
    // Pair the i-th largest cosine with the i-th smallest sine.
    const Index si = sines.size() - 1 - i;
    const double s = si >= 0 ? std::clamp(sines(si), 0.0, 1.0) : 0.0;
    const double theta = (c * c >= 0.5) ? std::asin(s) : std::acos(c);
    angles(i) = std::clamp(theta * rad_to_deg, 0.0, 90.0);
  }
  std::sort(angles.data(), angles.data() + k);
  return angles;
}

// ---------------------------------------------------------------------------
// Ground-truth systems

struct SystemSpec {
  NetworkTopology topology;
  std::vector<Index> output_dims;  // p_i
  std::vector<Index> input_dims;   // m_i
  std::vector<double> dlv_noise_std;     // per node, std of epsilon
  std::vector<double> static_noise_std;  // per node, std of epsilon-bar
  bool orthogonal = false;               // Pbar spans the orthogonal complement of P
};

struct TrueNode {
  Matrix loadings;         // P_i, p_i x l_i
  Matrix static_loadings;  // Pbar_i, p_i x (p_i - l_i)
  std::vector<Matrix> ar;               // A^i_h, h = 1..s_i
  std::vector<Matrix> input;            // B^i_h
  std::vector<std::vector<Matrix>> cross;  // C^{ij}_h, outer index follows topology neighbors
  double dlv_noise_std = 1.0;
  double static_noise_std = 0.0;
};

struct GroundTruthSystem {
  NetworkTopology topology;
  std::vector<TrueNode> nodes;

  Index output_dim(std::size_t i) const { return nodes.at(i).loadings.rows(); }
  Index input_dim(std::size_t i) const {
    const auto& n = nodes.at(i);
    return n.input.empty() ? 0 : n.input.front().cols();
  }
};

/// Companion matrix of the coupled DLV recursion; state is
/// [v_k; v_{k-1}; ...; v_{k-s+1}] with v_k stacking all nodes.
inline Matrix companion_matrix(const GroundTruthSystem& sys) {
  const auto& topo = sys.topology;
  const std::size_t s = topo.max_order();
  std::vector<Index> offset(topo.node_count() + 1, 0);
  for (std::size_t i = 0; i < topo.node_count(); ++i) {
    offset[i + 1] = offset[i] + static_cast<Index>(topo.nodes[i].dlv_count);
  }
  const Index l = offset.back();
  const Index dim = l * static_cast<Index>(s);
  Matrix f = Matrix::Zero(dim, dim);
  for (std::size_t i = 0; i < topo.node_count(); ++i) {
    const auto& spec = topo.nodes[i];
    const auto& node = sys.nodes[i];
    const Index li = static_cast<Index>(spec.dlv_count);
    for (std::size_t h = 1; h <= spec.order; ++h) {
      const Index col0 = static_cast<Index>(h - 1) * l;
      f.block(offset[i], col0 + offset[i], li, li) = node.ar[h - 1];
      for (std::size_t k = 0; k < spec.neighbors.size(); ++k) {
        const std::size_t j = spec.neighbors[k];
        f.block(offset[i], col0 + offset[j], li, static_cast<Index>(topo.nodes[j].dlv_count)) = node.cross[k][h - 1];
      }
    }
  }
  if (s > 1) f.bottomLeftCorner(dim - l, dim - l).setIdentity();
  return f;
}

inline double spectral_radius(const Matrix& f) {
  if (f.rows() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> solver(f, false);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline Matrix gaussian_matrix(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index c = 0; c < cols; ++c) {
    for (Index r = 0; r < rows; ++r) m(r, c) = normal(rng);
  }
  return m;
}

inline Matrix uniform_matrix(Index rows, Index cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);
  Matrix m(rows, cols);
  for (Index c = 0; c < cols; ++c) {
    for (Index r = 0; r < rows; ++r) m(r, c) = uniform(rng);
  }
  return m;
}

inline double condition_number(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m);
  const Vector& s = svd.singularValues();
  if (s.size() == 0) return 1.0;
  return s(s.size() - 1) > 0.0 ? s(0) / s(s.size() - 1) : std::numeric_limits<double>::infinity();
}

}  // namespace detail

/// Random loadings pair with cond([P Pbar]) < 1e6.
inline std::pair<Matrix, Matrix> random_loadings(Index p, Index ell, bool orthogonal, std::mt19937_64& rng) {
  for (int attempt = 0; attempt < 100; ++attempt) {
    Matrix loadings = detail::gaussian_matrix(p, ell, rng);
    Matrix static_loadings = detail::gaussian_matrix(p, p - ell, rng);
    if (orthogonal && p > ell) {
      const Matrix comp = orthogonal_complement(loadings);
      if (comp.cols() != p - ell) continue;
      static_loadings = comp;
    }
    Matrix full(p, p);
    full << loadings, static_loadings;
    if (detail::condition_number(full) < 1e6) return {loadings, static_loadings};
  }
  throw Error(ErrorKind::GenerationFailed, "could not draw nonsingular loadings");
}

inline GroundTruthSystem generate_system(const SystemSpec& spec, std::uint64_t seed, double spectral_target) {
  if (!(spectral_target > 0.0 && spectral_target < 1.0)) {
    throw Error(ErrorKind::InvalidInput, "spectral target must lie in (0, 1)");
  }
  const std::size_t m = spec.topology.node_count();
  if (spec.output_dims.size() != m || spec.input_dims.size() != m || spec.dlv_noise_std.size() != m ||
      spec.static_noise_std.size() != m) {
    throw Error(ErrorKind::ShapeMismatch, "system spec lists do not match node count");
  }
  spec.topology.validate(spec.output_dims);

  std::mt19937_64 rng(detail::splitmix64(seed));
  for (int attempt = 0; attempt < 20; ++attempt) {
    GroundTruthSystem sys;
    sys.topology = spec.topology;
    for (std::size_t i = 0; i < m; ++i) {
      const auto& ns = spec.topology.nodes[i];
      const Index p = spec.output_dims[i];
      const Index ell = static_cast<Index>(ns.dlv_count);
      TrueNode node;
      std::tie(node.loadings, node.static_loadings) = random_loadings(p, ell, spec.orthogonal, rng);
      for (std::size_t h = 0; h < ns.order; ++h) {
        node.ar.push_back(detail::uniform_matrix(ell, ell, rng));
        node.input.push_back(detail::uniform_matrix(ell, spec.input_dims[i], rng));
      }
      for (std::size_t j : ns.neighbors) {
        std::vector<Matrix> lags;
        for (std::size_t h = 0; h < ns.order; ++h) {
          lags.push_back(detail::uniform_matrix(ell, static_cast<Index>(spec.topology.nodes[j].dlv_count), rng));
        }
        node.cross.push_back(std::move(lags));
      }
      node.dlv_noise_std = spec.dlv_noise_std[i];
      node.static_noise_std = spec.static_noise_std[i];
      sys.nodes.push_back(std::move(node));
    }
    const double radius = spectral_radius(companion_matrix(sys));
    if (!(radius > 1e-12) || !std::isfinite(radius)) continue;
    // Scaling every lag-h block by alpha^h scales all companion eigenvalues by alpha.
    const double alpha = spectral_target / radius;
    for (auto& node : sys.nodes) {
      double factor = 1.0;
      for (std::size_t h = 0; h < node.ar.size(); ++h) {
        factor *= alpha;
        node.ar[h] *= factor;
        for (auto& lags : node.cross) lags[h] *= factor;
      }
    }
    const double rescaled = spectral_radius(companion_matrix(sys));
    if (std::abs(rescaled - spectral_target) <= 1e-6) return sys;
  }
  throw Error(ErrorKind::GenerationFailed, "spectral rescaling did not reach the target radius");
}

// ---------------------------------------------------------------------------
// Simulation

struct ZeroInput {};
struct WhiteNoiseInput {
  double std = 1.0;
};
struct ProvidedInput {
  std::vector<Matrix> inputs;  // per node, T x m_i
};
using InputPolicy = std::variant<ZeroInput, WhiteNoiseInput, ProvidedInput>;

struct Trajectory {
  std::vector<Matrix> outputs;       // T x p_i
  std::vector<Matrix> dlvs;          // T x l_i
  std::vector<Matrix> inputs;        // T x m_i
  std::vector<Matrix> static_noise;  // T x (p_i - l_i), realized epsilon-bar

  Index rows() const { return outputs.empty() ? 0 : outputs.front().rows(); }
};

inline std::uint64_t node_seed(std::uint64_t seed, std::size_t node) {
  return detail::splitmix64(seed ^ detail::splitmix64(0xA5A5A5A5ULL + node));
}

/// Per-node noise streams; node i's draws depend only on node_seeds[i].
inline Trajectory simulate_with_node_seeds(const GroundTruthSystem& sys, Index samples, const InputPolicy& policy,
                                           const std::vector<std::uint64_t>& node_seeds) {
  const auto& topo = sys.topology;
  const std::size_t m = topo.node_count();
  const Index s = static_cast<Index>(topo.max_order());
  if (samples <= s) throw Error(ErrorKind::InsufficientData, "trajectory length must exceed the lag order");
  if (node_seeds.size() != m) throw Error(ErrorKind::ShapeMismatch, "one seed per node required");
  if (spectral_radius(companion_matrix(sys)) >= 1.0) {
    throw Error(ErrorKind::UnstableSystem, "companion spectral radius is not below 1");
  }
  if (const auto* provided = std::get_if<ProvidedInput>(&policy)) {
    if (provided->inputs.size() != m) throw Error(ErrorKind::ShapeMismatch, "provided inputs need one matrix per node");
    for (std::size_t i = 0; i < m; ++i) {
      if (provided->inputs[i].rows() != samples || provided->inputs[i].cols() != sys.input_dim(i)) {
        throw Error(ErrorKind::ShapeMismatch, "provided input matrix has the wrong shape");
      }
    }
  }

  const Index burn = 10 * s;
  const Index total = burn + samples;
  std::vector<std::mt19937_64> rngs;
  for (std::size_t i = 0; i < m; ++i) rngs.emplace_back(node_seeds[i]);
  // One distribution per node as well: normal_distribution caches a spare draw.
  std::vector<std::normal_distribution<double>> normals(m);

  std::vector<Matrix> v(m), u(m), y(m), ebar(m);
  for (std::size_t i = 0; i < m; ++i) {
    const Index p = sys.output_dim(i);
    const Index ell = static_cast<Index>(topo.nodes[i].dlv_count);
    v[i] = Matrix::Zero(total, ell);
    u[i] = Matrix::Zero(total, sys.input_dim(i));
    y[i] = Matrix::Zero(total, p);
    ebar[i] = Matrix::Zero(total, p - ell);
  }

  for (Index k = 0; k < total; ++k) {
    // Draws first, per node, in a fixed order.
    std::vector<Vector> eps(m);
    for (std::size_t i = 0; i < m; ++i) {
      const auto& node = sys.nodes[i];
      auto& rng = rngs[i];
      auto& normal = normals[i];
      eps[i].resize(v[i].cols());
      for (Index c = 0; c < eps[i].size(); ++c) eps[i](c) = node.dlv_noise_std * normal(rng);
      for (Index c = 0; c < ebar[i].cols(); ++c) ebar[i](k, c) = node.static_noise_std * normal(rng);
      if (const auto* white = std::get_if<WhiteNoiseInput>(&policy)) {
        for (Index c = 0; c < u[i].cols(); ++c) u[i](k, c) = white->std * normal(rng);
      } else if (const auto* provided = std::get_if<ProvidedInput>(&policy)) {
        if (k >= burn) u[i].row(k) = provided->inputs[i].row(k - burn);
      }
    }
    for (std::size_t i = 0; i < m; ++i) {
      const auto& spec = topo.nodes[i];
      const auto& node = sys.nodes[i];
      Vector next = eps[i];
      if (k >= s) {
        for (std::size_t h = 1; h <= spec.order; ++h) {
          const Index lag = k - static_cast<Index>(h);
          next += node.ar[h - 1] * v[i].row(lag).transpose();
          if (u[i].cols() > 0) next += node.input[h - 1] * u[i].row(lag).transpose();
          for (std::size_t n = 0; n < spec.neighbors.size(); ++n) {
            next += node.cross[n][h - 1] * v[spec.neighbors[n]].row(lag).transpose();
          }
        }
      }
      v[i].row(k) = next.transpose();
    }
    for (std::size_t i = 0; i < m; ++i) {
      const auto& node = sys.nodes[i];
      Vector yk = node.loadings * v[i].row(k).transpose();
      if (ebar[i].cols() > 0) yk += node.static_loadings * ebar[i].row(k).transpose();
      y[i].row(k) = yk.transpose();
    }
  }

  Trajectory traj;
  for (std::size_t i = 0; i < m; ++i) {
    traj.outputs.push_back(y[i].bottomRows(samples));
    traj.dlvs.push_back(v[i].bottomRows(samples));
    traj.inputs.push_back(u[i].bottomRows(samples));
    traj.static_noise.push_back(ebar[i].bottomRows(samples));
  }
  return traj;
}

inline Trajectory simulate(const GroundTruthSystem& sys, Index samples, const InputPolicy& policy,
                           std::uint64_t seed) {
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < sys.topology.node_count(); ++i) seeds.push_back(node_seed(seed, i));
  return simulate_with_node_seeds(sys, samples, policy, seeds);
}

/// Wraps a trajectory as a dataset; node names default to N1, N2, ...
inline TimeSeriesDataset to_dataset(const Trajectory& traj, const std::vector<std::string>& node_names = {}) {
  std::vector<NodeSeries> nodes;
  for (std::size_t i = 0; i < traj.outputs.size(); ++i) {
    NodeSeries n;
    n.name = i < node_names.size() ? node_names[i] : "N" + std::to_string(i + 1);
    n.outputs = traj.outputs[i];
    n.inputs = traj.inputs[i];
    nodes.push_back(std::move(n));
  }
  return TimeSeriesDataset(std::move(nodes));
}

// ---------------------------------------------------------------------------
// Ground-truth sidecar document

inline io::Json topology_to_json(const NetworkTopology& topo) {
  io::Json nodes = io::Json::array();
  for (const auto& n : topo.nodes) {
    nodes.push_back({{"l", n.dlv_count}, {"s", n.order}, {"neighbors", n.neighbors}});
  }
  return nodes;
}

inline NetworkTopology topology_from_json(const io::Json& j) {
  NetworkTopology topo;
  for (const auto& e : j) {
    NodeSpec spec;
    spec.dlv_count = e.at("l").get<std::size_t>();
    spec.order = e.at("s").get<std::size_t>();
    spec.neighbors = e.at("neighbors").get<std::vector<std::size_t>>();
    topo.nodes.push_back(std::move(spec));
  }
  return topo;
}

inline io::Json system_to_json(const GroundTruthSystem& sys) {
  io::Json nodes = io::Json::array();
  for (const auto& n : sys.nodes) {
    io::Json cross = io::Json::array();
    for (const auto& lags : n.cross) cross.push_back(io::matrices_to_json(lags));
    nodes.push_back({{"P", io::matrix_to_json(n.loadings)},
                     {"P_static", io::matrix_to_json(n.static_loadings)},
                     {"A", io::matrices_to_json(n.ar)},
                     {"B", io::matrices_to_json(n.input)},
                     {"C", std::move(cross)},
                     {"dlv_noise_std", n.dlv_noise_std},
                     {"static_noise_std", n.static_noise_std}});
  }
  return {{"format", "netlavarx-ground-truth"},
          {"version", 1},
          {"topology", topology_to_json(sys.topology)},
          {"companion_spectral_radius", spectral_radius(companion_matrix(sys))},
          {"nodes", std::move(nodes)}};
}

inline GroundTruthSystem system_from_json(const io::Json& j) {
  GroundTruthSystem sys;
  sys.topology = topology_from_json(j.at("topology"));
  for (const auto& e : j.at("nodes")) {
    TrueNode n;
    n.loadings = io::matrix_from_json(e.at("P"));
    n.static_loadings = io::matrix_from_json(e.at("P_static"));
    n.ar = io::matrices_from_json(e.at("A"));
    n.input = io::matrices_from_json(e.at("B"));
    for (const auto& lags : e.at("C")) n.cross.push_back(io::matrices_from_json(lags));
    n.dlv_noise_std = e.at("dlv_noise_std").get<double>();
    n.static_noise_std = e.at("static_noise_std").get<double>();
    sys.nodes.push_back(std::move(n));
  }
  return sys;
}

}  // namespace netlavarx
