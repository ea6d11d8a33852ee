#include <gtest/gtest.h>

#include <functional>
#include <random>

#include "netlavarx/data.hpp"
#include "netlavarx/io.hpp"
#include "netlavarx/partition.hpp"

using namespace netlavarx;

namespace {

Matrix random_matrix(Index rows, Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(3.0, 2.0);
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  }
  return m;
}

NodeSeries series(std::string name, Matrix y, Matrix u = Matrix()) {
  NodeSeries n;
  n.name = std::move(name);
  n.outputs = std::move(y);
  n.inputs = u.size() ? std::move(u) : Matrix(n.outputs.rows(), 0);
  return n;
}

TimeSeriesDataset three_nodes(Index rows) {
  return TimeSeriesDataset({series("a", random_matrix(rows, 4, 1), random_matrix(rows, 1, 2)),
                            series("b", random_matrix(rows, 3, 3), random_matrix(rows, 2, 4)),
                            series("c", random_matrix(rows, 2, 5))});
}

void fill_dlvs(ShiftedMatrices& shifted, const NetworkTopology& topo) {
  for (std::size_t i = 0; i < topo.node_count(); ++i) {
    const Index p = shifted.outputs[i][0].cols();
    shifted.set_dlvs(i, Matrix::Identity(p, static_cast<Index>(topo.nodes[i].dlv_count)));
  }
}

double max_abs(const Matrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::InvalidInput;
}

}  // namespace

TEST(Dataset, ValidatesShapesAndNames) {
  const TimeSeriesDataset d = three_nodes(10);
  EXPECT_EQ(d.node_count(), 3u);
  EXPECT_EQ(d.rows(), 10);
  EXPECT_EQ(d.node(0).output_names.front(), "a_y1");
  EXPECT_EQ(d.node(1).input_names.back(), "b_u2");
  EXPECT_EQ(kind_of([] { TimeSeriesDataset({series("x", Matrix::Ones(4, 2)), series("y", Matrix::Ones(5, 2))}); }),
            ErrorKind::ShapeMismatch);
  EXPECT_EQ(kind_of([] { TimeSeriesDataset({series("x", Matrix(4, 0))}); }), ErrorKind::InvalidInput);
  Matrix bad = Matrix::Ones(4, 2);
  bad(2, 1) = std::nan("");
  EXPECT_EQ(kind_of([&] { TimeSeriesDataset({series("x", bad)}); }), ErrorKind::InvalidInput);
}

TEST(Dataset, SliceKeepsRows) {
  const TimeSeriesDataset d = three_nodes(10);
  const TimeSeriesDataset s = d.slice(3, 4);
  EXPECT_EQ(s.rows(), 4);
  EXPECT_EQ(s.node(1).outputs, d.node(1).outputs.middleRows(3, 4));
  EXPECT_THROW(d.slice(8, 4), Error);
}

TEST(Topology, Invariants) {
  NetworkTopology t = NetworkTopology::fully_connected({2, 1, 1}, {2, 3, 1});
  EXPECT_EQ(t.max_order(), 3u);
  EXPECT_EQ(t.total_dlvs(), 4u);
  EXPECT_EQ(t.nodes[1].neighbors, (std::vector<std::size_t>{0, 2}));
  EXPECT_NO_THROW(t.validate({4, 3, 2}));
  EXPECT_THROW(t.validate({1, 3, 2}), Error);  // l > p
  NetworkTopology self = t;
  self.nodes[0].neighbors = {0, 1};
  EXPECT_THROW(self.validate(), Error);
  NetworkTopology zero_order = t;
  zero_order.nodes[2].order = 0;
  EXPECT_THROW(zero_order.validate(), Error);
  NetworkTopology zero_l = t;
  zero_l.nodes[2].dlv_count = 0;
  EXPECT_THROW(zero_l.validate(), Error);
  NetworkTopology out_of_range = t;
  out_of_range.nodes[0].neighbors = {1, 5};
  EXPECT_THROW(out_of_range.validate(), Error);
}

TEST(Standardize, SimpleColumn) {
  Matrix y(3, 1);
  y << 1, 2, 3;
  auto [z, scaler] = standardize(TimeSeriesDataset({series("n", y)}));
  EXPECT_NEAR(z.node(0).outputs(0, 0), -1.0, 1e-15);
  EXPECT_NEAR(z.node(0).outputs(1, 0), 0.0, 1e-15);
  EXPECT_NEAR(z.node(0).outputs(2, 0), 1.0, 1e-15);
  EXPECT_DOUBLE_EQ(scaler.node(0).outputs.mean(0), 2.0);
  EXPECT_DOUBLE_EQ(scaler.node(0).outputs.std(0), 1.0);
}

TEST(Standardize, ZeroMeanUnitVariance) {
  auto [z, scaler] = standardize(three_nodes(200));
  for (const auto& n : z.nodes()) {
    for (const Matrix* m : {&n.outputs, &n.inputs}) {
      for (Index c = 0; c < m->cols(); ++c) {
        EXPECT_LT(std::abs(column_mean(m->col(c))), 1e-10);
        EXPECT_LT(std::abs(sample_variance(m->col(c)) - 1.0), 1e-10);
      }
    }
  }
}

TEST(Standardize, Idempotent) {
  auto [z, s1] = standardize(three_nodes(50));
  auto [z2, s2] = standardize(z);
  for (std::size_t i = 0; i < z.node_count(); ++i) {
    EXPECT_LT(max_abs(z2.node(i).outputs - z.node(i).outputs), 1e-10);
    EXPECT_LT(max_abs(z2.node(i).inputs - z.node(i).inputs), 1e-10);
  }
}

TEST(Standardize, RoundTrip) {
  const TimeSeriesDataset d = three_nodes(40);
  auto [z, scaler] = standardize(d);
  const TimeSeriesDataset back = scaler.inverse(z);
  for (std::size_t i = 0; i < d.node_count(); ++i) {
    EXPECT_LT(max_abs(back.node(i).outputs - d.node(i).outputs), 1e-10);
    EXPECT_LT(max_abs(back.node(i).inputs - d.node(i).inputs), 1e-10);
    EXPECT_LT(max_abs(scaler.inverse_outputs(i, z.node(i).outputs) - d.node(i).outputs), 1e-10);
  }
}

TEST(Standardize, AppliesTrainingStatisticsToNewRows) {
  const TimeSeriesDataset d = three_nodes(100);
  const Standardizer s = Standardizer::fit(d.slice(0, 60));
  const TimeSeriesDataset test = s.transform(d.slice(60, 40));
  const auto& c = s.node(0).outputs;
  EXPECT_NEAR(test.node(0).outputs(0, 0), (d.node(0).outputs(60, 0) - c.mean(0)) / c.std(0), 1e-14);
}

TEST(Standardize, ConstantColumnNamed) {
  Matrix y(3, 2);
  y << 5, 1, 5, 2, 5, 3;
  NodeSeries n = series("n", y);
  n.output_names = {"flow", "temp"};
  try {
    standardize(TimeSeriesDataset({n}));
    FAIL() << "expected ConstantColumn";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ConstantColumn);
    EXPECT_NE(std::string(e.what()).find("flow"), std::string::npos);
  }
}

TEST(BuildShifted, DefinitionExample) {
  Matrix y(4, 1);
  y << 1, 2, 3, 4;
  NetworkTopology t;
  t.nodes.push_back({1, 1, {}});
  const ShiftedMatrices sh = build_shifted(TimeSeriesDataset({series("n", y)}), t);
  EXPECT_EQ(sh.samples, 3);
  ASSERT_EQ(sh.outputs[0].size(), 2u);
  EXPECT_EQ(sh.outputs[0][0], (Matrix(3, 1) << 1, 2, 3).finished());
  EXPECT_EQ(sh.outputs[0][1], (Matrix(3, 1) << 2, 3, 4).finished());
}

TEST(BuildShifted, Guards) {
  Matrix y = Matrix::Random(3, 2);
  NetworkTopology zero;
  zero.nodes.push_back({1, 0, {}});
  EXPECT_EQ(kind_of([&] { build_shifted(TimeSeriesDataset({series("n", y)}), zero); }), ErrorKind::InsufficientData);
  NetworkTopology two;
  two.nodes.push_back({1, 2, {}});
  EXPECT_EQ(kind_of([&] { build_shifted(TimeSeriesDataset({series("n", y)}), two); }), ErrorKind::InsufficientData);
  NetworkTopology one;
  one.nodes.push_back({1, 1, {}});
  EXPECT_NO_THROW(build_shifted(TimeSeriesDataset({series("n", y)}), one));
}

TEST(BuildShifted, ShiftConsistency) {
  const TimeSeriesDataset d = three_nodes(30);
  const NetworkTopology t = NetworkTopology::fully_connected({1, 1, 1}, {3, 2, 1});
  const ShiftedMatrices sh = build_shifted(d, t);
  EXPECT_EQ(sh.samples, 27);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j <= 3; ++j) {
      EXPECT_EQ(sh.outputs[i][j].rows(), 27);
      EXPECT_EQ(sh.outputs[i][j], d.node(i).outputs.middleRows(static_cast<Index>(j), 27));
      if (j > 0) {
        EXPECT_EQ(sh.outputs[i][j].topRows(26), sh.outputs[i][j - 1].bottomRows(26));
        EXPECT_EQ(sh.inputs[i][j].topRows(26), sh.inputs[i][j - 1].bottomRows(26));
      }
    }
  }
}

TEST(BuildAugmented, OwnLagOrderingAndShape) {
  NodeSeries n = series("n", random_matrix(20, 4, 9));
  NetworkTopology t;
  t.nodes.push_back({3, 2, {}});
  ShiftedMatrices sh = build_shifted(TimeSeriesDataset({n}), t);
  fill_dlvs(sh, t);
  const AugmentedBlocks b = build_augmented(sh, t, 0);
  ASSERT_EQ(b.own_dlv.cols(), 6);
  EXPECT_EQ(b.own_dlv.leftCols(3), sh.dlvs[0][1]);   // lag 1
  EXPECT_EQ(b.own_dlv.rightCols(3), sh.dlvs[0][0]);  // lag 2
  EXPECT_EQ(b.own_input.cols(), 0);
  EXPECT_EQ(b.own_input.rows(), 18);
  EXPECT_TRUE(b.neighbor_dlv.empty());
}

TEST(BuildAugmented, NeighborBlocksUseReceiverOrder) {
  const TimeSeriesDataset d = three_nodes(25);
  const NetworkTopology t = NetworkTopology::fully_connected({2, 2, 1}, {1, 3, 2});
  ShiftedMatrices sh = build_shifted(d, t);
  fill_dlvs(sh, t);
  for (std::size_t i = 0; i < 3; ++i) {
    const AugmentedBlocks b = build_augmented(sh, t, i);
    const Index si = static_cast<Index>(t.nodes[i].order);
    Index cols = b.own_dlv.cols() + b.own_input.cols();
    Index expected = si * static_cast<Index>(t.nodes[i].dlv_count) + si * d.node(i).input_dim();
    for (const auto& [j, m] : b.neighbor_dlv) {
      EXPECT_EQ(m.cols(), si * static_cast<Index>(t.nodes[j].dlv_count));
      EXPECT_EQ(m.leftCols(static_cast<Index>(t.nodes[j].dlv_count)), sh.dlvs[j][3 - 1]);
      cols += m.cols();
      expected += si * static_cast<Index>(t.nodes[j].dlv_count);
    }
    EXPECT_EQ(cols, expected);
    ASSERT_EQ(b.neighbor_dlv.size(), 2u);
    EXPECT_LT(b.neighbor_dlv[0].first, b.neighbor_dlv[1].first);
  }
}

TEST(BuildAugmented, MissingDlvsReported) {
  const TimeSeriesDataset d = three_nodes(20);
  const NetworkTopology t = NetworkTopology::fully_connected({1, 1, 1}, {1, 1, 1});
  ShiftedMatrices sh = build_shifted(d, t);
  EXPECT_EQ(kind_of([&] { build_augmented(sh, t, 0); }), ErrorKind::DependencyNotReady);
  sh.set_dlvs(0, Matrix::Identity(4, 1));
  EXPECT_EQ(kind_of([&] { build_augmented(sh, t, 0); }), ErrorKind::DependencyNotReady);
}

TEST(Csv, ParseAndFormatRoundTrip) {
  const std::string text = "time,\"a,b\",c\n0,1.5,-2\n1,0.1,3e-04\n";
  const io::CsvTable t = io::parse_csv(text);
  ASSERT_EQ(t.header.size(), 3u);
  EXPECT_EQ(t.header[1], "a,b");
  EXPECT_EQ(t.row_labels[1], "1");
  EXPECT_DOUBLE_EQ(t.values(1, 1), 3e-4);
  EXPECT_EQ(t.find("c").value(), 1);
  EXPECT_FALSE(t.find("time").has_value());
  EXPECT_EQ(io::format_csv(t), text);
}

TEST(Csv, DoublesRoundTripExactly) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int k = 0; k < 1000; ++k) {
    const double v = u(rng) / 3.0;
    EXPECT_EQ(io::parse_double(io::format_double(v), "test"), v);
  }
}

TEST(Csv, Errors) {
  EXPECT_THROW(io::parse_csv(""), Error);
  EXPECT_THROW(io::parse_csv("t,a\n0,1,2\n"), Error);
  try {
    io::parse_csv("t,a\n0,abc\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidFormat);
  }
  const io::CsvTable crlf = io::parse_csv("t,a\r\n0,1\r\n1,2\r\n");
  EXPECT_EQ(crlf.values.rows(), 2);
  EXPECT_EQ(crlf.header[1], "a");
}

TEST(Partition, DefaultNeighborsAreAllOtherNodes) {
  const PartitionConfig cfg = parse_partition(R"({"nodes": [
    {"name": "r", "outputs": ["y1", "y2"], "inputs": ["u1"], "l": 1, "s": 2},
    {"name": "s", "outputs": ["y3"], "l": 1, "s": 1},
    {"name": "t", "outputs": ["y4", "y5"], "neighbors": ["r"], "l": 2, "s": 1}]})");
  const NetworkTopology topo = topology_from_partition(cfg);
  EXPECT_EQ(topo.nodes[0].neighbors, (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(topo.nodes[1].neighbors, (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(topo.nodes[2].neighbors, (std::vector<std::size_t>{0}));
  EXPECT_EQ(topo.nodes[0].order, 2u);
}

TEST(Partition, NeighborsByNumberAndOverrides) {
  const PartitionConfig cfg = parse_partition(R"({"nodes": [
    {"name": "a", "outputs": ["x"], "neighbors": [3, 2]},
    {"name": "b", "outputs": ["y"], "neighbors": []},
    {"name": "c", "outputs": ["z"]}]})");
  const NetworkTopology topo = topology_from_partition(cfg, {1}, {2, 1, 3});
  EXPECT_EQ(topo.nodes[0].neighbors, (std::vector<std::size_t>{1, 2}));
  EXPECT_TRUE(topo.nodes[1].neighbors.empty());
  EXPECT_EQ(topo.nodes[2].order, 3u);
  EXPECT_EQ(topo.nodes[1].dlv_count, 1u);
  EXPECT_THROW(topology_from_partition(cfg), Error);  // l and s missing
  EXPECT_THROW(topology_from_partition(cfg, {1, 1}, {1}), Error);
}

TEST(Partition, Errors) {
  EXPECT_EQ(kind_of([] { parse_partition("{"); }), ErrorKind::ConfigError);
  EXPECT_EQ(kind_of([] { parse_partition(R"({"nodes": []})"); }), ErrorKind::ConfigError);
  EXPECT_EQ(kind_of([] { parse_partition(R"({"nodes": [{"name": "a"}]})"); }), ErrorKind::ConfigError);
  EXPECT_EQ(kind_of([] {
              parse_partition(R"({"nodes": [{"name": "a", "outputs": ["x"]}, {"name": "a", "outputs": ["y"]}]})");
            }),
            ErrorKind::ConfigError);
  const PartitionConfig cfg =
      parse_partition(R"({"nodes": [{"name": "a", "outputs": ["x"], "neighbors": ["nope"], "l": 1, "s": 1}]})");
  EXPECT_EQ(kind_of([&] { topology_from_partition(cfg); }), ErrorKind::ConfigError);
}

TEST(Partition, DatasetFromTableAndMissingColumn) {
  const io::CsvTable table = io::parse_csv("t,y1,y2,u1,y3\n0,1,2,3,4\n1,5,6,7,8\n2,9,1,2,3\n");
  const PartitionConfig cfg = parse_partition(R"({"nodes": [
    {"name": "a", "outputs": ["y2", "y1"], "inputs": ["u1"]},
    {"name": "b", "outputs": ["y3"]}]})");
  const TimeSeriesDataset d = dataset_from_table(table, cfg);
  EXPECT_EQ(d.node(0).outputs(1, 0), 6.0);
  EXPECT_EQ(d.node(0).outputs(1, 1), 5.0);
  EXPECT_EQ(d.node(0).inputs(2, 0), 2.0);
  EXPECT_EQ(d.node(1).output_names.front(), "y3");

  const PartitionConfig bad = parse_partition(R"({"nodes": [{"name": "a", "outputs": ["y1", "pressure"]}]})");
  try {
    dataset_from_table(table, bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ConfigError);
    EXPECT_NE(std::string(e.what()).find("pressure"), std::string::npos);
  }
}

TEST(Partition, JsonRoundTrip) {
  const PartitionConfig cfg = parse_partition(R"({"nodes": [
    {"name": "a", "outputs": ["x"], "inputs": ["u"], "neighbors": ["b"], "l": 1, "s": 2},
    {"name": "b", "outputs": ["y", "z"]}]})");
  const PartitionConfig back = partition_from_json(partition_to_json(cfg));
  EXPECT_EQ(partition_to_json(back).dump(), partition_to_json(cfg).dump());
}
