#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "netlavarx/evaluation.hpp"
#include "support.hpp"

using namespace netlavarx;
using nlx_test::max_abs;

namespace {

Matrix column(std::initializer_list<double> values) {
  Matrix m(static_cast<Index>(values.size()), 1);
  Index k = 0;
  for (double v : values) m(k++, 0) = v;
  return m;
}

Matrix gaussian(Index rows, Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  }
  return m;
}

SystemSpec input_driven_spec() {
  SystemSpec spec = nlx_test::reference_spec(0.0);
  spec.dlv_noise_std = {0.0, 0.0, 0.0};
  return spec;
}

}  // namespace

TEST(Metrics, HandComputedExample) {
  const MetricsReport r = compute_metrics(column({1, 2, 3, 4}), column({1, 2, 3, 5}));
  ASSERT_EQ(r.columns.size(), 1u);
  const auto& c = r.columns[0];
  EXPECT_DOUBLE_EQ(c.rmse, 0.5);
  EXPECT_DOUBLE_EQ(c.mae, 0.25);
  EXPECT_NEAR(*c.r2, 0.8, 1e-15);
  EXPECT_NEAR(*c.corr, 6.5 / std::sqrt(43.75), 1e-15);
  EXPECT_DOUBLE_EQ(r.pooled.rmse, 0.5);
}

TEST(Metrics, PerfectAndMeanPredictions) {
  const Matrix a = column({2, -1, 4, 0.5});
  const MetricsReport perfect = compute_metrics(a, a);
  EXPECT_EQ(*perfect.pooled.r2, 1.0);
  EXPECT_EQ(perfect.pooled.rmse, 0.0);
  const MetricsReport mean = compute_metrics(a, Matrix::Constant(4, 1, a.mean()));
  EXPECT_NEAR(*mean.pooled.r2, 0.0, 1e-15);
  EXPECT_FALSE(mean.pooled.corr.has_value());
}

TEST(Metrics, ConstantActualColumnUndefined) {
  Matrix a(4, 2), p(4, 2);
  a << 1, 1, 2, 1, 3, 1, 4, 1;
  p << 1, 0, 2, 2, 3, 1, 5, 1;
  const MetricsReport r = compute_metrics(a, p);
  EXPECT_TRUE(r.columns[0].r2.has_value());
  EXPECT_FALSE(r.columns[1].r2.has_value());
  EXPECT_FALSE(r.columns[1].corr.has_value());
  // Pooled R2 skips the undefined column but RMSE averages both.
  EXPECT_NEAR(*r.pooled.r2, *r.columns[0].r2, 1e-15);
  EXPECT_NEAR(r.pooled.rmse, 0.5 * (r.columns[0].rmse + r.columns[1].rmse), 1e-15);
}

TEST(Metrics, Properties) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const Matrix a = gaussian(50, 3, seed);
    const Matrix p = a + 0.5 * gaussian(50, 3, seed + 1000);
    const MetricsReport r = compute_metrics(a, p);
    for (const auto& c : r.columns) {
      EXPECT_GE(c.rmse + 1e-15, c.mae);
      EXPECT_LE(*c.r2, 1.0);
      EXPECT_LE(std::abs(*c.corr), 1.0);
      const Vector col = a.col(c.column);
      const double var_pop = (col.array() - col.mean()).square().mean();
      EXPECT_NEAR(*c.r2, 1.0 - c.rmse * c.rmse / var_pop, 1e-12);
    }
    // Row permutation leaves every metric unchanged.
    Eigen::PermutationMatrix<Eigen::Dynamic> perm(50);
    perm.setIdentity();
    std::mt19937_64 rng(seed);
    std::shuffle(perm.indices().data(), perm.indices().data() + 50, rng);
    const MetricsReport q = compute_metrics(Matrix(perm * a), Matrix(perm * p));
    EXPECT_NEAR(q.pooled.rmse, r.pooled.rmse, 1e-12);
    EXPECT_NEAR(q.pooled.mae, r.pooled.mae, 1e-12);
    EXPECT_NEAR(*q.pooled.r2, *r.pooled.r2, 1e-12);
    EXPECT_NEAR(*q.pooled.corr, *r.pooled.corr, 1e-12);
  }
}

TEST(Metrics, ShapeAndLengthChecks) {
  EXPECT_THROW(compute_metrics(Matrix::Ones(4, 2), Matrix::Ones(4, 1)), Error);
  try {
    compute_metrics(Matrix::Ones(1, 1), Matrix::Ones(1, 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InsufficientData);
  }
}

TEST(Predict, TrueModelWithoutNoiseIsExact) {
  GroundTruthSystem truth;
  const TimeSeriesDataset data = nlx_test::simulate_dataset(input_driven_spec(), 51, 300, &truth);
  const NetLavarxModel model = nlx_test::model_from_truth(truth, data);
  const PredictionResult pred = predict_one_step(model, data);
  EXPECT_EQ(pred.first_row, 2);
  for (std::size_t i = 0; i < 3; ++i) {
    ASSERT_EQ(pred.nodes[i].predicted_outputs.rows(), 298);
    const double scale = 1.0 + max_abs(pred.nodes[i].actual_outputs);
    EXPECT_LT(max_abs(pred.nodes[i].predicted_outputs - pred.nodes[i].actual_outputs), 1e-10 * scale);
  }
  const MetricsReport r = output_metrics(pred);
  EXPECT_LT(r.pooled.rmse, 1e-10);
}

TEST(Predict, ZeroCoefficientsPredictZero) {
  const TimeSeriesDataset raw = nlx_test::simulate_dataset(nlx_test::reference_spec(), 52, 300);
  NetLavarxModel model = fit(raw, nlx_test::reference_spec().topology);
  for (auto& n : model.nodes) {
    for (auto& m : n.ar) m.setZero();
    for (auto& m : n.input) m.setZero();
    for (auto& nb : n.cross) {
      for (auto& m : nb) m.setZero();
    }
  }
  const PredictionResult pred = predict_one_step(model, model.standardizer.transform(raw));
  for (const auto& n : pred.nodes) EXPECT_EQ(max_abs(n.predicted_outputs), 0.0);
}

TEST(Predict, ShapeChecks) {
  const TimeSeriesDataset raw = nlx_test::simulate_dataset(nlx_test::reference_spec(), 53, 200);
  const NetLavarxModel model = fit(raw, nlx_test::reference_spec().topology);
  EXPECT_THROW(predict_one_step(model, raw.slice(0, 2)), Error);
  EXPECT_NO_THROW(predict_one_step(model, raw.slice(0, 3)));
  const TimeSeriesDataset fewer({raw.node(0), raw.node(1)});
  EXPECT_THROW(predict_one_step(model, fewer), Error);
  const TimeSeriesDataset other = nlx_test::simulate_dataset(nlx_test::reference_spec(0.05, 2), 54, 200);
  EXPECT_THROW(predict_one_step(model, other), Error);
}

TEST(Predict, OriginalUnitsInvertScaling) {
  const TimeSeriesDataset raw = nlx_test::simulate_dataset(nlx_test::reference_spec(), 55, 300);
  const NetLavarxModel model = fit(raw, nlx_test::reference_spec().topology);
  const PredictionResult std_pred = predict_one_step(model, model.standardizer.transform(raw));
  const PredictionResult orig = to_original_units(std_pred, model.standardizer);
  EXPECT_FALSE(orig.standardized);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& st = model.standardizer.node(i).outputs;
    EXPECT_LT(max_abs(orig.nodes[i].actual_outputs - raw.node(i).outputs.bottomRows(298)), 1e-12);
    const Matrix expected = (std_pred.nodes[i].predicted_outputs * st.std.asDiagonal()).rowwise() +
                            st.mean.transpose();
    EXPECT_LT(max_abs(orig.nodes[i].predicted_outputs - expected), 1e-12);
  }
  // Idempotent once converted.
  EXPECT_EQ(max_abs(to_original_units(orig, model.standardizer).nodes[0].predicted_outputs -
                    orig.nodes[0].predicted_outputs),
            0.0);
}

TEST(Predict, NoiseFreeTrainingFitNearPerfect) {
  const TimeSeriesDataset raw = nlx_test::simulate_dataset(input_driven_spec(), 56, 600);
  const NetLavarxModel model = fit(raw, nlx_test::reference_spec().topology);
  EXPECT_GT(model.diagnostics.training_r2, 0.999);
  const MetricsReport r = output_metrics(predict_one_step(model, model.standardizer.transform(raw)));
  EXPECT_NEAR(*r.pooled.r2, model.diagnostics.training_r2, 1e-12);
}

TEST(Reconstruct, RecoversLatentPart) {
  const SystemSpec spec = nlx_test::reference_spec(0.5);
  const GroundTruthSystem sys = generate_system(spec, 57, 0.9);
  const Trajectory traj = simulate(sys, 200, WhiteNoiseInput{1.0}, 58);
  const TimeSeriesDataset data = to_dataset(traj);
  const NetLavarxModel model = nlx_test::model_from_truth(sys, data);
  const std::vector<Matrix> rec = reconstruct(model, data);
  for (std::size_t i = 0; i < 3; ++i) {
    const Matrix latent = traj.dlvs[i] * sys.nodes[i].loadings.transpose();
    EXPECT_LT(max_abs(rec[i] - latent), 1e-10 * (1.0 + max_abs(latent)));
    // The reconstruction lies in range(P).
    const Matrix residual = rec[i] - rec[i] * nlx_test::oracle_pinv(sys.nodes[i].loadings).transpose() *
                                         sys.nodes[i].loadings.transpose();
    EXPECT_LT(max_abs(residual), 1e-9 * (1.0 + max_abs(rec[i])));
  }
  std::vector<NodeSeries> again;
  for (std::size_t i = 0; i < 3; ++i) {
    NodeSeries n = data.node(i);
    n.outputs = rec[i];
    again.push_back(n);
  }
  const std::vector<Matrix> twice = reconstruct(model, TimeSeriesDataset(again));
  for (std::size_t i = 0; i < 3; ++i) EXPECT_LT(max_abs(twice[i] - rec[i]), 1e-9 * (1.0 + max_abs(rec[i])));
}

TEST(Reconstruct, FullLatentDimensionIsIdentity) {
  const TimeSeriesDataset raw = nlx_test::simulate_dataset(nlx_test::reference_spec(0.3), 59, 300);
  const NetLavarxModel model = fit(raw, NetworkTopology::fully_connected({8, 8, 6}, {1, 1, 1}));
  const TimeSeriesDataset z = model.standardizer.transform(raw);
  const std::vector<Matrix> rec = reconstruct(model, z);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_LT(max_abs(rec[i] - z.node(i).outputs), 1e-9);
}
