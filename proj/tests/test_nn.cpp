/* Copyright 2026 The dwv Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#include <algorithm>
#include <cmath>

#include <Eigen/QR>
#include <gtest/gtest.h>

#include "dwv/nn.hpp"
#include "dwv/train.hpp"
#include "test_util.hpp"

namespace dwv {
namespace {

Mat batch_of(const LabeledDataset& ds, std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  return ds.batch(idx);
}

TEST(Classifier, SeededInitAndShapes) {
  const ImageShape s{3, 16, 16};
  const auto a = ClassifierModel::build("smallcnn", 3, s, 5);
  const auto b = ClassifierModel::build("smallcnn", 3, s, 5);
  EXPECT_EQ(a.params(), b.params());
  EXPECT_NE(a.params(), ClassifierModel::build("smallcnn", 3, s, 6).params());
  const auto ds = test::tiny_dataset(7, 1);
  for (std::size_t n : {1u, 7u}) {
    const Mat x = batch_of(ds, n);
    EXPECT_EQ(a.forward(x).rows(), static_cast<Eigen::Index>(n));
    EXPECT_EQ(a.forward(x).cols(), 3);
    EXPECT_EQ(a.features(x).cols(), a.feature_dim());
  }
  EXPECT_THROW(ClassifierModel::build("resnet", 3, s, 1), Error);
}

TEST(Classifier, ArchitectureParameterCountsAreFixed) {
  const ImageShape s{3, 16, 16};
  const auto a = ClassifierModel::build("smallcnn", 3, s, 1);
  const auto b = ClassifierModel::build("smallcnn2", 3, s, 1);
  // conv3x3 3->8, conv3x3 8->16, pool, linear 256->32, linear 32->3.
  const std::size_t small = (8 * 3 * 9 + 8) + (16 * 8 * 9 + 16) + (16 * 4 * 4 * 32 + 32) + (32 * 3 + 3);
  EXPECT_EQ(a.param_count(), small) << "layout changed";
  EXPECT_NE(a.param_count(), b.param_count());
  EXPECT_EQ(a.feature_dim(), 32);
  EXPECT_EQ(b.feature_dim(), 48);
}

TEST(Classifier, SoftmaxRowsSumToOne) {
  const auto ds = test::tiny_dataset(12, 2);
  const auto m = ClassifierModel::build("smallcnn", 3, ds.shape, 3);
  const Mat p = m.probabilities(ds.all());
  for (Eigen::Index r = 0; r < p.rows(); ++r) EXPECT_NEAR(p.row(r).sum(), 1.0, 1e-5);
}

TEST(Classifier, FeaturesDeterministicPerRow) {
  const auto ds = test::tiny_dataset(4, 2);
  const auto m = ClassifierModel::build("smallcnn", 3, ds.shape, 3);
  Mat x = ds.all();
  x.row(2) = x.row(0);
  const Mat f = m.features(x);
  EXPECT_EQ(f.row(0), f.row(2));
  EXPECT_EQ(f, m.features(x));
}

double loss_at(const ClassifierModel& m, const Mat& x, std::span<const int> y) {
  return softmax_cross_entropy(m.forward(x), y);
}

TEST(Classifier, ParameterAndInputGradientsMatchFiniteDifferences) {
  const auto ds = test::tiny_dataset(5, 3);
  ClassifierModel m = ClassifierModel::build("smallcnn", 3, ds.shape, 4);
  const Mat x = ds.all();
  ForwardTape tape;
  Mat dl;
  softmax_cross_entropy(m.forward(x, &tape), ds.labels, &dl);
  std::vector<float> g(m.param_count(), 0.0f);
  Mat dx;
  m.backward(tape, &dl, nullptr, g.data(), &dx);
  // Small enough that a probe rarely crosses a ReLU or max-pool switch.
  const float h = 3e-3f;
  Rng rng(1);
  for (int t = 0; t < 30; ++t) {
    const std::size_t i = rng.below(m.param_count());
    const float keep = m.params()[i];
    m.params()[i] = keep + h;
    const double up = loss_at(m, x, ds.labels);
    m.params()[i] = keep - h;
    const double dn = loss_at(m, x, ds.labels);
    m.params()[i] = keep;
    const double fd = (up - dn) / (2 * h);
    EXPECT_NEAR(g[i], fd, 2e-3 + 0.05 * std::abs(fd)) << "param " << i;
  }
  for (int t = 0; t < 20; ++t) {
    const auto i = static_cast<Eigen::Index>(rng.below(static_cast<std::size_t>(x.size())));
    Mat xp = x, xm = x;
    xp.data()[i] += h, xm.data()[i] -= h;
    const double fd = (loss_at(m, xp, ds.labels) - loss_at(m, xm, ds.labels)) / (2 * h);
    EXPECT_NEAR(dx.data()[i], fd, 2e-3 + 0.05 * std::abs(fd)) << "pixel " << i;
  }
}

// d/dx <v, grad_w CE(x)>, checked against central differences of the
// parameter gradient itself.
TEST(Classifier, DirectionalInputGradientMatchesFiniteDifferences) {
  const auto ds = test::tiny_dataset(4, 5);
  const auto m = test::trained_tiny_model(ds, 2, 2);
  const Mat x = ds.all();
  Rng rng(3);
  std::vector<float> v(m.param_count());
  for (auto& e : v) e = static_cast<float>(rng.normal());
  const auto inner = [&](const Mat& xx) {
    ForwardTape tape;
    Mat dl;
    softmax_cross_entropy(m.forward(xx, &tape), ds.labels, &dl);
    std::vector<float> g(m.param_count(), 0.0f);
    m.backward(tape, &dl, nullptr, g.data(), nullptr);
    double s = 0;
    for (std::size_t i = 0; i < g.size(); ++i) s += double(g[i]) * v[i];
    return s;
  };
  const Mat gx = m.input_grad_directional(x, ds.labels, v);
  ASSERT_EQ(gx.rows(), x.rows());
  // The derivative exists almost everywhere; a probe sitting on a ReLU or
  // max-pool switch never converges, so each probe takes its best step and
  // a few may miss.
  int agree = 0;
  for (int t = 0; t < 40; ++t) {
    const auto i = static_cast<Eigen::Index>(rng.below(static_cast<std::size_t>(x.size())));
    double best = 1e9;
    for (float h : {3e-3f, 1e-3f, 3e-4f}) {
      Mat xp = x, xm = x;
      xp.data()[i] += h, xm.data()[i] -= h;
      const double fd = (inner(xp) - inner(xm)) / (2 * h);
      best = std::min(best, std::abs(fd - gx.data()[i]) / (0.02 * std::abs(fd) + 1e-3));
    }
    agree += best < 1.0;
  }
  EXPECT_GE(agree, 36);
}

TEST(Classifier, CheckpointRoundTrip) {
  const auto ds = test::tiny_dataset(6, 1);
  const auto m = ClassifierModel::build("smallcnn2", 3, ds.shape, 9);
  const auto dir = test::scratch_dir("ckpt");
  m.save(dir);
  const auto back = ClassifierModel::load(dir);
  EXPECT_EQ(back.params(), m.params());
  EXPECT_EQ(back.arch(), "smallcnn2");
  EXPECT_EQ(back.forward(ds.all()), m.forward(ds.all()));
}

TEST(Train, ZeroEpochsLeavesParameters) {
  const auto ds = test::tiny_dataset(20, 1);
  const auto m = ClassifierModel::build("smallcnn", 3, ds.shape, 1);
  TrainConfig tc;
  tc.epochs = 0;
  EXPECT_EQ(train_classifier(m, ds, tc).params(), m.params());
}

TEST(Train, SameSeedSameModel) {
  const auto ds = test::tiny_dataset(60, 1);
  std::vector<EpochRecord> la, lb;
  TrainConfig tc;
  tc.epochs = 2;
  tc.seed = 4;
  const auto m = ClassifierModel::build("smallcnn", 3, ds.shape, 1);
  const auto a = train_classifier(m, ds, tc, &la);
  const auto b = train_classifier(m, ds, tc, &lb);
  EXPECT_EQ(a.params(), b.params());
  EXPECT_EQ(la.back().loss, lb.back().loss);
}

TEST(Train, RejectsBadConfigAndShapes) {
  const auto ds = test::tiny_dataset(20, 1);
  const auto m = ClassifierModel::build("smallcnn", 3, ds.shape, 1);
  TrainConfig tc;
  tc.learning_rate = 0.0f;
  EXPECT_THROW(train_classifier(m, ds, tc), Error);
  const auto other = test::tiny_dataset(20, 1, 3, 12);
  EXPECT_THROW(train_classifier(m, other, TrainConfig{}), Error);
}

TEST(Train, DivergenceIsReported) {
  const auto ds = test::tiny_dataset(40, 1);
  TrainConfig tc;
  tc.epochs = 3;
  tc.learning_rate = 1e6f;
  try {
    train_classifier(ClassifierModel::build("smallcnn", 3, ds.shape, 1), ds, tc);
    FAIL() << "expected divergence";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kNumericDivergence);
  }
}

TEST(Train, SeparableTwoClassTask) {
  // Class by overall brightness; a least-squares oracle confirms separability.
  Rng rng(5);
  LabeledDataset ds;
  ds.name = "bright";
  ds.shape = {3, 8, 8};
  ds.num_classes = 2;
  const int n = 200, d = ds.shape.size();
  for (int i = 0; i < n; ++i) {
    const int y = i % 2;
    ds.labels.push_back(y);
    for (int p = 0; p < d; ++p)
      ds.images.push_back(static_cast<float>(std::clamp(0.3 + 0.4 * y + 0.15 * rng.normal(), 0.0, 1.0)));
  }
  Eigen::MatrixXd a(n, d + 1);
  Eigen::VectorXd t(n);
  for (int i = 0; i < n; ++i) {
    for (int p = 0; p < d; ++p) a(i, p) = ds.images[i * d + p];
    a(i, d) = 1.0;
    t(i) = ds.labels[i] ? 1.0 : -1.0;
  }
  const Eigen::VectorXd w = a.colPivHouseholderQr().solve(t);
  int ok = 0;
  for (int i = 0; i < n; ++i) ok += ((a.row(i) * w)(0) > 0) == (ds.labels[i] == 1);
  ASSERT_EQ(ok, n);

  TrainConfig tc;
  tc.epochs = 30;
  tc.lr_drop_epochs = {15, 22};
  tc.seed = 2;
  std::vector<EpochRecord> log;
  train_classifier(ClassifierModel::build("smallcnn", 2, ds.shape, 2), ds, tc, &log);
  EXPECT_GE(log.back().accuracy, 0.95);
}

TEST(Train, LossDoesNotRiseAcrossLrDrops) {
  const auto ds = test::tiny_dataset(300, 1);
  TrainConfig tc;
  tc.epochs = 12;
  tc.lr_drop_epochs = {6, 9};
  tc.seed = 3;
  std::vector<EpochRecord> log;
  train_classifier(ClassifierModel::build("smallcnn", 3, ds.shape, 3), ds, tc, &log);
  for (int drop : tc.lr_drop_epochs) {
    const double before = (log[drop - 2].loss + log[drop - 1].loss) / 2;
    const double after = (log[drop].loss + log[drop + 1].loss) / 2;
    EXPECT_LE(after, before * 1.05) << "drop at " << drop;
  }
}

TEST(Optimizers, NesterovStepMatchesHandComputation) {
  NesterovSgd opt(1, 0.9f, 0.0f);
  std::vector<float> p = {1.0f};
  const std::vector<float> g = {0.5f};
  opt.step(p, g, 0.1f);
  // buf = 0.5; update = g + 0.9 * buf = 0.95.
  EXPECT_NEAR(p[0], 1.0f - 0.095f, 1e-7);
}

}  // namespace
}  // namespace dwv
