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
#include <cmath>

#include <gtest/gtest.h>

#include "dwv/watermark.hpp"
#include "test_util.hpp"

namespace dwv {
namespace {

CraftConfig quick_config(float eps) {
  CraftConfig c;
  c.epsilon = eps;
  c.outer_epochs = 2;
  c.upper_iters = 4;
  c.lower_iters = 3;
  c.target_batch = 24;
  c.lambda4 = 1.0;
  c.seed = 3;
  return c;
}

class CraftFixture : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    data_ = new LabeledDataset(test::tiny_dataset(120, 1));
    model_ = new ClassifierModel(test::trained_tiny_model(*data_, 1, 3));
    theta_ = new DomainGeneratorParams(test::tiny_generator(data_->shape, 2));
    split_ = new DatasetSplit(select_watermark_subset(*data_, 0.1, *model_, 0));
    target_ = DomainSpec::sample(5);
    others_ = new std::vector<DomainSpec>(sample_other_domains(*theta_, 3, 6, &target_));
  }
  static void TearDownTestSuite() {
    delete data_;
    delete model_;
    delete theta_;
    delete split_;
    delete others_;
  }
  static LabeledDataset* data_;
  static ClassifierModel* model_;
  static DomainGeneratorParams* theta_;
  static DatasetSplit* split_;
  static DomainSpec target_;
  static std::vector<DomainSpec>* others_;
};
LabeledDataset* CraftFixture::data_ = nullptr;
ClassifierModel* CraftFixture::model_ = nullptr;
DomainGeneratorParams* CraftFixture::theta_ = nullptr;
DatasetSplit* CraftFixture::split_ = nullptr;
DomainSpec CraftFixture::target_;
std::vector<DomainSpec>* CraftFixture::others_ = nullptr;

TEST(CraftConfig, DefaultsAndValidation) {
  const CraftConfig c;
  EXPECT_FLOAT_EQ(c.epsilon, 16.0f / 255.0f);
  EXPECT_DOUBLE_EQ(c.lambda3, 0.3);
  EXPECT_EQ(c.J, 3);
  EXPECT_EQ(c.outer_epochs, 5);
  EXPECT_EQ(c.upper_iters, 50);
  EXPECT_EQ(c.lower_iters, 100);
  CraftConfig bad;
  bad.epsilon = -0.1f;
  EXPECT_THROW(bad.validate(), Error);
  bad = CraftConfig{};
  bad.lambda3 = -0.1;
  EXPECT_THROW(bad.validate(), Error);
  EXPECT_EQ(parse_target_scope(target_scope_name(TargetScope::kTargetClass)),
            TargetScope::kTargetClass);
  EXPECT_EQ(parse_delta_init(delta_init_name(DeltaInit::kDomain)), DeltaInit::kDomain);
  EXPECT_THROW(parse_target_scope("some"), Error);
}

TEST(Cosine, Fixtures) {
  const std::vector<float> a = {1.0f, 2.0f, -3.0f};
  const std::vector<float> neg = {-1.0f, -2.0f, 3.0f};
  EXPECT_NEAR(cosine_alignment(a, a), 1.0, 1e-12);
  EXPECT_NEAR(cosine_alignment(a, neg), -1.0, 1e-12);
  const std::vector<float> e1 = {1.0f, 0.0f}, e2 = {0.0f, 1.0f};
  EXPECT_NEAR(cosine_alignment(e1, e2), 0.0, 1e-12);
  const std::vector<float> zero = {0.0f, 0.0f};
  try {
    cosine_alignment(e1, zero);
    FAIL() << "expected a degenerate gradient error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kDegenerateGradient);
  }
  EXPECT_THROW(cosine_alignment(a, e1), Error);
}

TEST(Lambda4, UniformPredictorGivesLogK) {
  for (int k : {2, 3}) {
    const auto ds = test::tiny_dataset(30, 1, k);
    const auto model = test::uniform_model(ds.shape, k);
    const auto theta = test::tiny_generator(ds.shape, 1);
    const auto specs = sample_other_domains(theta, 3, 2);
    EXPECT_NEAR(compute_lambda4(model, theta, specs, ds), std::log(double(k)), 1e-6);
  }
  EXPECT_THROW(compute_lambda4(test::uniform_model({3, 16, 16}, 3), test::tiny_generator({3, 16, 16}, 1),
                               {}, test::tiny_dataset(9, 1)),
               Error);
}

TEST_F(CraftFixture, Lambda4IsAMeanOverDomains) {
  const std::vector<DomainSpec> one = {others_->front()};
  const std::vector<DomainSpec> repeated(3, others_->front());
  EXPECT_NEAR(compute_lambda4(*model_, *theta_, one, *data_),
              compute_lambda4(*model_, *theta_, repeated, *data_), 1e-9);
}

TEST_F(CraftFixture, TargetObjectiveBranches) {
  const auto plain = target_objective(*model_, *theta_, target_, *others_, *data_, 0.0, 1.0);
  EXPECT_DOUBLE_EQ(plain.value, plain.target_risk);
  const double unseen = plain.unseen_risk;
  ASSERT_GT(unseen, 0.0);

  const auto clamped = target_objective(*model_, *theta_, target_, *others_, *data_, 0.3, unseen / 2);
  EXPECT_NEAR(plain.value - clamped.value, 0.3 * (unseen / 2), 1e-12);
  const auto open = target_objective(*model_, *theta_, target_, *others_, *data_, 0.3, unseen * 2);
  EXPECT_NEAR(plain.value - open.value, 0.3 * unseen, 1e-12);
  EXPECT_DOUBLE_EQ(open.target_risk, plain.target_risk);
}

TEST_F(CraftFixture, ZeroBudgetLeavesDataUntouched) {
  const auto c = quick_config(0.0f);
  const auto run = craft_perturbations(*data_, *split_, *theta_, target_, *others_, *model_, c);
  for (float d : run.deltas) ASSERT_EQ(d, 0.0f);
  const auto pd = assemble_protected(*data_, *split_, run.deltas, c.epsilon);
  EXPECT_EQ(pd.released.images, data_->images);
}

TEST_F(CraftFixture, ProjectionHoldsAfterEveryStep) {
  const auto c = quick_config(8.0f / 255.0f);
  const auto x = data_->batch(split_->selected_indices);
  const LabeledDataset before = *data_;
  int steps = 0;
  const auto run = craft_perturbations(
      *data_, *split_, *theta_, target_, *others_, *model_, c,
      [&](int, int, std::span<const float> d) {
        ++steps;
        ASSERT_EQ(d.size(), static_cast<std::size_t>(x.size()));
        for (Eigen::Index r = 0; r < x.rows(); ++r)
          for (Eigen::Index col = 0; col < x.cols(); ++col) {
            const float v = d[r * x.cols() + col];
            ASSERT_LE(std::abs(v), c.epsilon);
            const float img = x(r, col) + v;
            ASSERT_GE(img, 0.0f);
            ASSERT_LE(img, 1.0f);
          }
      });
  EXPECT_EQ(steps, c.outer_epochs * c.upper_iters);
  ASSERT_EQ(run.history.size(), static_cast<std::size_t>(steps));
  for (const auto& r : run.history) {
    EXPECT_GE(r.alignment, -1.0);
    EXPECT_LE(r.alignment, 1.0);
    EXPECT_LE(r.max_abs_delta, c.epsilon + 1e-7);
  }
  EXPECT_EQ(run.lower_loss_history.size(), static_cast<std::size_t>(c.outer_epochs * c.lower_iters));
  EXPECT_DOUBLE_EQ(run.lambda4, 1.0);
  // Clean label: the inputs are untouched and the release keeps every label.
  EXPECT_EQ(data_->images, before.images);
  const auto pd = assemble_protected(*data_, *split_, run.deltas, c.epsilon);
  EXPECT_EQ(pd.released.labels, data_->labels);
  const std::string csv = craft_history_csv(run, c.lower_iters);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "round,upper_iter,alignment,l_t,poison_loss,lower_loss,max_abs_delta");
}

TEST_F(CraftFixture, SeededRunsRepeat) {
  const auto c = quick_config(8.0f / 255.0f);
  const auto a = craft_perturbations(*data_, *split_, *theta_, target_, *others_, *model_, c);
  const auto b = craft_perturbations(*data_, *split_, *theta_, target_, *others_, *model_, c);
  EXPECT_EQ(a.deltas, b.deltas);
}

TEST_F(CraftFixture, EnsembleOfOneMatchesSingleModel) {
  const auto c = quick_config(8.0f / 255.0f);
  const auto single = craft_perturbations(*data_, *split_, *theta_, target_, *others_, *model_, c);
  const std::vector<ClassifierModel> one = {*model_};
  const auto ens = craft_perturbations(*data_, *split_, *theta_, target_, *others_,
                                       std::span<const ClassifierModel>(one), c);
  EXPECT_EQ(single.deltas, ens.deltas);
  ASSERT_EQ(ens.models.size(), 1u);
  const std::vector<ClassifierModel> two = {*model_, test::trained_tiny_model(*data_, 2, 3)};
  const auto pair = craft_perturbations(*data_, *split_, *theta_, target_, *others_,
                                        std::span<const ClassifierModel>(two), c);
  EXPECT_EQ(pair.models.size(), 2u);
  EXPECT_NE(pair.deltas, single.deltas);
}

// Frozen fixture: on the seeded toy run the gradient alignment in the last
// round is at least that of the first round.
TEST(CraftTrend, FinalRoundAlignsAtLeastAsWellAsFirst) {
  const auto ds = test::tiny_dataset(300, 1);
  const auto model = test::trained_tiny_model(ds, 1, 8);
  const auto theta = test::tiny_generator(ds.shape, 2);
  const auto split = select_watermark_subset(ds, 0.1, model, 0);
  const auto target = DomainSpec::sample(5);
  const auto others = sample_other_domains(theta, 3, 6, &target);
  CraftConfig c;
  c.outer_epochs = 3;
  c.upper_iters = 10;
  c.lower_iters = 10;
  c.target_batch = 64;
  c.scope = TargetScope::kTargetClass;
  c.seed = 7;
  const auto run = craft_perturbations(ds, split, theta, target, others, model, c);
  EXPECT_GE(run.mean_alignment(c.outer_epochs - 1), run.mean_alignment(0))
      << "round means " << run.mean_alignment(0) << ", " << run.mean_alignment(1) << ", "
      << run.mean_alignment(2);
}

}  // namespace
}  // namespace dwv
