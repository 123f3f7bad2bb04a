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
#include <cstring>
#include <fstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "dwv/data.hpp"
#include "dwv/io.hpp"
#include "test_util.hpp"

namespace dwv {
namespace {

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return Errc::kIo;
}

TEST(Synthetic, SpecStringCounts) {
  const auto ds = load_dataset("shapes:k=3,n=1500,hw=16");
  EXPECT_EQ(ds.size(), 1500u);
  EXPECT_EQ(ds.num_classes, 3);
  EXPECT_EQ(ds.shape, (ImageShape{3, 16, 16}));
  for (int c = 0; c < 3; ++c) EXPECT_EQ(ds.class_indices(c).size(), 500u);
  EXPECT_NO_THROW(ds.validate());
}

TEST(Synthetic, BalancedAndDeterministic) {
  const auto a = test::tiny_dataset(100, 3), b = test::tiny_dataset(100, 3);
  EXPECT_EQ(a.images, b.images);
  EXPECT_EQ(a.labels, b.labels);
  for (int c = 0; c < 3; ++c) {
    const auto n = a.class_indices(c).size();
    EXPECT_TRUE(n == 33u || n == 34u);
  }
  EXPECT_NE(test::tiny_dataset(100, 4).images, a.images);
}

TEST(Synthetic, RejectsBadSpecs) {
  EXPECT_THROW(parse_synthetic_spec("shapes:k=3,n=bad"), Error);
  EXPECT_THROW(parse_synthetic_spec("circles:k=3"), Error);
  SyntheticSpec s;
  s.num_classes = 1;
  EXPECT_THROW(make_synthetic(s), Error);
  s.num_classes = 3;
  s.height = 4;
  EXPECT_THROW(make_synthetic(s), Error);
}

// Trainability fixture: the task is learnable by the small classifier.
TEST(Synthetic, SmallClassifierFitsTheTask) {
  const auto ds = test::tiny_dataset(600, 1);
  TrainConfig tc;
  tc.epochs = 30;
  tc.lr_drop_epochs = {15, 22};
  tc.seed = 1;
  std::vector<EpochRecord> log;
  train_classifier(ClassifierModel::build("smallcnn", 3, ds.shape, 1), ds, tc, &log);
  EXPECT_GE(log.back().accuracy, 0.95);
}

TEST(DatasetIo, SaveLoadIsBitwiseIdentity) {
  const auto ds = test::tiny_dataset(40, 2);
  const auto dir = test::scratch_dir("roundtrip");
  save_dataset(ds, dir);
  const auto back = load_dataset(dir.string());
  EXPECT_EQ(back.images, ds.images);
  EXPECT_EQ(back.labels, ds.labels);
  EXPECT_EQ(back.num_classes, ds.num_classes);
  EXPECT_EQ(back.shape, ds.shape);
}

TEST(DatasetIo, DistinctLoadErrors) {
  EXPECT_EQ(code_of([] { load_dataset("/nonexistent/dwv"); }), Errc::kMissingFile);

  const auto ds = test::tiny_dataset(12, 2);
  const auto dir = test::scratch_dir("badlabel");
  save_dataset(ds, dir);
  // Label equal to K.
  auto labels = io::read_file(dir / "labels.bin");
  labels[0] = 3, labels[1] = 0;
  io::write_file(dir / "labels.bin", labels);
  EXPECT_EQ(code_of([&] { load_dataset(dir.string()); }), Errc::kLabelOutOfRange);

  const auto dir2 = test::scratch_dir("badpixel");
  save_dataset(ds, dir2);
  auto images = io::read_file(dir2 / "images.bin");
  const float big = 1.5f;
  std::memcpy(images.data(), &big, 4);
  io::write_file(dir2 / "images.bin", images);
  EXPECT_EQ(code_of([&] { load_dataset(dir2.string()); }), Errc::kPixelOutOfRange);

  const auto dir3 = test::scratch_dir("badmagic");
  save_dataset(ds, dir3);
  io::write_text(dir3 / "manifest.json", "{not json");
  EXPECT_EQ(code_of([&] { load_dataset(dir3.string()); }), Errc::kBadMagic);
}

TEST(Selection, RanksByNormWithIndexTieBreak) {
  const std::vector<std::size_t> cand = {4, 7, 9};
  EXPECT_EQ(top_by_norm(cand, std::vector<double>{3.0, 1.0, 2.0}, 2),
            (std::vector<std::size_t>{4, 9}));
  EXPECT_EQ(top_by_norm(cand, std::vector<double>{1.0, 1.0, 1.0}, 2),
            (std::vector<std::size_t>{4, 7}));
  EXPECT_EQ(top_by_norm(cand, std::vector<double>{1.0, 5.0, 1.0}, 3), cand);
  EXPECT_THROW(top_by_norm(cand, std::vector<double>{1.0, 5.0, 1.0}, 4), Error);
}

TEST(Selection, SplitPartitionsAndTakesTargetClass) {
  const auto ds = test::tiny_dataset(90, 5);
  const auto model = test::trained_tiny_model(ds, 2, 2);
  const auto split = select_watermark_subset(ds, 0.1, model, 1);
  EXPECT_EQ(split.selected_indices.size(), 9u);
  std::vector<std::size_t> all = split.selected_indices;
  all.insert(all.end(), split.remaining_indices.begin(), split.remaining_indices.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < all.size(); ++i) EXPECT_EQ(all[i], i);
  for (auto i : split.selected_indices) EXPECT_EQ(ds.labels[i], 1);
  // The chosen ones carry the largest gradient norms in the class.
  const auto cand = ds.class_indices(1);
  const auto norms = per_sample_grad_norms(model, ds, cand);
  EXPECT_EQ(split.selected_indices, top_by_norm(cand, norms, 9));
}

TEST(Selection, ExhaustionAndShortage) {
  const auto ds = test::tiny_dataset(30, 5);
  const auto model = test::uniform_model(ds.shape, 3);
  const auto split = select_watermark_subset(ds, 10.0 / 30.0, model, 0);
  EXPECT_EQ(split.selected_indices, ds.class_indices(0));
  EXPECT_EQ(code_of([&] { select_watermark_subset(ds, 0.5, model, 0); }),
            Errc::kInsufficientClassPopulation);
}

TEST(Assemble, ProjectionAndClamp) {
  auto ds = test::tiny_dataset(6, 1);
  DatasetSplit split;
  split.selected_indices = {1};
  split.remaining_indices = {0, 2, 3, 4, 5};
  const auto d = static_cast<std::size_t>(ds.shape.size());
  ds.image(1)[0] = 1.0f;
  ds.image(1)[1] = 0.5f;
  ds.image(1)[2] = 0.0f;
  std::vector<float> delta(d, 0.0f);
  const float eps = 16.0f / 255.0f;
  delta[0] = eps;          // clamped away by the image range
  delta[1] = 2 * eps;      // projected to eps
  delta[2] = -0.5f * eps;  // clamped to zero at 0
  const auto pd = assemble_protected(ds, split, delta, eps);
  EXPECT_EQ(pd.released.image(1)[0], 1.0f);
  EXPECT_EQ(pd.deltas[0], 0.0f);
  EXPECT_FLOAT_EQ(pd.deltas[1], eps);
  EXPECT_EQ(pd.deltas[2], 0.0f);
  EXPECT_EQ(pd.released.labels, ds.labels);
  for (float v : pd.deltas) EXPECT_LE(std::abs(v), eps);

  const auto zero = assemble_protected(ds, split, std::vector<float>(d, 0.0f), eps);
  EXPECT_EQ(zero.released.images, ds.images);
  EXPECT_THROW(assemble_protected(ds, split, std::vector<float>(d + 1), eps), Error);
}

TEST(Assemble, BaseRecoversOriginal) {
  const auto ds = test::tiny_dataset(20, 1);
  DatasetSplit split;
  split.selected_indices = {3, 8};
  for (std::size_t i = 0; i < 20; ++i)
    if (i != 3 && i != 8) split.remaining_indices.push_back(i);
  Rng rng(3);
  std::vector<float> delta(2 * ds.shape.size());
  for (auto& v : delta) v = static_cast<float>(rng.uniform(-0.1, 0.1));
  const auto pd = assemble_protected(ds, split, delta, 0.05f);
  const auto base = pd.base();
  for (std::size_t i = 0; i < ds.images.size(); ++i) EXPECT_NEAR(base.images[i], ds.images[i], 1e-6);
}

TEST(ProtectedIo, RoundTripAndDigestContract) {
  const auto ds = test::tiny_dataset(20, 1);
  DatasetSplit split;
  split.gamma = 0.1;
  split.selected_indices = {3, 8};
  for (std::size_t i = 0; i < 20; ++i)
    if (i != 3 && i != 8) split.remaining_indices.push_back(i);
  std::vector<float> delta(2 * ds.shape.size(), 0.01f);
  const auto pd = assemble_protected(ds, split, delta, 0.05f, 17);
  const auto dir = test::scratch_dir("protected");
  const std::string digest = save_protected(pd, dir);
  const auto back = load_protected(dir);
  EXPECT_EQ(back.released.images, pd.released.images);
  EXPECT_EQ(back.released.labels, pd.released.labels);
  EXPECT_EQ(back.deltas, pd.deltas);
  EXPECT_EQ(back.split.selected_indices, pd.split.selected_indices);
  EXPECT_EQ(back.split.remaining_indices, pd.split.remaining_indices);
  EXPECT_EQ(back.epsilon, pd.epsilon);
  EXPECT_EQ(back.seed, 17u);
  EXPECT_EQ(save_protected(pd, test::scratch_dir("protected2")), digest);

  auto changed = pd;
  changed.deltas[5] = 0.02f;
  EXPECT_NE(payload_digest(changed.released, changed.deltas), digest);
  changed = pd;
  changed.released.labels[0] = (changed.released.labels[0] + 1) % 3;
  EXPECT_NE(payload_digest(changed.released, changed.deltas), digest);
}

TEST(ProtectedIo, TamperedGammaIsRejected) {
  const auto ds = test::tiny_dataset(20, 1);
  DatasetSplit split;
  split.gamma = 0.1;
  split.selected_indices = {3, 8};
  for (std::size_t i = 0; i < 20; ++i)
    if (i != 3 && i != 8) split.remaining_indices.push_back(i);
  const auto pd = assemble_protected(ds, split, std::vector<float>(2 * ds.shape.size()), 0.05f);
  const auto dir = test::scratch_dir("tamper");
  save_protected(pd, dir);
  auto m = nlohmann::json::parse(io::read_text(dir / "manifest.json"));
  m["gamma"] = 0.5;
  io::write_text(dir / "manifest.json", m.dump());
  try {
    load_protected(dir);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kManifestInconsistent);
    EXPECT_NE(std::string(e.what()).find("manifest inconsistent with payload"), std::string::npos);
  }
}

TEST(PatchTrigger, FormulaBranches) {
  const auto ds = test::tiny_dataset(10, 1);
  PatchTrigger keep;
  keep.mask.assign(ds.shape.size(), 1.0f);
  keep.pattern.assign(ds.shape.size(), 0.3f);
  keep.target_label = 2;
  const auto a = apply_patch_trigger(ds, keep, 1.0, 1);
  EXPECT_EQ(a.images, ds.images);
  for (int y : a.labels) EXPECT_EQ(y, 2);

  PatchTrigger replace = keep;
  replace.mask.assign(ds.shape.size(), 0.0f);
  std::vector<std::size_t> hit;
  const auto b = apply_patch_trigger(ds, replace, 0.5, 1, &hit);
  ASSERT_EQ(hit.size(), 5u);
  for (auto i : hit)
    for (float v : b.image(i)) EXPECT_EQ(v, 0.3f);

  const auto c = apply_patch_trigger(ds, corner_patch(ds.shape, 3, 0), 0.0, 1);
  EXPECT_EQ(c.images, ds.images);
  EXPECT_EQ(c.labels, ds.labels);

  PatchTrigger bad = keep;
  bad.mask[0] = 0.5f;
  EXPECT_THROW(apply_patch_trigger(ds, bad, 0.1, 1), Error);
}

}  // namespace
}  // namespace dwv
