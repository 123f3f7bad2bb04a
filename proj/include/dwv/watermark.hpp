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
#ifndef DWV_WATERMARK_HPP_
#define DWV_WATERMARK_HPP_

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "dwv/data.hpp"
#include "dwv/generator.hpp"
#include "dwv/nn.hpp"

namespace dwv {

/// Which samples feed the target-domain risk while crafting.
enum class TargetScope { kAllClasses, kTargetClass };

const char* target_scope_name(TargetScope s);
TargetScope parse_target_scope(const std::string& s);

/// Starting point of the perturbation ascent: zero, a seeded uniform draw in
/// [-eps, eps], or the target-domain rendering projected onto the eps-ball.
enum class DeltaInit { kZero, kUniform, kDomain };

const char* delta_init_name(DeltaInit d);
DeltaInit parse_delta_init(const std::string& s);

struct CraftConfig {
  float epsilon = 16.0f / 255.0f;
  double lambda3 = 0.3;
  // NaN means: compute from the benign model with compute_lambda4.
  double lambda4 = std::numeric_limits<double>::quiet_NaN();
  int J = 3;
  int outer_epochs = 5;
  int upper_iters = 50;
  int lower_iters = 100;
  int lower_batch = 64;
  float lower_lr = 0.01f;
  float momentum = 0.9f;
  float weight_decay = 5e-4f;
  // Samples drawn per outer epoch to estimate the target-domain risk
  // (0 = every sample in scope).
  int target_batch = 256;
  TargetScope scope = TargetScope::kAllClasses;
  DeltaInit init = DeltaInit::kZero;
  // Random per-sample translation (pixels, zero fill) applied to the
  // perturbed samples in each upper step; 0 disables.
  int augment_shift = 0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct CraftRecord {
  int round = 0;
  int upper_iter = 0;
  double alignment = 0.0;  // cosine before this step's update
  double l_t = 0.0;        // target objective at the round's model
  double poison_loss = 0.0;  // mean CE of the perturbed selected samples
  double max_abs_delta = 0.0;
};

struct CraftRun {
  std::vector<float> deltas;  // selected count x image size, selected_indices order
  std::vector<CraftRecord> history;
  std::vector<double> lower_loss_history;
  double lambda4 = 0.0;
  std::vector<ClassifierModel> models;  // crafting models after the last lower phase

  /// Mean alignment over the upper iterations of one round.
  double mean_alignment(int round) const;
};

/// Mean cross-entropy of `benign` over the dataset rendered in every domain
/// of `other_specs`.
double compute_lambda4(const ClassifierModel& benign, const DomainGeneratorParams& theta,
                       std::span<const DomainSpec> other_specs, const LabeledDataset& dataset);

struct TargetObjective {
  double value = 0.0;        // target_risk - lambda3 * min(unseen_risk, lambda4)
  double target_risk = 0.0;
  double unseen_risk = 0.0;
};

TargetObjective target_objective(const ClassifierModel& model, const DomainGeneratorParams& theta,
                                 const DomainSpec& target_spec,
                                 std::span<const DomainSpec> other_specs,
                                 const LabeledDataset& dataset, double lambda3, double lambda4);

/// dot(a, b) / (|a| |b|); throws Errc::kDegenerateGradient on a zero vector.
double cosine_alignment(std::span<const float> a, std::span<const float> b);

/// Optional per-step observer (round, upper_iter, deltas) used by tests.
using CraftObserver = std::function<void(int, int, std::span<const float>)>;

/// Bi-level crafting of clean-label perturbations for split.selected_indices,
/// warm-starting from `benign` (trained on the unmodified dataset).
CraftRun craft_perturbations(const LabeledDataset& dataset, const DatasetSplit& split,
                             const DomainGeneratorParams& theta, const DomainSpec& target_spec,
                             std::span<const DomainSpec> other_specs,
                             const ClassifierModel& benign, const CraftConfig& config,
                             const CraftObserver& observer = nullptr);

/// Ensemble form: alignment and its input gradient are averaged over the
/// crafting models, each trained by its own lower level.
CraftRun craft_perturbations(const LabeledDataset& dataset, const DatasetSplit& split,
                             const DomainGeneratorParams& theta, const DomainSpec& target_spec,
                             std::span<const DomainSpec> other_specs,
                             std::span<const ClassifierModel> benign_models,
                             const CraftConfig& config, const CraftObserver& observer = nullptr);

std::string craft_history_csv(const CraftRun& run, int lower_iters);

}  // namespace dwv

#endif  // DWV_WATERMARK_HPP_
