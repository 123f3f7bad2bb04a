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
#ifndef DWV_ROBUSTNESS_HPP_
#define DWV_ROBUSTNESS_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dwv/data.hpp"
#include "dwv/generator.hpp"
#include "dwv/nn.hpp"
#include "dwv/train.hpp"

namespace dwv {

struct RobustnessCurve {
  std::string mode;  // "finetune" or "prune"
  std::vector<double> levels;
  std::vector<double> vsr_at_level;
  std::vector<double> ba_at_level;
};

/// Samples used for measuring VSR (rendered through the domain generator) and BA.
struct EvalSets {
  const LabeledDataset& verification;
  const LabeledDataset& test;
};

/// The fine-tuning recipe: one tenth of the original learning rate, no drops.
TrainConfig fine_tune_config(const TrainConfig& original);

/// Seeded class-stratified draw of round(fraction * N) samples.
LabeledDataset fine_tune_subset(const LabeledDataset& ds, double fraction, std::uint64_t seed);

/// Continues training on `benign_subset`, recording (VSR, BA) after each
/// scheduled epoch count (0 = untouched model). Schedule must be strictly
/// increasing.
RobustnessCurve fine_tune_eval(const ClassifierModel& model, const LabeledDataset& benign_subset,
                               const DomainGeneratorParams& theta, const DomainSpec& spec,
                               std::span<const int> epochs_schedule, const TrainConfig& config,
                               const EvalSets& eval);

enum class PruneScope { kGlobal, kLayerwise };

/// Copy of `model` with the smallest-magnitude conv/linear weights zeroed so
/// that ceil((1 - fraction) * total) of them survive.
ClassifierModel prune_model(const ClassifierModel& model, double fraction,
                            PruneScope scope = PruneScope::kGlobal);

RobustnessCurve prune_eval(const ClassifierModel& model, std::span<const double> fractions,
                           const DomainGeneratorParams& theta, const DomainSpec& spec,
                           const EvalSets& eval, PruneScope scope = PruneScope::kGlobal);

/// mode,level,vsr,ba
std::string robustness_csv(std::span<const RobustnessCurve> curves);

}  // namespace dwv

#endif  // DWV_ROBUSTNESS_HPP_
