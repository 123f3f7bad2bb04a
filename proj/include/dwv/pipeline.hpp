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
#ifndef DWV_PIPELINE_HPP_
#define DWV_PIPELINE_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "dwv/data.hpp"
#include "dwv/domaingen.hpp"
#include "dwv/nn.hpp"
#include "dwv/train.hpp"
#include "dwv/watermark.hpp"

namespace dwv {

/// End-to-end settings shared by the CLI sweeps and the acceptance suite.
struct PipelineConfig {
  std::string data = "shapes:k=3,n=1500,hw=16,seed=1";
  std::string test_data = "shapes:k=3,n=600,hw=16,seed=2";
  std::string arch = "smallcnn";
  double gamma = 0.1;
  int target_class = 0;
  TrainConfig train;
  DomainGenConfig domain;
  CraftConfig craft;
  std::uint64_t seed = 0;
};

/// Settings sized for the 16x16 synthetic task: native-resolution generator,
/// 30 short domain iterations, target-class scope for crafting.
PipelineConfig toy_pipeline_config(std::uint64_t seed);

/// Per-stage seeds fanned out from PipelineConfig::seed.
enum class Stage : std::uint64_t { kSurrogate = 1, kDomain, kOtherDomains, kCraft, kVictim };
std::uint64_t stage_seed(std::uint64_t seed, Stage stage);

struct DomainStage {
  LabeledDataset train;
  LabeledDataset test;
  ClassifierModel surrogate;  // benign model the owner crafts against
  DomainGenRun domain;
  std::vector<DomainSpec> other_specs;
  ClassifierModel benign_victim;  // trained on clean data with the victim seed
};

struct WatermarkStage {
  DatasetSplit split;
  CraftRun craft;
  ProtectedDataset protected_data;
  ClassifierModel victim;  // trained on protected_data with the victim seed
};

DomainStage run_domain_stage(const PipelineConfig& config);

/// Crafts against `stage.surrogate` for `target_spec` (the stage's own
/// target domain when null) and trains a victim on the released data.
WatermarkStage run_watermark_stage(const PipelineConfig& config, const DomainStage& stage,
                                   const DomainSpec* target_spec = nullptr);

/// A model built for `config` and trained on `ds` with the victim seed.
ClassifierModel train_victim(const PipelineConfig& config, const LabeledDataset& ds);

/// Samples whose domain rendering is scored: the whole test set, or its
/// target class under TargetScope::kTargetClass.
LabeledDataset verification_samples(const LabeledDataset& test, TargetScope scope,
                                    int target_class);

}  // namespace dwv

#endif  // DWV_PIPELINE_HPP_
