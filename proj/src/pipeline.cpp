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
#include "dwv/pipeline.hpp"

namespace dwv {

PipelineConfig toy_pipeline_config(std::uint64_t seed) {
  PipelineConfig c;
  c.seed = seed;
  c.domain.iters = 30;
  c.domain.steps_per_phase = 2;
  c.domain.work_size = 0;
  c.craft.scope = TargetScope::kTargetClass;
  return c;
}

std::uint64_t stage_seed(std::uint64_t seed, Stage stage) {
  return Rng::derive(seed, static_cast<std::uint64_t>(stage));
}

ClassifierModel train_victim(const PipelineConfig& config, const LabeledDataset& ds) {
  const std::uint64_t s = stage_seed(config.seed, Stage::kVictim);
  TrainConfig tc = config.train;
  tc.seed = s;
  return train_classifier(ClassifierModel::build(config.arch, ds.num_classes, ds.shape, s), ds, tc);
}

DomainStage run_domain_stage(const PipelineConfig& config) {
  DomainStage st;
  st.train = load_dataset(config.data);
  st.test = load_dataset(config.test_data);
  if (!(st.train.shape == st.test.shape) || st.train.num_classes != st.test.num_classes)
    throw Error(Errc::kShapeMismatch, "train and test datasets disagree on shape or classes");

  const std::uint64_t s = stage_seed(config.seed, Stage::kSurrogate);
  TrainConfig tc = config.train;
  tc.seed = s;
  st.surrogate = train_classifier(
      ClassifierModel::build(config.arch, st.train.num_classes, st.train.shape, s), st.train, tc);

  DomainGenConfig dc = config.domain;
  dc.seed = stage_seed(config.seed, Stage::kDomain);
  st.domain = generate_hard_domain(st.train, dc, st.surrogate);
  st.other_specs = sample_other_domains(st.domain.theta, config.craft.J,
                                        stage_seed(config.seed, Stage::kOtherDomains),
                                        &st.domain.target_spec);
  st.benign_victim = train_victim(config, st.train);
  return st;
}

WatermarkStage run_watermark_stage(const PipelineConfig& config, const DomainStage& stage,
                                   const DomainSpec* target_spec) {
  const DomainSpec& spec = target_spec ? *target_spec : stage.domain.target_spec;
  WatermarkStage wm;
  wm.split = select_watermark_subset(stage.train, config.gamma, stage.surrogate,
                                     config.target_class);
  CraftConfig cc = config.craft;
  cc.seed = stage_seed(config.seed, Stage::kCraft);
  wm.craft = craft_perturbations(stage.train, wm.split, stage.domain.theta, spec,
                                 stage.other_specs, stage.surrogate, cc);
  wm.protected_data = assemble_protected(stage.train, wm.split, wm.craft.deltas, cc.epsilon,
                                         config.seed);
  wm.victim = train_victim(config, wm.protected_data.released);
  return wm;
}

LabeledDataset verification_samples(const LabeledDataset& test, TargetScope scope,
                                    int target_class) {
  if (scope == TargetScope::kAllClasses) return test;
  return test.subset(test.class_indices(target_class));
}

}  // namespace dwv
