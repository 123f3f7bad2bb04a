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
#ifndef DWV_DOMAINGEN_HPP_
#define DWV_DOMAINGEN_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "dwv/data.hpp"
#include "dwv/estimators.hpp"
#include "dwv/generator.hpp"
#include "dwv/nn.hpp"

namespace dwv {

struct DomainGenConfig {
  int iters = 100;
  float lr_theta = 0.005f;
  float lr_w = 0.001f;
  int batch = 64;
  double lambda1 = 0.1;
  double lambda2 = 1.0;
  float momentum = 0.9f;
  float weight_decay = 5e-4f;
  // Variational net refit per iteration (Adam steps and learning rate).
  int q_steps = 5;
  float q_lr = 5e-3f;
  int q_hidden = 64;
  // Global L2 clip applied to each phase's gradient (0 disables).
  float grad_clip = 5.0f;
  // Optimizer steps per phase; 0 means one epoch of minibatches.
  int steps_per_phase = 0;
  // Generator working resolution; 0 keeps the native image size.
  int work_size = 224;
  MmdKernel kernel = MmdKernel::kRbfMedian;
  std::uint64_t seed = 0;

  void validate() const;
  int phase_steps(std::size_t n) const;
};

struct DomainGenRecord {
  int iter = 0;
  double club = 0.0;             // mean over the theta phase
  double mmd = 0.0;              // mean over the theta phase
  double theta_objective = 0.0;  // club + lambda1 * mmd
  double w_objective_start = 0.0;
  double w_objective_end = 0.0;  // on the same monitor batch as the start value
  double train_loss = 0.0;       // mean source + target cross-entropy over the w phase
};

struct DomainGenRun {
  DomainGeneratorParams theta;
  DomainSpec target_spec;
  ClassifierModel surrogate;
  std::vector<DomainGenRecord> history;
  DomainGenConfig config;
};

/// Alternates a generator phase (minimize CLUB + lambda1 * MMD between source
/// and generated features) and a surrogate phase (minimize source and
/// generated cross-entropy minus lambda2 * CLUB), starting from a surrogate
/// already trained on `dataset`.
DomainGenRun generate_hard_domain(const LabeledDataset& dataset, const DomainGenConfig& config,
                                  const ClassifierModel& surrogate);

struct DomainGap {
  double acc_source = 0.0;
  double acc_target = 0.0;
  double gap() const { return acc_source - acc_target; }
};

/// Exact accuracies on x and on its domain rendering over the whole dataset. A null theta
/// bypasses the generator (identity rendering).
DomainGap evaluate_domain_gap(const ClassifierModel& model, const LabeledDataset& dataset,
                              const DomainGeneratorParams* theta, const DomainSpec& spec);

/// Renders the whole dataset (labels unchanged) through the generator.
LabeledDataset render_domain(const LabeledDataset& dataset, const DomainGeneratorParams& theta,
                             const DomainSpec& spec);

std::string domaingen_history_csv(const std::vector<DomainGenRecord>& history);

}  // namespace dwv

#endif  // DWV_DOMAINGEN_HPP_
