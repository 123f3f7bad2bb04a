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
#ifndef DWV_TRAIN_HPP_
#define DWV_TRAIN_HPP_

#include <cstdint>
#include <functional>
#include <vector>

#include "dwv/data.hpp"
#include "dwv/nn.hpp"

namespace dwv {

/// Desk-scale defaults: 40 epochs, lr 0.05 dropped x0.1 at epochs 20 and 30.
struct TrainConfig {
  int epochs = 40;
  float learning_rate = 0.05f;
  std::vector<int> lr_drop_epochs = {20, 30};
  float lr_drop_factor = 0.1f;
  float momentum = 0.9f;
  float weight_decay = 4e-4f;
  int batch_size = 64;
  std::uint64_t seed = 0;

  void validate() const;
  float lr_at(int epoch) const;
};

struct EpochRecord {
  int epoch;
  float learning_rate;
  double loss;
  double accuracy;
};

/// Mini-batch SGD (Nesterov, weight decay, stepped drops) on `ds`.
/// Aborts with Errc::kNumericDivergence on a non-finite loss.
/// `on_epoch` (optional) sees the model after each completed epoch.
ClassifierModel train_classifier(
    ClassifierModel model, const LabeledDataset& ds, const TrainConfig& config,
    std::vector<EpochRecord>* log = nullptr,
    const std::function<void(int, const ClassifierModel&)>& on_epoch = nullptr);

}  // namespace dwv

#endif  // DWV_TRAIN_HPP_
