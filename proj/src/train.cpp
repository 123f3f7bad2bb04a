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
#include "dwv/train.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

namespace dwv {

void TrainConfig::validate() const {
  if (epochs < 0) throw Error(Errc::kInvalidArgument, "epochs must be >= 0");
  if (!(learning_rate > 0.0f)) throw Error(Errc::kInvalidArgument, "learning_rate must be > 0");
  if (!(lr_drop_factor > 0.0f)) throw Error(Errc::kInvalidArgument, "lr_drop_factor must be > 0");
  if (momentum < 0.0f || weight_decay < 0.0f)
    throw Error(Errc::kInvalidArgument, "momentum and weight_decay must be >= 0");
  if (batch_size < 1) throw Error(Errc::kInvalidArgument, "batch_size must be >= 1");
}

float TrainConfig::lr_at(int epoch) const {
  float lr = learning_rate;
  for (int e : lr_drop_epochs)
    if (epoch >= e) lr *= lr_drop_factor;
  return lr;
}

ClassifierModel train_classifier(ClassifierModel model, const LabeledDataset& ds,
                                 const TrainConfig& config, std::vector<EpochRecord>* log,
                                 const std::function<void(int, const ClassifierModel&)>& on_epoch) {
  config.validate();
  if (ds.size() == 0) throw Error(Errc::kInvalidArgument, "training set is empty");
  if (!(ds.shape == model.input_shape()))
    throw Error(Errc::kShapeMismatch, "dataset shape does not match classifier input");

  Rng rng(config.seed);
  NesterovSgd opt(model.param_count(), config.momentum, config.weight_decay);
  std::vector<float> grad(model.param_count());
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const float lr = config.lr_at(epoch);
    rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t s = 0; s < order.size(); s += config.batch_size) {
      const std::size_t len = std::min<std::size_t>(config.batch_size, order.size() - s);
      std::span<const std::size_t> idx(order.data() + s, len);
      const Mat x = ds.batch(idx);
      const auto y = ds.batch_labels(idx);
      ForwardTape tape;
      const Mat logits = model.forward(x, &tape);
      Mat dlogits;
      const double loss = softmax_cross_entropy(logits, y, &dlogits);
      if (!std::isfinite(loss)) {
        std::ostringstream msg;
        msg << "training loss became non-finite at epoch " << epoch << ", batch " << s / config.batch_size
            << " (lr " << lr << ")";
        throw Error(Errc::kNumericDivergence, msg.str());
      }
      loss_sum += loss * static_cast<double>(len);
      for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        Eigen::Index arg;
        logits.row(r).maxCoeff(&arg);
        if (arg == y[r]) ++correct;
      }
      std::fill(grad.begin(), grad.end(), 0.0f);
      model.backward(tape, &dlogits, nullptr, grad.data(), nullptr);
      opt.step(model.params(), grad, lr);
    }
    if (log)
      log->push_back({epoch, lr, loss_sum / static_cast<double>(ds.size()),
                      static_cast<double>(correct) / static_cast<double>(ds.size())});
    if (on_epoch) on_epoch(epoch, model);
  }
  return model;
}

}  // namespace dwv
