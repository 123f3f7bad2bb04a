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
#include "dwv/robustness.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "dwv/verify.hpp"

namespace dwv {

namespace {

void record(RobustnessCurve& c, double level, const ClassifierModel& m, const Mat& rendered,
            const EvalSets& eval) {
  c.levels.push_back(level);
  c.vsr_at_level.push_back(accuracy(m, rendered, eval.verification.labels));
  c.ba_at_level.push_back(accuracy(m, eval.test.all(), eval.test.labels));
}

}  // namespace

TrainConfig fine_tune_config(const TrainConfig& original) {
  TrainConfig c = original;
  c.learning_rate = original.learning_rate / 10.0f;
  c.lr_drop_epochs.clear();
  return c;
}

LabeledDataset fine_tune_subset(const LabeledDataset& ds, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw Error(Errc::kInvalidArgument, "subset fraction must lie in (0, 1]");
  Rng rng(seed);
  const std::size_t want = static_cast<std::size_t>(std::llround(fraction * ds.size()));
  std::vector<std::vector<std::size_t>> by_class(ds.num_classes);
  for (int c = 0; c < ds.num_classes; ++c) {
    by_class[c] = ds.class_indices(c);
    rng.shuffle(by_class[c]);
  }
  std::vector<std::size_t> picked;
  for (std::size_t round = 0; picked.size() < want; ++round) {
    bool any = false;
    for (int c = 0; c < ds.num_classes && picked.size() < want; ++c)
      if (round < by_class[c].size()) {
        picked.push_back(by_class[c][round]);
        any = true;
      }
    if (!any) break;
  }
  std::sort(picked.begin(), picked.end());
  return ds.subset(picked);
}

RobustnessCurve fine_tune_eval(const ClassifierModel& model, const LabeledDataset& benign_subset,
                               const DomainGeneratorParams& theta, const DomainSpec& spec,
                               std::span<const int> epochs_schedule, const TrainConfig& config,
                               const EvalSets& eval) {
  if (benign_subset.size() == 0) throw Error(Errc::kInvalidArgument, "fine-tuning subset is empty");
  if (epochs_schedule.empty()) throw Error(Errc::kInvalidArgument, "empty fine-tuning schedule");
  for (std::size_t i = 0; i < epochs_schedule.size(); ++i)
    if (epochs_schedule[i] < 0 || (i > 0 && epochs_schedule[i] <= epochs_schedule[i - 1]))
      throw Error(Errc::kInvalidArgument, "fine-tuning schedule must be strictly increasing");

  RobustnessCurve curve;
  curve.mode = "finetune";
  const Mat rendered =
      apply_domain(theta, spec, eval.verification.all(), eval.verification.shape);
  std::size_t next = 0;
  if (epochs_schedule[0] == 0) {
    record(curve, 0, model, rendered, eval);
    next = 1;
  }
  if (next < epochs_schedule.size()) {
    TrainConfig c = config;
    c.epochs = epochs_schedule.back();
    train_classifier(model, benign_subset, c, nullptr, [&](int epoch, const ClassifierModel& m) {
      if (next < epochs_schedule.size() && epoch + 1 == epochs_schedule[next]) {
        record(curve, epoch + 1, m, rendered, eval);
        ++next;
      }
    });
  }
  return curve;
}

ClassifierModel prune_model(const ClassifierModel& model, double fraction, PruneScope scope) {
  if (!(fraction >= 0.0 && fraction <= 1.0))
    throw Error(Errc::kInvalidArgument, "pruning fraction must lie in [0, 1]");
  ClassifierModel out = model;
  auto& p = out.params();
  auto prune_group = [&](std::vector<std::size_t> idx) {
    const std::size_t total = idx.size();
    const auto keep = static_cast<std::size_t>(std::ceil((1.0 - fraction) * total - 1e-9));
    const std::size_t drop = total - std::min(keep, total);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return std::abs(p[a]) < std::abs(p[b]); });
    for (std::size_t i = 0; i < drop; ++i) p[idx[i]] = 0.0f;
  };
  if (scope == PruneScope::kGlobal) {
    const auto mask = model.prunable_mask();
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < mask.size(); ++i)
      if (mask[i]) idx.push_back(i);
    prune_group(std::move(idx));
  } else {
    for (const auto& l : model.layers()) {
      if (l.kind != LayerKind::kConv && l.kind != LayerKind::kLinear) continue;
      std::vector<std::size_t> idx(l.w_len);
      std::iota(idx.begin(), idx.end(), l.w_off);
      prune_group(std::move(idx));
    }
  }
  return out;
}

RobustnessCurve prune_eval(const ClassifierModel& model, std::span<const double> fractions,
                           const DomainGeneratorParams& theta, const DomainSpec& spec,
                           const EvalSets& eval, PruneScope scope) {
  for (std::size_t i = 0; i < fractions.size(); ++i)
    if (!(fractions[i] >= 0.0 && fractions[i] <= 1.0) || (i > 0 && fractions[i] <= fractions[i - 1]))
      throw Error(Errc::kInvalidArgument, "pruning fractions must be increasing within [0, 1]");
  RobustnessCurve curve;
  curve.mode = "prune";
  const Mat rendered =
      apply_domain(theta, spec, eval.verification.all(), eval.verification.shape);
  for (double f : fractions) record(curve, f, prune_model(model, f, scope), rendered, eval);
  return curve;
}

std::string robustness_csv(std::span<const RobustnessCurve> curves) {
  std::ostringstream os;
  os << std::setprecision(10) << "mode,level,vsr,ba\n";
  for (const auto& c : curves)
    for (std::size_t i = 0; i < c.levels.size(); ++i)
      os << c.mode << ',' << c.levels[i] << ',' << c.vsr_at_level[i] << ',' << c.ba_at_level[i] << '\n';
  return os.str();
}

}  // namespace dwv
