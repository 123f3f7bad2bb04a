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
#ifndef DWV_DATA_HPP_
#define DWV_DATA_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dwv/common.hpp"

namespace dwv {

class ClassifierModel;

/// Images in [0,1] with integer labels in [0, K). Images are stored
/// sample-major, channel-major (C, H, W) within a sample.
struct LabeledDataset {
  std::string name;
  ImageShape shape;
  int num_classes = 0;
  std::vector<float> images;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  std::span<const float> image(std::size_t i) const {
    return {images.data() + i * shape.size(), static_cast<std::size_t>(shape.size())};
  }
  std::span<float> image(std::size_t i) {
    return {images.data() + i * shape.size(), static_cast<std::size_t>(shape.size())};
  }

  /// Throws on any invariant violation (pixel range, label range, lengths).
  void validate() const;

  Mat batch(std::span<const std::size_t> indices) const;
  Mat all() const;
  std::vector<int> batch_labels(std::span<const std::size_t> indices) const;
  std::vector<std::size_t> class_indices(int cls) const;
  LabeledDataset subset(std::span<const std::size_t> indices) const;
};

struct DatasetSplit {
  std::vector<std::size_t> selected_indices;   // watermarked samples, ascending
  std::vector<std::size_t> remaining_indices;  // untouched samples, ascending
  double gamma = 0.0;
  int target_class = 0;
};

/// The released dataset. `released` holds base images everywhere except at
/// `split.selected_indices`, where it holds clamp(base + delta, 0, 1).
/// `deltas` stores the effective (post-clamp) perturbation per selected
/// sample, in selected_indices order.
struct ProtectedDataset {
  LabeledDataset released;
  DatasetSplit split;
  std::vector<float> deltas;
  float epsilon = 0.0f;
  std::uint64_t seed = 0;

  std::span<const float> delta(std::size_t j) const {
    const auto d = static_cast<std::size_t>(released.shape.size());
    return {deltas.data() + j * d, d};
  }
  /// Recovers the unmodified dataset (released - delta on modified samples).
  LabeledDataset base() const;
};

struct SyntheticSpec {
  int num_classes = 3;
  int n = 1500;
  int height = 16;
  int width = 16;
  std::uint64_t seed = 0;
};

/// Parses "shapes:k=3,n=1500,hw=16[,seed=7]".
SyntheticSpec parse_synthetic_spec(const std::string& spec);

/// Class-balanced colored-shape task: the class decides the glyph; color,
/// background, position, scale and texture noise are nuisance factors.
LabeledDataset make_synthetic(const SyntheticSpec& spec);

/// Accepts a synthetic spec string, a dataset directory (manifest.json +
/// images.bin + labels.bin), or a CIFAR-10 style binary batch file.
LabeledDataset load_dataset(const std::string& source);

/// Persists a plain dataset in the same directory format (no deltas).
std::string save_dataset(const LabeledDataset& ds, const std::filesystem::path& dir);

/// Per-sample cross-entropy gradient norm with respect to every parameter.
std::vector<double> per_sample_grad_norms(const ClassifierModel& model,
                                          const LabeledDataset& ds,
                                          std::span<const std::size_t> indices);

/// Picks the `budget` candidates with the largest norms; ties go to the
/// lower dataset index. Returned indices are ascending.
std::vector<std::size_t> top_by_norm(std::span<const std::size_t> candidates,
                                     std::span<const double> norms,
                                     std::size_t budget);

std::size_t watermark_budget(std::size_t n, double gamma);

DatasetSplit select_watermark_subset(const LabeledDataset& ds, double gamma,
                                     const ClassifierModel& model, int target_class);

/// Projects each delta onto the L-inf ball, adds it, clamps to [0,1] and
/// keeps the effective difference.
ProtectedDataset assemble_protected(const LabeledDataset& ds, const DatasetSplit& split,
                                    std::span<const float> deltas, float epsilon,
                                    std::uint64_t seed = 0);

struct PatchTrigger {
  std::vector<float> mask;     // 1 keeps the pixel, 0 takes the pattern
  std::vector<float> pattern;
  int target_label = 0;
};

/// Corner-square trigger of side `side` (white/black checker) for `shape`.
PatchTrigger corner_patch(const ImageShape& shape, int side, int target_label);

/// Stamps one image: (1 - mask) * pattern + mask * x.
void stamp_trigger(const PatchTrigger& trig, std::span<const float> x, std::span<float> out);

/// Replaces round(rate * N) seeded-random samples by their stamped image and the trigger label.
LabeledDataset apply_patch_trigger(const LabeledDataset& ds, const PatchTrigger& trig,
                                   double rate, std::uint64_t seed,
                                   std::vector<std::size_t>* poisoned = nullptr);

/// Writes manifest.json, images.bin, labels.bin, deltas.bin; returns the
/// payload digest.
std::string save_protected(const ProtectedDataset& pd, const std::filesystem::path& dir);
ProtectedDataset load_protected(const std::filesystem::path& dir);

/// SHA-256 over images, labels and deltas in their on-disk encoding.
std::string payload_digest(const LabeledDataset& ds, std::span<const float> deltas);

}  // namespace dwv

#endif  // DWV_DATA_HPP_
