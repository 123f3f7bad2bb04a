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
#ifndef DWV_GENERATOR_HPP_
#define DWV_GENERATOR_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dwv/common.hpp"

namespace dwv {

inline constexpr int kNumBranches = 4;
inline constexpr std::array<int, kNumBranches> kBranchKernels = {5, 9, 13, 17};
inline constexpr double kMinWeightSum = 0.25;

/// Transformation module: four conv -> feature-shift -> transposed-conv ->
/// tanh branches run at a working resolution, mixed by per-domain weights.
///
/// Flat parameter layout, per branch b:
///   conv   [C, C, k, k]       (out, in, ky, kx)
///   mu     [C, work_h, work_w] additive shift
///   sigma  [C, work_h, work_w] multiplicative shift
///   tconv  [C, C, k, k]       (in, out, ky, kx), stride 1, "same" padding
class DomainGeneratorParams {
 public:
  DomainGeneratorParams() = default;

  /// work_size 224 follows the reference module; smaller values trade
  /// fidelity for speed on tiny images (work_size <= 0 means native size).
  static DomainGeneratorParams init(int channels, int work_h, int work_w, std::uint64_t seed);

  int channels() const { return channels_; }
  int work_h() const { return work_h_; }
  int work_w() const { return work_w_; }
  int kernel(int b) const { return kernels_[b]; }

  std::vector<float>& params() { return params_; }
  const std::vector<float>& params() const { return params_; }

  std::span<float> conv(int b) { return slice(b, 0); }
  std::span<float> mu(int b) { return slice(b, 1); }
  std::span<float> sigma(int b) { return slice(b, 2); }
  std::span<float> tconv(int b) { return slice(b, 3); }
  std::span<const float> conv(int b) const { return slice(b, 0); }
  std::span<const float> mu(int b) const { return slice(b, 1); }
  std::span<const float> sigma(int b) const { return slice(b, 2); }
  std::span<const float> tconv(int b) const { return slice(b, 3); }
  std::size_t offset(int b, int part) const { return offsets_[b][part]; }

  /// generator.bin: "DWGN", u16 version, u8 branch count, then per branch
  /// u16 channels, u16 k, u16 feature h, u16 feature w, and float32 payloads
  /// for conv, mu, sigma, tconv.
  std::vector<std::uint8_t> serialize() const;
  static DomainGeneratorParams deserialize(std::span<const std::uint8_t> bytes);
  void save(const std::filesystem::path& file) const;
  static DomainGeneratorParams load(const std::filesystem::path& file);

  bool operator==(const DomainGeneratorParams&) const = default;

 private:
  void layout();
  std::span<float> slice(int b, int part);
  std::span<const float> slice(int b, int part) const;

  int channels_ = 3;
  int work_h_ = 0, work_w_ = 0;
  std::array<int, kNumBranches> kernels_ = kBranchKernels;
  std::array<std::array<std::size_t, 5>, kNumBranches> offsets_{};
  std::vector<float> params_;
};

/// Branch mixing weights defining one domain.
struct DomainSpec {
  std::uint64_t seed = 0;
  std::array<double, kNumBranches> weights{};

  /// w_i ~ N(0,1), redrawn until |sum w_i| >= 0.25.
  static DomainSpec sample(std::uint64_t seed);
  double weight_sum() const;
  void validate() const;

  std::string to_json() const;
  static DomainSpec from_json(const std::string& text);
  bool operator==(const DomainSpec&) const = default;
};

/// Domain rendering: x is a batch in [0,1] of the given image shape; output has the
/// same shape, clamped to [0,1]. Feature-shift statistics are per sample and
/// channel, so each output row depends only on its own input row.
Mat apply_domain(const DomainGeneratorParams& theta, const DomainSpec& spec, const Mat& x,
                 const ImageShape& shape);

/// Accumulates d<dy, render(x)>/d(theta) into dparams (length theta.params().size()).
void apply_domain_backward(const DomainGeneratorParams& theta, const DomainSpec& spec,
                           const Mat& x, const ImageShape& shape, const Mat& dy,
                           float* dparams);

/// J specs with fresh N(0,1) weights, distinct from each other and `target`.
std::vector<DomainSpec> sample_other_domains(const DomainGeneratorParams& theta, int J,
                                             std::uint64_t seed,
                                             const DomainSpec* target = nullptr);

}  // namespace dwv

#endif  // DWV_GENERATOR_HPP_
