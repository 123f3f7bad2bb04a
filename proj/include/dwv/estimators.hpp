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
#ifndef DWV_ESTIMATORS_HPP_
#define DWV_ESTIMATORS_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "dwv/common.hpp"

namespace dwv {

/// Diagonal-Gaussian conditional q(zhat | z) with two-layer perceptron heads
/// for the mean and the log-variance. Log-variances are clamped to [-10, 10].
class VariationalNet {
 public:
  static constexpr float kLogVarClamp = 10.0f;

  VariationalNet() = default;
  static VariationalNet init(int dim, int hidden, std::uint64_t seed);

  int dim() const { return dim_; }
  int hidden() const { return hidden_; }
  std::vector<float>& params() { return params_; }
  const std::vector<float>& params() const { return params_; }

  // Parameter blocks: {mean, logvar} x {W1 [h,d], b1 [h], W2 [d,h], b2 [d]}.
  std::span<float> block(int head, int part);

  struct Output {
    Mat mean;
    Mat logvar;    // clamped
    Mat lv_raw;    // before clamping
    Mat h_mean;    // hidden activations (post-ReLU)
    Mat h_logvar;
  };
  Output forward(const Mat& z) const;

  /// Accumulates parameter gradients (if dparams) and writes dz (if non-null).
  void backward(const Mat& z, const Output& out, const Mat& dmean, const Mat& dlogvar,
                float* dparams, Mat* dz) const;

 private:
  std::size_t off(int head, int part) const;
  int dim_ = 0;
  int hidden_ = 0;
  std::vector<float> params_;
};

struct MIEstimate {
  double value = 0.0;  // nats
  std::size_t n = 0;
};

/// Mean log q(zhat_i | z_i) over aligned pairs.
double variational_log_likelihood(const VariationalNet& q, const Mat& z, const Mat& zhat);

/// Maximizes the mean log-likelihood by gradient ascent (Adam). Uses
/// seeded minibatches of up to 512 pairs. `history` receives the
/// per-step log-likelihood of the batch before each update.
VariationalNet fit_variational(VariationalNet q, const Mat& z, const Mat& zhat, int steps,
                               float lr, std::uint64_t seed,
                               std::vector<double>* history = nullptr);

/// (1/N) sum_i [log q(zhat_i|z_i) - (1/N) sum_j log q(zhat_j|z_i)].
/// Optional gradients w.r.t. z (through q) and zhat.
MIEstimate club_upper_bound(const VariationalNet& q, const Mat& z, const Mat& zhat,
                            Mat* dz = nullptr, Mat* dzhat = nullptr);

enum class MmdKernel { kLinear, kRbfMedian };

struct MMDValue {
  double value = 0.0;               // mean of per_class
  std::vector<double> per_class;    // one entry per evaluated class
  std::vector<int> classes;         // class id of each per_class entry
  std::vector<int> skipped;         // classes absent from either batch
};

/// Class-conditional squared MMD between z (labels_s) and zhat (labels_t),
/// averaged over classes present in both. The RBF bandwidth is the median
/// pairwise squared distance of the pooled batch (held constant for
/// differentiation). Throws when no class is present in both batches.
MMDValue class_conditional_mmd(const Mat& z, const Mat& zhat, std::span<const int> labels_s,
                               std::span<const int> labels_t, int num_classes,
                               MmdKernel kernel = MmdKernel::kRbfMedian, Mat* dz = nullptr,
                               Mat* dzhat = nullptr);

}  // namespace dwv

#endif  // DWV_ESTIMATORS_HPP_
