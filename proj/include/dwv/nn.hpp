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
#ifndef DWV_NN_HPP_
#define DWV_NN_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dwv/common.hpp"

namespace dwv {

namespace ops {

// Stride-1 convolution with zero "same" padding (odd k) on one sample.
// x: [c_in, h, w], kernel: [c_out, c_in, k, k], y: [c_out, h, w] (overwritten).
void conv2d_same(const float* x, int c_in, int h, int w, const float* kernel, int c_out,
                 int k, float* y);

// Accumulates into dkernel and/or dx (either may be null).
void conv2d_same_backward(const float* x, int c_in, int h, int w, const float* kernel,
                          int c_out, int k, const float* dy, float* dkernel, float* dx);

// Bilinear resize with half-pixel centers (align_corners = false).
void resize_bilinear(const float* x, int c, int h, int w, int oh, int ow, float* y);
void resize_bilinear_backward(const float* dy, int c, int h, int w, int oh, int ow,
                              float* dx);

}  // namespace ops

enum class LayerKind : std::uint8_t { kConv, kRelu, kMaxPool, kLinear };

struct LayerDesc {
  LayerKind kind;
  int in_c = 0, in_h = 0, in_w = 0;
  int out_c = 0, out_h = 0, out_w = 0;
  int k = 0;
  std::size_t w_off = 0, w_len = 0;
  std::size_t b_off = 0, b_len = 0;

  int in_dim() const { return in_c * in_h * in_w; }
  int out_dim() const { return out_c * out_h * out_w; }
};

/// Inputs to every layer, recorded by forward() for backward().
struct ForwardTape {
  std::vector<Mat> inputs;
};

/// Small image classifier: a feature extractor ending in a ReLU'd hidden
/// layer (the latent space Z) followed by a linear K-way head. Parameters
/// live in one flat vector so gradients, optimizers and pruning can treat
/// the model as a point in R^P.
class ClassifierModel {
 public:
  ClassifierModel() = default;

  /// arch is "smallcnn" or "smallcnn2".
  static ClassifierModel build(const std::string& arch, int num_classes,
                               const ImageShape& input, std::uint64_t seed);

  const std::string& arch() const { return arch_; }
  int num_classes() const { return num_classes_; }
  int feature_dim() const { return layers_[head_].in_c; }
  const ImageShape& input_shape() const { return input_; }
  const std::vector<LayerDesc>& layers() const { return layers_; }

  std::vector<float>& params() { return params_; }
  const std::vector<float>& params() const { return params_; }
  std::size_t param_count() const { return params_.size(); }

  /// Logits for a batch (rows = samples).
  Mat forward(const Mat& x, ForwardTape* tape = nullptr) const;
  Mat features(const Mat& x) const;
  Mat probabilities(const Mat& x) const;
  std::vector<int> predict(const Mat& x) const;

  /// Back-propagates `dlogits` and/or `dfeatures` (gradient at the latent
  /// layer, added to what flows back from the head). Parameter gradients are
  /// accumulated into dparams when non-null; the input gradient is written to
  /// dx when non-null.
  void backward(const ForwardTape& tape, const Mat* dlogits, const Mat* dfeatures,
                float* dparams, Mat* dx) const;

  /// Directional derivative d/dh of grad_x CE(f(x; w + h v), y) at h = 0 for
  /// the mean cross-entropy, with ReLU and max-pool switches held at their
  /// values for w (the almost-everywhere derivative). This is the product of
  /// the transposed mixed Jacobian d(grad_w CE)/dx with v.
  Mat input_grad_directional(const Mat& x, std::span<const int> labels,
                             std::span<const float> v) const;

  /// 1 for conv/linear weights (biases excluded).
  std::vector<std::uint8_t> prunable_mask() const;

  /// model.bin (flat float32 LE) + model.json (arch_tag, K, d_z, shape).
  void save(const std::filesystem::path& dir) const;
  static ClassifierModel load(const std::filesystem::path& dir);

 private:
  std::string arch_;
  int num_classes_ = 0;
  ImageShape input_;
  std::vector<LayerDesc> layers_;
  std::size_t head_ = 0;  // index of the final linear layer
  std::vector<float> params_;
};

/// Mean softmax cross-entropy; dlogits (if given) receives d(mean)/d(logits).
double softmax_cross_entropy(const Mat& logits, std::span<const int> labels,
                             Mat* dlogits = nullptr);

/// Row-wise softmax.
Mat softmax(const Mat& logits);

double accuracy(const ClassifierModel& model, const Mat& x, std::span<const int> labels);

/// SGD with Nesterov momentum and coupled L2 weight decay.
class NesterovSgd {
 public:
  NesterovSgd(std::size_t n, float momentum, float weight_decay)
      : buf_(n, 0.0f), momentum_(momentum), weight_decay_(weight_decay) {}
  void step(std::span<float> params, std::span<const float> grad, float lr);

 private:
  std::vector<float> buf_;
  float momentum_;
  float weight_decay_;
};

/// Adam, used for the variational network.
class Adam {
 public:
  explicit Adam(std::size_t n, float beta1 = 0.9f, float beta2 = 0.999f, float eps = 1e-8f)
      : m_(n, 0.0f), v_(n, 0.0f), beta1_(beta1), beta2_(beta2), eps_(eps) {}
  void step(std::span<float> params, std::span<const float> grad, float lr);

 private:
  std::vector<float> m_, v_;
  float beta1_, beta2_, eps_;
  int t_ = 0;
};

}  // namespace dwv

#endif  // DWV_NN_HPP_
