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
#ifndef DWV_COMMON_HPP_
#define DWV_COMMON_HPP_

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace dwv {

// Activations are stored one sample per row, channel-major within a row.
using Mat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<Mat>;
using ConstMatMap = Eigen::Map<const Mat>;

enum class Errc {
  kMissingFile,
  kBadMagic,
  kLabelOutOfRange,
  kPixelOutOfRange,
  kManifestInconsistent,
  kShapeMismatch,
  kInvalidArgument,
  kInsufficientClassPopulation,
  kDegenerateGradient,
  kNumericDivergence,
  kIo,
  kUnknownArch,
  kInvalidDomainSpec,
};

const char* errc_name(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

struct ImageShape {
  int c = 3;
  int h = 16;
  int w = 16;

  int size() const { return c * h * w; }
  int plane() const { return h * w; }
  bool operator==(const ImageShape&) const = default;
};

// SplitMix-seeded xoshiro256** so that streams are identical across
// standard-library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  double uniform();                    // [0, 1)
  double uniform(double lo, double hi);
  double normal();                     // N(0, 1)
  std::size_t below(std::size_t n);    // [0, n)

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = below(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  // Derives an independent child seed; used to fan out per-stage seeds.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream);

 private:
  std::uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

inline bool all_finite(std::span<const float> v) {
  for (float x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace dwv

#endif  // DWV_COMMON_HPP_
