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
#include "dwv/generator.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include <json.hpp>

#include "dwv/io.hpp"
#include "dwv/nn.hpp"

namespace dwv {

namespace {

constexpr char kMagic[4] = {'D', 'W', 'G', 'N'};
constexpr std::uint16_t kVersion = 1;
constexpr float kNormEps = 1e-5f;

}  // namespace

void DomainGeneratorParams::layout() {
  std::size_t off = 0;
  const std::size_t plane = static_cast<std::size_t>(channels_) * work_h_ * work_w_;
  for (int b = 0; b < kNumBranches; ++b) {
    const std::size_t kk = static_cast<std::size_t>(channels_) * channels_ * kernels_[b] * kernels_[b];
    offsets_[b][0] = off;
    off += kk;
    offsets_[b][1] = off;
    off += plane;
    offsets_[b][2] = off;
    off += plane;
    offsets_[b][3] = off;
    off += kk;
    offsets_[b][4] = off;
  }
  params_.assign(off, 0.0f);
}

std::span<float> DomainGeneratorParams::slice(int b, int part) {
  return {params_.data() + offsets_[b][part], offsets_[b][part + 1] - offsets_[b][part]};
}

std::span<const float> DomainGeneratorParams::slice(int b, int part) const {
  return {params_.data() + offsets_[b][part], offsets_[b][part + 1] - offsets_[b][part]};
}

DomainGeneratorParams DomainGeneratorParams::init(int channels, int work_h, int work_w,
                                                  std::uint64_t seed) {
  if (channels < 1 || work_h < 1 || work_w < 1)
    throw Error(Errc::kInvalidArgument, "generator dimensions must be positive");
  DomainGeneratorParams g;
  g.channels_ = channels;
  g.work_h_ = work_h;
  g.work_w_ = work_w;
  g.layout();
  Rng rng(seed);
  for (int b = 0; b < kNumBranches; ++b) {
    const double fan = static_cast<double>(channels) * g.kernels_[b] * g.kernels_[b];
    const double std = 1.0 / std::sqrt(fan);
    for (float& v : g.conv(b)) v = static_cast<float>(std * rng.normal());
    std::fill(g.mu(b).begin(), g.mu(b).end(), 0.0f);
    std::fill(g.sigma(b).begin(), g.sigma(b).end(), 1.0f);
    for (float& v : g.tconv(b)) v = static_cast<float>(std * rng.normal());
  }
  return g;
}

std::vector<std::uint8_t> DomainGeneratorParams::serialize() const {
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  io::append_u16(out, kVersion);
  io::append_u8(out, kNumBranches);
  for (int b = 0; b < kNumBranches; ++b) {
    io::append_u16(out, static_cast<std::uint16_t>(channels_));
    io::append_u16(out, static_cast<std::uint16_t>(kernels_[b]));
    io::append_u16(out, static_cast<std::uint16_t>(work_h_));
    io::append_u16(out, static_cast<std::uint16_t>(work_w_));
    for (int part = 0; part < 4; ++part) io::append_f32(out, slice(b, part));
  }
  return out;
}

DomainGeneratorParams DomainGeneratorParams::deserialize(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 7 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw Error(Errc::kBadMagic, "generator checkpoint has a corrupt header magic");
  io::ByteReader in(bytes.subspan(4));
  const std::uint16_t version = in.u16();
  if (version != kVersion)
    throw Error(Errc::kBadMagic, "unsupported generator checkpoint version " +
                                     std::to_string(version));
  const int branches = in.u8();
  if (branches != kNumBranches)
    throw Error(Errc::kShapeMismatch, "generator checkpoint must hold exactly 4 branches");

  // Walk the branch headers once to size the layout, then read payloads.
  DomainGeneratorParams g;
  const auto body_bytes = bytes.subspan(7);
  {
    io::ByteReader scan(body_bytes);
    for (int b = 0; b < kNumBranches; ++b) {
      const int c = scan.u16(), k = scan.u16(), fh = scan.u16(), fw = scan.u16();
      if (b == 0) {
        g.channels_ = c;
        g.work_h_ = fh;
        g.work_w_ = fw;
      } else if (c != g.channels_ || fh != g.work_h_ || fw != g.work_w_) {
        throw Error(Errc::kShapeMismatch, "generator branches disagree on feature shape");
      }
      if (k != kBranchKernels[b])
        throw Error(Errc::kShapeMismatch, "generator kernel sizes must be 5, 9, 13, 17");
      const std::size_t kk = static_cast<std::size_t>(c) * c * k * k;
      const std::size_t plane = static_cast<std::size_t>(c) * fh * fw;
      std::vector<float> skip(2 * kk + 2 * plane);
      scan.f32(skip);
    }
    if (scan.remaining() != 0)
      throw Error(Errc::kShapeMismatch, "trailing bytes in generator checkpoint");
  }
  g.layout();
  io::ByteReader body(body_bytes);
  for (int b = 0; b < kNumBranches; ++b) {
    for (int i = 0; i < 4; ++i) body.u16();
    for (int part = 0; part < 4; ++part) body.f32(g.slice(b, part));
  }
  for (int b = 0; b < kNumBranches; ++b)
    if (!all_finite(g.sigma(b)))
      throw Error(Errc::kNumericDivergence, "generator sigma contains non-finite entries");
  return g;
}

void DomainGeneratorParams::save(const std::filesystem::path& file) const {
  io::write_file(file, serialize());
}

DomainGeneratorParams DomainGeneratorParams::load(const std::filesystem::path& file) {
  return deserialize(io::read_file(file));
}

// ---------------------------------------------------------------------------
// DomainSpec

DomainSpec DomainSpec::sample(std::uint64_t seed) {
  Rng rng(seed);
  DomainSpec s;
  s.seed = seed;
  do {
    for (double& w : s.weights) w = rng.normal();
  } while (std::abs(s.weight_sum()) < kMinWeightSum);
  return s;
}

double DomainSpec::weight_sum() const {
  double s = 0.0;
  for (double w : weights) s += w;
  return s;
}

void DomainSpec::validate() const {
  for (double w : weights)
    if (!std::isfinite(w)) throw Error(Errc::kInvalidDomainSpec, "domain weights must be finite");
  if (std::abs(weight_sum()) < kMinWeightSum)
    throw Error(Errc::kInvalidDomainSpec, "domain spec rejected: |sum w_i| < 0.25");
}

std::string DomainSpec::to_json() const {
  nlohmann::json j;
  j["seed"] = seed;
  j["weights"] = weights;
  return j.dump(2) + "\n";
}

DomainSpec DomainSpec::from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    DomainSpec s;
    s.seed = j.at("seed").get<std::uint64_t>();
    const auto w = j.at("weights").get<std::vector<double>>();
    if (w.size() != kNumBranches)
      throw Error(Errc::kInvalidDomainSpec, "domain spec needs exactly 4 weights");
    std::copy(w.begin(), w.end(), s.weights.begin());
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kInvalidDomainSpec, std::string("malformed domain spec: ") + e.what());
  }
}

std::vector<DomainSpec> sample_other_domains(const DomainGeneratorParams& /*theta*/, int J,
                                             std::uint64_t seed, const DomainSpec* target) {
  if (J < 1) throw Error(Errc::kInvalidArgument, "J must be >= 1");
  std::vector<DomainSpec> out;
  for (std::uint64_t stream = 0; static_cast<int>(out.size()) < J; ++stream) {
    DomainSpec s = DomainSpec::sample(Rng::derive(seed, stream));
    const bool clash = (target && s.weights == target->weights) ||
                       std::any_of(out.begin(), out.end(),
                                   [&](const DomainSpec& o) { return o.weights == s.weights; });
    if (!clash) out.push_back(s);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Forward / backward

namespace {

// Stride-1 transposed convolution as a convolution with the spatially
// flipped, in/out-swapped kernel.
void flip_tconv(std::span<const float> t, int c, int k, std::vector<float>& out) {
  out.resize(t.size());
  for (int i = 0; i < c; ++i)
    for (int o = 0; o < c; ++o)
      for (int y = 0; y < k; ++y)
        for (int x = 0; x < k; ++x)
          out[((o * c + i) * k + y) * k + x] = t[((i * c + o) * k + (k - 1 - y)) * k + (k - 1 - x)];
}

void unflip_tconv_grad(const std::vector<float>& g, int c, int k, float* dt) {
  for (int i = 0; i < c; ++i)
    for (int o = 0; o < c; ++o)
      for (int y = 0; y < k; ++y)
        for (int x = 0; x < k; ++x)
          dt[((i * c + o) * k + (k - 1 - y)) * k + (k - 1 - x)] += g[((o * c + i) * k + y) * k + x];
}

struct BranchCache {
  std::vector<float> norm;     // standardized conv output
  std::vector<float> inv_std;  // per channel
  std::vector<float> act;      // tanh output
};

struct SampleCache {
  std::vector<float> up;  // input at working resolution
  std::array<BranchCache, kNumBranches> branch;
  std::vector<float> pre_clamp;
};

struct Prepared {
  std::array<std::vector<float>, kNumBranches> flipped;
  std::array<double, kNumBranches> mix{};
};

Prepared prepare(const DomainGeneratorParams& theta, const DomainSpec& spec) {
  spec.validate();
  Prepared p;
  const double sum = spec.weight_sum();
  for (int b = 0; b < kNumBranches; ++b) {
    flip_tconv(theta.tconv(b), theta.channels(), theta.kernel(b), p.flipped[b]);
    p.mix[b] = spec.weights[b] / sum;
  }
  return p;
}

void forward_sample(const DomainGeneratorParams& theta, const Prepared& prep, const float* x,
                    const ImageShape& shape, float* y, SampleCache& cache) {
  const int c = theta.channels();
  const int sh = theta.work_h(), sw = theta.work_w();
  const int plane = sh * sw;
  const int n = c * plane;
  cache.up.resize(n);
  ops::resize_bilinear(x, c, shape.h, shape.w, sh, sw, cache.up.data());

  std::vector<float> mixed(n, 0.0f), conv_out(n), shifted(n), t(n);
  for (int b = 0; b < kNumBranches; ++b) {
    BranchCache& bc = cache.branch[b];
    const int k = theta.kernel(b);
    ops::conv2d_same(cache.up.data(), c, sh, sw, theta.conv(b).data(), c, k, conv_out.data());
    bc.norm.resize(n);
    bc.inv_std.resize(c);
    const auto mu = theta.mu(b);
    const auto sigma = theta.sigma(b);
    for (int ch = 0; ch < c; ++ch) {
      const float* src = conv_out.data() + ch * plane;
      double mean = 0.0, sq = 0.0;
      for (int p = 0; p < plane; ++p) mean += src[p];
      mean /= plane;
      for (int p = 0; p < plane; ++p) sq += (src[p] - mean) * (src[p] - mean);
      const float inv = static_cast<float>(1.0 / std::sqrt(sq / plane + kNormEps));
      bc.inv_std[ch] = inv;
      for (int p = 0; p < plane; ++p) {
        const int i = ch * plane + p;
        bc.norm[i] = (src[p] - static_cast<float>(mean)) * inv;
        shifted[i] = sigma[i] * bc.norm[i] + mu[i];
      }
    }
    ops::conv2d_same(shifted.data(), c, sh, sw, prep.flipped[b].data(), c, k, t.data());
    bc.act.resize(n);
    const float m = static_cast<float>(prep.mix[b]);
    for (int i = 0; i < n; ++i) {
      bc.act[i] = std::tanh(t[i]);
      mixed[i] += m * bc.act[i];
    }
  }
  cache.pre_clamp.resize(shape.size());
  ops::resize_bilinear(mixed.data(), c, sh, sw, shape.h, shape.w, cache.pre_clamp.data());
  for (int i = 0; i < shape.size(); ++i) {
    const float v = 0.5f * (cache.pre_clamp[i] + 1.0f);
    cache.pre_clamp[i] = v;
    y[i] = std::clamp(v, 0.0f, 1.0f);
  }
}

void check_shapes(const DomainGeneratorParams& theta, const Mat& x, const ImageShape& shape) {
  if (shape.c != theta.channels())
    throw Error(Errc::kShapeMismatch, "generator channel count does not match images");
  if (x.cols() != shape.size())
    throw Error(Errc::kShapeMismatch, "batch width does not match image shape");
}

}  // namespace

Mat apply_domain(const DomainGeneratorParams& theta, const DomainSpec& spec, const Mat& x,
                 const ImageShape& shape) {
  check_shapes(theta, x, shape);
  const Prepared prep = prepare(theta, spec);
  Mat out(x.rows(), x.cols());
  SampleCache cache;
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    forward_sample(theta, prep, x.row(r).data(), shape, out.row(r).data(), cache);
  return out;
}

void apply_domain_backward(const DomainGeneratorParams& theta, const DomainSpec& spec,
                           const Mat& x, const ImageShape& shape, const Mat& dy,
                           float* dparams) {
  check_shapes(theta, x, shape);
  if (dy.rows() != x.rows() || dy.cols() != x.cols())
    throw Error(Errc::kShapeMismatch, "upstream gradient does not match batch");
  const Prepared prep = prepare(theta, spec);
  const int c = theta.channels();
  const int sh = theta.work_h(), sw = theta.work_w();
  const int plane = sh * sw;
  const int n = c * plane;

  SampleCache cache;
  std::vector<float> out(shape.size()), dpre(shape.size()), dmixed(n), dt(n), dshift(n), dconv(n),
      dflip, shifted(n);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    forward_sample(theta, prep, x.row(r).data(), shape, out.data(), cache);
    const float* g = dy.row(r).data();
    for (int i = 0; i < shape.size(); ++i) {
      const float v = cache.pre_clamp[i];
      dpre[i] = (v >= 0.0f && v <= 1.0f) ? 0.5f * g[i] : 0.0f;
    }
    std::fill(dmixed.begin(), dmixed.end(), 0.0f);
    ops::resize_bilinear_backward(dpre.data(), c, sh, sw, shape.h, shape.w, dmixed.data());

    for (int b = 0; b < kNumBranches; ++b) {
      const BranchCache& bc = cache.branch[b];
      const int k = theta.kernel(b);
      const float m = static_cast<float>(prep.mix[b]);
      for (int i = 0; i < n; ++i) dt[i] = dmixed[i] * m * (1.0f - bc.act[i] * bc.act[i]);

      const auto mu = theta.mu(b);
      const auto sigma = theta.sigma(b);
      for (int i = 0; i < n; ++i) shifted[i] = sigma[i] * bc.norm[i] + mu[i];
      dflip.assign(prep.flipped[b].size(), 0.0f);
      std::fill(dshift.begin(), dshift.end(), 0.0f);
      ops::conv2d_same_backward(shifted.data(), c, sh, sw, prep.flipped[b].data(), c, k, dt.data(),
                                dflip.data(), dshift.data());
      unflip_tconv_grad(dflip, c, k, dparams + theta.offset(b, 3));

      float* dmu = dparams + theta.offset(b, 1);
      float* dsig = dparams + theta.offset(b, 2);
      for (int ch = 0; ch < c; ++ch) {
        double mean_g = 0.0, mean_gn = 0.0;
        for (int p = 0; p < plane; ++p) {
          const int i = ch * plane + p;
          dmu[i] += dshift[i];
          dsig[i] += dshift[i] * bc.norm[i];
          const float dn = dshift[i] * sigma[i];
          dconv[i] = dn;
          mean_g += dn;
          mean_gn += static_cast<double>(dn) * bc.norm[i];
        }
        mean_g /= plane;
        mean_gn /= plane;
        const float inv = bc.inv_std[ch];
        for (int p = 0; p < plane; ++p) {
          const int i = ch * plane + p;
          dconv[i] = inv * (dconv[i] - static_cast<float>(mean_g) -
                            bc.norm[i] * static_cast<float>(mean_gn));
        }
      }
      ops::conv2d_same_backward(cache.up.data(), c, sh, sw, theta.conv(b).data(), c, k,
                                dconv.data(), dparams + theta.offset(b, 0), nullptr);
    }
  }
}

}  // namespace dwv
