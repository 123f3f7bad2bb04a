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
#include "dwv/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "dwv/io.hpp"

namespace dwv {

namespace ops {

namespace {

// cols: [c_in * k * k, h * w]
void im2col(const float* x, int c_in, int h, int w, int k, float* cols) {
  const int pad = k / 2;
  const int hw = h * w;
  for (int ci = 0; ci < c_in; ++ci) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        float* row = cols + static_cast<std::size_t>((ci * k + ky) * k + kx) * hw;
        const int dy = ky - pad, dx = kx - pad;
        for (int y = 0; y < h; ++y) {
          const int sy = y + dy;
          float* dst = row + y * w;
          if (sy < 0 || sy >= h) {
            std::fill(dst, dst + w, 0.0f);
            continue;
          }
          const float* src = x + (ci * h + sy) * w;
          const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
          std::fill(dst, dst + x0, 0.0f);
          for (int xx = x0; xx < x1; ++xx) dst[xx] = src[xx + dx];
          std::fill(dst + std::max(x0, x1), dst + w, 0.0f);
        }
      }
    }
  }
}

void col2im_add(const float* cols, int c_in, int h, int w, int k, float* dx) {
  const int pad = k / 2;
  const int hw = h * w;
  for (int ci = 0; ci < c_in; ++ci) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const float* row = cols + static_cast<std::size_t>((ci * k + ky) * k + kx) * hw;
        const int dy = ky - pad, ddx = kx - pad;
        for (int y = 0; y < h; ++y) {
          const int sy = y + dy;
          if (sy < 0 || sy >= h) continue;
          float* dst = dx + (ci * h + sy) * w;
          const float* src = row + y * w;
          const int x0 = std::max(0, -ddx), x1 = std::min(w, w - ddx);
          for (int xx = x0; xx < x1; ++xx) dst[xx + ddx] += src[xx];
        }
      }
    }
  }
}

std::vector<float>& scratch() {
  thread_local std::vector<float> buf;
  return buf;
}

}  // namespace

void conv2d_same(const float* x, int c_in, int h, int w, const float* kernel, int c_out,
                 int k, float* y) {
  const int rows = c_in * k * k;
  const int hw = h * w;
  auto& buf = scratch();
  buf.resize(static_cast<std::size_t>(rows) * hw);
  im2col(x, c_in, h, w, k, buf.data());
  ConstMatMap cols(buf.data(), rows, hw);
  ConstMatMap kmat(kernel, c_out, rows);
  MatMap out(y, c_out, hw);
  out.noalias() = kmat * cols;
}

void conv2d_same_backward(const float* x, int c_in, int h, int w, const float* kernel,
                          int c_out, int k, const float* dy, float* dkernel, float* dx) {
  const int rows = c_in * k * k;
  const int hw = h * w;
  auto& buf = scratch();
  buf.resize(static_cast<std::size_t>(rows) * hw);
  ConstMatMap g(dy, c_out, hw);
  if (dkernel) {
    im2col(x, c_in, h, w, k, buf.data());
    ConstMatMap cols(buf.data(), rows, hw);
    MatMap dk(dkernel, c_out, rows);
    dk.noalias() += g * cols.transpose();
  }
  if (dx) {
    ConstMatMap kmat(kernel, c_out, rows);
    MatMap dcols(buf.data(), rows, hw);
    dcols.noalias() = kmat.transpose() * g;
    col2im_add(buf.data(), c_in, h, w, k, dx);
  }
}

namespace {

struct Tap {
  int i0, i1;
  float w0, w1;
};

std::vector<Tap> taps(int in, int out) {
  std::vector<Tap> t(out);
  const double scale = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    double src = (o + 0.5) * scale - 0.5;
    if (src < 0) src = 0;
    int i0 = static_cast<int>(std::floor(src));
    if (i0 > in - 1) i0 = in - 1;
    const int i1 = std::min(i0 + 1, in - 1);
    const float l = static_cast<float>(src - i0);
    t[o] = {i0, i1, 1.0f - l, l};
  }
  return t;
}

}  // namespace

void resize_bilinear(const float* x, int c, int h, int w, int oh, int ow, float* y) {
  if (oh == h && ow == w) {
    std::copy(x, x + c * h * w, y);
    return;
  }
  const auto ty = taps(h, oh), tx = taps(w, ow);
  for (int ch = 0; ch < c; ++ch) {
    const float* src = x + ch * h * w;
    float* dst = y + ch * oh * ow;
    for (int yy = 0; yy < oh; ++yy) {
      const Tap& a = ty[yy];
      const float* r0 = src + a.i0 * w;
      const float* r1 = src + a.i1 * w;
      for (int xx = 0; xx < ow; ++xx) {
        const Tap& b = tx[xx];
        dst[yy * ow + xx] = a.w0 * (b.w0 * r0[b.i0] + b.w1 * r0[b.i1]) +
                            a.w1 * (b.w0 * r1[b.i0] + b.w1 * r1[b.i1]);
      }
    }
  }
}

void resize_bilinear_backward(const float* dy, int c, int h, int w, int oh, int ow,
                              float* dx) {
  if (oh == h && ow == w) {
    for (int i = 0; i < c * h * w; ++i) dx[i] += dy[i];
    return;
  }
  const auto ty = taps(h, oh), tx = taps(w, ow);
  for (int ch = 0; ch < c; ++ch) {
    const float* g = dy + ch * oh * ow;
    float* dst = dx + ch * h * w;
    for (int yy = 0; yy < oh; ++yy) {
      const Tap& a = ty[yy];
      float* r0 = dst + a.i0 * w;
      float* r1 = dst + a.i1 * w;
      for (int xx = 0; xx < ow; ++xx) {
        const Tap& b = tx[xx];
        const float v = g[yy * ow + xx];
        r0[b.i0] += a.w0 * b.w0 * v;
        r0[b.i1] += a.w0 * b.w1 * v;
        r1[b.i0] += a.w1 * b.w0 * v;
        r1[b.i1] += a.w1 * b.w1 * v;
      }
    }
  }
}

}  // namespace ops

// ---------------------------------------------------------------------------
// ClassifierModel

namespace {

struct ArchPlan {
  int conv1_out, conv1_k, conv2_out, conv2_k, hidden;
};

ArchPlan plan_for(const std::string& arch) {
  if (arch == "smallcnn") return {8, 3, 16, 3, 32};
  if (arch == "smallcnn2") return {12, 5, 12, 3, 48};
  throw Error(Errc::kUnknownArch, "unknown architecture tag: " + arch);
}

}  // namespace

ClassifierModel ClassifierModel::build(const std::string& arch, int num_classes,
                                       const ImageShape& input, std::uint64_t seed) {
  const ArchPlan plan = plan_for(arch);
  if (num_classes < 2) throw Error(Errc::kInvalidArgument, "need at least two classes");
  if (input.h % 4 != 0 || input.w % 4 != 0 || input.h < 8 || input.w < 8)
    throw Error(Errc::kShapeMismatch, "classifier input H and W must be multiples of 4");

  ClassifierModel m;
  m.arch_ = arch;
  m.num_classes_ = num_classes;
  m.input_ = input;

  std::size_t off = 0;
  auto add = [&](LayerDesc d) {
    if (d.kind == LayerKind::kConv) {
      d.w_len = static_cast<std::size_t>(d.out_c) * d.in_c * d.k * d.k;
      d.b_len = d.out_c;
    } else if (d.kind == LayerKind::kLinear) {
      d.w_len = static_cast<std::size_t>(d.out_c) * d.in_c;
      d.b_len = d.out_c;
    }
    d.w_off = off;
    off += d.w_len;
    d.b_off = off;
    off += d.b_len;
    m.layers_.push_back(d);
  };
  auto conv = [&](int c, int h, int w, int oc, int k) {
    add({LayerKind::kConv, c, h, w, oc, h, w, k});
    add({LayerKind::kRelu, oc, h, w, oc, h, w, 0});
    add({LayerKind::kMaxPool, oc, h, w, oc, h / 2, w / 2, 0});
  };
  int c = input.c, h = input.h, w = input.w;
  conv(c, h, w, plan.conv1_out, plan.conv1_k);
  c = plan.conv1_out, h /= 2, w /= 2;
  conv(c, h, w, plan.conv2_out, plan.conv2_k);
  c = plan.conv2_out, h /= 2, w /= 2;
  add({LayerKind::kLinear, c * h * w, 1, 1, plan.hidden, 1, 1, 0});
  add({LayerKind::kRelu, plan.hidden, 1, 1, plan.hidden, 1, 1, 0});
  add({LayerKind::kLinear, plan.hidden, 1, 1, num_classes, 1, 1, 0});
  m.head_ = m.layers_.size() - 1;

  m.params_.assign(off, 0.0f);
  Rng rng(seed);
  for (std::size_t l = 0; l < m.layers_.size(); ++l) {
    const LayerDesc& d = m.layers_[l];
    if (d.w_len == 0) continue;
    const double fan_in = d.kind == LayerKind::kConv ? d.in_c * d.k * d.k : d.in_c;
    const double gain = (l == m.head_) ? 1.0 : 2.0;
    const double std = std::sqrt(gain / fan_in);
    for (std::size_t i = 0; i < d.w_len; ++i)
      m.params_[d.w_off + i] = static_cast<float>(std * rng.normal());
  }
  return m;
}

Mat ClassifierModel::forward(const Mat& x, ForwardTape* tape) const {
  if (x.cols() != input_.size())
    throw Error(Errc::kShapeMismatch, "input width does not match classifier input shape");
  if (tape) {
    tape->inputs.clear();
    tape->inputs.reserve(layers_.size());
  }
  Mat cur = x;
  const Eigen::Index n = x.rows();
  for (const LayerDesc& d : layers_) {
    Mat next;
    switch (d.kind) {
      case LayerKind::kConv: {
        next.resize(n, d.out_dim());
        const float* kern = params_.data() + d.w_off;
        const float* bias = params_.data() + d.b_off;
        const int hw = d.out_h * d.out_w;
        for (Eigen::Index r = 0; r < n; ++r) {
          float* y = next.row(r).data();
          ops::conv2d_same(cur.row(r).data(), d.in_c, d.in_h, d.in_w, kern, d.out_c, d.k, y);
          for (int oc = 0; oc < d.out_c; ++oc)
            for (int p = 0; p < hw; ++p) y[oc * hw + p] += bias[oc];
        }
        break;
      }
      case LayerKind::kRelu:
        next = cur.cwiseMax(0.0f);
        break;
      case LayerKind::kMaxPool: {
        next.resize(n, d.out_dim());
        for (Eigen::Index r = 0; r < n; ++r) {
          const float* src = cur.row(r).data();
          float* dst = next.row(r).data();
          for (int ch = 0; ch < d.out_c; ++ch)
            for (int y = 0; y < d.out_h; ++y)
              for (int xx = 0; xx < d.out_w; ++xx) {
                const float* p = src + (ch * d.in_h + 2 * y) * d.in_w + 2 * xx;
                dst[(ch * d.out_h + y) * d.out_w + xx] =
                    std::max(std::max(p[0], p[1]), std::max(p[d.in_w], p[d.in_w + 1]));
              }
        }
        break;
      }
      case LayerKind::kLinear: {
        ConstMatMap wmat(params_.data() + d.w_off, d.out_c, d.in_c);
        Eigen::Map<const Eigen::RowVectorXf> b(params_.data() + d.b_off, d.out_c);
        next.noalias() = cur * wmat.transpose();
        next.rowwise() += b;
        break;
      }
    }
    if (tape) tape->inputs.push_back(std::move(cur));
    cur = std::move(next);
  }
  return cur;
}

void ClassifierModel::backward(const ForwardTape& tape, const Mat* dlogits,
                               const Mat* dfeatures, float* dparams, Mat* dx) const {
  if (tape.inputs.size() != layers_.size())
    throw Error(Errc::kInvalidArgument, "tape does not belong to this model");
  if (!dlogits && !dfeatures) throw Error(Errc::kInvalidArgument, "nothing to back-propagate");

  Mat g;
  std::size_t start = head_;
  if (dlogits) {
    const LayerDesc& d = layers_[head_];
    const Mat& in = tape.inputs[head_];
    ConstMatMap wmat(params_.data() + d.w_off, d.out_c, d.in_c);
    if (dparams) {
      MatMap dw(dparams + d.w_off, d.out_c, d.in_c);
      dw.noalias() += dlogits->transpose() * in;
      Eigen::Map<Eigen::RowVectorXf> db(dparams + d.b_off, d.out_c);
      db += Eigen::RowVectorXf(dlogits->colwise().sum());
    }
    g.noalias() = *dlogits * wmat;
    if (dfeatures) g += *dfeatures;
  } else {
    g = *dfeatures;
  }

  for (std::size_t li = start; li-- > 0;) {
    const LayerDesc& d = layers_[li];
    const Mat& in = tape.inputs[li];
    const Eigen::Index n = in.rows();
    const bool need_dx = li > 0 || dx != nullptr;
    Mat gin;
    switch (d.kind) {
      case LayerKind::kRelu:
        gin = (in.array() > 0.0f).select(g, 0.0f);
        break;
      case LayerKind::kMaxPool: {
        gin = Mat::Zero(n, d.in_dim());
        for (Eigen::Index r = 0; r < n; ++r) {
          const float* src = in.row(r).data();
          const float* go = g.row(r).data();
          float* gi = gin.row(r).data();
          for (int ch = 0; ch < d.out_c; ++ch)
            for (int y = 0; y < d.out_h; ++y)
              for (int xx = 0; xx < d.out_w; ++xx) {
                const int base = (ch * d.in_h + 2 * y) * d.in_w + 2 * xx;
                const int cand[4] = {base, base + 1, base + d.in_w, base + d.in_w + 1};
                int best = cand[0];
                for (int c = 1; c < 4; ++c)
                  if (src[cand[c]] > src[best]) best = cand[c];
                gi[best] += go[(ch * d.out_h + y) * d.out_w + xx];
              }
        }
        break;
      }
      case LayerKind::kLinear: {
        ConstMatMap wmat(params_.data() + d.w_off, d.out_c, d.in_c);
        if (dparams) {
          MatMap dw(dparams + d.w_off, d.out_c, d.in_c);
          dw.noalias() += g.transpose() * in;
          Eigen::Map<Eigen::RowVectorXf> db(dparams + d.b_off, d.out_c);
          db += Eigen::RowVectorXf(g.colwise().sum());
        }
        if (need_dx) gin.noalias() = g * wmat;
        break;
      }
      case LayerKind::kConv: {
        const float* kern = params_.data() + d.w_off;
        const int hw = d.out_h * d.out_w;
        if (need_dx) gin = Mat::Zero(n, d.in_dim());
        for (Eigen::Index r = 0; r < n; ++r) {
          const float* gr = g.row(r).data();
          if (dparams) {
            float* db = dparams + d.b_off;
            for (int oc = 0; oc < d.out_c; ++oc) {
              float s = 0.0f;
              for (int p = 0; p < hw; ++p) s += gr[oc * hw + p];
              db[oc] += s;
            }
          }
          ops::conv2d_same_backward(in.row(r).data(), d.in_c, d.in_h, d.in_w, kern, d.out_c,
                                    d.k, gr, dparams ? dparams + d.w_off : nullptr,
                                    need_dx ? gin.row(r).data() : nullptr);
        }
        break;
      }
    }
    g = std::move(gin);
    if (li == 0 && dx) *dx = std::move(g);
  }
}

namespace {

// Index of the max of each 2x2 window, per output element.
void pool_argmax(const LayerDesc& d, const float* src, std::vector<int>& arg) {
  arg.resize(static_cast<std::size_t>(d.out_dim()));
  for (int ch = 0; ch < d.out_c; ++ch)
    for (int y = 0; y < d.out_h; ++y)
      for (int xx = 0; xx < d.out_w; ++xx) {
        const int base = (ch * d.in_h + 2 * y) * d.in_w + 2 * xx;
        const int cand[4] = {base, base + 1, base + d.in_w, base + d.in_w + 1};
        int best = cand[0];
        for (int c = 1; c < 4; ++c)
          if (src[cand[c]] > src[best]) best = cand[c];
        arg[(ch * d.out_h + y) * d.out_w + xx] = best;
      }
}

}  // namespace

Mat ClassifierModel::input_grad_directional(const Mat& x, std::span<const int> labels,
                                            std::span<const float> v) const {
  if (v.size() != params_.size()) throw Error(Errc::kShapeMismatch, "direction length mismatch");
  if (static_cast<std::size_t>(x.rows()) != labels.size())
    throw Error(Errc::kShapeMismatch, "label count does not match batch");
  const Eigen::Index n = x.rows();
  const std::size_t nl = layers_.size();
  std::vector<Mat> a(nl + 1), da(nl + 1);
  std::vector<std::vector<int>> args(nl);
  a[0] = x;
  da[0] = Mat::Zero(n, x.cols());
  std::vector<int> arg;

  // Forward with tangents.
  for (std::size_t li = 0; li < nl; ++li) {
    const LayerDesc& d = layers_[li];
    const Mat& in = a[li];
    const Mat& din = da[li];
    Mat& out = a[li + 1];
    Mat& dout = da[li + 1];
    switch (d.kind) {
      case LayerKind::kConv: {
        out.resize(n, d.out_dim());
        dout.resize(n, d.out_dim());
        const float* kern = params_.data() + d.w_off;
        const float* vk = v.data() + d.w_off;
        const int hw = d.out_h * d.out_w;
        std::vector<float> tmp(static_cast<std::size_t>(d.out_dim()));
        for (Eigen::Index r = 0; r < n; ++r) {
          float* y = out.row(r).data();
          float* dy = dout.row(r).data();
          ops::conv2d_same(in.row(r).data(), d.in_c, d.in_h, d.in_w, kern, d.out_c, d.k, y);
          ops::conv2d_same(din.row(r).data(), d.in_c, d.in_h, d.in_w, kern, d.out_c, d.k, dy);
          ops::conv2d_same(in.row(r).data(), d.in_c, d.in_h, d.in_w, vk, d.out_c, d.k, tmp.data());
          for (int oc = 0; oc < d.out_c; ++oc)
            for (int p = 0; p < hw; ++p) {
              y[oc * hw + p] += params_[d.b_off + oc];
              dy[oc * hw + p] += tmp[oc * hw + p] + v[d.b_off + oc];
            }
        }
        break;
      }
      case LayerKind::kRelu:
        out = in.cwiseMax(0.0f);
        dout = (in.array() > 0.0f).select(din, 0.0f);
        break;
      case LayerKind::kMaxPool: {
        out.resize(n, d.out_dim());
        dout.resize(n, d.out_dim());
        args[li].resize(static_cast<std::size_t>(n * d.out_dim()));
        for (Eigen::Index r = 0; r < n; ++r) {
          pool_argmax(d, in.row(r).data(), arg);
          std::copy(arg.begin(), arg.end(), args[li].begin() + r * d.out_dim());
          for (int o = 0; o < d.out_dim(); ++o) {
            out(r, o) = in(r, arg[o]);
            dout(r, o) = din(r, arg[o]);
          }
        }
        break;
      }
      case LayerKind::kLinear: {
        ConstMatMap wmat(params_.data() + d.w_off, d.out_c, d.in_c);
        ConstMatMap vmat(v.data() + d.w_off, d.out_c, d.in_c);
        Eigen::Map<const Eigen::RowVectorXf> b(params_.data() + d.b_off, d.out_c);
        Eigen::Map<const Eigen::RowVectorXf> vb(v.data() + d.b_off, d.out_c);
        out.noalias() = in * wmat.transpose();
        out.rowwise() += b;
        dout.noalias() = din * wmat.transpose() + in * vmat.transpose();
        dout.rowwise() += vb;
        break;
      }
    }
  }

  // Cross-entropy gradient at the logits and its tangent.
  const Mat p = softmax(a[nl]);
  const Mat& dz = da[nl];
  Mat g = p, dg(n, p.cols());
  const float inv_n = 1.0f / static_cast<float>(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    g(r, labels[r]) -= 1.0f;
    const float pdz = p.row(r).dot(dz.row(r));
    dg.row(r) = p.row(r).cwiseProduct(dz.row(r)).array() - p.row(r).array() * pdz;
  }
  g *= inv_n;
  dg *= inv_n;

  // Backward with tangents; parameter-direction terms enter through v.
  for (std::size_t li = nl; li-- > 0;) {
    const LayerDesc& d = layers_[li];
    const Mat& in = a[li];
    Mat gin, dgin;
    switch (d.kind) {
      case LayerKind::kRelu:
        gin = (in.array() > 0.0f).select(g, 0.0f);
        dgin = (in.array() > 0.0f).select(dg, 0.0f);
        break;
      case LayerKind::kMaxPool: {
        gin = Mat::Zero(n, d.in_dim());
        dgin = Mat::Zero(n, d.in_dim());
        for (Eigen::Index r = 0; r < n; ++r)
          for (int o = 0; o < d.out_dim(); ++o) {
            const int src = args[li][r * d.out_dim() + o];
            gin(r, src) += g(r, o);
            dgin(r, src) += dg(r, o);
          }
        break;
      }
      case LayerKind::kLinear: {
        ConstMatMap wmat(params_.data() + d.w_off, d.out_c, d.in_c);
        ConstMatMap vmat(v.data() + d.w_off, d.out_c, d.in_c);
        gin.noalias() = g * wmat;
        dgin.noalias() = dg * wmat + g * vmat;
        break;
      }
      case LayerKind::kConv: {
        const float* kern = params_.data() + d.w_off;
        const float* vk = v.data() + d.w_off;
        gin = Mat::Zero(n, d.in_dim());
        dgin = Mat::Zero(n, d.in_dim());
        for (Eigen::Index r = 0; r < n; ++r) {
          ops::conv2d_same_backward(in.row(r).data(), d.in_c, d.in_h, d.in_w, kern, d.out_c, d.k,
                                    g.row(r).data(), nullptr, gin.row(r).data());
          ops::conv2d_same_backward(in.row(r).data(), d.in_c, d.in_h, d.in_w, kern, d.out_c, d.k,
                                    dg.row(r).data(), nullptr, dgin.row(r).data());
          ops::conv2d_same_backward(in.row(r).data(), d.in_c, d.in_h, d.in_w, vk, d.out_c, d.k,
                                    g.row(r).data(), nullptr, dgin.row(r).data());
        }
        break;
      }
    }
    g = std::move(gin);
    dg = std::move(dgin);
  }
  return dg;
}

Mat ClassifierModel::features(const Mat& x) const {
  ForwardTape tape;
  forward(x, &tape);
  return tape.inputs[head_];
}

Mat ClassifierModel::probabilities(const Mat& x) const { return softmax(forward(x)); }

std::vector<int> ClassifierModel::predict(const Mat& x) const {
  const Mat logits = forward(x);
  std::vector<int> out(logits.rows());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    Eigen::Index arg = 0;
    logits.row(r).maxCoeff(&arg);
    out[r] = static_cast<int>(arg);
  }
  return out;
}

std::vector<std::uint8_t> ClassifierModel::prunable_mask() const {
  std::vector<std::uint8_t> mask(params_.size(), 0);
  for (const LayerDesc& d : layers_)
    if (d.w_len > 0) std::fill_n(mask.begin() + d.w_off, d.w_len, 1);
  return mask;
}

void ClassifierModel::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  std::vector<std::uint8_t> bytes;
  io::append_f32(bytes, params_);
  io::write_file(dir / "model.bin", bytes);
  nlohmann::json meta;
  meta["arch_tag"] = arch_;
  meta["K"] = num_classes_;
  meta["d_z"] = feature_dim();
  meta["shape"] = {input_.c, input_.h, input_.w};
  meta["param_count"] = params_.size();
  meta["param_digest"] = io::sha256_hex(bytes);
  io::write_text(dir / "model.json", meta.dump(2) + "\n");
}

ClassifierModel ClassifierModel::load(const std::filesystem::path& dir) {
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(io::read_text(dir / "model.json"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kBadMagic, std::string("corrupt model.json: ") + e.what());
  }
  const auto shape = meta.at("shape").get<std::vector<int>>();
  ClassifierModel m = build(meta.at("arch_tag").get<std::string>(), meta.at("K").get<int>(),
                            {shape.at(0), shape.at(1), shape.at(2)}, 0);
  const auto bytes = io::read_file(dir / "model.bin");
  if (bytes.size() != m.params_.size() * 4 ||
      meta.at("param_count").get<std::size_t>() != m.params_.size())
    throw Error(Errc::kShapeMismatch, "model.bin does not match the declared architecture");
  io::ByteReader(bytes).f32(m.params_);
  return m;
}

// ---------------------------------------------------------------------------

Mat softmax(const Mat& logits) {
  Mat p(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const float mx = logits.row(r).maxCoeff();
    double s = 0.0;
    for (Eigen::Index c = 0; c < logits.cols(); ++c) s += std::exp(double(logits(r, c) - mx));
    for (Eigen::Index c = 0; c < logits.cols(); ++c)
      p(r, c) = static_cast<float>(std::exp(double(logits(r, c) - mx)) / s);
  }
  return p;
}

double softmax_cross_entropy(const Mat& logits, std::span<const int> labels, Mat* dlogits) {
  const Eigen::Index n = logits.rows();
  if (static_cast<std::size_t>(n) != labels.size())
    throw Error(Errc::kShapeMismatch, "logits and labels differ in length");
  if (dlogits) dlogits->resize(n, logits.cols());
  double total = 0.0;
  for (Eigen::Index r = 0; r < n; ++r) {
    const float mx = logits.row(r).maxCoeff();
    double s = 0.0;
    for (Eigen::Index c = 0; c < logits.cols(); ++c) s += std::exp(double(logits(r, c) - mx));
    const double lse = std::log(s) + mx;
    total += lse - logits(r, labels[r]);
    if (dlogits) {
      for (Eigen::Index c = 0; c < logits.cols(); ++c) {
        const double p = std::exp(double(logits(r, c)) - lse);
        (*dlogits)(r, c) = static_cast<float>((p - (c == labels[r] ? 1.0 : 0.0)) / n);
      }
    }
  }
  return total / static_cast<double>(n);
}

double accuracy(const ClassifierModel& model, const Mat& x, std::span<const int> labels) {
  if (labels.empty()) return 0.0;
  constexpr Eigen::Index kChunk = 512;
  std::size_t correct = 0;
  for (Eigen::Index s = 0; s < x.rows(); s += kChunk) {
    const Eigen::Index len = std::min(kChunk, x.rows() - s);
    const auto pred = model.predict(x.middleRows(s, len));
    for (Eigen::Index r = 0; r < len; ++r)
      if (pred[r] == labels[s + r]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

void NesterovSgd::step(std::span<float> params, std::span<const float> grad, float lr) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    const float d = grad[i] + weight_decay_ * params[i];
    buf_[i] = momentum_ * buf_[i] + d;
    params[i] -= lr * (d + momentum_ * buf_[i]);
  }
}

void Adam::step(std::span<float> params, std::span<const float> grad, float lr) {
  ++t_;
  const float c1 = 1.0f - std::pow(beta1_, static_cast<float>(t_));
  const float c2 = 1.0f - std::pow(beta2_, static_cast<float>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0f - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0f - beta2_) * grad[i] * grad[i];
    params[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
  }
}

}  // namespace dwv
