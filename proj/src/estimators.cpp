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
#include "dwv/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "dwv/nn.hpp"

namespace dwv {

// ---------------------------------------------------------------------------
// VariationalNet

std::size_t VariationalNet::off(int head, int part) const {
  const std::size_t w1 = static_cast<std::size_t>(hidden_) * dim_;
  const std::size_t head_len = w1 + hidden_ + w1 + dim_;
  const std::size_t parts[4] = {0, w1, w1 + hidden_, 2 * w1 + hidden_};
  return head * head_len + parts[part];
}

std::span<float> VariationalNet::block(int head, int part) {
  const std::size_t w1 = static_cast<std::size_t>(hidden_) * dim_;
  const std::size_t lens[4] = {w1, static_cast<std::size_t>(hidden_), w1,
                               static_cast<std::size_t>(dim_)};
  return {params_.data() + off(head, part), lens[part]};
}

VariationalNet VariationalNet::init(int dim, int hidden, std::uint64_t seed) {
  if (dim < 1 || hidden < 1) throw Error(Errc::kInvalidArgument, "variational net dims must be >= 1");
  VariationalNet q;
  q.dim_ = dim;
  q.hidden_ = hidden;
  q.params_.assign(2 * (2 * static_cast<std::size_t>(hidden) * dim + hidden + dim), 0.0f);
  Rng rng(seed);
  for (int head = 0; head < 2; ++head) {
    const double s1 = std::sqrt(2.0 / dim), s2 = std::sqrt(1.0 / hidden);
    for (float& v : q.block(head, 0)) v = static_cast<float>(s1 * rng.normal());
    for (float& v : q.block(head, 2)) v = static_cast<float>(s2 * rng.normal());
  }
  // Start the log-variance head near zero so early fits are well scaled.
  for (float& v : q.block(1, 2)) v *= 0.1f;
  return q;
}

VariationalNet::Output VariationalNet::forward(const Mat& z) const {
  if (z.cols() != dim_) throw Error(Errc::kShapeMismatch, "latent width does not match q");
  Output o;
  auto head = [&](int h, Mat& hidden, Mat& out) {
    ConstMatMap w1(params_.data() + off(h, 0), hidden_, dim_);
    Eigen::Map<const Eigen::RowVectorXf> b1(params_.data() + off(h, 1), hidden_);
    ConstMatMap w2(params_.data() + off(h, 2), dim_, hidden_);
    Eigen::Map<const Eigen::RowVectorXf> b2(params_.data() + off(h, 3), dim_);
    hidden.noalias() = z * w1.transpose();
    hidden.rowwise() += b1;
    hidden = hidden.cwiseMax(0.0f);
    out.noalias() = hidden * w2.transpose();
    out.rowwise() += b2;
  };
  head(0, o.h_mean, o.mean);
  head(1, o.h_logvar, o.lv_raw);
  o.logvar = o.lv_raw.cwiseMax(-kLogVarClamp).cwiseMin(kLogVarClamp);
  return o;
}

void VariationalNet::backward(const Mat& z, const Output& o, const Mat& dmean,
                              const Mat& dlogvar, float* dparams, Mat* dz) const {
  if (dz) *dz = Mat::Zero(z.rows(), dim_);
  auto head = [&](int h, const Mat& hidden, const Mat& dout) {
    ConstMatMap w1(params_.data() + off(h, 0), hidden_, dim_);
    ConstMatMap w2(params_.data() + off(h, 2), dim_, hidden_);
    Mat dh = dout * w2;
    dh = (hidden.array() > 0.0f).select(dh, 0.0f);
    if (dparams) {
      MatMap(dparams + off(h, 2), dim_, hidden_).noalias() += dout.transpose() * hidden;
      Eigen::Map<Eigen::RowVectorXf>(dparams + off(h, 3), dim_) += Eigen::RowVectorXf(dout.colwise().sum());
      MatMap(dparams + off(h, 0), hidden_, dim_).noalias() += dh.transpose() * z;
      Eigen::Map<Eigen::RowVectorXf>(dparams + off(h, 1), hidden_) += Eigen::RowVectorXf(dh.colwise().sum());
    }
    if (dz) dz->noalias() += dh * w1;
  };
  head(0, o.h_mean, dmean);
  const Mat dlv = (o.lv_raw.array().abs() <= kLogVarClamp).select(dlogvar, 0.0f);
  head(1, o.h_logvar, dlv);
}

// ---------------------------------------------------------------------------

namespace {

constexpr double kLog2Pi = 1.8378770664093453;  // ln(2*pi)

void check_pairs(const Mat& z, const Mat& zhat) {
  if (z.rows() != zhat.rows() || z.cols() != zhat.cols())
    throw Error(Errc::kShapeMismatch, "z and zhat batches must be aligned");
}

double loglik_and_grad(const VariationalNet& q, const Mat& z, const Mat& zhat, float* dparams) {
  const auto o = q.forward(z);
  const Eigen::Index n = z.rows(), d = z.cols();
  double total = 0.0;
  Mat dm(n, d), dl(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < d; ++k) {
      const double diff = double(zhat(i, k)) - o.mean(i, k);
      const double ivar = std::exp(-double(o.logvar(i, k)));
      total += -0.5 * (diff * diff * ivar + o.logvar(i, k) + kLog2Pi);
      dm(i, k) = static_cast<float>(diff * ivar / n);
      dl(i, k) = static_cast<float>(0.5 * (diff * diff * ivar - 1.0) / n);
    }
  if (dparams) {
    // Gradient ascent: pass the negated gradient to a minimizer.
    q.backward(z, o, -dm, -dl, dparams, nullptr);
  }
  return total / static_cast<double>(n);
}

}  // namespace

double variational_log_likelihood(const VariationalNet& q, const Mat& z, const Mat& zhat) {
  check_pairs(z, zhat);
  return loglik_and_grad(q, z, zhat, nullptr);
}

VariationalNet fit_variational(VariationalNet q, const Mat& z, const Mat& zhat, int steps,
                               float lr, std::uint64_t seed, std::vector<double>* history) {
  check_pairs(z, zhat);
  if (steps <= 0) return q;
  constexpr Eigen::Index kBatch = 512;
  Rng rng(seed);
  Adam opt(q.params().size());
  std::vector<float> grad(q.params().size());
  const Eigen::Index n = z.rows();
  std::vector<std::size_t> idx(static_cast<std::size_t>(std::min(n, kBatch)));
  for (int s = 0; s < steps; ++s) {
    std::fill(grad.begin(), grad.end(), 0.0f);
    double ll;
    if (n <= kBatch) {
      ll = loglik_and_grad(q, z, zhat, grad.data());
    } else {
      for (auto& i : idx) i = rng.below(static_cast<std::size_t>(n));
      Mat zb(idx.size(), z.cols()), hb(idx.size(), z.cols());
      for (std::size_t r = 0; r < idx.size(); ++r) {
        zb.row(r) = z.row(idx[r]);
        hb.row(r) = zhat.row(idx[r]);
      }
      ll = loglik_and_grad(q, zb, hb, grad.data());
    }
    if (!std::isfinite(ll))
      throw Error(Errc::kNumericDivergence,
                  "variational log-likelihood became non-finite at step " + std::to_string(s));
    if (history) history->push_back(ll);
    opt.step(q.params(), grad, lr);
  }
  return q;
}

MIEstimate club_upper_bound(const VariationalNet& q, const Mat& z, const Mat& zhat, Mat* dz,
                            Mat* dzhat) {
  check_pairs(z, zhat);
  const Eigen::Index n = z.rows(), d = z.cols();
  if (n < 2) throw Error(Errc::kInvalidArgument, "CLUB needs at least two pairs");
  const auto o = q.forward(z);

  Eigen::MatrixXd m = o.mean.cast<double>();
  Eigen::MatrixXd iv = (-o.logvar.cast<double>()).array().exp().matrix();
  Eigen::MatrixXd zh = zhat.cast<double>();

  // log q(zhat_i|z_i) - log q(zhat_j|z_i)
  //   = 1/2 sum_k iv_ik [(zhat_jk - m_ik)^2 - (zhat_ik - m_ik)^2]
  // Summing the (i,j) and (j,i) terms together keeps a z-independent q at
  // exactly zero.
  auto diff = [&](Eigen::Index i, Eigen::Index j) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < d; ++k) {
      const double a = zh(j, k) - m(i, k);
      const double b = zh(i, k) - m(i, k);
      s += iv(i, k) * (a * a - b * b);
    }
    return 0.5 * s;
  };
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) total += diff(i, j) + diff(j, i);
  const double nn = static_cast<double>(n);
  MIEstimate est{total / (nn * nn), static_cast<std::size_t>(n)};
  if (!std::isfinite(est.value))
    throw Error(Errc::kNumericDivergence, "CLUB estimate is non-finite");

  if (dz || dzhat) {
    const Eigen::RowVectorXd mean_zh = zh.colwise().mean();
    const Eigen::RowVectorXd mean_sq = zh.array().square().matrix().colwise().mean();
    Mat dm(n, d), dl(n, d);
    if (dzhat) dzhat->resize(n, d);
    // Column sums of iv and iv*m, for the zhat gradient of the negative term.
    const Eigen::RowVectorXd sum_iv = iv.colwise().sum();
    const Eigen::RowVectorXd sum_ivm = iv.cwiseProduct(m).colwise().sum();
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index k = 0; k < d; ++k) {
        const double r = zh(i, k) - m(i, k);
        // (1/N) sum_j (zhat_jk - m_ik)
        const double mean_r = mean_zh(k) - m(i, k);
        // (1/N) sum_j (zhat_jk - m_ik)^2
        const double mean_r2 = mean_sq(k) - 2.0 * m(i, k) * mean_zh(k) + m(i, k) * m(i, k);
        dm(i, k) = static_cast<float>(iv(i, k) * (r - mean_r) / nn);
        dl(i, k) = static_cast<float>(0.5 * iv(i, k) * (r * r - mean_r2) / nn);
        if (dzhat) {
          const double neg = (zh(i, k) * sum_iv(k) - sum_ivm(k)) / (nn * nn);
          (*dzhat)(i, k) = static_cast<float>(-iv(i, k) * r / nn + neg);
        }
      }
    if (dz) q.backward(z, o, dm, dl, nullptr, dz);
  }
  return est;
}

// ---------------------------------------------------------------------------
// Class-conditional MMD

namespace {

double median_sq_distance(const Mat& a, const Mat& b) {
  Mat pool(a.rows() + b.rows(), a.cols());
  pool << a, b;
  std::vector<double> d2;
  d2.reserve(static_cast<std::size_t>(pool.rows() * (pool.rows() - 1) / 2));
  for (Eigen::Index i = 0; i < pool.rows(); ++i)
    for (Eigen::Index j = i + 1; j < pool.rows(); ++j)
      d2.push_back((pool.row(i) - pool.row(j)).cast<double>().squaredNorm());
  if (d2.empty()) return 1.0;
  auto mid = d2.begin() + static_cast<std::ptrdiff_t>(d2.size() / 2);
  std::nth_element(d2.begin(), mid, d2.end());
  return *mid > 0.0 ? *mid : 1.0;
}

}  // namespace

MMDValue class_conditional_mmd(const Mat& z, const Mat& zhat, std::span<const int> labels_s,
                               std::span<const int> labels_t, int num_classes, MmdKernel kernel,
                               Mat* dz, Mat* dzhat) {
  if (static_cast<std::size_t>(z.rows()) != labels_s.size() ||
      static_cast<std::size_t>(zhat.rows()) != labels_t.size())
    throw Error(Errc::kShapeMismatch, "labels do not match batches");
  if (z.cols() != zhat.cols()) throw Error(Errc::kShapeMismatch, "latent widths differ");
  const Eigen::Index d = z.cols();
  if (dz) *dz = Mat::Zero(z.rows(), d);
  if (dzhat) *dzhat = Mat::Zero(zhat.rows(), d);

  MMDValue out;
  std::vector<std::vector<Eigen::Index>> src(num_classes), tgt(num_classes);
  for (std::size_t i = 0; i < labels_s.size(); ++i)
    if (labels_s[i] >= 0 && labels_s[i] < num_classes) src[labels_s[i]].push_back(i);
  for (std::size_t i = 0; i < labels_t.size(); ++i)
    if (labels_t[i] >= 0 && labels_t[i] < num_classes) tgt[labels_t[i]].push_back(i);
  for (int c = 0; c < num_classes; ++c) {
    if (src[c].empty() || tgt[c].empty()) out.skipped.push_back(c);
    else out.classes.push_back(c);
  }
  if (out.classes.empty())
    throw Error(Errc::kInvalidArgument, "no class is present in both batches");
  const double scale = 1.0 / static_cast<double>(out.classes.size());
  const double h = kernel == MmdKernel::kRbfMedian ? median_sq_distance(z, zhat) : 1.0;

  for (int c : out.classes) {
    const auto& s = src[c];
    const auto& t = tgt[c];
    const double ns = static_cast<double>(s.size()), nt = static_cast<double>(t.size());
    double val = 0.0;
    if (kernel == MmdKernel::kLinear) {
      Eigen::RowVectorXd ms = Eigen::RowVectorXd::Zero(d), mt = Eigen::RowVectorXd::Zero(d);
      for (auto i : s) ms += z.row(i).cast<double>();
      for (auto i : t) mt += zhat.row(i).cast<double>();
      ms /= ns;
      mt /= nt;
      const Eigen::RowVectorXd diff = ms - mt;
      val = diff.squaredNorm();
      if (dz)
        for (auto i : s) dz->row(i) += (2.0 * scale / ns * diff).cast<float>();
      if (dzhat)
        for (auto i : t) dzhat->row(i) -= (2.0 * scale / nt * diff).cast<float>();
    } else {
      // Biased squared MMD with k(a,b) = exp(-|a-b|^2 / h).
      auto accumulate = [&](const Mat& A, const std::vector<Eigen::Index>& ia, const Mat& B,
                            const std::vector<Eigen::Index>& ib, double coef, Mat* gA, Mat* gB) {
        double sum = 0.0;
        for (auto i : ia)
          for (auto j : ib) {
            const Eigen::RowVectorXd diff = (A.row(i) - B.row(j)).cast<double>();
            const double kv = std::exp(-diff.squaredNorm() / h);
            sum += kv;
            const double g = coef * scale * (-2.0 / h) * kv;
            if (gA) gA->row(i) += (g * diff).cast<float>();
            if (gB) gB->row(j) -= (g * diff).cast<float>();
          }
        return coef * sum;
      };
      val += accumulate(z, s, z, s, 1.0 / (ns * ns), dz, dz);
      val += accumulate(zhat, t, zhat, t, 1.0 / (nt * nt), dzhat, dzhat);
      val += accumulate(z, s, zhat, t, -2.0 / (ns * nt), dz, dzhat);
      val = std::max(val, 0.0);
    }
    out.per_class.push_back(val);
  }
  out.value = std::accumulate(out.per_class.begin(), out.per_class.end(), 0.0) * scale;
  return out;
}

}  // namespace dwv
