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
#include "dwv/domaingen.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace dwv {

void DomainGenConfig::validate() const {
  if (iters < 0) throw Error(Errc::kInvalidArgument, "iters must be >= 0");
  if (batch < 2) throw Error(Errc::kInvalidArgument, "batch must be >= 2");
  if (!(lr_theta > 0.0f) || !(lr_w > 0.0f) || !(q_lr > 0.0f))
    throw Error(Errc::kInvalidArgument, "learning rates must be > 0");
  if (lambda1 < 0.0 || lambda2 < 0.0) throw Error(Errc::kInvalidArgument, "lambdas must be >= 0");
  if (!(grad_clip >= 0.0f)) throw Error(Errc::kInvalidArgument, "grad_clip must be >= 0");
  if (q_steps < 0 || q_hidden < 1 || steps_per_phase < 0 || work_size < 0)
    throw Error(Errc::kInvalidArgument, "invalid domain generation step settings");
}

int DomainGenConfig::phase_steps(std::size_t n) const {
  if (steps_per_phase > 0) return steps_per_phase;
  return static_cast<int>((n + batch - 1) / batch);
}

namespace {

// Cycles through seeded permutations of [0, n).
class BatchCursor {
 public:
  BatchCursor(std::size_t n, std::size_t batch, std::uint64_t seed)
      : order_(n), batch_(std::min(batch, n)), rng_(seed) {
    std::iota(order_.begin(), order_.end(), 0);
    rng_.shuffle(order_);
  }
  std::vector<std::size_t> next() {
    std::vector<std::size_t> out;
    out.reserve(batch_);
    while (out.size() < batch_) {
      if (pos_ == order_.size()) {
        rng_.shuffle(order_);
        pos_ = 0;
      }
      out.push_back(order_[pos_++]);
    }
    return out;
  }

 private:
  std::vector<std::size_t> order_;
  std::size_t batch_;
  std::size_t pos_ = 0;
  Rng rng_;
};

void clip_norm(std::vector<float>& g, float limit) {
  if (limit <= 0.0f) return;
  double n2 = 0.0;
  for (float v : g) n2 += double(v) * v;
  const double n = std::sqrt(n2);
  if (n > limit) {
    const float s = static_cast<float>(limit / n);
    for (float& v : g) v *= s;
  }
}

void check_finite(double v, int iter, const char* what) {
  if (!std::isfinite(v))
    throw Error(Errc::kNumericDivergence,
                std::string(what) + " became non-finite at iteration " + std::to_string(iter));
}

struct WObjective {
  double total = 0.0;
  double ce = 0.0;
};

WObjective w_objective(const ClassifierModel& f, const VariationalNet& q, const Mat& x,
                       const Mat& xhat, std::span<const int> y, double lambda2) {
  Mat zs, zt;
  WObjective out;
  {
    ForwardTape ts, tt;
    const Mat ls = f.forward(x, &ts);
    const Mat lt = f.forward(xhat, &tt);
    out.ce = softmax_cross_entropy(ls, y) + softmax_cross_entropy(lt, y);
    zs = ts.inputs.back();
    zt = tt.inputs.back();
  }
  out.total = out.ce - lambda2 * club_upper_bound(q, zs, zt).value;
  return out;
}

}  // namespace

DomainGenRun generate_hard_domain(const LabeledDataset& dataset, const DomainGenConfig& config,
                                  const ClassifierModel& surrogate) {
  config.validate();
  if (dataset.size() < 2) throw Error(Errc::kInvalidArgument, "dataset too small");
  if (!(dataset.shape == surrogate.input_shape()))
    throw Error(Errc::kShapeMismatch, "surrogate input shape does not match dataset");
  const ImageShape& shape = dataset.shape;

  DomainGenRun run;
  run.config = config;
  const int wh = config.work_size > 0 ? config.work_size : shape.h;
  const int ww = config.work_size > 0 ? config.work_size : shape.w;
  run.theta = DomainGeneratorParams::init(shape.c, wh, ww, Rng::derive(config.seed, 1));
  run.target_spec = DomainSpec::sample(Rng::derive(config.seed, 2));
  run.surrogate = surrogate;
  ClassifierModel& f = run.surrogate;
  VariationalNet q = VariationalNet::init(f.feature_dim(), config.q_hidden, Rng::derive(config.seed, 3));

  NesterovSgd opt_theta(run.theta.params().size(), config.momentum, config.weight_decay);
  NesterovSgd opt_w(f.param_count(), config.momentum, config.weight_decay);
  std::vector<float> g_theta(run.theta.params().size());
  std::vector<float> g_w(f.param_count());
  BatchCursor cursor(dataset.size(), static_cast<std::size_t>(config.batch),
                     Rng::derive(config.seed, 4));
  const int steps = config.phase_steps(dataset.size());

  for (int it = 0; it < config.iters; ++it) {
    DomainGenRecord rec;
    rec.iter = it;

    // Refit q(zhat|z) on a fresh batch under the current generator and surrogate.
    {
      const auto idx = cursor.next();
      const Mat x = dataset.batch(idx);
      const Mat xhat = apply_domain(run.theta, run.target_spec, x, shape);
      q = fit_variational(std::move(q), f.features(x), f.features(xhat), config.q_steps,
                          config.q_lr, Rng::derive(config.seed, 1000 + it));
    }

    // Generator phase.
    for (int s = 0; s < steps; ++s) {
      const auto idx = cursor.next();
      const Mat x = dataset.batch(idx);
      const auto y = dataset.batch_labels(idx);
      const Mat xhat = apply_domain(run.theta, run.target_spec, x, shape);
      const Mat z = f.features(x);
      ForwardTape tape;
      f.forward(xhat, &tape);
      const Mat& zhat = tape.inputs.back();
      Mat d_club, d_mmd;
      const double club = club_upper_bound(q, z, zhat, nullptr, &d_club).value;
      const MMDValue mmd =
          class_conditional_mmd(z, zhat, y, y, f.num_classes(), config.kernel, nullptr, &d_mmd);
      check_finite(club, it, "CLUB estimate");
      check_finite(mmd.value, it, "MMD estimate");
      rec.club += club / steps;
      rec.mmd += mmd.value / steps;
      const Mat dfeat = d_club + static_cast<float>(config.lambda1) * d_mmd;
      Mat dxhat;
      f.backward(tape, nullptr, &dfeat, nullptr, &dxhat);
      std::fill(g_theta.begin(), g_theta.end(), 0.0f);
      apply_domain_backward(run.theta, run.target_spec, x, shape, dxhat, g_theta.data());
      if (!all_finite(g_theta))
        throw Error(Errc::kNumericDivergence,
                    "generator gradient became non-finite at iteration " + std::to_string(it));
      clip_norm(g_theta, config.grad_clip);
      opt_theta.step(run.theta.params(), g_theta, config.lr_theta);
    }
    rec.theta_objective = rec.club + config.lambda1 * rec.mmd;

    // Surrogate phase, measured before and after on one monitor batch.
    const auto mon_idx = cursor.next();
    const Mat mon_x = dataset.batch(mon_idx);
    const auto mon_y = dataset.batch_labels(mon_idx);
    const Mat mon_xhat = apply_domain(run.theta, run.target_spec, mon_x, shape);
    rec.w_objective_start = w_objective(f, q, mon_x, mon_xhat, mon_y, config.lambda2).total;
    check_finite(rec.w_objective_start, it, "surrogate objective");
    for (int s = 0; s < steps; ++s) {
      const auto idx = cursor.next();
      const Mat x = dataset.batch(idx);
      const auto y = dataset.batch_labels(idx);
      const Mat xhat = apply_domain(run.theta, run.target_spec, x, shape);
      ForwardTape ts, tt;
      const Mat ls = f.forward(x, &ts);
      const Mat lt = f.forward(xhat, &tt);
      Mat dls, dlt, dz, dzhat;
      const double ce = softmax_cross_entropy(ls, y, &dls) + softmax_cross_entropy(lt, y, &dlt);
      const double club = club_upper_bound(q, ts.inputs.back(), tt.inputs.back(), &dz, &dzhat).value;
      check_finite(ce, it, "surrogate training loss");
      check_finite(club, it, "CLUB estimate");
      rec.train_loss += ce / steps;
      const Mat dfs = static_cast<float>(-config.lambda2) * dz;
      const Mat dft = static_cast<float>(-config.lambda2) * dzhat;
      std::fill(g_w.begin(), g_w.end(), 0.0f);
      f.backward(ts, &dls, &dfs, g_w.data(), nullptr);
      f.backward(tt, &dlt, &dft, g_w.data(), nullptr);
      clip_norm(g_w, config.grad_clip);
      opt_w.step(f.params(), g_w, config.lr_w);
    }
    rec.w_objective_end = w_objective(f, q, mon_x, mon_xhat, mon_y, config.lambda2).total;
    check_finite(rec.w_objective_end, it, "surrogate objective");
    run.history.push_back(rec);
  }
  return run;
}

DomainGap evaluate_domain_gap(const ClassifierModel& model, const LabeledDataset& dataset,
                              const DomainGeneratorParams* theta, const DomainSpec& spec) {
  if (dataset.size() == 0) throw Error(Errc::kInvalidArgument, "dataset is empty");
  DomainGap gap;
  const Mat x = dataset.all();
  gap.acc_source = accuracy(model, x, dataset.labels);
  gap.acc_target = theta ? accuracy(model, apply_domain(*theta, spec, x, dataset.shape), dataset.labels)
                         : gap.acc_source;
  return gap;
}

LabeledDataset render_domain(const LabeledDataset& dataset, const DomainGeneratorParams& theta,
                             const DomainSpec& spec) {
  LabeledDataset out = dataset;
  const Mat y = apply_domain(theta, spec, dataset.all(), dataset.shape);
  std::copy(y.data(), y.data() + y.size(), out.images.begin());
  return out;
}

std::string domaingen_history_csv(const std::vector<DomainGenRecord>& history) {
  std::ostringstream os;
  os << std::setprecision(10);
  os << "iter,club,mmd,theta_objective,w_objective_start,w_objective,train_loss\n";
  for (const auto& r : history)
    os << r.iter << ',' << r.club << ',' << r.mmd << ',' << r.theta_objective << ','
       << r.w_objective_start << ',' << r.w_objective_end << ',' << r.train_loss << '\n';
  return os.str();
}

}  // namespace dwv
