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
#include "dwv/watermark.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace dwv {

const char* target_scope_name(TargetScope s) {
  return s == TargetScope::kAllClasses ? "all" : "target-class";
}

TargetScope parse_target_scope(const std::string& s) {
  if (s == "all") return TargetScope::kAllClasses;
  if (s == "target-class") return TargetScope::kTargetClass;
  throw Error(Errc::kInvalidArgument, "unknown target scope '" + s + "' (all|target-class)");
}

const char* delta_init_name(DeltaInit d) {
  switch (d) {
    case DeltaInit::kZero: return "zero";
    case DeltaInit::kUniform: return "uniform";
    case DeltaInit::kDomain: return "domain";
  }
  return "zero";
}

DeltaInit parse_delta_init(const std::string& s) {
  if (s == "zero") return DeltaInit::kZero;
  if (s == "uniform") return DeltaInit::kUniform;
  if (s == "domain") return DeltaInit::kDomain;
  throw Error(Errc::kInvalidArgument, "unknown delta init '" + s + "' (zero|uniform|domain)");
}

void CraftConfig::validate() const {
  if (!(epsilon >= 0.0f) || epsilon > 1.0f)
    throw Error(Errc::kInvalidArgument, "epsilon must lie in [0, 1]");
  if (lambda3 < 0.0) throw Error(Errc::kInvalidArgument, "lambda3 must be >= 0");
  if (J < 1) throw Error(Errc::kInvalidArgument, "J must be >= 1");
  if (outer_epochs < 0 || upper_iters < 0 || lower_iters < 0)
    throw Error(Errc::kInvalidArgument, "iteration counts must be >= 0");
  if (lower_batch < 1 || target_batch < 0)
    throw Error(Errc::kInvalidArgument, "batch sizes must be positive");
  if (!(lower_lr > 0.0f)) throw Error(Errc::kInvalidArgument, "lower_lr must be > 0");
}

double CraftRun::mean_alignment(int round) const {
  double sum = 0.0;
  int n = 0;
  for (const auto& r : history)
    if (r.round == round) {
      sum += r.alignment;
      ++n;
    }
  return n ? sum / n : std::numeric_limits<double>::quiet_NaN();
}

double cosine_alignment(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw Error(Errc::kShapeMismatch, "gradient lengths differ");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += double(a[i]) * b[i];
    na += double(a[i]) * a[i];
    nb += double(b[i]) * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw Error(Errc::kDegenerateGradient, "degenerate gradient");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

namespace {

Mat render_all(const DomainGeneratorParams& theta, const DomainSpec& spec, const Mat& x,
               const ImageShape& shape) {
  return apply_domain(theta, spec, x, shape);
}

// Target-domain and unseen-domain renderings of a fixed sample set.
struct TargetBatches {
  Mat target;
  std::vector<int> target_labels;
  Mat unseen;
  std::vector<int> unseen_labels;
};

TargetBatches render_batches(const LabeledDataset& ds, std::span<const std::size_t> idx,
                             const DomainGeneratorParams& theta, const DomainSpec& target_spec,
                             std::span<const DomainSpec> others) {
  TargetBatches b;
  const Mat x = ds.batch(idx);
  const auto y = ds.batch_labels(idx);
  b.target = render_all(theta, target_spec, x, ds.shape);
  b.target_labels = y;
  b.unseen.resize(x.rows() * static_cast<Eigen::Index>(others.size()), x.cols());
  for (std::size_t j = 0; j < others.size(); ++j) {
    b.unseen.middleRows(j * x.rows(), x.rows()) = render_all(theta, others[j], x, ds.shape);
    b.unseen_labels.insert(b.unseen_labels.end(), y.begin(), y.end());
  }
  return b;
}

// Target objective and (optionally) its parameter gradient.
TargetObjective objective_with_grad(const ClassifierModel& f, const TargetBatches& b,
                                    double lambda3, double lambda4, std::vector<float>* grad) {
  TargetObjective out;
  ForwardTape tt, tu;
  Mat dt, du;
  out.target_risk = softmax_cross_entropy(f.forward(b.target, grad ? &tt : nullptr),
                                          b.target_labels, grad ? &dt : nullptr);
  out.unseen_risk = softmax_cross_entropy(f.forward(b.unseen, grad ? &tu : nullptr),
                                          b.unseen_labels, grad ? &du : nullptr);
  const bool clamped = out.unseen_risk >= lambda4;
  out.value = out.target_risk - lambda3 * (clamped ? lambda4 : out.unseen_risk);
  if (grad) {
    grad->assign(f.param_count(), 0.0f);
    f.backward(tt, &dt, nullptr, grad->data(), nullptr);
    if (!clamped && lambda3 != 0.0) {
      du *= static_cast<float>(-lambda3);
      f.backward(tu, &du, nullptr, grad->data(), nullptr);
    }
  }
  return out;
}

// Translates each image by (dy[r], dx[r]) with zero fill. With `inverse`
// the adjoint map is applied, which moves gradients back.
Mat shift_images(const Mat& x, const ImageShape& shape, std::span<const int> dy,
                 std::span<const int> dx, bool inverse) {
  Mat out = Mat::Zero(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const int sy = inverse ? -dy[r] : dy[r];
    const int sx = inverse ? -dx[r] : dx[r];
    for (int c = 0; c < shape.c; ++c)
      for (int y = 0; y < shape.h; ++y) {
        const int yy = y - sy;
        if (yy < 0 || yy >= shape.h) continue;
        for (int xx = 0; xx < shape.w; ++xx) {
          const int xs = xx - sx;
          if (xs < 0 || xs >= shape.w) continue;
          out(r, (c * shape.h + y) * shape.w + xx) = x(r, (c * shape.h + yy) * shape.w + xs);
        }
      }
  }
  return out;
}

// Parameter gradient of the mean CE of the perturbed selected samples.
double poison_loss(const ClassifierModel& f, const Mat& x, std::span<const int> y,
                   std::vector<float>& grad) {
  ForwardTape tape;
  Mat dl;
  const double loss = softmax_cross_entropy(f.forward(x, &tape), y, &dl);
  grad.assign(f.param_count(), 0.0f);
  f.backward(tape, &dl, nullptr, grad.data(), nullptr);
  return loss;
}

}  // namespace

double compute_lambda4(const ClassifierModel& benign, const DomainGeneratorParams& theta,
                       std::span<const DomainSpec> other_specs, const LabeledDataset& dataset) {
  if (other_specs.empty()) throw Error(Errc::kInvalidArgument, "no unseen domains given");
  if (dataset.size() == 0) throw Error(Errc::kInvalidArgument, "dataset is empty");
  const Mat x = dataset.all();
  double sum = 0.0;
  for (const auto& s : other_specs)
    sum += softmax_cross_entropy(benign.forward(apply_domain(theta, s, x, dataset.shape)),
                                 dataset.labels);
  return sum / static_cast<double>(other_specs.size());
}

TargetObjective target_objective(const ClassifierModel& model, const DomainGeneratorParams& theta,
                                 const DomainSpec& target_spec,
                                 std::span<const DomainSpec> other_specs,
                                 const LabeledDataset& dataset, double lambda3, double lambda4) {
  if (other_specs.empty()) throw Error(Errc::kInvalidArgument, "no unseen domains given");
  std::vector<std::size_t> idx(dataset.size());
  std::iota(idx.begin(), idx.end(), 0);
  const TargetBatches b = render_batches(dataset, idx, theta, target_spec, other_specs);
  return objective_with_grad(model, b, lambda3, lambda4, nullptr);
}

CraftRun craft_perturbations(const LabeledDataset& dataset, const DatasetSplit& split,
                             const DomainGeneratorParams& theta, const DomainSpec& target_spec,
                             std::span<const DomainSpec> other_specs,
                             const ClassifierModel& benign, const CraftConfig& config,
                             const CraftObserver& observer) {
  return craft_perturbations(dataset, split, theta, target_spec, other_specs,
                             std::span<const ClassifierModel>(&benign, 1), config, observer);
}

CraftRun craft_perturbations(const LabeledDataset& dataset, const DatasetSplit& split,
                             const DomainGeneratorParams& theta, const DomainSpec& target_spec,
                             std::span<const DomainSpec> other_specs,
                             std::span<const ClassifierModel> benign_models,
                             const CraftConfig& config, const CraftObserver& observer) {
  config.validate();
  if (other_specs.empty()) throw Error(Errc::kInvalidArgument, "no unseen domains given");
  if (benign_models.empty()) throw Error(Errc::kInvalidArgument, "no crafting model given");
  if (split.selected_indices.empty())
    throw Error(Errc::kInvalidArgument, "no samples selected for watermarking");
  for (const auto& m : benign_models)
    if (!(dataset.shape == m.input_shape()))
      throw Error(Errc::kShapeMismatch, "model input shape does not match dataset");

  CraftRun run;
  run.lambda4 = std::isnan(config.lambda4)
                    ? compute_lambda4(benign_models[0], theta, other_specs, dataset)
                    : config.lambda4;

  struct Member {
    ClassifierModel f;
    NesterovSgd opt;
    std::vector<float> g_t;
    double gt_norm = 0.0;
    TargetObjective lt;
  };
  std::vector<Member> members;
  for (const auto& m : benign_models)
    members.push_back({m, NesterovSgd(m.param_count(), config.momentum, config.weight_decay), {}, 0.0, {}});

  const std::size_t ns = split.selected_indices.size();
  const Mat base = dataset.batch(split.selected_indices);
  const auto ys = dataset.batch_labels(split.selected_indices);
  const float eps = config.epsilon;
  const double inv_k = 1.0 / static_cast<double>(members.size());
  Mat delta = Mat::Zero(static_cast<Eigen::Index>(ns), base.cols());

  std::vector<std::size_t> scope_pool;
  if (config.scope == TargetScope::kTargetClass) {
    scope_pool = dataset.class_indices(split.target_class);
  } else {
    scope_pool.resize(dataset.size());
    std::iota(scope_pool.begin(), scope_pool.end(), 0);
  }
  if (scope_pool.empty()) throw Error(Errc::kInsufficientClassPopulation, "target scope is empty");

  Rng rng(config.seed);
  if (eps > 0.0f && config.init != DeltaInit::kZero) {
    Rng init_rng(Rng::derive(config.seed, 17));
    const Mat rendered = config.init == DeltaInit::kDomain
                             ? apply_domain(theta, target_spec, base, dataset.shape)
                             : Mat();
    for (Eigen::Index i = 0; i < delta.size(); ++i) {
      const float b = base.data()[i];
      const float d = config.init == DeltaInit::kDomain
                          ? rendered.data()[i] - b
                          : static_cast<float>(init_rng.uniform(-eps, eps));
      delta.data()[i] = std::clamp(std::clamp(b + std::clamp(d, -eps, eps), 0.0f, 1.0f) - b, -eps, eps);
    }
  }
  std::vector<float> g_i, g_low, dir(benign_models[0].param_count());
  const float step = eps / 10.0f;

  for (int round = 0; round < config.outer_epochs; ++round) {
    // Fixed estimator batch for this round.
    std::vector<std::size_t> pool = scope_pool;
    rng.shuffle(pool);
    if (config.target_batch > 0 && pool.size() > static_cast<std::size_t>(config.target_batch))
      pool.resize(static_cast<std::size_t>(config.target_batch));
    std::sort(pool.begin(), pool.end());
    const TargetBatches tb = render_batches(dataset, pool, theta, target_spec, other_specs);
    double lt_mean = 0.0;
    for (auto& mb : members) {
      mb.lt = objective_with_grad(mb.f, tb, config.lambda3, run.lambda4, &mb.g_t);
      double n2 = 0.0;
      for (float v : mb.g_t) n2 += double(v) * v;
      mb.gt_norm = std::sqrt(n2);
      if (mb.gt_norm == 0.0) throw Error(Errc::kDegenerateGradient, "degenerate gradient");
      lt_mean += mb.lt.value * inv_k;
    }

    for (int u = 0; u < config.upper_iters; ++u) {
      Mat x = (base + delta).cwiseMax(0.0f).cwiseMin(1.0f);
      std::vector<int> sy(x.rows(), 0), sx(x.rows(), 0);
      if (config.augment_shift > 0) {
        const auto span = static_cast<std::uint64_t>(2 * config.augment_shift + 1);
        for (Eigen::Index r = 0; r < x.rows(); ++r) {
          sy[r] = static_cast<int>(rng.below(span)) - config.augment_shift;
          sx[r] = static_cast<int>(rng.below(span)) - config.augment_shift;
        }
        x = shift_images(x, dataset.shape, sy, sx, false);
      }
      double cos_mean = 0.0, ploss_mean = 0.0;
      Mat grad_x = Mat::Zero(x.rows(), x.cols());
      for (auto& mb : members) {
        ploss_mean += poison_loss(mb.f, x, ys, g_i) * inv_k;
        const double cos = cosine_alignment(mb.g_t, g_i);
        if (!std::isfinite(cos))
          throw Error(Errc::kNumericDivergence,
                      "alignment became non-finite in round " + std::to_string(round));
        cos_mean += cos * inv_k;
        // d cos / d g_i, pulled back to the inputs through the mixed Jacobian.
        double gi_norm2 = 0.0;
        for (float v : g_i) gi_norm2 += double(v) * v;
        const double gi_norm = std::sqrt(gi_norm2);
        for (std::size_t k = 0; k < dir.size(); ++k)
          dir[k] = static_cast<float>(mb.g_t[k] / (mb.gt_norm * gi_norm) - cos * g_i[k] / gi_norm2);
        grad_x += mb.f.input_grad_directional(x, ys, dir);
      }
      if (config.augment_shift > 0) grad_x = shift_images(grad_x, dataset.shape, sy, sx, true);

      // Sign ascent through the image clamp, then project.
      const Mat pre = base + delta;
      for (Eigen::Index r = 0; r < delta.rows(); ++r)
        for (Eigen::Index c = 0; c < delta.cols(); ++c) {
          const float p = pre(r, c);
          float g = (p < 0.0f || p > 1.0f) ? 0.0f : grad_x(r, c);
          float d = delta(r, c) + (g > 0.0f ? step : (g < 0.0f ? -step : 0.0f));
          d = std::clamp(d, -eps, eps);
          const float img = std::clamp(base(r, c) + d, 0.0f, 1.0f);
          d = std::clamp(img - base(r, c), -eps, eps);
          delta(r, c) = d;
        }

      CraftRecord rec;
      rec.round = round;
      rec.upper_iter = u;
      rec.alignment = cos_mean;
      rec.l_t = lt_mean;
      rec.poison_loss = ploss_mean;
      rec.max_abs_delta = delta.size() ? double(delta.cwiseAbs().maxCoeff()) : 0.0;
      run.history.push_back(rec);
      if (observer) observer(round, u, {delta.data(), static_cast<std::size_t>(delta.size())});
    }

    // Lower level: SGD on mean CE(selected + delta) + mean CE(untouched), same batches
    // for every crafting model.
    const Mat poisoned = (base + delta).cwiseMax(0.0f).cwiseMin(1.0f);
    for (int s = 0; s < config.lower_iters; ++s) {
      std::vector<std::size_t> rows(std::min<std::size_t>(config.lower_batch, ns));
      for (auto& r : rows) r = rng.below(ns);
      Mat xs(rows.size(), base.cols());
      std::vector<int> yb(rows.size());
      for (std::size_t k = 0; k < rows.size(); ++k) {
        xs.row(k) = poisoned.row(rows[k]);
        yb[k] = ys[rows[k]];
      }
      Mat xb;
      std::vector<int> ybb;
      if (!split.remaining_indices.empty()) {
        std::vector<std::size_t> bidx(
            std::min<std::size_t>(config.lower_batch, split.remaining_indices.size()));
        for (auto& i : bidx) i = split.remaining_indices[rng.below(split.remaining_indices.size())];
        xb = dataset.batch(bidx);
        ybb = dataset.batch_labels(bidx);
      }
      double loss_mean = 0.0;
      for (auto& mb : members) {
        g_low.assign(mb.f.param_count(), 0.0f);
        double loss = 0.0;
        {
          ForwardTape tape;
          Mat dl;
          loss += softmax_cross_entropy(mb.f.forward(xs, &tape), yb, &dl);
          mb.f.backward(tape, &dl, nullptr, g_low.data(), nullptr);
        }
        if (xb.rows() > 0) {
          ForwardTape tape;
          Mat dl;
          loss += softmax_cross_entropy(mb.f.forward(xb, &tape), ybb, &dl);
          mb.f.backward(tape, &dl, nullptr, g_low.data(), nullptr);
        }
        if (!std::isfinite(loss))
          throw Error(Errc::kNumericDivergence,
                      "lower-level loss became non-finite in round " + std::to_string(round));
        loss_mean += loss * inv_k;
        mb.opt.step(mb.f.params(), g_low, config.lower_lr);
      }
      run.lower_loss_history.push_back(loss_mean);
    }
  }
  run.deltas.assign(delta.data(), delta.data() + delta.size());
  for (auto& mb : members) run.models.push_back(std::move(mb.f));
  return run;
}

std::string craft_history_csv(const CraftRun& run, int lower_iters) {
  std::ostringstream os;
  os << std::setprecision(10);
  os << "round,upper_iter,alignment,l_t,poison_loss,lower_loss,max_abs_delta\n";
  for (const auto& r : run.history) {
    double lower = std::numeric_limits<double>::quiet_NaN();
    const std::size_t lo = static_cast<std::size_t>(r.round) * lower_iters;
    if (lower_iters > 0 && lo + lower_iters <= run.lower_loss_history.size()) {
      lower = 0.0;
      for (int k = 0; k < lower_iters; ++k) lower += run.lower_loss_history[lo + k];
      lower /= lower_iters;
    }
    os << r.round << ',' << r.upper_iter << ',' << r.alignment << ',' << r.l_t << ','
       << r.poison_loss << ',' << lower
       << ',' << r.max_abs_delta << '\n';
  }
  return os.str();
}

}  // namespace dwv
