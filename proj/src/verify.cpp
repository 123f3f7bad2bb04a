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
#include "dwv/verify.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>
#include <json.hpp>

namespace dwv {

HarmReport harm_metrics(std::span<const int> preds_watermarked, std::span<const int> preds_benign,
                        std::span<const int> labels) {
  if (preds_watermarked.size() != labels.size() || preds_benign.size() != labels.size())
    throw Error(Errc::kShapeMismatch, "prediction and label lengths differ");
  if (labels.empty()) throw Error(Errc::kInvalidArgument, "no verification samples");
  std::size_t wrong_w = 0, wrong_b = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    wrong_w += preds_watermarked[i] != labels[i];
    wrong_b += preds_benign[i] != labels[i];
  }
  HarmReport r;
  r.n = labels.size();
  const double n = static_cast<double>(r.n);
  r.H = static_cast<double>(wrong_w) / n;
  r.H_rel = r.H - static_cast<double>(wrong_b) / n;
  r.vsr = 1.0 - r.H;
  return r;
}

double vsr(const ClassifierModel& model, const DomainGeneratorParams& theta, const DomainSpec& spec,
           const LabeledDataset& samples) {
  if (samples.size() == 0) throw Error(Errc::kInvalidArgument, "empty verification sample set");
  return accuracy(model, apply_domain(theta, spec, samples.all(), samples.shape), samples.labels);
}

HypothesisTestResult paired_t_test(std::span<const double> p_b, std::span<const double> p_d,
                                   double tau, double alpha) {
  if (p_b.size() != p_d.size()) throw Error(Errc::kShapeMismatch, "posterior lists differ in length");
  if (p_b.size() < 2) throw Error(Errc::kInvalidArgument, "paired t-test needs m >= 2");
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(Errc::kInvalidArgument, "alpha must lie in (0, 1)");
  HypothesisTestResult r;
  r.m = p_b.size();
  r.tau = tau;
  r.alpha = alpha;
  const double m = static_cast<double>(r.m);
  double mean_b = 0.0, mean_d = 0.0;
  for (std::size_t i = 0; i < r.m; ++i) {
    if (!(p_b[i] >= 0.0 && p_b[i] <= 1.0 && p_d[i] >= 0.0 && p_d[i] <= 1.0))
      throw Error(Errc::kInvalidArgument, "posteriors must lie in [0, 1]");
    mean_b += p_b[i];
    mean_d += p_d[i];
  }
  mean_b /= m;
  mean_d /= m;
  r.delta_p = mean_b - mean_d;
  double mean = 0.0;
  std::vector<double> d(r.m);
  for (std::size_t i = 0; i < r.m; ++i) {
    d[i] = p_b[i] - p_d[i] - tau;
    mean += d[i];
  }
  mean /= m;
  double ss = 0.0;
  for (double v : d) ss += (v - mean) * (v - mean);
  const double s = std::sqrt(ss / (m - 1.0));
  if (s == 0.0) {
    r.degenerate = true;
    r.reject_h0 = mean < 0.0;
    r.warnings.push_back("degenerate: zero variance");
    return r;
  }
  r.t_stat = mean / (s / std::sqrt(m));
  boost::math::students_t dist(m - 1.0);
  r.p_value = boost::math::cdf(dist, r.t_stat);
  r.reject_h0 = r.p_value < alpha;
  return r;
}

double t_quantile(double prob, double df) {
  if (!(prob > 0.0 && prob < 1.0)) throw Error(Errc::kInvalidArgument, "prob must lie in (0, 1)");
  if (!(df >= 1.0)) throw Error(Errc::kInvalidArgument, "df must be >= 1");
  return boost::math::quantile(boost::math::students_t(df), prob);
}

double t_critical(double alpha, double df) { return t_quantile(1.0 - alpha, df); }

FeasibilityCheck verification_feasible(double vsr, double m, double eta, double tau,
                                       double alpha) {
  if (!(vsr >= 0.0 && vsr <= 1.0) || !(m >= 2.0) || !(eta > 0.0 && eta <= 1.0) ||
      !(tau >= 0.0 && tau <= 1.0))
    throw Error(Errc::kInvalidArgument, "feasibility parameters out of range");
  FeasibilityCheck c{vsr, m, eta, tau, alpha, 0.0, false};
  c.margin = std::sqrt(m - 1.0) * (vsr - eta + tau) -
             t_critical(alpha, m - 1.0) * std::sqrt(std::max(0.0, vsr - vsr * vsr));
  c.feasible = c.margin > 0.0;
  return c;
}

HypothesisTestResult run_verification(const PosteriorFn& model, const DomainGeneratorParams& theta,
                                      const DomainSpec& spec, const LabeledDataset& benign_samples,
                                      const VerifyConfig& config) {
  if (config.m < 2) throw Error(Errc::kInvalidArgument, "m must be >= 2");
  if (benign_samples.size() == 0) throw Error(Errc::kInvalidArgument, "no benign samples given");
  const Mat x = benign_samples.all();
  const Mat pb_all = model(x);
  if (pb_all.rows() != x.rows() || pb_all.cols() != benign_samples.num_classes)
    throw Error(Errc::kShapeMismatch, "posterior matrix has the wrong shape");

  // Confident samples, grouped by class and shuffled per class.
  const int k = benign_samples.num_classes;
  std::vector<std::vector<std::size_t>> by_class(k);
  for (std::size_t i = 0; i < benign_samples.size(); ++i) {
    const int y = benign_samples.labels[i];
    if (pb_all(static_cast<Eigen::Index>(i), y) > config.eta) by_class[y].push_back(i);
  }
  Rng rng(config.seed);
  for (auto& c : by_class) rng.shuffle(c);
  std::vector<std::size_t> picked;
  for (std::size_t round = 0; picked.size() < config.m; ++round) {
    bool any = false;
    for (int c = 0; c < k && picked.size() < config.m; ++c)
      if (round < by_class[c].size()) {
        picked.push_back(by_class[c][round]);
        any = true;
      }
    if (!any) break;
  }
  std::sort(picked.begin(), picked.end());

  std::vector<std::string> warnings;
  if (picked.size() < config.m)
    warnings.push_back("only " + std::to_string(picked.size()) + " of " + std::to_string(config.m) +
                       " samples pass the confidence filter");
  HypothesisTestResult r;
  if (picked.size() < 2) {
    warnings.push_back("too few samples for a paired test");
    r.m = picked.size();
    r.tau = config.tau;
    r.alpha = config.alpha;
  } else {
    const Mat xs = benign_samples.batch(picked);
    const Mat pd_all = model(apply_domain(theta, spec, xs, benign_samples.shape));
    std::vector<double> pb(picked.size()), pd(picked.size());
    for (std::size_t i = 0; i < picked.size(); ++i) {
      const int y = benign_samples.labels[picked[i]];
      pb[i] = pb_all(static_cast<Eigen::Index>(picked[i]), y);
      pd[i] = pd_all(static_cast<Eigen::Index>(i), y);
    }
    r = paired_t_test(pb, pd, config.tau, config.alpha);
  }
  r.eta = config.eta;
  r.seed = config.seed;
  r.warnings.insert(r.warnings.begin(), warnings.begin(), warnings.end());
  return r;
}

HypothesisTestResult run_verification(const ClassifierModel& model,
                                      const DomainGeneratorParams& theta, const DomainSpec& spec,
                                      const LabeledDataset& benign_samples,
                                      const VerifyConfig& config) {
  return run_verification([&](const Mat& x) { return model.probabilities(x); }, theta, spec,
                          benign_samples, config);
}

std::string verification_report_json(const HypothesisTestResult& r) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::json j;
  j["delta_p"] = num(r.delta_p);
  j["t_stat"] = num(r.t_stat);
  j["p_value"] = num(r.p_value);
  j["m"] = r.m;
  j["tau"] = r.tau;
  j["alpha"] = r.alpha;
  j["eta"] = num(r.eta);
  j["reject_h0"] = r.reject_h0;
  j["degenerate"] = r.degenerate;
  j["seed"] = r.seed;
  j["warnings"] = r.warnings;
  return j.dump(2) + "\n";
}

}  // namespace dwv
