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
#ifndef DWV_VERIFY_HPP_
#define DWV_VERIFY_HPP_

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "dwv/data.hpp"
#include "dwv/generator.hpp"
#include "dwv/nn.hpp"

namespace dwv {

struct HarmReport {
  double H = 0.0;      // misclassified fraction for the watermarked model
  double H_rel = 0.0;  // H(watermarked) - H(benign) on the same samples
  double vsr = 0.0;    // 1 - H
  double ba = std::numeric_limits<double>::quiet_NaN();  // filled by callers that know it
  std::size_t n = 0;
};

HarmReport harm_metrics(std::span<const int> preds_watermarked, std::span<const int> preds_benign,
                        std::span<const int> labels);

/// Fraction of domain-rendered samples classified as their ground-truth label.
double vsr(const ClassifierModel& model, const DomainGeneratorParams& theta, const DomainSpec& spec,
           const LabeledDataset& samples);

struct HypothesisTestResult {
  double delta_p = 0.0;  // mean benign posterior - mean domain posterior
  double t_stat = std::numeric_limits<double>::quiet_NaN();
  double p_value = std::numeric_limits<double>::quiet_NaN();  // NaN when degenerate
  std::size_t m = 0;
  double tau = 0.0;
  double alpha = 0.0;
  double eta = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t seed = 0;
  bool reject_h0 = false;
  // Zero sample variance: no p-value; reject_h0 follows the strict sign of
  // mean(d) (negative rejects).
  bool degenerate = false;
  std::vector<std::string> warnings;
};

/// One-sided paired test that the benign-sample posterior exceeds the
/// domain-sample posterior by less than tau (null: by exactly tau).
HypothesisTestResult paired_t_test(std::span<const double> p_b, std::span<const double> p_d,
                                   double tau, double alpha);

/// Inverse CDF of Student's t with `df` degrees of freedom.
double t_quantile(double prob, double df);

/// Upper-tail critical value: t_quantile(1 - alpha, df).
double t_critical(double alpha, double df);

struct FeasibilityCheck {
  double vsr = 0.0, m = 0.0, eta = 0.0, tau = 0.0, alpha = 0.0;
  double margin = 0.0;
  bool feasible = false;
};

/// Whether a model with the given VSR can pass verification with m samples:
/// margin = sqrt(m-1) (vsr - eta + tau) - t_crit sqrt(vsr - vsr^2), with t_crit the
/// upper-tail critical value at alpha and m-1 degrees of freedom.
FeasibilityCheck verification_feasible(double vsr, double m, double eta, double tau,
                                       double alpha);

/// Posterior query interface of a suspicious model: batch -> probabilities.
using PosteriorFn = std::function<Mat(const Mat&)>;

struct VerifyConfig {
  std::size_t m = 100;
  double tau = 0.25;
  double alpha = 0.05;
  double eta = 0.75;
  std::uint64_t seed = 0;
};

/// Samples up to m (sample, rendering) pairs stratified by class among samples
/// whose ground-truth posterior exceeds eta, and runs paired_t_test on their ground-truth posteriors.
HypothesisTestResult run_verification(const PosteriorFn& model, const DomainGeneratorParams& theta,
                                      const DomainSpec& spec, const LabeledDataset& benign_samples,
                                      const VerifyConfig& config);
HypothesisTestResult run_verification(const ClassifierModel& model,
                                      const DomainGeneratorParams& theta, const DomainSpec& spec,
                                      const LabeledDataset& benign_samples,
                                      const VerifyConfig& config);

/// {delta_p, t_stat, p_value, m, tau, alpha, eta, reject_h0, degenerate, seed, warnings}.
std::string verification_report_json(const HypothesisTestResult& r);

}  // namespace dwv

#endif  // DWV_VERIFY_HPP_
