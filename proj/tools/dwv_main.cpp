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
// dwv: command-line front end for the domain-watermark toolkit.
//
//   dwv gen-domain --data shapes:k=3,n=1500,hw=16 --out runs/domain
//   dwv craft --data shapes:k=3,n=1500,hw=16 --domain runs/domain --out runs/protected
//   dwv train --data runs/protected --out runs/suspect
//   dwv verify --model runs/suspect --domain runs/domain --data shapes:k=3,n=600,hw=16,seed=2 --out runs/verify
//
// Every subcommand accepts --config FILE with flat key=value lines named like
// the flags. Exit codes: 0 success, 1 runtime error, 2 usage error.
#include <chrono>
#include <cstdio>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cli_support.hpp"
#include "dwv/data.hpp"
#include "dwv/domaingen.hpp"
#include "dwv/io.hpp"
#include "dwv/nn.hpp"
#include "dwv/pipeline.hpp"
#include "dwv/robustness.hpp"
#include "dwv/train.hpp"
#include "dwv/verify.hpp"
#include "dwv/watermark.hpp"

namespace fs = std::filesystem;
using namespace dwv;
using cli::RunManifest;

namespace {

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

struct DomainDir {
  DomainGeneratorParams theta;
  DomainSpec target;
};

DomainDir load_domain_dir(const fs::path& dir) {
  return {DomainGeneratorParams::load(dir / "generator.bin"),
          DomainSpec::from_json(io::read_text(dir / "target_spec.json"))};
}

std::string specs_json(const std::vector<DomainSpec>& specs) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& s : specs) arr.push_back(nlohmann::json::parse(s.to_json()));
  return arr.dump(2) + "\n";
}

void check_model_fits(const ClassifierModel& model, const LabeledDataset& ds) {
  if (!(model.input_shape() == ds.shape) || model.num_classes() != ds.num_classes)
    throw Error(Errc::kShapeMismatch, "checkpoint (" + model.arch() + ", K=" +
                                          std::to_string(model.num_classes()) +
                                          ") does not fit dataset '" + ds.name + "'");
}

std::string fmt(double v) {
  std::ostringstream o;
  o << std::setprecision(10) << v;
  return o.str();
}

// Resolved options of a subcommand as sorted key=value lines.
std::string resolved_config(const CLI::App* sub) {
  std::vector<std::string> lines;
  for (const CLI::Option* opt : sub->get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help" || name == "h") continue;
    std::string value;
    if (opt->count() > 0) {
      for (const auto& r : opt->results()) value += (value.empty() ? "" : ",") + r;
    } else {
      value = opt->get_default_str();
    }
    lines.push_back(name + "=" + value);
  }
  std::sort(lines.begin(), lines.end());
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

std::uint64_t resolve_target_class(int requested, int num_classes, std::uint64_t seed) {
  if (requested >= 0) {
    if (requested >= num_classes) throw Error(Errc::kInvalidArgument, "target class out of range");
    return static_cast<std::uint64_t>(requested);
  }
  Rng rng(Rng::derive(seed, 99));
  return rng.below(static_cast<std::size_t>(num_classes));
}

TargetScope scope_option(const std::string& s) { return parse_target_scope(s); }

// --- options shared by several subcommands --------------------------------

struct TrainOpts {
  std::string arch = "smallcnn";
  int epochs = 40;
  float lr = 0.05f;
  int batch = 64;
  void add(CLI::App* app) {
    app->add_option("--arch", arch, "classifier architecture (smallcnn, smallcnn2)")->capture_default_str();
    app->add_option("--epochs", epochs, "training epochs")->capture_default_str();
    app->add_option("--lr", lr, "initial learning rate")->capture_default_str();
    app->add_option("--batch", batch, "minibatch size")->capture_default_str();
  }
  TrainConfig config(std::uint64_t seed) const {
    TrainConfig tc;
    tc.epochs = epochs;
    tc.learning_rate = lr;
    tc.batch_size = batch;
    // Keep the drop points at the same fraction of the schedule as the defaults.
    tc.lr_drop_epochs = {epochs / 2, epochs * 3 / 4};
    tc.seed = seed;
    return tc;
  }
};

// --- gen-domain -------------------------------------------------------------

struct GenDomainArgs {
  std::string data, out, model;
  TrainOpts train;
  DomainGenConfig dc;
  std::string kernel = "rbf";
  std::uint64_t seed = 0;
};

int cmd_gen_domain(const GenDomainArgs& a, const CLI::App* sub) {
  Stopwatch sw;
  RunManifest man;
  man.command = "gen-domain";
  man.config_text = resolved_config(sub);
  man.inputs["data"] = a.data;
  const LabeledDataset ds = load_dataset(a.data);
  fs::create_directories(a.out);

  ClassifierModel surrogate;
  if (!a.model.empty()) {
    surrogate = ClassifierModel::load(a.model);
    check_model_fits(surrogate, ds);
    man.inputs["model"] = a.model;
  } else {
    const auto s = Rng::derive(a.seed, 1);
    surrogate = train_classifier(ClassifierModel::build(a.train.arch, ds.num_classes, ds.shape, s),
                                 ds, a.train.config(s));
    man.seeds["surrogate"] = s;
  }
  man.timings["surrogate"] = sw.lap();

  DomainGenConfig dc = a.dc;
  dc.kernel = a.kernel == "linear" ? MmdKernel::kLinear : MmdKernel::kRbfMedian;
  dc.seed = Rng::derive(a.seed, 2);
  man.seeds["domain"] = dc.seed;
  const DomainGenRun run = generate_hard_domain(ds, dc, surrogate);
  man.timings["domaingen"] = sw.lap();

  const fs::path out(a.out);
  run.theta.save(out / "generator.bin");
  io::write_text(out / "target_spec.json", run.target_spec.to_json());
  io::write_text(out / "domaingen_history.csv", domaingen_history_csv(run.history));
  surrogate.save(out / "surrogate");
  const DomainGap gap = evaluate_domain_gap(surrogate, ds, &run.theta, run.target_spec);
  nlohmann::ordered_json summary;
  summary["surrogate_acc_source"] = gap.acc_source;
  summary["surrogate_acc_target"] = gap.acc_target;
  summary["final_club"] = run.history.empty() ? 0.0 : run.history.back().club;
  summary["final_mmd"] = run.history.empty() ? 0.0 : run.history.back().mmd;
  io::write_text(out / "domain_summary.json", summary.dump(2) + "\n");
  man.outputs = {"generator.bin", "target_spec.json", "domaingen_history.csv", "surrogate",
                 "domain_summary.json"};
  man.write(out);
  std::cout << "domain written to " << a.out << " (surrogate accuracy " << gap.acc_source
            << " source, " << gap.acc_target << " target)\n";
  return 0;
}

// --- craft -----------------------------------------------------------------

struct CraftArgs {
  std::string data, domain, out, model, eps = "16/255", scope = "all", init = "zero";
  double gamma = 0.1;
  double lambda4 = std::numeric_limits<double>::quiet_NaN();
  int target_class = 0;
  CraftConfig cc;
  std::uint64_t seed = 0;
};

int cmd_craft(const CraftArgs& a, const CLI::App* sub) {
  const double epsilon = cli::parse_epsilon(a.eps);
  Stopwatch sw;
  RunManifest man;
  man.command = "craft";
  man.config_text = resolved_config(sub);
  man.inputs["data"] = a.data;
  man.inputs["domain"] = a.domain;
  const LabeledDataset ds = load_dataset(a.data);
  const DomainDir dom = load_domain_dir(a.domain);
  const std::string model_dir = a.model.empty() ? (fs::path(a.domain) / "surrogate").string() : a.model;
  man.inputs["model"] = model_dir;
  const ClassifierModel model = ClassifierModel::load(model_dir);
  check_model_fits(model, ds);

  CraftConfig cc = a.cc;
  cc.epsilon = static_cast<float>(epsilon);
  cc.lambda4 = a.lambda4;
  cc.scope = scope_option(a.scope);
  cc.init = parse_delta_init(a.init);
  cc.seed = Rng::derive(a.seed, 4);
  const int target = static_cast<int>(resolve_target_class(a.target_class, ds.num_classes, a.seed));
  const auto others_seed = Rng::derive(a.seed, 3);
  const auto others = sample_other_domains(dom.theta, cc.J, others_seed, &dom.target);
  man.seeds["craft"] = cc.seed;
  man.seeds["other_domains"] = others_seed;
  man.seeds["target_class"] = static_cast<unsigned long long>(target);

  const DatasetSplit split = select_watermark_subset(ds, a.gamma, model, target);
  const CraftRun run = craft_perturbations(ds, split, dom.theta, dom.target, others, model, cc);
  man.timings["craft"] = sw.lap();
  const ProtectedDataset pd = assemble_protected(ds, split, run.deltas, cc.epsilon, a.seed);

  const fs::path out(a.out);
  save_protected(pd, out);
  io::write_text(out / "craft_history.csv", craft_history_csv(run, cc.lower_iters));
  io::write_text(out / "other_specs.json", specs_json(others));
  man.outputs = {"manifest.json", "images.bin", "labels.bin", "deltas.bin", "craft_history.csv",
                 "other_specs.json"};
  man.timings["write"] = sw.lap();
  man.write(out);
  std::cout << "protected dataset written to " << a.out << " (" << split.selected_indices.size()
            << " modified samples, lambda4 " << run.lambda4 << ")\n";
  return 0;
}

// --- train -----------------------------------------------------------------

struct TrainArgs {
  std::string data, out;
  TrainOpts train;
  std::uint64_t seed = 0;
};

int cmd_train(const TrainArgs& a, const CLI::App* sub) {
  Stopwatch sw;
  RunManifest man;
  man.command = "train";
  man.config_text = resolved_config(sub);
  man.inputs["data"] = a.data;
  const LabeledDataset ds = load_dataset(a.data);
  man.seeds["train"] = a.seed;
  std::vector<EpochRecord> log;
  const ClassifierModel model =
      train_classifier(ClassifierModel::build(a.train.arch, ds.num_classes, ds.shape, a.seed), ds,
                       a.train.config(a.seed), &log);
  man.timings["train"] = sw.lap();
  const fs::path out(a.out);
  model.save(out);
  std::ostringstream csv;
  csv << "epoch,lr,loss,accuracy\n";
  for (const auto& r : log)
    csv << r.epoch << "," << fmt(r.learning_rate) << "," << fmt(r.loss) << "," << fmt(r.accuracy) << "\n";
  io::write_text(out / "train_log.csv", csv.str());
  man.outputs = {"model.bin", "model.json", "train_log.csv"};
  man.write(out);
  std::cout << "model written to " << a.out << " (final train accuracy "
            << (log.empty() ? 0.0 : log.back().accuracy) << ")\n";
  return 0;
}

// --- verify ----------------------------------------------------------------

struct VerifyArgs {
  std::string model, domain, data, out, scope = "all";
  int target_class = 0;
  VerifyConfig vc;
  std::uint64_t seed = 0;
};

int cmd_verify(const VerifyArgs& a, const CLI::App* sub) {
  Stopwatch sw;
  RunManifest man;
  man.command = "verify";
  man.config_text = resolved_config(sub);
  man.inputs = {{"model", a.model}, {"domain", a.domain}, {"data", a.data}};
  const LabeledDataset ds = load_dataset(a.data);
  const DomainDir dom = load_domain_dir(a.domain);
  const ClassifierModel model = ClassifierModel::load(a.model);
  check_model_fits(model, ds);
  const LabeledDataset samples = verification_samples(ds, scope_option(a.scope), a.target_class);
  VerifyConfig vc = a.vc;
  vc.seed = a.seed;
  man.seeds["verify"] = a.seed;
  const HypothesisTestResult r = run_verification(model, dom.theta, dom.target, samples, vc);
  man.timings["verify"] = sw.lap();
  const fs::path out(a.out);
  fs::create_directories(out);
  io::write_text(out / "verification.json", verification_report_json(r));
  man.outputs = {"verification.json"};
  man.write(out);
  std::cout << "delta_p " << r.delta_p << ", p-value " << r.p_value << ": "
            << (r.reject_h0 ? "trained on the protected dataset" : "no evidence of use") << "\n";
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
  return 0;
}

// --- metrics ---------------------------------------------------------------

struct MetricsArgs {
  std::string model, benign_model, domain, data, out, scope = "all";
  int target_class = 0;
};

int cmd_metrics(const MetricsArgs& a, const CLI::App* sub) {
  RunManifest man;
  man.command = "metrics";
  man.config_text = resolved_config(sub);
  man.inputs = {{"model", a.model}, {"benign_model", a.benign_model}, {"domain", a.domain}, {"data", a.data}};
  const LabeledDataset ds = load_dataset(a.data);
  const DomainDir dom = load_domain_dir(a.domain);
  const ClassifierModel wm = ClassifierModel::load(a.model);
  const ClassifierModel bn = ClassifierModel::load(a.benign_model);
  check_model_fits(wm, ds);
  check_model_fits(bn, ds);
  const LabeledDataset samples = verification_samples(ds, scope_option(a.scope), a.target_class);
  const Mat rendered = apply_domain(dom.theta, dom.target, samples.all(), samples.shape);
  HarmReport rep = harm_metrics(wm.predict(rendered), bn.predict(rendered), samples.labels);
  rep.ba = accuracy(wm, ds.all(), ds.labels);
  nlohmann::ordered_json j;
  j["H"] = rep.H;
  j["H_rel"] = rep.H_rel;
  j["vsr"] = rep.vsr;
  j["ba"] = rep.ba;
  j["n"] = rep.n;
  j["benign_vsr"] = rep.vsr + rep.H_rel;
  j["benign_ba"] = accuracy(bn, ds.all(), ds.labels);
  const fs::path out(a.out);
  fs::create_directories(out);
  io::write_text(out / "harm_report.json", j.dump(2) + "\n");
  man.outputs = {"harm_report.json"};
  man.write(out);
  std::cout << j.dump() << "\n";
  return 0;
}

// --- ablate ----------------------------------------------------------------

struct AblateArgs {
  std::string data = "shapes:k=3,n=1500,hw=16,seed=1";
  std::string test_data = "shapes:k=3,n=600,hw=16,seed=2";
  std::string out, param = "gamma", values, seeds = "1", eps = "16/255", scope = "target-class";
  double gamma = 0.1;
  int target_class = 0;
  int jobs = 1;
  TrainOpts train;
  DomainGenConfig dc;
  CraftConfig cc;
};

int cmd_ablate(const AblateArgs& a, const CLI::App* sub) {
  Stopwatch sw;
  RunManifest man;
  man.command = "ablate";
  man.config_text = resolved_config(sub);
  man.inputs = {{"data", a.data}, {"test_data", a.test_data}};
  if (a.param != "gamma" && a.param != "eps")
    throw CLI::ValidationError("--param", "must be gamma or eps");
  const std::vector<double> values =
      a.values.empty() ? (a.param == "gamma" ? std::vector<double>{0.01, 0.05, 0.1}
                                             : std::vector<double>{4 / 255.0, 8 / 255.0, 16 / 255.0})
                       : cli::parse_number_list(a.values);
  std::vector<std::uint64_t> seeds;
  for (double s : cli::parse_number_list(a.seeds)) seeds.push_back(static_cast<std::uint64_t>(s));

  struct Row {
    double value;
    std::uint64_t seed;
    double vsr, benign_vsr, ba, benign_ba;
  };
  std::vector<Row> rows;
  for (std::uint64_t seed : seeds) {
    PipelineConfig pc;
    pc.data = a.data;
    pc.test_data = a.test_data;
    pc.arch = a.train.arch;
    pc.train = a.train.config(0);
    pc.domain = a.dc;
    pc.craft = a.cc;
    pc.craft.epsilon = static_cast<float>(cli::parse_epsilon(a.eps));
    pc.craft.scope = scope_option(a.scope);
    pc.gamma = a.gamma;
    pc.target_class = a.target_class;
    pc.seed = seed;
    man.seeds["seed_" + std::to_string(seed)] = seed;
    const DomainStage stage = run_domain_stage(pc);
    const LabeledDataset vs = verification_samples(stage.test, pc.craft.scope, pc.target_class);
    const Mat test_x = stage.test.all();
    const double benign_vsr = vsr(stage.benign_victim, stage.domain.theta, stage.domain.target_spec, vs);
    const double benign_ba = accuracy(stage.benign_victim, test_x, stage.test.labels);

    // Each point owns its config copy and only reads the shared stage.
    auto point = [&, pc](double v) {
      PipelineConfig p = pc;
      if (a.param == "gamma") p.gamma = v;
      else p.craft.epsilon = static_cast<float>(v);
      const WatermarkStage wm = run_watermark_stage(p, stage);
      return Row{v, seed, vsr(wm.victim, stage.domain.theta, stage.domain.target_spec, vs), benign_vsr,
                 accuracy(wm.victim, test_x, stage.test.labels), benign_ba};
    };
    for (std::size_t i = 0; i < values.size();) {
      std::vector<std::future<Row>> batch;
      for (int j = 0; j < std::max(1, a.jobs) && i < values.size(); ++j, ++i)
        batch.push_back(std::async(a.jobs > 1 ? std::launch::async : std::launch::deferred, point, values[i]));
      for (auto& f : batch) rows.push_back(f.get());
    }
  }
  man.timings["sweep"] = sw.lap();

  const fs::path out(a.out);
  fs::create_directories(out);
  std::ostringstream csv;
  csv << "param,value,seed,vsr,benign_vsr,ba,benign_ba\n";
  for (const auto& r : rows)
    csv << a.param << "," << fmt(r.value) << "," << r.seed << "," << fmt(r.vsr) << ","
        << fmt(r.benign_vsr) << "," << fmt(r.ba) << "," << fmt(r.benign_ba) << "\n";
  io::write_text(out / "ablation.csv", csv.str());

  std::vector<cli::Series> vsr_series, ba_series;
  for (std::uint64_t seed : seeds) {
    cli::Series sv{"seed " + std::to_string(seed), {}, {}}, sb = sv;
    for (const auto& r : rows)
      if (r.seed == seed) {
        const double x = a.param == "eps" ? r.value * 255.0 : r.value;
        sv.x.push_back(x);
        sv.y.push_back(r.vsr);
        sb.x.push_back(x);
        sb.y.push_back(r.ba);
      }
    vsr_series.push_back(sv);
    ba_series.push_back(sb);
  }
  const std::string xl = a.param == "eps" ? "perturbation budget (x/255)" : "watermarking rate";
  io::write_text(out / "ablation_vsr.svg", cli::svg_line_plot("VSR vs " + a.param, xl, "VSR", vsr_series));
  io::write_text(out / "ablation_ba.svg", cli::svg_line_plot("BA vs " + a.param, xl, "BA", ba_series));
  man.outputs = {"ablation.csv", "ablation_vsr.svg", "ablation_ba.svg"};
  man.write(out);
  std::cout << csv.str();
  return 0;
}

// --- robustness ------------------------------------------------------------

struct RobustnessArgs {
  std::string model, domain, data, test_data, out, mode = "finetune,prune", scope = "all";
  std::string schedule = "0,1,2,5,10", fractions = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9";
  std::string prune_scope = "global";
  double subset = 0.2;
  int target_class = 0;
  TrainOpts train;
  std::uint64_t seed = 0;
};

int cmd_robustness(const RobustnessArgs& a, const CLI::App* sub) {
  Stopwatch sw;
  RunManifest man;
  man.command = "robustness";
  man.config_text = resolved_config(sub);
  man.inputs = {{"model", a.model}, {"domain", a.domain}, {"data", a.data}, {"test_data", a.test_data}};
  const ClassifierModel model = ClassifierModel::load(a.model);
  const DomainDir dom = load_domain_dir(a.domain);
  const LabeledDataset train = load_dataset(a.data);
  const LabeledDataset test = load_dataset(a.test_data);
  check_model_fits(model, train);
  check_model_fits(model, test);
  const LabeledDataset vs = verification_samples(test, scope_option(a.scope), a.target_class);
  const EvalSets eval{vs, test};
  const bool do_ft = a.mode.find("finetune") != std::string::npos;
  const bool do_prune = a.mode.find("prune") != std::string::npos;
  if (!do_ft && !do_prune) throw CLI::ValidationError("--mode", "expected finetune and/or prune");

  std::vector<RobustnessCurve> curves;
  if (do_ft) {
    std::vector<int> sched;
    for (double v : cli::parse_number_list(a.schedule)) sched.push_back(static_cast<int>(v));
    const auto subset_seed = Rng::derive(a.seed, 6);
    man.seeds["finetune_subset"] = subset_seed;
    TrainConfig tc = fine_tune_config(a.train.config(0));
    tc.seed = Rng::derive(a.seed, 7);
    man.seeds["finetune"] = tc.seed;
    curves.push_back(fine_tune_eval(model, fine_tune_subset(train, a.subset, subset_seed), dom.theta,
                                    dom.target, sched, tc, eval));
    man.timings["finetune"] = sw.lap();
  }
  if (do_prune) {
    const auto fr = cli::parse_number_list(a.fractions);
    curves.push_back(prune_eval(model, fr, dom.theta, dom.target, eval,
                                a.prune_scope == "layerwise" ? PruneScope::kLayerwise : PruneScope::kGlobal));
    man.timings["prune"] = sw.lap();
  }
  const fs::path out(a.out);
  fs::create_directories(out);
  io::write_text(out / "robustness.csv", robustness_csv(curves));
  man.outputs = {"robustness.csv"};
  for (const auto& c : curves) {
    const std::string xl = c.mode == "finetune" ? "fine-tuning epochs" : "pruned fraction";
    const std::string file = "robustness_" + c.mode + ".svg";
    io::write_text(out / file, cli::svg_line_plot(c.mode, xl, "rate",
                                                  {{"VSR", c.levels, c.vsr_at_level},
                                                   {"BA", c.levels, c.ba_at_level}}));
    man.outputs.push_back(file);
  }
  man.write(out);
  std::cout << robustness_csv(curves);
  return 0;
}

void add_seed(CLI::App* sub, std::uint64_t& seed) {
  sub->add_option("--seed", seed, "master seed (falls back to DW_SEED)")
      ->envname("DW_SEED")
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  try {
    args = cli::expand_config_args(args);
  } catch (const std::exception& e) {
    std::cerr << "dwv: " << e.what() << "\n";
    return 2;
  }

  CLI::App app{"Domain-watermark dataset ownership verification"};
  app.require_subcommand(1);
  app.set_version_flag("--version", cli::kToolVersion);
  // Declared so --help lists it; expand_config_args consumes it before parsing.
  std::string config_file;
  app.add_option("--config", config_file, "flat key=value file; flags override it");

  GenDomainArgs gd;
  auto* s_gd = app.add_subcommand("gen-domain", "learn a hardly-generalized domain for a dataset");
  s_gd->add_option("--data", gd.data, "dataset directory or synthetic spec")->required();
  s_gd->add_option("--out", gd.out, "output directory")->required();
  s_gd->add_option("--model", gd.model, "surrogate checkpoint (trained here when omitted)");
  gd.train.add(s_gd);
  s_gd->add_option("--iters", gd.dc.iters)->capture_default_str();
  s_gd->add_option("--lambda1", gd.dc.lambda1, "MMD weight")->capture_default_str();
  s_gd->add_option("--lambda2", gd.dc.lambda2, "mutual-information weight")->capture_default_str();
  s_gd->add_option("--lr-theta", gd.dc.lr_theta)->capture_default_str();
  s_gd->add_option("--lr-w", gd.dc.lr_w)->capture_default_str();
  s_gd->add_option("--domain-batch", gd.dc.batch)->capture_default_str();
  s_gd->add_option("--q-steps", gd.dc.q_steps)->capture_default_str();
  s_gd->add_option("--steps-per-phase", gd.dc.steps_per_phase, "0 = one epoch")->capture_default_str();
  s_gd->add_option("--work-size", gd.dc.work_size, "generator resolution, 0 = native")->capture_default_str();
  s_gd->add_option("--kernel", gd.kernel)->check(CLI::IsMember({"rbf", "linear"}))->capture_default_str();
  add_seed(s_gd, gd.seed);

  CraftArgs cr;
  auto* s_cr = app.add_subcommand("craft", "craft the protected dataset");
  s_cr->add_option("--data", cr.data)->required();
  s_cr->add_option("--domain", cr.domain, "gen-domain output directory")->required();
  s_cr->add_option("--out", cr.out)->required();
  s_cr->add_option("--model", cr.model, "benign model (default: the domain's surrogate)");
  s_cr->add_option("--gamma", cr.gamma, "watermarking rate")->capture_default_str();
  s_cr->add_option("--eps", cr.eps, "L-inf budget, e.g. 16/255")->capture_default_str();
  s_cr->add_option("--lambda3", cr.cc.lambda3)->capture_default_str();
  s_cr->add_option("--lambda4", cr.lambda4, "default: benign unseen-domain risk");
  s_cr->add_option("--J", cr.cc.J, "unseen domains")->capture_default_str();
  s_cr->add_option("--outer", cr.cc.outer_epochs)->capture_default_str();
  s_cr->add_option("--upper", cr.cc.upper_iters)->capture_default_str();
  s_cr->add_option("--lower", cr.cc.lower_iters)->capture_default_str();
  s_cr->add_option("--lower-lr", cr.cc.lower_lr)->capture_default_str();
  s_cr->add_option("--target-batch", cr.cc.target_batch)->capture_default_str();
  s_cr->add_option("--augment-shift", cr.cc.augment_shift)->capture_default_str();
  s_cr->add_option("--target-class", cr.target_class, "-1 draws one from the seed")->capture_default_str();
  s_cr->add_option("--scope", cr.scope)->check(CLI::IsMember({"all", "target-class"}))->capture_default_str();
  s_cr->add_option("--init", cr.init)->check(CLI::IsMember({"zero", "uniform", "domain"}))->capture_default_str();
  add_seed(s_cr, cr.seed);

  TrainArgs tr;
  auto* s_tr = app.add_subcommand("train", "train a classifier");
  s_tr->add_option("--data", tr.data)->required();
  s_tr->add_option("--out", tr.out)->required();
  tr.train.add(s_tr);
  add_seed(s_tr, tr.seed);

  VerifyArgs vf;
  auto* s_vf = app.add_subcommand("verify", "test whether a model was trained on the protected dataset");
  s_vf->add_option("--model", vf.model)->required();
  s_vf->add_option("--domain", vf.domain)->required();
  s_vf->add_option("--data", vf.data, "benign samples with ground-truth labels")->required();
  s_vf->add_option("--out", vf.out)->required();
  s_vf->add_option("--m", vf.vc.m)->capture_default_str();
  s_vf->add_option("--tau", vf.vc.tau)->capture_default_str();
  s_vf->add_option("--alpha", vf.vc.alpha)->capture_default_str();
  s_vf->add_option("--eta", vf.vc.eta, "minimum ground-truth posterior on benign samples")->capture_default_str();
  s_vf->add_option("--scope", vf.scope)->check(CLI::IsMember({"all", "target-class"}))->capture_default_str();
  s_vf->add_option("--target-class", vf.target_class)->capture_default_str();
  add_seed(s_vf, vf.seed);

  MetricsArgs mt;
  auto* s_mt = app.add_subcommand("metrics", "harm metrics, VSR and BA of a suspect model");
  s_mt->add_option("--model", mt.model)->required();
  s_mt->add_option("--benign-model", mt.benign_model)->required();
  s_mt->add_option("--domain", mt.domain)->required();
  s_mt->add_option("--data", mt.data)->required();
  s_mt->add_option("--out", mt.out)->required();
  s_mt->add_option("--scope", mt.scope)->check(CLI::IsMember({"all", "target-class"}))->capture_default_str();
  s_mt->add_option("--target-class", mt.target_class)->capture_default_str();

  AblateArgs ab;
  ab.dc.iters = 30;
  ab.dc.steps_per_phase = 2;
  ab.dc.work_size = 0;
  auto* s_ab = app.add_subcommand("ablate", "sweep the watermarking rate or the budget");
  s_ab->add_option("--out", ab.out)->required();
  s_ab->add_option("--param", ab.param)->check(CLI::IsMember({"gamma", "eps"}))->capture_default_str();
  s_ab->add_option("--values", ab.values, "comma list (default 0.01,0.05,0.1 or 4/255,8/255,16/255)");
  s_ab->add_option("--seeds", ab.seeds, "comma list of master seeds")->capture_default_str();
  s_ab->add_option("--data", ab.data)->capture_default_str();
  s_ab->add_option("--test-data", ab.test_data)->capture_default_str();
  s_ab->add_option("--gamma", ab.gamma)->capture_default_str();
  s_ab->add_option("--eps", ab.eps)->capture_default_str();
  s_ab->add_option("--scope", ab.scope)->check(CLI::IsMember({"all", "target-class"}))->capture_default_str();
  s_ab->add_option("--target-class", ab.target_class)->capture_default_str();
  s_ab->add_option("--domain-iters", ab.dc.iters)->capture_default_str();
  s_ab->add_option("--steps-per-phase", ab.dc.steps_per_phase)->capture_default_str();
  s_ab->add_option("--work-size", ab.dc.work_size)->capture_default_str();
  s_ab->add_option("--outer", ab.cc.outer_epochs)->capture_default_str();
  s_ab->add_option("--upper", ab.cc.upper_iters)->capture_default_str();
  s_ab->add_option("--lower", ab.cc.lower_iters)->capture_default_str();
  s_ab->add_option("--jobs", ab.jobs, "sweep points run concurrently")->capture_default_str();
  ab.train.add(s_ab);

  RobustnessArgs rb;
  auto* s_rb = app.add_subcommand("robustness", "fine-tuning and pruning resistance curves");
  s_rb->add_option("--model", rb.model)->required();
  s_rb->add_option("--domain", rb.domain)->required();
  s_rb->add_option("--data", rb.data, "training data the fine-tuning subset is drawn from")->required();
  s_rb->add_option("--test-data", rb.test_data)->required();
  s_rb->add_option("--out", rb.out)->required();
  s_rb->add_option("--mode", rb.mode)->capture_default_str();
  s_rb->add_option("--schedule", rb.schedule, "fine-tuning epochs to record")->capture_default_str();
  s_rb->add_option("--fractions", rb.fractions)->capture_default_str();
  s_rb->add_option("--prune-scope", rb.prune_scope)->check(CLI::IsMember({"global", "layerwise"}))->capture_default_str();
  s_rb->add_option("--subset", rb.subset, "fraction of the training data used to fine-tune")->capture_default_str();
  s_rb->add_option("--scope", rb.scope)->check(CLI::IsMember({"all", "target-class"}))->capture_default_str();
  s_rb->add_option("--target-class", rb.target_class)->capture_default_str();
  rb.train.add(s_rb);
  add_seed(s_rb, rb.seed);

  try {
    std::vector<const char*> cargs;
    for (const auto& s : args) cargs.push_back(s.c_str());
    app.parse(static_cast<int>(cargs.size()), cargs.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*s_gd) return cmd_gen_domain(gd, s_gd);
    if (*s_cr) return cmd_craft(cr, s_cr);
    if (*s_tr) return cmd_train(tr, s_tr);
    if (*s_vf) return cmd_verify(vf, s_vf);
    if (*s_mt) return cmd_metrics(mt, s_mt);
    if (*s_ab) return cmd_ablate(ab, s_ab);
    if (*s_rb) return cmd_robustness(rb, s_rb);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "dwv: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "dwv: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "dwv: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "dwv: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
