// Copyright 2026 The umvl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Command-line front end: gradient checks, demo decoding, token parsing,
// the overfit probe, and the four evaluators.
//
// Exit codes: 0 success, 1 metric or check failure, 2 usage error,
// 3 I/O or format error.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "umvl/annotations.hpp"
#include "umvl/decoder.hpp"
#include "umvl/decoder_io.hpp"
#include "umvl/errors.hpp"
#include "umvl/eval.hpp"
#include "umvl/gradcheck_suite.hpp"
#include "umvl/grounding.hpp"
#include "umvl/grounding_json.hpp"
#include "umvl/pgm.hpp"
#include "umvl/probe.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIoOrFormat = 3;

std::string fmt_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_sci(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.3e", v);
  return buf;
}

nlohmann::json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw umvl::IoError("cannot open " + path.string() + " for reading");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw umvl::FormatError(path.string() + ": " + e.what());
  }
}

// Values from the optional JSON config file fill in flags the user did not
// pass explicitly; explicit flags always win.
class ConfigMerger {
 public:
  explicit ConfigMerger(nlohmann::json values) : values_(std::move(values)) {}

  template <typename T>
  void merge(const CLI::Option* opt, const char* key, T& var) const {
    if (opt != nullptr && opt->count() > 0) return;
    if (!values_.contains(key)) return;
    try {
      var = values_[key].get<T>();
    } catch (const nlohmann::json::exception&) {
      throw umvl::ConfigError(std::string("config file: value for '") + key +
                              "' has the wrong type");
    }
  }

 private:
  nlohmann::json values_;
};

int run_gradcheck(std::uint64_t seed, std::size_t trials, double tol) {
  const auto cases = umvl::run_gradcheck_suite(seed, trials);
  std::size_t passed = 0;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto& c = cases[i];
    const bool ok = c.result.max_rel_error < tol;
    passed += ok ? 1 : 0;
    std::cout << "trial " << i << ": D=" << c.cfg.d_llm << " C=" << c.cfg.c_dec
              << " N=" << c.cfg.n_query << " grid " << c.cfg.h_vis << "x" << c.cfg.w_vis
              << " out " << c.cfg.h_out << "x" << c.cfg.w_out << " max_rel "
              << fmt_sci(c.result.max_rel_error) << (ok ? " [pass]" : " [FAIL]") << "\n";
  }
  std::cout << "gradcheck: " << passed << "/" << cases.size() << " trials within tol "
            << fmt_sci(tol) << "\n";
  return passed == cases.size() ? kExitOk : kExitCheckFailed;
}

int run_probe(std::size_t steps, double lr, std::uint64_t seed, std::size_t size) {
  umvl::DecoderConfig cfg;
  cfg.d_llm = 32;
  cfg.c_dec = 32;
  cfg.n_query = 8;
  cfg.h_vis = 8;
  cfg.w_vis = 8;
  cfg.h_out = size;
  cfg.w_out = size;
  const umvl::BinaryMask target = umvl::make_disk_target(size, size);
  const auto observer = [](std::size_t step, double loss, double dice) {
    std::cout << "step " << step << " loss " << fmt_full(loss) << " dice " << fmt_full(dice)
              << "\n";
  };
  const umvl::ProbeResult r = umvl::overfit_probe(target, cfg, steps, lr, seed, observer);
  std::cout << "final loss " << fmt_full(r.final_loss) << " dice " << fmt_full(r.final_dice)
            << "\n";
  return kExitOk;
}

int run_parse(const std::string& text, const std::optional<umvl::GroundingTask>& task,
              std::size_t bins, std::size_t n_query) {
  umvl::ParseResult result = umvl::parse(text, bins);
  if (task) {
    const auto extra = umvl::validate_against_task(result.elements, *task, n_query);
    result.diagnostics.insert(result.diagnostics.end(), extra.begin(), extra.end());
  }
  nlohmann::json out;
  out["elements"] = umvl::elements_to_json(result.elements);
  out["diagnostics"] = umvl::diagnostics_to_json(result.diagnostics);
  std::cout << out.dump(2) << "\n";
  return result.ok() ? kExitOk : kExitCheckFailed;
}

int run_demo_decode(const std::string& params_path, const std::string& config_path,
                    const std::string& features_path, const std::string& out_prefix) {
  const umvl::DecoderConfig cfg = umvl::decoder_config_from_json(load_json_file(config_path));
  const umvl::DecoderParams params = umvl::load_decoder_params(params_path, cfg);
  const umvl::DecoderFeatures feats = umvl::load_decoder_features(features_path);
  const umvl::MaskLogits logits = umvl::decode_mask(feats.f_img, feats.f_q, params, cfg);
  const umvl::BinaryMask mask = umvl::binarize(logits);

  const std::string logits_path = out_prefix + ".logits.json";
  const std::string pgm_path = out_prefix + ".pgm";
  {
    nlohmann::json j{{"height", logits.height}, {"width", logits.width}, {"data", logits.data}};
    std::ofstream out(logits_path, std::ios::trunc);
    if (!out) throw umvl::IoError("cannot open " + logits_path + " for writing");
    out << j.dump() << "\n";
    if (!out) throw umvl::IoError("write failure on " + logits_path);
  }
  umvl::write_pgm(mask, pgm_path);

  std::size_t foreground = 0;
  for (auto px : mask.data) foreground += px;
  nlohmann::json summary{{"logits", logits_path},
                         {"mask", pgm_path},
                         {"height", logits.height},
                         {"width", logits.width},
                         {"foreground_pixels", foreground}};
  std::cout << summary.dump(2) << "\n";
  return kExitOk;
}

int run_make_fixture(const std::string& config_path, std::uint64_t seed,
                     const std::string& params_prefix, const std::string& features_path) {
  const umvl::DecoderConfig cfg = umvl::decoder_config_from_json(load_json_file(config_path));
  const umvl::ProbeState st = umvl::init_probe_state(cfg, seed);
  const std::string bin_path = params_prefix + ".bin";
  const std::string json_path = params_prefix + ".json";
  umvl::save_decoder_params(st.params, bin_path, json_path);
  umvl::save_decoder_features({st.f_img, st.f_q}, features_path);
  nlohmann::json summary{{"params_bin", bin_path},
                         {"params_sidecar", json_path},
                         {"features", features_path},
                         {"seed", seed}};
  std::cout << summary.dump(2) << "\n";
  return kExitOk;
}

std::vector<umvl::AnnotationRecord> load_corpus(const std::string& path) {
  umvl::CorpusLoadResult loaded = umvl::load_annotations(path);
  for (const std::string& w : loaded.warnings) std::cerr << "warning: " << w << "\n";
  return std::move(loaded.records);
}

int run_eval(const std::string& which, const std::string& pred_path, const std::string& gt_path,
             double iou_thresh, bool best_f1, bool table) {
  const auto preds = load_corpus(pred_path);
  const auto gts = load_corpus(gt_path);
  umvl::MetricReport report;
  if (which == "seg") {
    report = umvl::eval_segmentation(preds, gts);
  } else if (which == "det") {
    report = umvl::eval_detection(preds, gts, iou_thresh, best_f1);
  } else if (which == "kpt") {
    report = umvl::eval_keypoints(preds, gts);
  } else {
    report = umvl::eval_diagnosis(preds, gts);
  }
  if (table) {
    std::cout << umvl::report_to_table(report);
  } else {
    std::cout << umvl::report_to_json(report).dump(2) << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unified grounding toolkit: mask decoder, token codec, evaluators"};
  app.require_subcommand(1);
  std::string flags_config;
  app.add_option("--config", flags_config,
                 "JSON file with default values for flags not given explicitly");

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of all decoder gradients");
  std::uint64_t gc_seed = 42;
  std::size_t gc_trials = 20;
  double gc_tol = 1e-4;
  auto* gc_seed_opt = gc->add_option("--seed", gc_seed, "PRNG seed");
  auto* gc_trials_opt = gc->add_option("--trials", gc_trials, "number of random configs");
  auto* gc_tol_opt = gc->add_option("--tol", gc_tol, "relative error tolerance");

  // demo-decode
  auto* dd = app.add_subcommand("demo-decode", "Decode a mask from saved params and features");
  std::string dd_params, dd_config, dd_features, dd_out;
  dd->add_option("--params", dd_params, "param sidecar JSON (next to the .bin blob)")
      ->required();
  dd->add_option("--config", dd_config, "decoder config JSON")->required();
  dd->add_option("--features", dd_features, "features JSON with f_img and f_q")->required();
  dd->add_option("--out", dd_out, "output prefix; writes <out>.logits.json and <out>.pgm")
      ->required();

  // make-fixture
  auto* mf = app.add_subcommand("make-fixture",
                                "Write seeded random params and features for demo-decode");
  std::string mf_config, mf_params = "fixture_params", mf_features = "fixture_features.json";
  std::uint64_t mf_seed = 0;
  mf->add_option("--config", mf_config, "decoder config JSON")->required();
  auto* mf_seed_opt = mf->add_option("--seed", mf_seed, "PRNG seed");
  mf->add_option("--params-out", mf_params, "prefix; writes <prefix>.bin and <prefix>.json");
  mf->add_option("--features-out", mf_features, "features JSON path");

  // parse
  auto* pa = app.add_subcommand("parse", "Parse grounding tokens from text");
  std::string pa_text, pa_file, pa_task;
  std::size_t pa_bins = 1000, pa_nquery = 16;
  auto* pa_text_opt = pa->add_option("--text", pa_text, "literal text to parse");
  auto* pa_file_opt = pa->add_option("--file", pa_file, "file whose contents are parsed");
  pa->add_option("--task", pa_task, "validate kinds against: segment|detect|point|line");
  auto* pa_bins_opt = pa->add_option("--bins", pa_bins, "coordinate bins per axis");
  auto* pa_nquery_opt =
      pa->add_option("--n-query", pa_nquery, "expected seg token count for --task segment");

  // probe
  auto* pr = app.add_subcommand("probe", "Overfit the decoder to a centered disk target");
  std::size_t pr_steps = 300, pr_size = 64;
  double pr_lr = 0.05;
  std::uint64_t pr_seed = 7;
  auto* pr_steps_opt = pr->add_option("--steps", pr_steps, "gradient steps");
  auto* pr_lr_opt = pr->add_option("--lr", pr_lr, "learning rate");
  auto* pr_seed_opt = pr->add_option("--seed", pr_seed, "PRNG seed");
  auto* pr_size_opt = pr->add_option("--size", pr_size, "target mask edge length");

  // eval
  auto* ev = app.add_subcommand("eval", "Score a prediction corpus against ground truth");
  ev->require_subcommand(1);
  std::string ev_pred, ev_gt;
  double ev_iou = 0.5;
  bool ev_best_f1 = false, ev_table = false;
  std::vector<CLI::App*> ev_subs;
  CLI::Option* ev_iou_opt = nullptr;
  CLI::Option* ev_best_opt = nullptr;
  for (const char* name : {"seg", "det", "kpt", "dx"}) {
    auto* sub = ev->add_subcommand(name);
    sub->add_option("--pred", ev_pred, "prediction corpus (JSONL)")->required();
    sub->add_option("--gt", ev_gt, "ground-truth corpus (JSONL)")->required();
    sub->add_flag("--table", ev_table, "print an aligned table instead of JSON");
    if (std::string(name) == "det") {
      ev_iou_opt = sub->add_option("--iou-thresh", ev_iou, "IoU threshold for a true positive");
      ev_best_opt = sub->add_flag("--best-f1", ev_best_f1, "sweep score thresholds for best F1");
    }
    ev_subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    nlohmann::json config_values = nlohmann::json::object();
    if (!flags_config.empty()) {
      config_values = load_json_file(flags_config);
      if (!config_values.is_object()) {
        throw umvl::FormatError(flags_config + ": config must be a JSON object");
      }
    }
    const ConfigMerger merger(config_values);

    if (gc->parsed()) {
      merger.merge(gc_seed_opt, "seed", gc_seed);
      merger.merge(gc_trials_opt, "trials", gc_trials);
      merger.merge(gc_tol_opt, "tol", gc_tol);
      if (gc_trials < 1 || !(gc_tol > 0.0)) {
        std::cerr << "usage: --trials must be >= 1 and --tol > 0\n";
        return kExitUsage;
      }
      return run_gradcheck(gc_seed, gc_trials, gc_tol);
    }
    if (dd->parsed()) {
      return run_demo_decode(dd_params, dd_config, dd_features, dd_out);
    }
    if (mf->parsed()) {
      merger.merge(mf_seed_opt, "seed", mf_seed);
      return run_make_fixture(mf_config, mf_seed, mf_params, mf_features);
    }
    if (pa->parsed()) {
      merger.merge(pa_bins_opt, "bins", pa_bins);
      merger.merge(pa_nquery_opt, "n-query", pa_nquery);
      if (pa_text_opt->count() + pa_file_opt->count() != 1) {
        std::cerr << "usage: parse needs exactly one of --text or --file\n";
        return kExitUsage;
      }
      if (pa_bins < 2) {
        std::cerr << "usage: --bins must be >= 2\n";
        return kExitUsage;
      }
      std::optional<umvl::GroundingTask> task;
      if (!pa_task.empty()) {
        if (pa_task == "segment" || pa_task == "seg") {
          task = umvl::GroundingTask::segment;
        } else if (pa_task == "detect" || pa_task == "det") {
          task = umvl::GroundingTask::detect;
        } else if (pa_task == "point") {
          task = umvl::GroundingTask::point;
        } else if (pa_task == "line") {
          task = umvl::GroundingTask::line;
        } else {
          std::cerr << "usage: --task must be segment|detect|point|line\n";
          return kExitUsage;
        }
      }
      std::string text = pa_text;
      if (pa_file_opt->count() > 0) {
        std::ifstream in(pa_file, std::ios::binary);
        if (!in) throw umvl::IoError("cannot open " + pa_file + " for reading");
        std::stringstream ss;
        ss << in.rdbuf();
        text = ss.str();
      }
      return run_parse(text, task, pa_bins, pa_nquery);
    }
    if (pr->parsed()) {
      merger.merge(pr_steps_opt, "steps", pr_steps);
      merger.merge(pr_lr_opt, "lr", pr_lr);
      merger.merge(pr_seed_opt, "seed", pr_seed);
      merger.merge(pr_size_opt, "size", pr_size);
      if (pr_steps < 1 || !(pr_lr > 0.0) || pr_size < 1) {
        std::cerr << "usage: probe needs --steps >= 1, --lr > 0, --size >= 1\n";
        return kExitUsage;
      }
      return run_probe(pr_steps, pr_lr, pr_seed, pr_size);
    }
    if (ev->parsed()) {
      if (ev_iou_opt != nullptr) merger.merge(ev_iou_opt, "iou-thresh", ev_iou);
      if (ev_best_opt != nullptr && ev_best_opt->count() == 0 &&
          config_values.contains("best-f1")) {
        ev_best_f1 = config_values["best-f1"].get<bool>();
      }
      if (!(ev_iou > 0.0) || ev_iou > 1.0) {
        std::cerr << "usage: --iou-thresh must be in (0, 1]\n";
        return kExitUsage;
      }
      for (std::size_t i = 0; i < ev_subs.size(); ++i) {
        if (ev_subs[i]->parsed()) {
          static const char* kNames[] = {"seg", "det", "kpt", "dx"};
          return run_eval(kNames[i], ev_pred, ev_gt, ev_iou, ev_best_f1, ev_table);
        }
      }
    }
    std::cerr << "usage: no subcommand selected\n";
    return kExitUsage;
  } catch (const umvl::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIoOrFormat;
  } catch (const umvl::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIoOrFormat;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIoOrFormat;
  }
}
