#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "auda/checkpoint.hpp"
#include "auda/config.hpp"
#include "auda/data.hpp"
#include "auda/eval.hpp"
#include "auda/losses.hpp"
#include "auda/threading.hpp"
#include "auda/train.hpp"

namespace fs = std::filesystem;
using namespace auda;

namespace {

// invalid invocation (missing required field, bad combination) -> exit 1
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CommonFlags {
  std::string config_path;
  int64_t seed = -1;
  bool deterministic = false;
  int threads = -1;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "config file (ini-style)");
    cmd->add_option("--seed", seed, "seed override");
    cmd->add_flag("--deterministic", deterministic,
                  "single-threaded bit-reproducible mode");
    cmd->add_option("--threads", threads, "kernel threads (0 = hardware)");
  }

  ConfigFile load(const char* section) const {
    ConfigFile cf;
    if (!config_path.empty()) cf = ConfigFile::parse_file(config_path);
    cf.apply_env_overrides();
    if (seed >= 0) {
      cf.set(std::string(section) + ".seed", std::to_string(seed));
    }
    if (deterministic) cf.set("train.deterministic", "true");
    if (threads >= 0) cf.set("train.threads", std::to_string(threads));
    return cf;
  }
};

void write_snapshot(const ConfigFile& cf, const std::string& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  cf.write_file((fs::path(out_dir) / "resolved_config.ini").string());
}

void apply_runtime(const TrainConfig& tc) {
  set_num_threads(tc.deterministic ? 1 : tc.threads);
}

std::vector<std::string> class_names(int n) {
  static const char* kNames[6] = {"disc", "square", "triangle",
                                  "ring", "bar",    "cross"};
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) out.push_back(kNames[i % 6]);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "auda: anchorless center-point object detection with unsupervised "
      "domain adaptation (entropy minimization / maximum squares loss)"};
  app.require_subcommand(1);

  // ---- generate-data ----
  auto* gen = app.add_subcommand("generate-data",
                                 "render a procedural two-domain dataset split");
  CommonFlags gen_common;
  gen_common.attach(gen);
  std::string gen_out, gen_domain, gen_split;
  int64_t gen_count = -1;
  int gen_image_size = -1;
  bool gen_unlabeled = false;
  gen->add_option("--out", gen_out, "output directory");
  gen->add_option("--count", gen_count, "number of images");
  gen->add_option("--domain", gen_domain, "source | target");
  gen->add_option("--split", gen_split, "split name");
  gen->add_option("--image-size", gen_image_size, "square image size");
  gen->add_flag("--unlabeled", gen_unlabeled, "omit annotations");

  // ---- train ----
  auto* tr = app.add_subcommand("train", "train a detector");
  CommonFlags tr_common;
  tr_common.attach(tr);
  std::string tr_source, tr_target, tr_out, tr_mode, tr_dtype, tr_resume;
  int64_t tr_epochs = -1;
  tr->add_option("--source", tr_source, "labeled source manifest (json)");
  tr->add_option("--target", tr_target, "unlabeled target manifest (json)");
  tr->add_option("--out", tr_out, "run output directory");
  tr->add_option("--mode", tr_mode, "baseline | em | msl");
  tr->add_option("--epochs", tr_epochs, "training epochs");
  tr->add_option("--dtype", tr_dtype, "f32 | f64");
  tr->add_option("--resume", tr_resume, "checkpoint to resume from");

  // ---- evaluate ----
  auto* ev = app.add_subcommand("evaluate", "compute AP@50 per class and mAP");
  CommonFlags ev_common;
  ev_common.attach(ev);
  std::string ev_ckpt, ev_testset, ev_out;
  ev->add_option("--checkpoint", ev_ckpt, "trained checkpoint")->required();
  ev->add_option("--testset", ev_testset, "labeled test manifest (json)")
      ->required();
  ev->add_option("--out", ev_out, "report output directory");

  // ---- export-maps ----
  auto* ex = app.add_subcommand("export-maps",
                                "write heatmap channels and entropy maps");
  CommonFlags ex_common;
  ex_common.attach(ex);
  std::string ex_ckpt, ex_dataset, ex_out;
  int64_t ex_count = 4;
  ex->add_option("--checkpoint", ex_ckpt, "trained checkpoint")->required();
  ex->add_option("--dataset", ex_dataset, "manifest (json)")->required();
  ex->add_option("--count", ex_count, "images to export");
  ex->add_option("--out", ex_out, "output directory");

  // ---- analyze-gradients ----
  auto* an = app.add_subcommand(
      "analyze-gradients",
      "CSV of |dL/dp| for the entropy and max-squares losses");
  CommonFlags an_common;
  an_common.attach(an);
  std::string an_out;
  an->add_option("--out", an_out, "output directory");

  // ---- throughput ----
  auto* th = app.add_subcommand("throughput", "forward+decode speed harness");
  CommonFlags th_common;
  th_common.attach(th);
  std::string th_ckpt, th_out;
  int64_t th_iters = 50, th_size = 128;
  th->add_option("--checkpoint", th_ckpt, "checkpoint (default: fresh model)");
  th->add_option("--iterations", th_iters, "timed iterations (>= 10)");
  th->add_option("--image-size", th_size, "square input size");
  th->add_option("--out", th_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // prints usage, exit 0
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (app.got_subcommand(gen)) {
      ConfigFile cf = gen_common.load("data");
      if (!gen_out.empty()) cf.set("data.out_dir", gen_out);
      if (gen_count >= 0) cf.set("data.count", std::to_string(gen_count));
      if (!gen_domain.empty()) cf.set("data.domain", gen_domain);
      if (!gen_split.empty()) cf.set("data.split", gen_split);
      if (gen_image_size > 0) {
        cf.set("data.image_size", std::to_string(gen_image_size));
      }
      if (gen_unlabeled) cf.set("data.labeled", "false");
      GenerateConfig gc = generate_config_from(cf);
      DatasetManifest m = generate_dataset(gc.scene, gc.count, gc.seed,
                                           gc.out_dir, gc.labeled, gc.split);
      write_snapshot(generate_config_to(gc), gc.out_dir);
      std::printf("wrote %zu images (%s, %s) under %s\n", m.images.size(),
                  domain_name(m.domain), m.labeled ? "labeled" : "unlabeled",
                  gc.out_dir.c_str());
      return 0;
    }

    if (app.got_subcommand(tr)) {
      ConfigFile cf = tr_common.load("train");
      if (!tr_source.empty()) cf.set("train.source", tr_source);
      if (!tr_target.empty()) cf.set("train.target", tr_target);
      if (!tr_out.empty()) cf.set("train.out_dir", tr_out);
      if (!tr_mode.empty()) cf.set("train.mode", tr_mode);
      if (tr_epochs >= 0) cf.set("train.epochs", std::to_string(tr_epochs));
      if (!tr_dtype.empty()) cf.set("train.dtype", tr_dtype);
      if (!tr_resume.empty()) cf.set("train.resume", tr_resume);
      TrainConfig tc = train_config_from(cf);
      if (tc.source_manifest.empty()) {
        throw UsageError("train: missing train.source (use --source)");
      }
      if (tc.mode != UdaMode::baseline && tc.target_manifest.empty()) {
        throw UsageError("train: missing train.target (use --target)");
      }
      DatasetManifest source = load_coco(tc.source_manifest);
      DatasetManifest target = tc.target_manifest.empty()
                                   ? DatasetManifest{}
                                   : load_coco(tc.target_manifest);
      write_snapshot(train_config_to(tc), tc.out_dir);
      TrainResult res = train(tc, source, target, [](const StepMetrics& m) {
        if (m.step % 25 == 0) {
          std::printf("step %lld epoch %d  L_det %.4f  L_total %.4f\n",
                      (long long)m.step, m.epoch, m.l_det, m.l_total);
          std::fflush(stdout);
        }
      });
      std::printf("final checkpoint: %s\nmetrics: %s\n",
                  res.final_checkpoint.c_str(), res.metrics_csv.c_str());
      return 0;
    }

    if (app.got_subcommand(ev)) {
      Checkpoint ckpt = load_checkpoint(ev_ckpt);
      ConfigFile cf;
      if (ckpt.config_text) cf = ConfigFile::parse_text(*ckpt.config_text);
      cf.merge_from(ev_common.load("train"));
      TrainConfig tc = train_config_from(cf);
      tc.arch = ckpt.params.arch;
      apply_runtime(tc);
      DatasetManifest testset = load_coco(ev_testset);
      EvalReport report = evaluate(ckpt.params, testset, tc);
      std::printf("%s", report.to_table(class_names(tc.arch.num_classes)).c_str());
      if (!ev_out.empty()) {
        std::error_code ec;
        fs::create_directories(ev_out, ec);
        std::ofstream((fs::path(ev_out) / "eval_report.json").string())
            << report.to_json() << "\n";
        write_snapshot(train_config_to(tc), ev_out);
        std::printf("report: %s/eval_report.json\n", ev_out.c_str());
      }
      return 0;
    }

    if (app.got_subcommand(ex)) {
      Checkpoint ckpt = load_checkpoint(ex_ckpt);
      ConfigFile cf;
      if (ckpt.config_text) cf = ConfigFile::parse_text(*ckpt.config_text);
      cf.merge_from(ex_common.load("train"));
      TrainConfig tc = train_config_from(cf);
      tc.arch = ckpt.params.arch;
      apply_runtime(tc);
      const std::string out = ex_out.empty() ? "maps_out" : ex_out;
      DatasetManifest ds = load_coco(ex_dataset);
      const int n = export_maps(ckpt.params, ds, int(ex_count), out);
      write_snapshot(train_config_to(tc), out);
      std::printf("wrote %d map images under %s\n", n, out.c_str());
      return 0;
    }

    if (app.got_subcommand(an)) {
      const std::string out = an_out.empty() ? "gradient_analysis" : an_out;
      std::error_code ec;
      fs::create_directories(out, ec);
      if (ec) throw IoError("cannot create " + out + ": " + ec.message());
      std::vector<double> ps;
      for (int i = 1; i <= 99; ++i) ps.push_back(double(i) / 100.0);
      auto rows = gradient_profile(ps);
      const std::string csv = (fs::path(out) / "gradient_profile.csv").string();
      write_gradient_profile_csv(csv, rows);
      write_snapshot(an_common.load("train"), out);
      std::printf("wrote %s\n", csv.c_str());
      return 0;
    }

    if (app.got_subcommand(th)) {
      ConfigFile cf = th_common.load("train");
      TrainConfig tc = train_config_from(cf);
      apply_runtime(tc);
      DetectorParams params;
      if (!th_ckpt.empty()) {
        params = load_checkpoint(th_ckpt).params;
      } else {
        params = build_model(tc.arch, tc.arch.num_classes, tc.seed, tc.dtype);
      }
      ThroughputReport rep =
          throughput(params, int(th_size), int(th_iters), tc);
      std::printf("%s\n", rep.to_json().c_str());
      if (!th_out.empty()) {
        std::error_code ec;
        fs::create_directories(th_out, ec);
        std::ofstream((fs::path(th_out) / "throughput.json").string())
            << rep.to_json() << "\n";
        write_snapshot(train_config_to(tc), th_out);
      }
      return 0;
    }

    throw UsageError("no command selected");
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
