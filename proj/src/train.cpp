#include "auda/train.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "auda/rng.hpp"
#include "auda/threading.hpp"

namespace fs = std::filesystem;

namespace auda {

OptimizerState init_optimizer(const DetectorParams& params) {
  OptimizerState st;
  for (const auto& [name, t] : params.params) {
    st.m.emplace(name, Tensor::zeros(t.shape(), t.dtype()));
    st.v.emplace(name, Tensor::zeros(t.shape(), t.dtype()));
  }
  return st;
}

void adam_step(DetectorParams& params, OptimizerState& state, double lr,
               double weight_decay, double beta1, double beta2, double eps) {
  state.step += 1;
  const double bc1 = 1.0 - std::pow(beta1, double(state.step));
  const double bc2 = 1.0 - std::pow(beta2, double(state.step));
  for (auto& [name, theta] : params.params) {
    if (!theta.has_grad()) {
      throw ConfigError("adam_step: parameter " + name + " has no gradient");
    }
    Tensor& m = state.m.at(name);
    Tensor& v = state.v.at(name);
    const int64_t n = theta.numel();
    for (int64_t i = 0; i < n; ++i) {
      const double g = theta.grad_flat(i) + weight_decay * theta.flat(i);
      const double mi = beta1 * m.flat(i) + (1.0 - beta1) * g;
      const double vi = beta2 * v.flat(i) + (1.0 - beta2) * g * g;
      m.set_flat(i, mi);
      v.set_flat(i, vi);
      const double update = lr * (mi / bc1) / (std::sqrt(vi / bc2) + eps);
      theta.set_flat(i, theta.flat(i) - update);
    }
    theta.clear_grad();
  }
}

std::string metrics_csv_header() {
  return "step,epoch,lr,L_h,L_off,L_size,L_det,L_uda,L_total,"
         "target_mean_heatmap,target_mean_entropy";
}

std::string format_metrics_row(const StepMetrics& m) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "%lld,%d,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g",
                (long long)m.step, m.epoch, m.lr, m.l_h, m.l_off, m.l_size,
                m.l_det, m.l_uda, m.l_total, m.target_mean_heatmap,
                m.target_mean_entropy);
  return buf;
}

namespace {

constexpr uint64_t kSourceAugTag = 0x73616775ull;
constexpr uint64_t kTargetAugTag = 0x74616775ull;

TargetBatch encode_batch(const LoadedBatch& batch, const TrainConfig& cfg) {
  std::vector<TargetMaps> maps;
  maps.reserve(batch.boxes.size());
  const int H = int(batch.images.dim(2)), W = int(batch.images.dim(3));
  for (const auto& boxes : batch.boxes) {
    maps.push_back(encode_targets(boxes, H, W, cfg.arch.stride,
                                  cfg.arch.num_classes, cfg.min_overlap,
                                  cfg.dtype));
  }
  return stack_targets(maps);
}

}  // namespace

TrainResult train(const TrainConfig& config, const DatasetManifest& source,
                  const DatasetManifest& target,
                  const std::function<void(const StepMetrics&)>& on_step) {
  if (!source.labeled) {
    throw ConfigError("train: source manifest has no annotations");
  }
  if (source.images.empty()) throw ConfigError("train: source manifest is empty");
  if (config.mode != UdaMode::baseline) {
    if (target.images.empty()) {
      throw ConfigError("train: " + std::string(uda_mode_name(config.mode)) +
                        " mode needs a target manifest");
    }
    if (config.mode == UdaMode::em && config.arch.num_classes < 2) {
      throw ConfigError("train: EM mode needs at least 2 classes");
    }
  }
  if (config.epochs < 1) throw ConfigError("train: epochs must be >= 1");

  set_num_threads(config.deterministic ? 1 : config.threads);

  std::error_code ec;
  fs::create_directories(config.out_dir, ec);
  if (ec) throw IoError("cannot create " + config.out_dir + ": " + ec.message());

  DetectorParams params;
  OptimizerState opt;
  int start_epoch = 0;
  if (!config.resume.empty()) {
    Checkpoint ckpt = load_checkpoint(config.resume);
    if (!(ckpt.params.arch == config.arch)) {
      throw ConfigError("train: resume architecture mismatch\n  checkpoint: " +
                        ckpt.params.arch.describe() + "\n  config:     " +
                        config.arch.describe());
    }
    params = std::move(ckpt.params);
    opt = ckpt.optimizer ? std::move(*ckpt.optimizer) : init_optimizer(params);
    start_epoch = ckpt.epoch.value_or(0);
  } else {
    params = build_model(config.arch, config.arch.num_classes, config.seed,
                         config.dtype);
    opt = init_optimizer(params);
  }

  const std::string csv_path = (fs::path(config.out_dir) / "metrics.csv").string();
  const bool append = !config.resume.empty() && fs::exists(csv_path);
  std::ofstream csv(csv_path, append ? std::ios::app : std::ios::trunc);
  if (!csv) throw IoError("cannot write " + csv_path);
  if (!append) csv << metrics_csv_header() << "\n";

  const std::string config_text = train_config_to(config).serialize();

  PairedBatcher batcher(int(source.images.size()), int(target.images.size()),
                        config.batch_source, config.batch_target, config.seed);
  ImageCache cache;

  const AugmentConfig src_aug = (config.augment.enabled && config.augment_source)
                                    ? config.augment
                                    : AugmentConfig::identity();
  const AugmentConfig tgt_aug = (config.augment.enabled && config.augment_target)
                                    ? config.augment
                                    : AugmentConfig::identity();

  TrainResult result;
  const int steps_per_epoch = batcher.steps_per_epoch();
  for (int epoch = start_epoch; epoch < config.epochs; ++epoch) {
    const double lr = config.effective_lr(epoch);
    for (int step = 0; step < steps_per_epoch; ++step) {
      const int64_t global_step = int64_t(epoch) * steps_per_epoch + step;

      LoadedBatch src = load_batch(
          source, batcher.source_indices(epoch, step), cache, src_aug,
          derive_seed(config.seed, kSourceAugTag, uint64_t(global_step)),
          config.dtype);
      TargetBatch targets = encode_batch(src, config);

      StepMetrics sm;
      sm.step = global_step;
      sm.epoch = epoch;
      sm.lr = lr;
      sm.l_uda = std::nan("");
      sm.target_mean_heatmap = std::nan("");
      sm.target_mean_entropy = std::nan("");

      GradientTape tape;
      ModelOutput out = forward(params, src.images);
      LossReport report = detection_loss(out, targets, config.weights);

      if (config.mode != UdaMode::baseline) {
        LoadedBatch tgt = load_batch(
            target, batcher.target_indices(epoch, step), cache, tgt_aug,
            derive_seed(config.seed, kTargetAugTag, uint64_t(global_step)),
            config.dtype);
        ModelOutput tout = forward(params, tgt.images, /*heatmap_only=*/true);
        const Tensor& uda_input =
            config.softmax_on_logits ? tout.heatmap_logits : tout.heatmap;
        combined_loss(config.mode, report, uda_input, config.weights,
                      config.arch.stride);
        {
          NoGradGuard ng;
          Tensor hm = tout.heatmap.detached();
          sm.target_mean_heatmap = mean(hm).item();
          if (config.arch.num_classes >= 2) {
            sm.target_mean_entropy = mean(entropy_map(hm)).item();
          }
          report.target_mean_heatmap = sm.target_mean_heatmap;
          report.target_mean_entropy = sm.target_mean_entropy;
          report.has_target_diagnostics = true;
        }
        sm.l_uda = report.l_uda.item();
      } else {
        combined_loss(UdaMode::baseline, report, Tensor(), config.weights,
                      config.arch.stride);
      }

      sm.l_h = report.l_h.item();
      sm.l_off = report.l_off.item();
      sm.l_size = report.l_size.item();
      sm.l_det = report.l_det.item();
      sm.l_total = report.l_total.item();
      if (!std::isfinite(sm.l_total)) {
        throw std::runtime_error("train: non-finite total loss at step " +
                                 std::to_string(global_step));
      }

      tape.backward(report.l_total);

      // a loss term can legitimately miss a head (e.g. an all-empty batch
      // never touches offset/size); those parameters get an explicit zero
      // gradient so the optimizer contract holds
      for (auto& [name, t] : params.params) {
        (void)name;
        if (!t.has_grad()) t.ensure_zero_grad();
      }
      adam_step(params, opt, lr, config.weight_decay);

      csv << format_metrics_row(sm) << "\n";
      if (on_step) on_step(sm);
      ++result.steps_run;
    }
    csv.flush();

    const bool cadence_hit =
        config.checkpoint_every > 0 && (epoch + 1) % config.checkpoint_every == 0;
    if (cadence_hit && epoch + 1 < config.epochs) {
      char name[64];
      std::snprintf(name, sizeof name, "ckpt_epoch_%04d.auda", epoch + 1);
      Checkpoint ckpt{params, opt, config_text, epoch + 1};
      save_checkpoint((fs::path(config.out_dir) / name).string(), ckpt);
    }
  }

  result.final_checkpoint =
      (fs::path(config.out_dir) / "ckpt_final.auda").string();
  Checkpoint final_ckpt{params, opt, config_text, config.epochs};
  save_checkpoint(result.final_checkpoint, final_ckpt);
  result.params = std::move(params);
  result.optimizer = std::move(opt);
  result.metrics_csv = csv_path;
  return result;
}

}  // namespace auda
