#pragma once

#include <functional>
#include <string>

#include "auda/checkpoint.hpp"
#include "auda/config.hpp"
#include "auda/data.hpp"
#include "auda/losses.hpp"
#include "auda/model.hpp"

namespace auda {

// One Adam update with bias correction and classic coupled weight decay
// (decay added to the gradient before the moment updates). Clears gradients.
// Every parameter must have a populated gradient.
void adam_step(DetectorParams& params, OptimizerState& state, double lr,
               double weight_decay, double beta1 = 0.9, double beta2 = 0.999,
               double eps = 1e-8);

OptimizerState init_optimizer(const DetectorParams& params);

struct StepMetrics {
  int64_t step = 0;
  int epoch = 0;
  double lr = 0;
  double l_h = 0, l_off = 0, l_size = 0, l_det = 0;
  double l_uda = 0;  // NaN in baseline mode
  double l_total = 0;
  double target_mean_heatmap = 0;   // NaN in baseline mode
  double target_mean_entropy = 0;   // NaN in baseline mode
};

struct TrainResult {
  DetectorParams params;
  OptimizerState optimizer;
  std::string final_checkpoint;
  std::string metrics_csv;
  int64_t steps_run = 0;
};

// Dual-domain loop: source batches drive the detection loss, target batches
// drive the UDA term through the heatmap head only. Baseline mode never
// forwards the target batch. Writes one metrics CSV row per step and
// checkpoints on the configured cadence plus at the end.
TrainResult train(const TrainConfig& config, const DatasetManifest& source,
                  const DatasetManifest& target,
                  const std::function<void(const StepMetrics&)>& on_step = {});

std::string metrics_csv_header();
std::string format_metrics_row(const StepMetrics& m);

}  // namespace auda
