#pragma once

#include <map>
#include <string>
#include <vector>

#include "auda/codec.hpp"
#include "auda/config.hpp"
#include "auda/data.hpp"
#include "auda/model.hpp"

namespace auda {

double iou(const BoxAnnotation& a, const BoxAnnotation& b);
double iou(const Detection& a, const BoxAnnotation& b);

// A detection tagged with the image it came from, for set-level matching.
struct ImageDetection {
  int image_index = 0;
  Detection det;
};

struct ImageGroundTruth {
  int image_index = 0;
  BoxAnnotation box;
};

// All-point interpolated average precision at one IoU threshold for one
// class. Greedy matching: detections by descending score (ties by insertion
// order), each taking the highest-IoU unmatched ground truth >= threshold.
double average_precision(std::vector<ImageDetection> detections,
                         const std::vector<ImageGroundTruth>& ground_truth,
                         double iou_threshold = 0.5);

struct EvalReport {
  std::vector<double> ap_per_class;    // NaN for classes absent from GT
  std::vector<int> gt_count_per_class;
  std::vector<int> det_count_per_class;
  double map = 0;
  double mean_heatmap_pred = 0;
  double mean_heatmap_gt = 0;
  double mean_entropy = 0;
  double images_per_second = 0;
  int num_images = 0;

  std::string to_json() const;
  std::string to_table(const std::vector<std::string>& class_names) const;
};

// Forward + decode over a labeled test set; AP@50 per class, mAP over the
// classes present in the ground truth, heatmap statistics and throughput.
EvalReport evaluate(const DetectorParams& params,
                    const DatasetManifest& testset, const TrainConfig& config);

// Arithmetic mean over every cell of every map in the set.
double heatmap_mean(const std::vector<Tensor>& heatmaps);

// Writes per-class heatmap channels and the entropy map as 8-bit grayscale
// PNGs, values scaled [0,1] -> [0,255] (round-half-away: 0.5 -> 128).
// Returns the number of files written.
int export_maps(const DetectorParams& params, const DatasetManifest& dataset,
                int max_images, const std::string& out_dir);

struct ThroughputReport {
  double images_per_second = 0;
  double median_total_ms = 0;
  double median_decode_ms = 0;
  int iterations = 0;
  int threads = 0;
  int image_size = 0;
  std::string to_json() const;
};

// Median single-image forward+decode wall time over `iterations` runs
// (3 warmup iterations first).
ThroughputReport throughput(const DetectorParams& params, int image_size,
                            int iterations, const TrainConfig& config);

}  // namespace auda
