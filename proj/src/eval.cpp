#include "auda/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include <json.hpp>

#include "auda/threading.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace auda {

double iou(const BoxAnnotation& a, const BoxAnnotation& b) {
  const double ix = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double iy = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  return uni <= 0 ? 0.0 : inter / uni;
}

double iou(const Detection& d, const BoxAnnotation& b) {
  return iou(BoxAnnotation{d.x1, d.y1, d.x2, d.y2, d.class_id}, b);
}

double average_precision(std::vector<ImageDetection> detections,
                         const std::vector<ImageGroundTruth>& ground_truth,
                         double iou_threshold) {
  if (ground_truth.empty()) return std::nan("");
  if (detections.empty()) return 0.0;

  std::stable_sort(detections.begin(), detections.end(),
                   [](const ImageDetection& a, const ImageDetection& b) {
                     return a.det.score > b.det.score;
                   });

  // ground truth grouped by image
  std::map<int, std::vector<size_t>> gt_by_image;
  for (size_t i = 0; i < ground_truth.size(); ++i) {
    gt_by_image[ground_truth[i].image_index].push_back(i);
  }
  std::vector<bool> matched(ground_truth.size(), false);

  const size_t n = detections.size();
  std::vector<bool> is_tp(n, false);
  for (size_t k = 0; k < n; ++k) {
    const ImageDetection& d = detections[k];
    auto it = gt_by_image.find(d.image_index);
    if (it == gt_by_image.end()) continue;
    double best_iou = 0.0;
    size_t best_gt = size_t(-1);
    for (size_t gi : it->second) {
      if (matched[gi]) continue;
      const double v = iou(d.det, ground_truth[gi].box);
      if (v > best_iou) {
        best_iou = v;
        best_gt = gi;
      }
    }
    if (best_gt != size_t(-1) && best_iou >= iou_threshold) {
      matched[best_gt] = true;
      is_tp[k] = true;
    }
  }

  // precision/recall at every rank cutoff, then all-point interpolation
  std::vector<double> precision(n), recall(n);
  int tp = 0;
  for (size_t k = 0; k < n; ++k) {
    tp += is_tp[k] ? 1 : 0;
    precision[k] = double(tp) / double(k + 1);
    recall[k] = double(tp) / double(ground_truth.size());
  }
  for (size_t k = n - 1; k-- > 0;) {
    precision[k] = std::max(precision[k], precision[k + 1]);
  }
  double ap = 0.0, prev_recall = 0.0;
  for (size_t k = 0; k < n; ++k) {
    if (recall[k] > prev_recall) {
      ap += (recall[k] - prev_recall) * precision[k];
      prev_recall = recall[k];
    }
  }
  return ap;
}

double heatmap_mean(const std::vector<Tensor>& heatmaps) {
  double acc = 0.0;
  int64_t count = 0;
  for (const Tensor& t : heatmaps) {
    for (int64_t i = 0; i < t.numel(); ++i) acc += t.flat(i);
    count += t.numel();
  }
  return count == 0 ? 0.0 : acc / double(count);
}

namespace {

Tensor slice_chw(const Tensor& batch, int64_t n) {
  const int64_t C = batch.dim(1), H = batch.dim(2), W = batch.dim(3);
  Tensor out = Tensor::zeros({C, H, W}, batch.dtype());
  const int64_t plane = C * H * W;
  for (int64_t i = 0; i < plane; ++i) out.set_flat(i, batch.flat(n * plane + i));
  return out;
}

}  // namespace

EvalReport evaluate(const DetectorParams& params,
                    const DatasetManifest& testset, const TrainConfig& config) {
  if (testset.images.empty()) throw ConfigError("evaluate: empty test set");
  if (!testset.labeled) {
    throw ConfigError("evaluate: test set has no annotations");
  }
  const int C = params.arch.num_classes;

  EvalReport report;
  report.ap_per_class.assign(size_t(C), std::nan(""));
  report.gt_count_per_class.assign(size_t(C), 0);
  report.det_count_per_class.assign(size_t(C), 0);
  report.num_images = int(testset.images.size());

  std::vector<std::vector<ImageDetection>> dets_per_class(
      static_cast<size_t>(C));
  std::vector<std::vector<ImageGroundTruth>> gt_per_class(
      static_cast<size_t>(C));

  ImageCache cache;
  double heat_acc = 0.0, ent_acc = 0.0;
  int64_t heat_count = 0, ent_count = 0;
  std::vector<Tensor> gt_heatmaps;

  const auto t0 = std::chrono::steady_clock::now();
  const int batch = 8;
  NoGradGuard ng;
  for (int begin = 0; begin < report.num_images; begin += batch) {
    const int end = std::min(begin + batch, report.num_images);
    std::vector<int> indices;
    for (int i = begin; i < end; ++i) indices.push_back(i);
    LoadedBatch lb = load_batch(testset, indices, cache,
                                AugmentConfig::identity(), 0, config.dtype);
    ModelOutput out = forward(params, lb.images);

    Tensor heat = out.heatmap.detached();
    for (int64_t i = 0; i < heat.numel(); ++i) heat_acc += heat.flat(i);
    heat_count += heat.numel();
    if (C >= 2) {
      Tensor ent = entropy_map(heat);
      for (int64_t i = 0; i < ent.numel(); ++i) ent_acc += ent.flat(i);
      ent_count += ent.numel();
    }

    for (int i = begin; i < end; ++i) {
      const int64_t n = i - begin;
      std::vector<Detection> dets =
          decode(slice_chw(heat, n), slice_chw(out.offset.detached(), n),
                 slice_chw(out.size.detached(), n), config.arch.stride,
                 config.top_k, config.score_threshold);
      for (const Detection& d : dets) {
        if (d.class_id < 0 || d.class_id >= C) continue;
        dets_per_class[size_t(d.class_id)].push_back({i, d});
        report.det_count_per_class[size_t(d.class_id)]++;
      }
      for (const BoxAnnotation& b : lb.boxes[size_t(n)]) {
        gt_per_class[size_t(b.class_id)].push_back({i, b});
        report.gt_count_per_class[size_t(b.class_id)]++;
      }
      gt_heatmaps.push_back(
          encode_targets(lb.boxes[size_t(n)], int(lb.images.dim(2)),
                         int(lb.images.dim(3)), config.arch.stride, C,
                         config.min_overlap, config.dtype)
              .heatmap);
    }
  }
  const auto t1 = std::chrono::steady_clock::now();
  const double elapsed = std::chrono::duration<double>(t1 - t0).count();
  report.images_per_second =
      elapsed > 0 ? double(report.num_images) / elapsed : 0.0;

  double ap_sum = 0.0;
  int ap_n = 0;
  for (int c = 0; c < C; ++c) {
    if (gt_per_class[size_t(c)].empty()) continue;  // excluded from the mean
    const double ap = average_precision(dets_per_class[size_t(c)],
                                        gt_per_class[size_t(c)], 0.5);
    report.ap_per_class[size_t(c)] = ap;
    ap_sum += ap;
    ++ap_n;
  }
  report.map = ap_n > 0 ? ap_sum / ap_n : 0.0;
  report.mean_heatmap_pred = heat_count ? heat_acc / double(heat_count) : 0.0;
  report.mean_heatmap_gt = heatmap_mean(gt_heatmaps);
  report.mean_entropy = ent_count ? ent_acc / double(ent_count) : 0.0;
  return report;
}

std::string EvalReport::to_json() const {
  json j;
  j["map"] = map;
  json aps = json::array();
  for (double ap : ap_per_class) {
    if (std::isnan(ap)) {
      aps.push_back(nullptr);
    } else {
      aps.push_back(ap);
    }
  }
  j["ap_per_class"] = std::move(aps);
  j["gt_count_per_class"] = gt_count_per_class;
  j["det_count_per_class"] = det_count_per_class;
  j["mean_heatmap_pred"] = mean_heatmap_pred;
  j["mean_heatmap_gt"] = mean_heatmap_gt;
  j["mean_entropy"] = mean_entropy;
  j["images_per_second"] = images_per_second;
  j["num_images"] = num_images;
  return j.dump(2);
}

std::string EvalReport::to_table(const std::vector<std::string>& names) const {
  std::string out = "Class AP50      ";
  char buf[64];
  for (size_t c = 0; c < ap_per_class.size(); ++c) {
    const std::string name =
        c < names.size() ? names[c] : "class" + std::to_string(c);
    std::snprintf(buf, sizeof buf, "%-10s", name.c_str());
    out += buf;
  }
  out += "| mAP\n";
  out += "detector        ";
  for (double ap : ap_per_class) {
    if (std::isnan(ap)) {
      std::snprintf(buf, sizeof buf, "%-10s", "-");
    } else {
      std::snprintf(buf, sizeof buf, "%-10.3f", ap);
    }
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "| %.3f\n", map);
  out += buf;
  return out;
}

int export_maps(const DetectorParams& params, const DatasetManifest& dataset,
                int max_images, const std::string& out_dir) {
  if (dataset.images.empty()) throw ConfigError("export_maps: empty dataset");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir + ": " + ec.message());

  const int count = std::min<int>(max_images, int(dataset.images.size()));
  const int C = params.arch.num_classes;
  ImageCache cache;
  NoGradGuard ng;
  int written = 0;

  auto to_gray = [](const Tensor& map, int64_t plane_idx, int h, int w) {
    ImageU8 img;
    img.width = w;
    img.height = h;
    img.channels = 1;
    img.pixels.resize(size_t(h) * w);
    for (int64_t i = 0; i < int64_t(h) * w; ++i) {
      double v = map.flat(plane_idx * h * w + i);
      v = std::clamp(v, 0.0, 1.0);
      img.pixels[size_t(i)] = uint8_t(std::lround(v * 255.0));
    }
    return img;
  };

  TrainConfig dummy;  // dtype only
  for (int i = 0; i < count; ++i) {
    LoadedBatch lb = load_batch(dataset, {i}, cache, AugmentConfig::identity(),
                                0, dummy.dtype);
    ModelOutput out = forward(params, lb.images, /*heatmap_only=*/true);
    Tensor heat = out.heatmap.detached();
    const int h = int(heat.dim(2)), w = int(heat.dim(3));
    char name[96];
    for (int c = 0; c < C; ++c) {
      std::snprintf(name, sizeof name, "img%04d_class%d.png", i, c);
      write_png((fs::path(out_dir) / name).string(), to_gray(heat, c, h, w));
      ++written;
    }
    if (C >= 2) {
      Tensor ent = entropy_map(heat);
      std::snprintf(name, sizeof name, "img%04d_entropy.png", i);
      write_png((fs::path(out_dir) / name).string(), to_gray(ent, 0, h, w));
      ++written;
    }
  }
  return written;
}

std::string ThroughputReport::to_json() const {
  json j;
  j["images_per_second"] = images_per_second;
  j["median_total_ms"] = median_total_ms;
  j["median_decode_ms"] = median_decode_ms;
  j["iterations"] = iterations;
  j["threads"] = threads;
  j["image_size"] = image_size;
  return j.dump(2);
}

ThroughputReport throughput(const DetectorParams& params, int image_size,
                            int iterations, const TrainConfig& config) {
  if (iterations < 10) throw ConfigError("throughput: need >= 10 iterations");
  ThroughputReport rep;
  rep.iterations = iterations;
  rep.threads = num_threads();
  rep.image_size = image_size;

  NoGradGuard ng;
  Tensor img = Tensor::zeros({1, 3, image_size, image_size}, params.dtype);
  // deterministic pseudo-image
  for (int64_t i = 0; i < img.numel(); ++i) {
    img.set_flat(i, 0.5 + 0.4 * std::sin(double(i) * 0.01));
  }

  auto run_once = [&](double& decode_ms) {
    const auto a = std::chrono::steady_clock::now();
    ModelOutput out = forward(params, img);
    const auto b = std::chrono::steady_clock::now();
    auto dets = decode(slice_chw(out.heatmap.detached(), 0),
                       slice_chw(out.offset.detached(), 0),
                       slice_chw(out.size.detached(), 0), config.arch.stride,
                       config.top_k, config.score_threshold);
    (void)dets;
    const auto c = std::chrono::steady_clock::now();
    decode_ms = std::chrono::duration<double, std::milli>(c - b).count();
    return std::chrono::duration<double, std::milli>(c - a).count();
  };

  double tmp;
  for (int i = 0; i < 3; ++i) run_once(tmp);  // warmup

  std::vector<double> totals, decodes;
  for (int i = 0; i < iterations; ++i) {
    double d;
    totals.push_back(run_once(d));
    decodes.push_back(d);
  }
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  };
  rep.median_total_ms = median(totals);
  rep.median_decode_ms = median(decodes);
  rep.images_per_second =
      rep.median_total_ms > 0 ? 1000.0 / rep.median_total_ms : 0.0;
  return rep;
}

}  // namespace auda
