#include "auda/codec.hpp"

#include <algorithm>
#include <cmath>

namespace auda {

double gaussian_radius(double width, double height, double min_overlap) {
  const double w = width, h = height, ov = min_overlap;
  // shift: both corners move diagonally by r, box keeps its size
  //   iou = (w-r)(h-r) / (2wh - (w-r)(h-r)) >= ov
  const double r1 =
      ((w + h) - std::sqrt((w + h) * (w + h) -
                           4.0 * w * h * (1.0 - ov) / (1.0 + ov))) /
      2.0;
  // grow: both corners move outward, box becomes (w+2r)(h+2r)
  //   iou = wh / ((w+2r)(h+2r)) >= ov
  const double r2 =
      (-(w + h) +
       std::sqrt((w + h) * (w + h) + 4.0 * w * h * (1.0 - ov) / ov)) /
      4.0;
  // shrink: both corners move inward, box becomes (w-2r)(h-2r)
  //   iou = (w-2r)(h-2r) / (wh) >= ov
  const double r3 =
      ((w + h) - std::sqrt((w + h) * (w + h) - 4.0 * w * h * (1.0 - ov))) /
      4.0;
  return std::max(1.0, std::min({r1, r2, r3}));
}

TargetMaps encode_targets(const std::vector<BoxAnnotation>& boxes,
                          int image_height, int image_width, int R,
                          int num_classes, double min_overlap, DType dtype) {
  if (image_height % R != 0 || image_width % R != 0) {
    throw ConfigError("encode_targets: image size " +
                      std::to_string(image_height) + "x" +
                      std::to_string(image_width) +
                      " is not divisible by R = " + std::to_string(R));
  }
  const int h = image_height / R, w = image_width / R;
  TargetMaps tm;
  tm.heatmap = Tensor::zeros({num_classes, h, w}, dtype);
  tm.offset_target = Tensor::zeros({2, h, w}, dtype);
  tm.size_target = Tensor::zeros({2, h, w}, dtype);

  for (const BoxAnnotation& box : boxes) {
    if (!(box.x2 > box.x1) || !(box.y2 > box.y1)) {
      ++tm.skipped_degenerate;
      continue;
    }
    if (box.class_id < 0 || box.class_id >= num_classes) {
      throw ConfigError("encode_targets: class_id " +
                        std::to_string(box.class_id) + " outside [0, " +
                        std::to_string(num_classes) + ")");
    }
    const double gw = box.width() / R, gh = box.height() / R;
    const double cx = (box.x1 + box.x2) / 2.0 / R;
    const double cy = (box.y1 + box.y2) / 2.0 / R;
    int gx = int(std::floor(cx)), gy = int(std::floor(cy));
    gx = std::clamp(gx, 0, w - 1);
    gy = std::clamp(gy, 0, h - 1);

    const double radius = gaussian_radius(gw, gh, min_overlap);
    const double sigma = radius / 3.0;
    const int win = int(std::ceil(radius));
    const int64_t plane = int64_t(box.class_id) * h * w;
    for (int dy = -win; dy <= win; ++dy) {
      const int yy = gy + dy;
      if (yy < 0 || yy >= h) continue;
      for (int dx = -win; dx <= win; ++dx) {
        const int xx = gx + dx;
        if (xx < 0 || xx >= w) continue;
        const double v =
            std::exp(-(double(dx) * dx + double(dy) * dy) / (2.0 * sigma * sigma));
        const int64_t idx = plane + int64_t(yy) * w + xx;
        if (v > tm.heatmap.flat(idx)) tm.heatmap.set_flat(idx, v);
      }
    }
    tm.heatmap.set_flat(plane + int64_t(gy) * w + gx, 1.0);
    const int64_t cell = int64_t(gy) * w + gx;
    tm.offset_target.set_flat(cell, cx - gx);
    tm.offset_target.set_flat(int64_t(h) * w + cell, cy - gy);
    tm.size_target.set_flat(cell, gw);
    tm.size_target.set_flat(int64_t(h) * w + cell, gh);
    tm.object_index.push_back({gx, gy, box.class_id});
  }
  return tm;
}

TargetBatch stack_targets(const std::vector<TargetMaps>& targets) {
  if (targets.empty()) throw ConfigError("stack_targets: empty batch");
  const int64_t n = int64_t(targets.size());
  const Tensor& h0 = targets[0].heatmap;
  const DType dt = h0.dtype();
  TargetBatch b;
  b.heatmap = Tensor::zeros({n, h0.dim(0), h0.dim(1), h0.dim(2)}, dt);
  b.offset = Tensor::zeros({n, 2, h0.dim(1), h0.dim(2)}, dt);
  b.size = Tensor::zeros({n, 2, h0.dim(1), h0.dim(2)}, dt);
  for (int64_t i = 0; i < n; ++i) {
    const TargetMaps& t = targets[size_t(i)];
    if (t.heatmap.shape() != h0.shape()) {
      throw ShapeError("stack_targets: inconsistent target shapes");
    }
    auto copy_into = [&](Tensor& dst, const Tensor& src) {
      const int64_t m = src.numel();
      for (int64_t j = 0; j < m; ++j) dst.set_flat(i * m + j, src.flat(j));
    };
    copy_into(b.heatmap, t.heatmap);
    copy_into(b.offset, t.offset_target);
    copy_into(b.size, t.size_target);
    b.object_cells.push_back(t.object_index);
  }
  return b;
}

std::vector<GridCell> peak_cells(const Tensor& heatmap_chw) {
  if (heatmap_chw.ndim() != 3) {
    throw ShapeError("peak_cells: expected C x h x w, got " +
                     heatmap_chw.shape_str());
  }
  NoGradGuard ng;
  const int64_t C = heatmap_chw.dim(0), h = heatmap_chw.dim(1),
                w = heatmap_chw.dim(2);
  Tensor pooled = max_pool3x3(heatmap_chw.detached().reshaped({1, C, h, w}));
  std::vector<GridCell> cells;
  for (int64_t c = 0; c < C; ++c) {
    for (int64_t y = 0; y < h; ++y) {
      for (int64_t x = 0; x < w; ++x) {
        const int64_t i = c * h * w + y * w + x;
        if (heatmap_chw.flat(i) == pooled.flat(i)) {
          cells.push_back({int(x), int(y), int(c)});
        }
      }
    }
  }
  return cells;
}

std::vector<Detection> decode(const Tensor& heatmap, const Tensor& offset,
                              const Tensor& size, int R, int top_k,
                              double score_threshold) {
  if (heatmap.ndim() != 3 || offset.ndim() != 3 || size.ndim() != 3) {
    throw ShapeError("decode: expected per-image 3-d maps");
  }
  const int64_t h = heatmap.dim(1), w = heatmap.dim(2);
  if (offset.dim(1) != h || offset.dim(2) != w || size.dim(1) != h ||
      size.dim(2) != w) {
    throw ShapeError("decode: spatial dims disagree: heatmap " +
                     heatmap.shape_str() + ", offset " + offset.shape_str() +
                     ", size " + size.shape_str());
  }
  if (top_k < 1) throw ConfigError("decode: top_k must be >= 1");

  struct Peak {
    double score;
    int64_t flat;  // row-major (c, y, x); ties keep the lowest
  };
  std::vector<Peak> peaks;
  for (const GridCell& cell : peak_cells(heatmap)) {
    const int64_t flat =
        int64_t(cell.class_id) * h * w + int64_t(cell.y) * w + cell.x;
    peaks.push_back({heatmap.flat(flat), flat});
  }
  std::sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.flat < b.flat;
  });
  if (int64_t(peaks.size()) > top_k) peaks.resize(size_t(top_k));

  std::vector<Detection> dets;
  for (const Peak& p : peaks) {
    if (p.score < score_threshold) continue;
    const int64_t c = p.flat / (h * w);
    const int64_t y = (p.flat / w) % h;
    const int64_t x = p.flat % w;
    const double ox = offset.flat(int64_t(y) * w + x);
    const double oy = offset.flat(h * w + int64_t(y) * w + x);
    const double bw = std::max(0.0, size.flat(int64_t(y) * w + x) * R);
    const double bh = std::max(0.0, size.flat(h * w + int64_t(y) * w + x) * R);
    const double cx = (double(x) + ox) * R;
    const double cy = (double(y) + oy) * R;
    dets.push_back({cx - bw / 2.0, cy - bh / 2.0, cx + bw / 2.0, cy + bh / 2.0,
                    int(c), p.score});
  }
  return dets;
}

}  // namespace auda
