#pragma once

#include <vector>

#include "auda/tensor.hpp"

namespace auda {

// Axis-aligned box in input-pixel coordinates, x2 > x1 and y2 > y1.
struct BoxAnnotation {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
  int class_id = 0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
};

struct Detection {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
  int class_id = 0;
  double score = 0;  // heatmap value at the peak
};

struct GridCell {
  int x = 0, y = 0;
  int class_id = 0;
};

// Per-image training targets on the R-downsampled grid.
struct TargetMaps {
  Tensor heatmap;        // C x h x w, values in [0,1], 1.0 at center cells
  Tensor offset_target;  // 2 x h x w, fractional center in [0,1) at cells
  Tensor size_target;    // 2 x h x w, box size in grid units at cells
  std::vector<GridCell> object_index;
  int skipped_degenerate = 0;
};

// Batched targets plus per-image normalization bookkeeping.
struct TargetBatch {
  Tensor heatmap;  // N x C x h x w
  Tensor offset;   // N x 2 x h x w
  Tensor size;     // N x 2 x h x w
  std::vector<std::vector<GridCell>> object_cells;  // per image
};

// Largest radius (>= 1) such that a box whose corners are each displaced by
// up to r grid units keeps IoU >= min_overlap with the original. Closed form
// over the three worst-case displacement configurations (shift, grow,
// shrink); the minimum of the three roots, clamped to >= 1. Arguments are in
// heatmap-grid units.
double gaussian_radius(double width, double height, double min_overlap);

// Splats a peak-1 Gaussian per object (sigma = gaussian_radius / 3) onto the
// class channel, combining overlaps by element-wise max, and records offset
// and size regression targets at the integer center cell.
TargetMaps encode_targets(const std::vector<BoxAnnotation>& boxes,
                          int image_height, int image_width, int R,
                          int num_classes, double min_overlap,
                          DType dtype = DType::f32);

TargetBatch stack_targets(const std::vector<TargetMaps>& targets);

// Cells whose value is >= all 8 spatial neighbors (out-of-bounds treated as
// -inf), found via max_pool3x3 equality. Returned in row-major (c, y, x)
// order.
std::vector<GridCell> peak_cells(const Tensor& heatmap_chw);

// Extracts the top_k 8-neighborhood peaks across all classes jointly, drops
// scores below score_threshold, and reconstructs boxes from the offset and
// size maps. All three maps are per-image (C|2) x h x w.
std::vector<Detection> decode(const Tensor& heatmap, const Tensor& offset,
                              const Tensor& size, int R, int top_k,
                              double score_threshold);

}  // namespace auda
