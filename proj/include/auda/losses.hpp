#pragma once

#include <vector>

#include "auda/codec.hpp"
#include "auda/model.hpp"
#include "auda/tensor.hpp"

namespace auda {

enum class UdaMode { baseline, em, msl };
const char* uda_mode_name(UdaMode m);
UdaMode parse_uda_mode(const std::string& s);

struct LossWeights {
  double lambda_h = 1.0;
  double lambda_size = 0.1;
  double lambda_off = 1.0;
  double lambda_ent = 0.0001;
  double lambda_ms = 0.3;
  double alpha = 2.0;
  double beta = 4.0;
};

// Scalar loss tensors stay on the tape; diagnostics are detached doubles.
struct LossReport {
  Tensor l_h, l_size, l_off, l_det;
  Tensor l_uda;    // defined in EM/MSL modes only
  Tensor l_total;  // defined by combined_loss
  double target_mean_heatmap = 0.0;
  double target_mean_entropy = 0.0;
  bool has_target_diagnostics = false;
};

// Penalty-reduced pixel-wise focal loss, normalized by object count and
// averaged over the batch. heatmap and target are N x C x h x w; the target
// carries exact 1.0 at object center cells.
Tensor focal_loss(const Tensor& heatmap, const Tensor& target, double alpha,
                  double beta,
                  const std::vector<std::vector<GridCell>>& object_cells);

// Mean absolute error over the 2N values at object cells, divided by
// 2*max(N,1) per image, averaged over the batch. Images with no objects
// contribute zero with no gradient.
Tensor l1_at_objects(const Tensor& pred, const Tensor& target,
                     const std::vector<std::vector<GridCell>>& object_cells);

// Eq.-style weighted sum of the three detection terms.
LossReport detection_loss(const ModelOutput& output, const TargetBatch& targets,
                          const LossWeights& weights);

// Normalized per-pixel entropy of the channel softmax of the heatmap,
// N x C x h x w -> N x 1 x h x w with values in [0,1]. Requires C >= 2.
Tensor entropy_map(const Tensor& heatmap);

// Spatial mean of the entropy map, averaged over the batch.
Tensor entropy_loss(const Tensor& heatmap);

// -(R / (h*w)) * sum of squared softmax probabilities, averaged over the
// batch; in [-R, -R/C].
Tensor max_squares_loss(const Tensor& heatmap, int R);

// Adds the mode's UDA term (computed on the target-domain heatmap only) to
// the source-domain detection loss. Fills report.l_uda / report.l_total.
void combined_loss(UdaMode mode, LossReport& source_report,
                   const Tensor& target_heatmap, const LossWeights& weights,
                   int R);

// |dL/dp| for the two UDA losses in the binary single-pixel setting with
// probabilities (p, 1-p): closed form plus central finite differences
// through the tensor ops.
struct GradientProfilePoint {
  double p = 0;
  double entropy_fd = 0, entropy_closed = 0;
  double msl_fd = 0, msl_closed = 0;
};
GradientProfilePoint gradient_profile_at(double p);
std::vector<GradientProfilePoint> gradient_profile(
    const std::vector<double>& ps);

// CSV with columns p, grad_entropy, grad_msl (finite-difference values).
void write_gradient_profile_csv(const std::string& path,
                                const std::vector<GradientProfilePoint>& rows);

}  // namespace auda
