#include "auda/losses.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace auda {

namespace {
constexpr double kLogEps = 1e-12;
}

const char* uda_mode_name(UdaMode m) {
  switch (m) {
    case UdaMode::baseline: return "baseline";
    case UdaMode::em: return "em";
    case UdaMode::msl: return "msl";
  }
  return "?";
}

UdaMode parse_uda_mode(const std::string& s) {
  std::string t;
  for (char c : s) t += char(std::tolower(c));
  if (t == "baseline") return UdaMode::baseline;
  if (t == "em") return UdaMode::em;
  if (t == "msl") return UdaMode::msl;
  throw ConfigError("unknown mode '" + s + "' (expected baseline, em or msl)");
}

Tensor focal_loss(const Tensor& heatmap, const Tensor& target, double alpha,
                  double beta,
                  const std::vector<std::vector<GridCell>>& object_cells) {
  if (heatmap.shape() != target.shape()) {
    throw ShapeError("focal_loss: heatmap " + heatmap.shape_str() +
                     " vs target " + target.shape_str());
  }
  const int64_t N = heatmap.dim(0);
  if (int64_t(object_cells.size()) != N) {
    throw ShapeError("focal_loss: object_cells has " +
                     std::to_string(object_cells.size()) + " entries for " +
                     std::to_string(N) + " images");
  }
  const int64_t per_image = heatmap.numel() / N;

  // constant weights: positives get 1/(n_i * N); negatives additionally
  // carry the (1-Y)^beta penalty reduction
  Tensor pos_w = Tensor::zeros(heatmap.shape(), heatmap.dtype());
  Tensor neg_w = Tensor::zeros(heatmap.shape(), heatmap.dtype());
  for (int64_t n = 0; n < N; ++n) {
    const double norm =
        1.0 / (double(std::max<size_t>(object_cells[size_t(n)].size(), 1)) *
               double(N));
    for (int64_t j = 0; j < per_image; ++j) {
      const int64_t i = n * per_image + j;
      const double y = target.flat(i);
      if (y == 1.0) {
        pos_w.set_flat(i, norm);
      } else {
        neg_w.set_flat(i, std::pow(1.0 - y, beta) * norm);
      }
    }
  }

  Tensor one_minus = scalar_add(scalar_mul(heatmap, -1.0), 1.0);
  Tensor pos_term =
      mul(pos_w, mul(pow_scalar(one_minus, alpha), log_clamped(heatmap, kLogEps)));
  Tensor neg_term =
      mul(neg_w, mul(pow_scalar(heatmap, alpha), log_clamped(one_minus, kLogEps)));
  return scalar_mul(sum(add(pos_term, neg_term)), -1.0);
}

Tensor l1_at_objects(const Tensor& pred, const Tensor& target,
                     const std::vector<std::vector<GridCell>>& object_cells) {
  if (pred.shape() != target.shape()) {
    throw ShapeError("l1_at_objects: pred " + pred.shape_str() + " vs target " +
                     target.shape_str());
  }
  const int64_t N = pred.dim(0), h = pred.dim(2), w = pred.dim(3);
  if (pred.dim(1) != 2) {
    throw ShapeError("l1_at_objects: expected 2 channels, got " +
                     pred.shape_str());
  }
  Tensor weights = Tensor::zeros(pred.shape(), pred.dtype());
  bool any = false;
  for (int64_t n = 0; n < N; ++n) {
    const auto& cells = object_cells[size_t(n)];
    if (cells.empty()) continue;
    const double norm = 1.0 / (2.0 * double(cells.size()) * double(N));
    for (const GridCell& c : cells) {
      if (c.x < 0 || c.x >= w || c.y < 0 || c.y >= h) {
        throw ShapeError("l1_at_objects: object cell (" + std::to_string(c.x) +
                         ", " + std::to_string(c.y) + ") outside " +
                         std::to_string(w) + "x" + std::to_string(h));
      }
      for (int64_t k = 0; k < 2; ++k) {
        const int64_t i = ((n * 2 + k) * h + c.y) * w + c.x;
        weights.set_flat(i, weights.flat(i) + norm);
        any = true;
      }
    }
  }
  if (!any) {
    // no objects anywhere: zero loss, detached (no gradient by contract)
    return Tensor::scalar(0.0, pred.dtype());
  }
  return sum(mul(abs_val(sub(pred, target)), weights));
}

LossReport detection_loss(const ModelOutput& output, const TargetBatch& targets,
                          const LossWeights& weights) {
  LossReport r;
  r.l_h = focal_loss(output.heatmap, targets.heatmap, weights.alpha,
                     weights.beta, targets.object_cells);
  r.l_off = l1_at_objects(output.offset, targets.offset, targets.object_cells);
  r.l_size = l1_at_objects(output.size, targets.size, targets.object_cells);
  Tensor det = scalar_mul(r.l_h, weights.lambda_h);
  if (r.l_size.requires_grad() || r.l_size.item() != 0.0) {
    det = add(det, scalar_mul(r.l_size, weights.lambda_size));
  }
  if (r.l_off.requires_grad() || r.l_off.item() != 0.0) {
    det = add(det, scalar_mul(r.l_off, weights.lambda_off));
  }
  r.l_det = det;
  return r;
}

Tensor entropy_map(const Tensor& heatmap) {
  if (heatmap.ndim() != 4) {
    throw ShapeError("entropy_map: expected N x C x h x w, got " +
                     heatmap.shape_str());
  }
  const int64_t C = heatmap.dim(1);
  if (C < 2) {
    throw ConfigError(
        "entropy_map: needs C >= 2 classes (log C normalizer degenerates)");
  }
  Tensor probs = channel_softmax(heatmap);
  Tensor plogp = mul(probs, log_clamped(probs, kLogEps));
  return scalar_mul(channel_sum(plogp), -1.0 / std::log(double(C)));
}

Tensor entropy_loss(const Tensor& heatmap) { return mean(entropy_map(heatmap)); }

Tensor max_squares_loss(const Tensor& heatmap, int R) {
  if (heatmap.ndim() != 4) {
    throw ShapeError("max_squares_loss: expected N x C x h x w, got " +
                     heatmap.shape_str());
  }
  const int64_t N = heatmap.dim(0), h = heatmap.dim(2), w = heatmap.dim(3);
  Tensor probs = channel_softmax(heatmap);
  const double scale = -double(R) / (double(h) * double(w) * double(N));
  return scalar_mul(sum(square(probs)), scale);
}

void combined_loss(UdaMode mode, LossReport& report,
                   const Tensor& target_heatmap, const LossWeights& weights,
                   int R) {
  switch (mode) {
    case UdaMode::baseline:
      report.l_total = report.l_det;
      return;
    case UdaMode::em:
      if (!target_heatmap.defined()) {
        throw ConfigError("combined_loss: EM mode requires a target heatmap");
      }
      report.l_uda = entropy_loss(target_heatmap);
      report.l_total =
          add(report.l_det, scalar_mul(report.l_uda, weights.lambda_ent));
      return;
    case UdaMode::msl:
      if (!target_heatmap.defined()) {
        throw ConfigError("combined_loss: MSL mode requires a target heatmap");
      }
      report.l_uda = max_squares_loss(target_heatmap, R);
      report.l_total =
          add(report.l_det, scalar_mul(report.l_uda, weights.lambda_ms));
      return;
  }
}

namespace {

// raw binary-pixel losses (no normalizer, no softmax), built from the ops so
// finite differences exercise the same kernels training uses
double raw_entropy_loss_at(double p) {
  Tensor x = Tensor::from_vector<double>({2}, {p, 1.0 - p});
  return scalar_mul(sum(mul(x, log_clamped(x, kLogEps))), -1.0).item();
}

double raw_msl_loss_at(double p) {
  Tensor x = Tensor::from_vector<double>({2}, {p, 1.0 - p});
  return scalar_mul(sum(square(x)), -1.0).item();
}

}  // namespace

GradientProfilePoint gradient_profile_at(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw ConfigError("gradient_profile: p must lie in (0,1), got " +
                      std::to_string(p));
  }
  GradientProfilePoint pt;
  pt.p = p;
  pt.entropy_closed = std::fabs(std::log((1.0 - p) / p));
  pt.msl_closed = std::fabs(2.0 - 4.0 * p);
  const double h = 1e-5;
  pt.entropy_fd = std::fabs(
      (raw_entropy_loss_at(p + h) - raw_entropy_loss_at(p - h)) / (2.0 * h));
  pt.msl_fd =
      std::fabs((raw_msl_loss_at(p + h) - raw_msl_loss_at(p - h)) / (2.0 * h));
  return pt;
}

std::vector<GradientProfilePoint> gradient_profile(
    const std::vector<double>& ps) {
  std::vector<GradientProfilePoint> rows;
  rows.reserve(ps.size());
  for (double p : ps) rows.push_back(gradient_profile_at(p));
  return rows;
}

void write_gradient_profile_csv(const std::string& path,
                                const std::vector<GradientProfilePoint>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "p,grad_entropy,grad_msl\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.6g,%.12g,%.12g\n", r.p, r.entropy_fd,
                  r.msl_fd);
    out << buf;
  }
}

}  // namespace auda
