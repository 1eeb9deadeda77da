// Independent reference implementations used to check the real ones.
// Everything here is deliberately brute-force and kept free of the
// implementation paths it validates.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <vector>

#include "auda/codec.hpp"
#include "auda/rng.hpp"
#include "auda/tensor.hpp"

namespace oracles {

// ---- finite-difference gradient check ---------------------------------------

// Scalar function of several f64 tensors -> central finite differences on
// every element of every input, compared against tape gradients.
// Returns the worst relative error ( |ad-fd| / max(1, |ad|, |fd|) ).
struct GradCheckResult {
  double max_rel_err = 0.0;
  double worst_ad = 0.0, worst_fd = 0.0;
};

inline GradCheckResult grad_check(
    const std::function<auda::Tensor(const std::vector<auda::Tensor>&)>& fn,
    std::vector<auda::Tensor> inputs, double h = 1e-5) {
  using auda::Tensor;

  // autodiff gradients
  {
    auda::GradientTape tape;
    Tensor loss = fn(inputs);
    tape.backward(loss);
  }
  GradCheckResult res;
  for (Tensor& x : inputs) {
    for (int64_t i = 0; i < x.numel(); ++i) {
      const double x0 = x.flat(i);
      x.set_flat(i, x0 + h);
      const double fp = fn(inputs).item();
      x.set_flat(i, x0 - h);
      const double fm = fn(inputs).item();
      x.set_flat(i, x0);
      const double fd = (fp - fm) / (2.0 * h);
      const double ad = x.grad_flat(i);
      const double rel =
          std::fabs(ad - fd) / std::max({1.0, std::fabs(ad), std::fabs(fd)});
      if (rel > res.max_rel_err) {
        res.max_rel_err = rel;
        res.worst_ad = ad;
        res.worst_fd = fd;
      }
    }
  }
  return res;
}

inline auda::Tensor random_tensor(std::vector<int64_t> shape, auda::Rng& rng,
                                  double lo = -2.0, double hi = 2.0,
                                  bool requires_grad = true) {
  auda::Tensor t =
      auda::Tensor::zeros(std::move(shape), auda::DType::f64, requires_grad);
  for (int64_t i = 0; i < t.numel(); ++i) t.set_flat(i, rng.uniform(lo, hi));
  return t;
}

// fixed random projection so any op output becomes a scalar loss
inline auda::Tensor project(const auda::Tensor& y, uint64_t seed) {
  auda::Rng rng(seed);
  auda::Tensor w = auda::Tensor::zeros(y.shape(), y.dtype());
  for (int64_t i = 0; i < w.numel(); ++i) w.set_flat(i, rng.uniform(-1, 1));
  return auda::sum(auda::mul(y, w));
}

// ---- brute-force 8-neighborhood peaks ----------------------------------------

inline std::vector<auda::GridCell> brute_force_peaks(const auda::Tensor& chw) {
  const int64_t C = chw.dim(0), h = chw.dim(1), w = chw.dim(2);
  std::vector<auda::GridCell> out;
  for (int64_t c = 0; c < C; ++c) {
    for (int64_t y = 0; y < h; ++y) {
      for (int64_t x = 0; x < w; ++x) {
        const double v = chw.flat(c * h * w + y * w + x);
        bool is_peak = true;
        for (int dy = -1; dy <= 1 && is_peak; ++dy) {
          for (int dx = -1; dx <= 1 && is_peak; ++dx) {
            if (dx == 0 && dy == 0) continue;
            const int64_t yy = y + dy, xx = x + dx;
            if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;  // -inf
            if (chw.flat(c * h * w + yy * w + xx) > v) is_peak = false;
          }
        }
        if (is_peak) out.push_back({int(x), int(y), int(c)});
      }
    }
  }
  return out;
}

// ---- gaussian radius bisection -----------------------------------------------

// direct IoU evaluation of the three canonical corner displacements
inline double worst_case_iou(double w, double h, double r) {
  auto iou_of = [&](double dx1, double dy1, double dx2, double dy2) {
    const double bx1 = dx1, by1 = dy1, bx2 = w + dx2, by2 = h + dy2;
    if (bx2 <= bx1 || by2 <= by1) return 0.0;
    const double ix = std::max(0.0, std::min(w, bx2) - std::max(0.0, bx1));
    const double iy = std::max(0.0, std::min(h, by2) - std::max(0.0, by1));
    const double inter = ix * iy;
    const double uni = w * h + (bx2 - bx1) * (by2 - by1) - inter;
    return inter / uni;
  };
  const double shift = iou_of(r, r, r, r);
  const double grow = iou_of(-r, -r, r, r);
  const double shrink = iou_of(r, r, -r, -r);
  return std::min({shift, grow, shrink});
}

inline double radius_by_bisection(double w, double h, double min_overlap) {
  double lo = 0.0, hi = std::min(w, h) / 2.0;
  for (int i = 0; i < 80; ++i) {
    const double mid = (lo + hi) / 2.0;
    if (worst_case_iou(w, h, mid) >= min_overlap) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

// ---- brute-force average precision -------------------------------------------

struct RankedDet {
  int image;
  double score;
  auda::BoxAnnotation box;
};

struct GtBox {
  int image;
  auda::BoxAnnotation box;
};

inline double box_iou(const auda::BoxAnnotation& a,
                      const auda::BoxAnnotation& b) {
  const double ix = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double iy = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  return uni <= 0 ? 0.0 : inter / uni;
}

// Independent AP: same matching rule, but precision/recall evaluated by
// re-running the match at EVERY rank cutoff from scratch, and the area
// computed as sum over distinct recalls of max precision at recall >= r.
inline double brute_force_ap(std::vector<RankedDet> dets,
                             const std::vector<GtBox>& gts,
                             double iou_threshold) {
  if (gts.empty()) return std::nan("");
  if (dets.empty()) return 0.0;
  std::stable_sort(dets.begin(), dets.end(),
                   [](const RankedDet& a, const RankedDet& b) {
                     return a.score > b.score;
                   });

  const size_t n = dets.size();
  std::vector<double> precs, recs;
  for (size_t cutoff = 1; cutoff <= n; ++cutoff) {
    std::vector<bool> used(gts.size(), false);
    int tp = 0;
    for (size_t k = 0; k < cutoff; ++k) {
      int best = -1;
      double best_iou = 0.0;
      for (size_t g = 0; g < gts.size(); ++g) {
        if (used[g] || gts[g].image != dets[k].image) continue;
        const double v = box_iou(dets[k].box, gts[g].box);
        if (v >= iou_threshold && v > best_iou) {
          best = int(g);
          best_iou = v;
        }
      }
      if (best >= 0) {
        used[size_t(best)] = true;
        ++tp;
      }
    }
    precs.push_back(double(tp) / double(cutoff));
    recs.push_back(double(tp) / double(gts.size()));
  }

  std::vector<double> distinct = recs;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  double ap = 0.0, prev = 0.0;
  for (double r : distinct) {
    if (r <= 0.0) continue;
    double pmax = 0.0;
    for (size_t k = 0; k < recs.size(); ++k) {
      if (recs[k] >= r) pmax = std::max(pmax, precs[k]);
    }
    ap += (r - prev) * pmax;
    prev = r;
  }
  return ap;
}

}  // namespace oracles
