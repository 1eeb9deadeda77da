#pragma once

#include <map>
#include <string>
#include <vector>

#include "auda/tensor.hpp"

namespace auda {

// Backbone/head layout. The downsampling factor is 2^(number of stages) and
// must equal the configured output stride R.
struct ArchDescriptor {
  int stem_channels = 16;
  std::vector<int> stage_channels = {32, 64};  // one stride-2 stage each
  int res_blocks = 2;
  int head_channels = 64;
  int num_classes = 6;
  int stride = 4;  // R

  bool operator==(const ArchDescriptor&) const = default;
  std::string describe() const;
};

struct DetectorParams {
  ArchDescriptor arch;
  DType dtype = DType::f32;
  std::map<std::string, Tensor> params;  // ordered by path

  Tensor& at(const std::string& path);
  const Tensor& at(const std::string& path) const;
};

// heatmap = sigmoid(heatmap_logits); all maps are N x * x H/R x W/R
struct ModelOutput {
  Tensor heatmap_logits;  // N x C x h x w
  Tensor heatmap;         // sigmoid of logits
  Tensor offset;          // N x 2 x h x w
  Tensor size;            // N x 2 x h x w
};

// Deterministic He-normal initialization from seed; the heatmap head's
// output bias starts at -log((1-p0)/p0) with p0 = 0.01 so the initial
// heatmap sits near the rare-foreground prior.
DetectorParams build_model(const ArchDescriptor& arch, int num_classes,
                           uint64_t seed, DType dtype = DType::f32);

// Pure forward pass. heatmap_only skips the offset/size heads (the
// target-domain path uses only the heatmap head).
ModelOutput forward(const DetectorParams& params, const Tensor& images,
                    bool heatmap_only = false);

}  // namespace auda
