#include "auda/model.hpp"

#include <cmath>

#include "auda/rng.hpp"

namespace auda {

std::string ArchDescriptor::describe() const {
  std::string s = "stem=" + std::to_string(stem_channels) + " stages=";
  for (size_t i = 0; i < stage_channels.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(stage_channels[i]);
  }
  s += " res=" + std::to_string(res_blocks);
  s += " head=" + std::to_string(head_channels);
  s += " classes=" + std::to_string(num_classes);
  s += " R=" + std::to_string(stride);
  return s;
}

Tensor& DetectorParams::at(const std::string& path) {
  auto it = params.find(path);
  if (it == params.end()) throw ConfigError("no parameter named " + path);
  return it->second;
}

const Tensor& DetectorParams::at(const std::string& path) const {
  auto it = params.find(path);
  if (it == params.end()) throw ConfigError("no parameter named " + path);
  return it->second;
}

namespace {

void validate_arch(const ArchDescriptor& arch, int num_classes) {
  if (num_classes < 1) throw ConfigError("num_classes must be >= 1");
  if (arch.stem_channels < 1 || arch.head_channels < 1) {
    throw ConfigError("architecture has a zero-channel layer");
  }
  if (arch.stage_channels.empty()) {
    throw ConfigError("architecture needs at least one downsampling stage");
  }
  for (int c : arch.stage_channels) {
    if (c < 1) throw ConfigError("architecture has a zero-channel stage");
  }
  if (arch.res_blocks < 0) throw ConfigError("res_blocks must be >= 0");
  int r = 1;
  for (size_t i = 0; i < arch.stage_channels.size(); ++i) r *= 2;
  if (r != arch.stride) {
    throw ConfigError("downsampling 2^" +
                      std::to_string(arch.stage_channels.size()) + " = " +
                      std::to_string(r) + " does not match stride R = " +
                      std::to_string(arch.stride));
  }
}

void add_conv(DetectorParams& dp, Rng& rng, const std::string& path, int cin,
              int cout, int k, double bias_init = 0.0) {
  Tensor w = Tensor::zeros({cout, cin, k, k}, dp.dtype, true);
  const double stddev = std::sqrt(2.0 / double(cin * k * k));
  for (int64_t i = 0; i < w.numel(); ++i) w.set_flat(i, rng.normal(0, stddev));
  Tensor b = Tensor::full({cout}, bias_init, dp.dtype, true);
  dp.params.emplace(path + ".weight", std::move(w));
  dp.params.emplace(path + ".bias", std::move(b));
}

}  // namespace

DetectorParams build_model(const ArchDescriptor& arch, int num_classes,
                           uint64_t seed, DType dtype) {
  validate_arch(arch, num_classes);
  DetectorParams dp;
  dp.arch = arch;
  dp.arch.num_classes = num_classes;
  dp.dtype = dtype;

  Rng rng(derive_seed(seed, 0x6d6f64656cull));  // "model"

  // creation order is fixed; it defines the RNG consumption order
  int c = arch.stem_channels;
  add_conv(dp, rng, "stem", 3, c, 3);
  for (size_t i = 0; i < arch.stage_channels.size(); ++i) {
    add_conv(dp, rng, "stage" + std::to_string(i + 1), c,
             arch.stage_channels[i], 3);
    c = arch.stage_channels[i];
  }
  for (int i = 0; i < arch.res_blocks; ++i) {
    add_conv(dp, rng, "res" + std::to_string(i + 1), c, c, 3);
  }
  const double prior_bias = -std::log((1.0 - 0.01) / 0.01);
  add_conv(dp, rng, "head.heatmap.conv", c, arch.head_channels, 3);
  add_conv(dp, rng, "head.heatmap.out", arch.head_channels, num_classes, 1,
           prior_bias);
  add_conv(dp, rng, "head.offset.conv", c, arch.head_channels, 3);
  add_conv(dp, rng, "head.offset.out", arch.head_channels, 2, 1);
  add_conv(dp, rng, "head.size.conv", c, arch.head_channels, 3);
  add_conv(dp, rng, "head.size.out", arch.head_channels, 2, 1);
  return dp;
}

ModelOutput forward(const DetectorParams& dp, const Tensor& images,
                    bool heatmap_only) {
  if (images.ndim() != 4 || images.dim(1) != 3) {
    throw ShapeError("forward: images must be N x 3 x H x W, got " +
                     images.shape_str());
  }
  const int64_t H = images.dim(2), W = images.dim(3);
  const int R = dp.arch.stride;
  if (H % R != 0 || W % R != 0) {
    throw ConfigError("input size " + std::to_string(H) + "x" +
                      std::to_string(W) + " is not divisible by R = " +
                      std::to_string(R));
  }

  Tensor x = relu(conv2d(images, dp.at("stem.weight"), dp.at("stem.bias"), 1, 1));
  for (size_t i = 0; i < dp.arch.stage_channels.size(); ++i) {
    const std::string p = "stage" + std::to_string(i + 1);
    x = relu(conv2d(x, dp.at(p + ".weight"), dp.at(p + ".bias"), 2, 1));
  }
  for (int i = 0; i < dp.arch.res_blocks; ++i) {
    const std::string p = "res" + std::to_string(i + 1);
    x = relu(add(x, conv2d(x, dp.at(p + ".weight"), dp.at(p + ".bias"), 1, 1)));
  }

  auto head = [&](const std::string& name) {
    Tensor t = relu(conv2d(x, dp.at("head." + name + ".conv.weight"),
                           dp.at("head." + name + ".conv.bias"), 1, 1));
    return conv2d(t, dp.at("head." + name + ".out.weight"),
                  dp.at("head." + name + ".out.bias"), 1, 0);
  };

  ModelOutput out;
  out.heatmap_logits = head("heatmap");
  out.heatmap = sigmoid(out.heatmap_logits);
  if (!heatmap_only) {
    out.offset = head("offset");
    out.size = head("size");
  }
  return out;
}

}  // namespace auda
