#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "auda/codec.hpp"
#include "auda/image.hpp"
#include "auda/tensor.hpp"

namespace auda {

enum class Domain { source, target };
const char* domain_name(Domain d);
Domain parse_domain(const std::string& s);

// Procedural scene parameters. Source renders flat colors on a flat
// background; target renders the same geometry with a textured background,
// per-image intensity shift, blur and Gaussian pixel noise.
struct SceneSpec {
  int height = 128;
  int width = 128;
  int num_classes = 6;  // class_id -> disc, square, triangle, ring, bar, cross
  int min_objects = 1;
  int max_objects = 5;
  double min_size = 14.0;
  double max_size = 44.0;
  Domain style = Domain::source;
  // target-domain degradations
  double texture_amp = 0.12;
  double intensity_shift = 0.15;
  int blur_passes = 2;
  double noise_sigma_lo = 0.02;
  double noise_sigma_hi = 0.07;
};

struct ImageRecord {
  int id = 0;
  std::string file_name;  // relative to the manifest directory
  int width = 0, height = 0;
  std::vector<BoxAnnotation> boxes;
};

struct DatasetManifest {
  std::string split;
  Domain domain = Domain::source;
  bool labeled = true;
  int num_classes = 6;
  std::string root_dir;  // directory holding images/ and annotations.json
  std::vector<ImageRecord> images;

  std::string image_path(size_t i) const;
};

// Renders `count` images plus a COCO-style annotations.json under out_dir.
// Identical seeds produce identical geometry for source and target; only the
// appearance pipeline differs.
DatasetManifest generate_dataset(const SceneSpec& spec, int count,
                                 uint64_t seed, const std::string& out_dir,
                                 bool labeled, const std::string& split);

// Renders one scene in memory (used by the generator and tests).
ImageF32 render_scene(const SceneSpec& spec, uint64_t seed, int image_index,
                      std::vector<BoxAnnotation>* boxes_out);

void save_coco(const DatasetManifest& manifest);
DatasetManifest load_coco(const std::string& manifest_path);

// ---- augmentation ---------------------------------------------------------

struct AugmentConfig {
  bool enabled = true;
  double p_flip = 0.5;
  double p_rot90 = 0.5;  // when hit, rotates by 90, 180 or 270 uniformly
  int max_translate = 10;
  double scale_lo = 0.9;
  double scale_hi = 1.1;
  double brightness = 0.1;
  double noise_sigma = 0.02;

  static AugmentConfig identity() {
    AugmentConfig c;
    c.enabled = false;
    return c;
  }
};

// Applies the configured subset of augmentations; box coordinates follow the
// image transform, get re-clipped, and boxes under 2 px extent are dropped.
void augment(ImageF32& image, std::vector<BoxAnnotation>& boxes,
             const AugmentConfig& cfg, uint64_t seed);

// box-level helpers (exposed for property tests)
BoxAnnotation flip_box_h(const BoxAnnotation& b, int image_width);
BoxAnnotation rot90_box(const BoxAnnotation& b, int image_width,
                        int image_height);  // 90 degrees clockwise

// ---- batching ---------------------------------------------------------------

// Deterministic paired sampler: a fresh source shuffle per (seed, epoch),
// one source batch per step, the target stream cycling when shorter.
class PairedBatcher {
 public:
  PairedBatcher(int num_source, int num_target, int batch_source,
                int batch_target, uint64_t seed);

  int steps_per_epoch() const { return steps_per_epoch_; }
  std::vector<int> source_indices(int epoch, int step) const;
  std::vector<int> target_indices(int epoch, int step) const;

 private:
  int num_source_, num_target_, batch_source_, batch_target_;
  int steps_per_epoch_;
  uint64_t seed_;
};

// Decoded-image cache: datasets are re-read every epoch, images are small,
// memory is not.
class ImageCache {
 public:
  const ImageU8& get(const std::string& path);
  void clear() { cache_.clear(); }

 private:
  std::unordered_map<std::string, ImageU8> cache_;
};

// Loads, optionally augments, and tensorizes one batch.
struct LoadedBatch {
  Tensor images;  // N x 3 x H x W in [0,1]
  std::vector<std::vector<BoxAnnotation>> boxes;  // post-augmentation
};

LoadedBatch load_batch(const DatasetManifest& manifest,
                       const std::vector<int>& indices, ImageCache& cache,
                       const AugmentConfig& aug, uint64_t aug_seed,
                       DType dtype);

}  // namespace auda
