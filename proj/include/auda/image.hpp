#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace auda {

// 8-bit image, interleaved row-major (HWC). channels is 1 or 3.
struct ImageU8 {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<uint8_t> pixels;

  int64_t size_bytes() const {
    return int64_t(width) * height * channels;
  }
};

// Planar float image in [0,1], CHW with 3 channels; the working format for
// generation and augmentation.
struct ImageF32 {
  int width = 0;
  int height = 0;
  std::vector<float> planes;  // 3 * height * width

  float& at(int c, int y, int x) {
    return planes[size_t((c * height + y) * width + x)];
  }
  float at(int c, int y, int x) const {
    return planes[size_t((c * height + y) * width + x)];
  }
};

ImageU8 quantize(const ImageF32& img);   // round(v*255), clamped
ImageF32 dequantize(const ImageU8& img); // v/255, grayscale broadcast to 3ch

ImageU8 read_png(const std::string& path);
void write_png(const std::string& path, const ImageU8& img);

}  // namespace auda
