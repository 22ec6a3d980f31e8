#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace mfgrid {

/// H x W x C image with channel values in [0,1], stored row-major, channels interleaved.
struct Image {
  int height = 0;
  int width = 0;
  int channels = 1;
  std::vector<double> data;

  double& at(int r, int c, int ch) { return data[(static_cast<std::size_t>(r) * width + c) * channels + ch]; }
  double at(int r, int c, int ch) const { return data[(static_cast<std::size_t>(r) * width + c) * channels + ch]; }
};

/// Decodes P2/P3/P5/P6 with maxval 255. Throws ParseError naming the byte offset.
Image decode_netpbm(std::string_view bytes);
Image load_image(const std::filesystem::path& path);

/// 8-bit binary encoding (P5 for one channel, P6 for three); values are
/// clamped to [0,1] and rounded to the nearest of 256 levels.
std::string encode_netpbm(const Image& image);
std::uint8_t quantize(double v);

}  // namespace mfgrid
