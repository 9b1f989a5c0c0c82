#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace ossireg {

struct CoordinateMap;

/// Interleaved 8-bit image, 1, 3 or 4 channels, rows top to bottom.
struct Image8 {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<std::uint8_t> pixels;

  Image8() = default;
  Image8(int width, int height, int channels, std::uint8_t fill = 0);

  std::uint8_t* at(int x, int y) { return &pixels[(static_cast<size_t>(y) * width + x) * channels]; }
  const std::uint8_t* at(int x, int y) const {
    return &pixels[(static_cast<size_t>(y) * width + x) * channels];
  }
};

/// PNG bytes, 8 bits per channel. Grey, RGB and RGBA are written as such.
std::string encode_png(const Image8& image);
/// Accepts 8-bit grey/RGB/RGBA (with or without palette expansion); 16-bit
/// input is reduced to its high byte.
Image8 decode_png(const std::string& bytes);
void write_png(const std::filesystem::path& path, const Image8& image);
Image8 load_png(const std::filesystem::path& path);

/// Coordinate maps as 16-bit RGB PNG: R = round(mu * 65535),
/// G = round(nu * 65535), B = 65535 on valid pixels, all zero elsewhere.
std::string encode_map(const CoordinateMap& map);
/// Throws kFormat unless the input is 16-bit RGB. A pixel is valid only when
/// B is full scale; other pixels are dropped.
CoordinateMap decode_map(const std::string& bytes);
void write_map(const std::filesystem::path& path, const CoordinateMap& map);
CoordinateMap load_map(const std::filesystem::path& path);

}  // namespace ossireg
