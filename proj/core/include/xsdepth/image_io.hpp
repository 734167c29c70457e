#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "xsdepth/geometry.hpp"

namespace xsdepth {

// 8-bit PNG (1 or 3 channels) -> intensities in [0,1].
ImagePlane read_png8(const std::filesystem::path& path);
void write_png8(const std::filesystem::path& path, const ImagePlane& image);

// 16-bit single-channel PNG with raw integer values (millimeters for depth,
// scaled fractions for disparity).
Tensor read_png16(const std::filesystem::path& path);  // [1,H,W], raw values
void write_png16(const std::filesystem::path& path, const Tensor& values);  // rounded to uint16

// Fixed-point scale for disparity PNGs: stored = round(fraction * 65535).
inline constexpr Scalar kDisparityPngScale = 65535.0;

// Turbo-style colormap preview of a single-channel plane, normalized to its
// own [min,max] range.
void write_colormap_png(const std::filesystem::path& path, const Tensor& plane);

}  // namespace xsdepth
