#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "xsdepth/geometry.hpp"
#include "xsdepth/rng.hpp"

namespace xsdepth {

// Directory convention (no index file):
//   root/{train,test}/{tir_left,vis_right,vis_left,tir_right,depth,disparity}/NNNNNN.png
//   root/calibration.txt  (keys: focal_px, baseline_m, native_width_px)
// Only tir_left and vis_right are mandatory per entry. depth is 16-bit
// millimeters (0 = no measurement); disparity is 16-bit fraction-of-width
// scaled by 65535 and is emitted by the synthetic generator as ground truth.

struct DatasetEntry {
  std::string id;  // zero-padded index, doubles as the filename stem
  std::filesystem::path tir_left, vis_right;
  std::optional<std::filesystem::path> vis_left, tir_right, depth, disparity;
};

struct DatasetManifest {
  std::filesystem::path root;
  std::string split;
  std::vector<DatasetEntry> entries;  // sorted by relative path
  StereoCalibration calibration;
};

DatasetManifest discover_dataset(const std::filesystem::path& root, const std::string& split);

StereoCalibration read_calibration(const std::filesystem::path& path);
void write_calibration(const std::filesystem::path& path, const StereoCalibration& calib);

// A decoded entry, resized to the requested training resolution. Images are
// [0,1]; gt_depth is meters with 0 = invalid (nearest-neighbor resized);
// gt_disparity is fraction-of-width.
struct LoadedSample {
  std::string id;
  ImagePlane tir_left;
  ImagePlane vis_right;
  std::optional<ImagePlane> vis_left, tir_right;
  std::optional<ImagePlane> gt_depth;
  std::optional<ImagePlane> gt_disparity;
};

std::vector<LoadedSample> load_dataset(const std::filesystem::path& root, const std::string& split,
                                       long target_width, long target_height);
LoadedSample load_entry(const DatasetEntry& entry, long target_width, long target_height);

struct VisStereoSample {
  ImagePlane vis_left, vis_right;
};

struct CrossSpectrumSample {
  ImagePlane tir_left;   // 1 channel
  ImagePlane vis_right;  // 3 channels
  std::optional<ImagePlane> gt_depth;
};

struct ThermalParams {
  bool invert = true;
  Scalar blur_sigma_px = 1.0;
  Scalar contrast_gamma = 0.8;
  Scalar noise_std = 0.02;
};

struct SynthParams {
  uint64_t seed = 0;
  int num_scenes = 8;       // train split
  int num_test_scenes = 0;  // test split
  long width = 64, height = 48;
  int num_shapes = 3;
  Scalar disparity_lo = 0.03, disparity_hi = 0.27;  // fraction of width
  int texture_octaves = 3;
  ThermalParams thermal;

  void validate() const;
};

// One fully rendered scene with its constructive ground truth. region_id maps
// carry the compositing winner per pixel (0 = background) so tests can derive
// occlusion masks exactly.
struct RenderedScene {
  ImagePlane vis_left, vis_right;  // 3 channels
  ImagePlane tir_left;             // 1 channel
  Tensor gt_disparity;             // [1,H,W] left-view fraction of width
  Tensor region_id_left, region_id_right;  // [1,H,W]
  std::vector<Scalar> region_disparity;    // index 0 = background
};

RenderedScene render_scene(const SynthParams& params, const std::string& split, int scene_index);

// Luminance collapse -> optional inversion -> Gaussian blur -> gamma ->
// additive clipped noise. Deterministic given the rng state.
ImagePlane simulate_thermal(const ImagePlane& vis, const ThermalParams& params, Rng& rng);

// Normalized 1-D Gaussian kernel used by the blur (exposed for testing).
std::vector<Scalar> gaussian_kernel(Scalar sigma_px);

// Writes train (and optionally test) splits plus calibration; byte-identical
// across runs with equal params.
DatasetManifest generate_synthetic_dataset(const SynthParams& params,
                                           const std::filesystem::path& out_root);

// Synthetic calibration: focal = native width px, baseline 0.5 m, so
// depth_m = 0.5 / disparity_fraction.
StereoCalibration synthetic_calibration(long width_px);

// Sample adapters. Throw ContractError when the needed planes are missing.
VisStereoSample to_vis_sample(const LoadedSample& s);
CrossSpectrumSample to_cross_sample(const LoadedSample& s);

}  // namespace xsdepth
