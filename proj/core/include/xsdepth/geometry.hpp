#pragma once

#include <utility>

#include "xsdepth/ops.hpp"
#include "xsdepth/tensor.hpp"

namespace xsdepth {

// Multi-channel 2-D plane of intensities in [0,1] for images (features may
// exceed that range; only finiteness is enforced here).
class ImagePlane {
 public:
  ImagePlane() = default;
  explicit ImagePlane(Tensor data) : data_(std::move(data)) {
    XS_REQUIRE(data_.ndim() == 3, "ImagePlane: expected [C,H,W]");
    XS_REQUIRE(data_.channels() >= 1 && data_.height() >= 1 && data_.width() >= 1,
               "ImagePlane: degenerate shape");
    XS_REQUIRE(data_.all_finite(), "ImagePlane: non-finite values");
  }

  const Tensor& tensor() const { return data_; }
  Tensor& tensor() { return data_; }
  long channels() const { return data_.channels(); }
  long height() const { return data_.height(); }
  long width() const { return data_.width(); }
  Scalar at(long c, long y, long x) const { return data_.at(c, y, x); }

 private:
  Tensor data_;
};

// Per-pixel horizontal correspondence offsets, as a fraction of image width:
// value v shifts by v*width pixels.
class DisparityMap {
 public:
  static constexpr Scalar kDefaultDMax = 0.3;

  DisparityMap() = default;
  explicit DisparityMap(Tensor data, Scalar d_max = kDefaultDMax) : data_(std::move(data)) {
    XS_REQUIRE(data_.ndim() == 3 && data_.channels() == 1, "DisparityMap: expected [1,H,W]");
    XS_REQUIRE(data_.all_finite(), "DisparityMap: non-finite values");
    for (long i = 0; i < data_.numel(); ++i)
      XS_REQUIRE(data_[i] >= 0.0 && data_[i] <= d_max,
                 "DisparityMap: value outside [0, d_max]");
  }

  const Tensor& tensor() const { return data_; }
  long height() const { return data_.height(); }
  long width() const { return data_.width(); }
  Scalar at(long y, long x) const { return data_.at(0, y, x); }

 private:
  Tensor data_;
};

struct StereoCalibration {
  Scalar focal_px = 0.0;      // horizontal focal length, pixels at native resolution
  Scalar baseline_m = 0.0;    // camera separation, meters
  long native_width_px = 0;

  void validate() const {
    XS_REQUIRE(focal_px > 0.0, "StereoCalibration: focal_px must be > 0");
    XS_REQUIRE(baseline_m > 0.0, "StereoCalibration: baseline_m must be > 0");
    XS_REQUIRE(native_width_px > 0, "StereoCalibration: native_width_px must be > 0");
  }
};

// Rectified-stereo horizontal warp with bilinear interpolation and
// clamp-to-border sampling. to_left synthesizes a left view from a right-view
// source (samples at x + d*W); to_right the reverse.
ImagePlane warp(const ImagePlane& source, const DisparityMap& disparity, WarpDirection dir);

// Forward differences; outputs are reduced by one along the differenced axis:
// gx is [C,H,W-1], gy is [C,H-1,W].
std::pair<ImagePlane, ImagePlane> image_gradients(const ImagePlane& image);
// Differentiable forms used by the loss graphs.
Var image_grad_x(const Var& image);
Var image_grad_y(const Var& image);

// depth_m = focal_px * baseline_m / (disparity * native_width_px).
// Pixels with disparity <= min_disp get the invalid sentinel 0.
ImagePlane disparity_to_depth(const DisparityMap& disparity, const StereoCalibration& calib,
                              long eval_width_px, Scalar min_disp = 1e-4);

}  // namespace xsdepth
