#include "xsdepth/geometry.hpp"

namespace xsdepth {

ImagePlane warp(const ImagePlane& source, const DisparityMap& disparity, WarpDirection dir) {
  XS_REQUIRE(source.height() == disparity.height() && source.width() == disparity.width(),
             "warp: source and disparity must share height/width");
  return ImagePlane(warp_horizontal_tensor(source.tensor(), disparity.tensor(), dir));
}

Var image_grad_x(const Var& image) {
  const long h = image->value.height(), w = image->value.width();
  XS_REQUIRE(w >= 2, "image_gradients: width must be >= 2");
  return sub(crop(image, 0, 1, h, w - 1), crop(image, 0, 0, h, w - 1));
}

Var image_grad_y(const Var& image) {
  const long h = image->value.height(), w = image->value.width();
  XS_REQUIRE(h >= 2, "image_gradients: height must be >= 2");
  return sub(crop(image, 1, 0, h - 1, w), crop(image, 0, 0, h - 1, w));
}

std::pair<ImagePlane, ImagePlane> image_gradients(const ImagePlane& image) {
  XS_REQUIRE(image.height() >= 2 && image.width() >= 2,
             "image_gradients: degenerate 1-pixel axis");
  Var v = constant(image.tensor());
  return {ImagePlane(image_grad_x(v)->value), ImagePlane(image_grad_y(v)->value)};
}

ImagePlane disparity_to_depth(const DisparityMap& disparity, const StereoCalibration& calib,
                              long eval_width_px, Scalar min_disp) {
  calib.validate();
  XS_REQUIRE(eval_width_px > 0, "disparity_to_depth: eval_width_px must be > 0");
  XS_REQUIRE(disparity.width() == eval_width_px,
             "disparity_to_depth: disparity width does not match eval_width_px");
  const long h = disparity.height(), w = disparity.width();
  Tensor depth({1, h, w});
  const Scalar fb = calib.focal_px * calib.baseline_m;
  const Scalar native_w = static_cast<Scalar>(calib.native_width_px);
  for (long y = 0; y < h; ++y)
    for (long x = 0; x < w; ++x) {
      const Scalar d = disparity.at(y, x);
      depth.at(0, y, x) = d > min_disp ? fb / (d * native_w) : 0.0;
    }
  return ImagePlane(std::move(depth));
}

}  // namespace xsdepth
