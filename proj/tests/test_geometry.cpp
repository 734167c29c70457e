#include <doctest.h>

#include "support/test_util.hpp"
#include "xsdepth/geometry.hpp"
#include "xsdepth/rng.hpp"

using namespace xsdepth;

namespace {

ImagePlane random_image(std::vector<long> shape, uint64_t seed) {
  Rng rng(seed);
  return ImagePlane(random_uniform(std::move(shape), rng));
}

DisparityMap constant_disparity(long h, long w, Scalar v) {
  return DisparityMap(Tensor::full({1, h, w}, v));
}

}  // namespace

TEST_CASE("warp with zero disparity is the identity") {
  ImagePlane img = random_image({3, 6, 8}, 7);
  DisparityMap zero = constant_disparity(6, 8, 0.0);
  for (WarpDirection dir : {WarpDirection::to_left, WarpDirection::to_right}) {
    ImagePlane out = warp(img, zero, dir);
    for (long i = 0; i < img.tensor().numel(); ++i)
      CHECK(std::abs(out.tensor()[i] - img.tensor()[i]) < 1e-6);
  }
}

TEST_CASE("warping a horizontal ramp by one pixel shifts it") {
  // I(x) = x/(W-1), W = 8, disparity 1/W -> one-pixel shift.
  const long w = 8, h = 4;
  Tensor ramp({1, h, w});
  for (long y = 0; y < h; ++y)
    for (long x = 0; x < w; ++x) ramp.at(0, y, x) = static_cast<Scalar>(x) / (w - 1);
  ImagePlane img(ramp);
  DisparityMap one_px = constant_disparity(h, w, 1.0 / w);

  ImagePlane shifted = warp(img, one_px, WarpDirection::to_left);
  for (long y = 0; y < h; ++y)
    for (long x = 0; x < w - 1; ++x)  // interior: x+1 stays in range
      CHECK(std::abs(shifted.at(0, y, x) - ramp.at(0, y, x + 1)) < 1e-6);

  // And against the independent scalar bilinear oracle, everywhere.
  Tensor want = oracle::warp(img.tensor(), one_px.tensor(), /*to_left=*/true);
  for (long i = 0; i < want.numel(); ++i)
    CHECK(std::abs(shifted.tensor()[i] - want[i]) < 1e-6);
}

TEST_CASE("warp matches the brute-force bilinear oracle on random inputs") {
  ImagePlane img = random_image({3, 8, 10}, 17);
  Rng rng(18);
  Tensor d({1, 8, 10});
  for (long i = 0; i < d.numel(); ++i) d[i] = rng.uniform(0.0, 0.29);
  DisparityMap disp(d);

  for (bool to_left : {true, false}) {
    ImagePlane got =
        warp(img, disp, to_left ? WarpDirection::to_left : WarpDirection::to_right);
    Tensor want = oracle::warp(img.tensor(), d, to_left);
    for (long i = 0; i < want.numel(); ++i)
      CHECK(std::abs(got.tensor()[i] - want[i]) < 1e-9);
  }
}

TEST_CASE("warp disparity gradients match central finite differences") {
  Rng rng(51);
  Tensor src = random_uniform({1, 8, 8}, rng);
  Tensor d({1, 8, 8});
  for (long i = 0; i < d.numel(); ++i) d[i] = rng.uniform(0.02, 0.07);
  testutil::check_gradients(
      d,
      [&](const Var& dv) {
        return sum_all(warp_horizontal(constant(src), dv, WarpDirection::to_left));
      },
      1e-4, 1e-3);
}

TEST_CASE("warp is linear in the source image") {
  ImagePlane a = random_image({2, 6, 9}, 23);
  ImagePlane b = random_image({2, 6, 9}, 24);
  Rng rng(25);
  Tensor d({1, 6, 9});
  for (long i = 0; i < d.numel(); ++i) d[i] = rng.uniform(0.0, 0.25);
  DisparityMap disp(d);
  const Scalar ka = 0.6, kb = -0.3;

  Tensor mix(a.tensor().shape());
  for (long i = 0; i < mix.numel(); ++i) mix[i] = ka * a.tensor()[i] + kb * b.tensor()[i];

  ImagePlane warped_mix = warp(ImagePlane(mix), disp, WarpDirection::to_left);
  ImagePlane wa = warp(a, disp, WarpDirection::to_left);
  ImagePlane wb = warp(b, disp, WarpDirection::to_left);
  for (long i = 0; i < mix.numel(); ++i)
    CHECK(std::abs(warped_mix.tensor()[i] - (ka * wa.tensor()[i] + kb * wb.tensor()[i])) < 1e-6);
}

TEST_CASE("warp treats channels independently") {
  ImagePlane one = random_image({1, 5, 7}, 29);
  Tensor two({2, 5, 7});
  for (long i = 0; i < one.tensor().numel(); ++i) {
    two[i] = one.tensor()[i];
    two[one.tensor().numel() + i] = one.tensor()[i];
  }
  Rng rng(30);
  Tensor d({1, 5, 7});
  for (long i = 0; i < d.numel(); ++i) d[i] = rng.uniform(0.0, 0.2);
  DisparityMap disp(d);

  ImagePlane w1 = warp(one, disp, WarpDirection::to_right);
  ImagePlane w2 = warp(ImagePlane(two), disp, WarpDirection::to_right);
  for (long i = 0; i < w1.tensor().numel(); ++i) {
    CHECK(w2.tensor()[i] == doctest::Approx(w1.tensor()[i]).epsilon(1e-12));
    CHECK(w2.tensor()[w1.tensor().numel() + i] == doctest::Approx(w1.tensor()[i]).epsilon(1e-12));
  }
}

TEST_CASE("warp rejects bad inputs") {
  ImagePlane img = random_image({1, 4, 6}, 33);
  CHECK_THROWS_AS((void)warp(img, constant_disparity(4, 5, 0.1), WarpDirection::to_left),
                  ContractError);
  Tensor bad = Tensor::full({1, 4, 6}, 0.1);
  bad[3] = std::numeric_limits<Scalar>::quiet_NaN();
  CHECK_THROWS_AS(DisparityMap{bad}, ContractError);
  CHECK_THROWS_AS(
      (void)warp_horizontal_tensor(img.tensor(), Tensor::full({1, 4, 6},
                                   std::numeric_limits<Scalar>::infinity()),
                                   WarpDirection::to_left),
      ContractError);
}

TEST_CASE("image_gradients: constants, ramps, and the subtraction oracle") {
  // Constant image -> zero gradients.
  ImagePlane flat(Tensor::full({2, 4, 5}, 0.37));
  auto [gx0, gy0] = image_gradients(flat);
  for (long i = 0; i < gx0.tensor().numel(); ++i) CHECK(gx0.tensor()[i] == 0.0);
  for (long i = 0; i < gy0.tensor().numel(); ++i) CHECK(gy0.tensor()[i] == 0.0);

  // Unit-slope ramp -> gx all ones, reduced width.
  Tensor ramp({1, 3, 4});
  for (long y = 0; y < 3; ++y)
    for (long x = 0; x < 4; ++x) ramp.at(0, y, x) = static_cast<Scalar>(x);
  auto [gx1, gy1] = image_gradients(ImagePlane(ramp));
  CHECK(gx1.tensor().shape() == std::vector<long>{1, 3, 3});
  CHECK(gy1.tensor().shape() == std::vector<long>{1, 2, 4});
  for (long i = 0; i < gx1.tensor().numel(); ++i) CHECK(gx1.tensor()[i] == 1.0);

  // Random image matches direct element-wise subtraction exactly.
  ImagePlane img = random_image({3, 3, 4}, 37);
  auto [gx, gy] = image_gradients(img);
  for (long c = 0; c < 3; ++c)
    for (long y = 0; y < 3; ++y)
      for (long x = 0; x < 3; ++x)
        CHECK(gx.at(c, y, x) == img.at(c, y, x + 1) - img.at(c, y, x));
  for (long c = 0; c < 3; ++c)
    for (long y = 0; y < 2; ++y)
      for (long x = 0; x < 4; ++x)
        CHECK(gy.at(c, y, x) == img.at(c, y + 1, x) - img.at(c, y, x));
}

TEST_CASE("image_gradients rejects degenerate axes") {
  CHECK_THROWS_AS((void)image_gradients(ImagePlane(Tensor::zeros({1, 1, 5}))), ContractError);
  CHECK_THROWS_AS((void)image_gradients(ImagePlane(Tensor::zeros({1, 5, 1}))), ContractError);
}

TEST_CASE("disparity_to_depth applies the stereo formula") {
  StereoCalibration calib{500.0, 0.5, 1280};
  DisparityMap disp(Tensor::full({1, 2, 3}, 50.0 / 1280.0));
  ImagePlane depth = disparity_to_depth(disp, calib, 3);
  for (long i = 0; i < depth.tensor().numel(); ++i)
    CHECK(depth.tensor()[i] == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("disparity_to_depth marks zero disparity invalid") {
  StereoCalibration calib{500.0, 0.5, 1280};
  DisparityMap disp(Tensor::zeros({1, 4, 4}));
  ImagePlane depth = disparity_to_depth(disp, calib, 4);
  for (long i = 0; i < depth.tensor().numel(); ++i) CHECK(depth.tensor()[i] == 0.0);
}

TEST_CASE("disparity_to_depth matches the scalar formula on random maps") {
  Rng rng(41);
  Tensor d({1, 6, 6});
  for (long i = 0; i < d.numel(); ++i) d[i] = rng.uniform(0.01, 0.3);
  StereoCalibration calib{721.5, 0.54, 1242};
  ImagePlane depth = disparity_to_depth(DisparityMap(d), calib, 6);
  for (long i = 0; i < d.numel(); ++i) {
    const Scalar want = 721.5 * 0.54 / (d[i] * 1242.0);
    CHECK(oracle::rel_error(depth.tensor()[i], want) < 1e-9);
  }
}

TEST_CASE("disparity_to_depth round trips with its inverse") {
  Rng rng(43);
  Tensor d({1, 5, 8});
  for (long i = 0; i < d.numel(); ++i) d[i] = rng.uniform(0.01, 0.3);
  StereoCalibration calib{640.0, 0.5, 640};
  ImagePlane depth = disparity_to_depth(DisparityMap(d), calib, 8);
  for (long i = 0; i < d.numel(); ++i) {
    const Scalar back = calib.focal_px * calib.baseline_m /
                        (depth.tensor()[i] * static_cast<Scalar>(calib.native_width_px));
    CHECK(oracle::rel_error(back, d[i]) < 1e-9);
  }
}

TEST_CASE("disparity_to_depth validates calibration") {
  DisparityMap disp(Tensor::full({1, 2, 2}, 0.1));
  CHECK_THROWS_AS((void)disparity_to_depth(disp, StereoCalibration{0.0, 0.5, 100}, 2),
                  ContractError);
  CHECK_THROWS_AS((void)disparity_to_depth(disp, StereoCalibration{500.0, -1.0, 100}, 2),
                  ContractError);
  CHECK_THROWS_AS((void)disparity_to_depth(disp, StereoCalibration{500.0, 0.5, 100}, 0),
                  ContractError);
}
