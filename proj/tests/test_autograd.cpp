#include <doctest.h>

#include "support/test_util.hpp"
#include "xsdepth/ops.hpp"
#include "xsdepth/rng.hpp"

using namespace xsdepth;
using testutil::check_gradients;

namespace {

Tensor rand_plane(std::vector<long> shape, uint64_t seed, Scalar lo = 0.0, Scalar hi = 1.0) {
  Rng rng(seed);
  return random_uniform(std::move(shape), rng, lo, hi);
}

}  // namespace

TEST_CASE("backward accumulates through shared subexpressions") {
  Var x = parameter(Tensor::scalar(3.0));
  Var y = mul(x, x);       // x^2
  Var z = add(y, y);       // 2 x^2
  backward(mean_all(z));
  CHECK(z->value.item() == doctest::Approx(18.0));
  CHECK(x->grad[0] == doctest::Approx(12.0));  // d(2x^2)/dx = 4x
}

TEST_CASE("backward zeroes leaf grads between calls by default") {
  Var x = parameter(Tensor::scalar(2.0));
  Var loss = mul(x, x);
  backward(loss);
  const Scalar g1 = x->grad[0];
  backward(loss);
  CHECK(x->grad[0] == doctest::Approx(g1));
  backward(loss, /*accumulate=*/true);
  CHECK(x->grad[0] == doctest::Approx(2 * g1));
}

TEST_CASE("constant inputs receive no gradient state") {
  Var x = constant(Tensor::scalar(1.0));
  Var y = parameter(Tensor::scalar(2.0));
  Var loss = mul(x, y);
  backward(loss);
  CHECK(x->grad.numel() == 0);
  CHECK(y->grad[0] == doctest::Approx(1.0));
}

TEST_CASE("elementwise op gradients match finite differences") {
  const Tensor x0 = rand_plane({2, 3, 4}, 11, 0.1, 0.9);
  const Tensor other = rand_plane({2, 3, 4}, 12, 0.2, 0.8);

  check_gradients(x0, [&](const Var& x) { return mean_all(add(x, constant(other))); });
  check_gradients(x0, [&](const Var& x) { return mean_all(sub(constant(other), x)); });
  check_gradients(x0, [&](const Var& x) { return mean_all(mul(x, constant(other))); });
  check_gradients(x0, [&](const Var& x) { return mean_all(div(constant(other), x)); });
  check_gradients(x0, [&](const Var& x) { return mean_all(div(x, constant(other))); });
  check_gradients(x0, [&](const Var& x) { return mean_all(mul_scalar(x, -2.5)); });
  check_gradients(x0, [&](const Var& x) { return mean_all(add_scalar(x, 0.7)); });
  check_gradients(x0, [&](const Var& x) { return mean_all(exp_v(x)); });
  check_gradients(x0, [&](const Var& x) { return mean_all(sigmoid_v(x)); });
  check_gradients(x0, [&](const Var& x) { return mean_all(softplus_v(x)); });
  check_gradients(x0, [&](const Var& x) { return mean_all(mul(x, x)); });
}

TEST_CASE("activation gradients match finite differences away from kinks") {
  // Values straddle zero but stay clear of it so FD is well defined.
  Tensor x0({1, 2, 4});
  const Scalar vals[8] = {-1.7, -0.9, -0.3, -0.05, 0.05, 0.4, 1.1, 2.2};
  for (long i = 0; i < 8; ++i) x0[i] = vals[i];
  check_gradients(x0, [&](const Var& x) { return mean_all(abs_v(x)); });
  check_gradients(x0, [&](const Var& x) { return mean_all(elu_v(x)); });
  check_gradients(x0, [&](const Var& x) { return mean_all(leaky_relu_v(x, 0.2)); });
  check_gradients(x0, [&](const Var& x) { return mean_all(relu_v(x)); });
}

TEST_CASE("reduction and shape op gradients match finite differences") {
  const Tensor x0 = rand_plane({3, 4, 5}, 21);
  check_gradients(x0, [&](const Var& x) { return sum_all(x); });
  check_gradients(x0, [&](const Var& x) { return mean_all(mean_channels(x)); });
  check_gradients(x0, [&](const Var& x) { return mean_all(crop(x, 1, 2, 2, 3)); });
  check_gradients(x0, [&](const Var& x) { return mean_all(box_filter(x, 3)); });
  check_gradients(x0, [&](const Var& x) {
    return mean_all(concat_channels({x, mul_scalar(x, 2.0)}));
  });
  check_gradients(x0, [&](const Var& x) { return mean_all(upsample_nearest2x(x)); });
  check_gradients(x0, [&](const Var& x) { return mean_all(resize_bilinear(x, 7, 9)); });
  check_gradients(x0, [&](const Var& x) { return mean_all(resize_bilinear(x, 2, 3)); });
}

TEST_CASE("box_filter matches the direct window mean") {
  const Tensor x0 = rand_plane({2, 5, 6}, 31);
  Var out = box_filter(constant(x0), 3);
  REQUIRE(out->value.shape() == std::vector<long>{2, 3, 4});
  for (long c = 0; c < 2; ++c)
    for (long y = 0; y < 3; ++y)
      for (long x = 0; x < 4; ++x) {
        Scalar s = 0;
        for (long dy = 0; dy < 3; ++dy)
          for (long dx = 0; dx < 3; ++dx) s += x0.at(c, y + dy, x + dx);
        CHECK(out->value.at(c, y, x) == doctest::Approx(s / 9.0).epsilon(1e-12));
      }
}

TEST_CASE("conv2d matches a direct convolution loop and its gradients check out") {
  Rng rng(41);
  const Tensor input = random_uniform({2, 5, 6}, rng);
  const Tensor weight = random_normal({3, 2, 3, 3}, rng, 0.0, 0.5);
  const Tensor bias = random_normal({3}, rng, 0.0, 0.5);

  Var out = conv2d(constant(input), constant(weight), constant(bias), 1, 1);
  REQUIRE(out->value.shape() == std::vector<long>{3, 5, 6});
  // Direct sliding-window evaluation.
  auto wat = [&](long o, long c, long ky, long kx) {
    return weight[((o * 2 + c) * 3 + ky) * 3 + kx];
  };
  for (long o = 0; o < 3; ++o)
    for (long y = 0; y < 5; ++y)
      for (long x = 0; x < 6; ++x) {
        Scalar acc = bias[o];
        for (long c = 0; c < 2; ++c)
          for (long ky = 0; ky < 3; ++ky)
            for (long kx = 0; kx < 3; ++kx) {
              const long iy = y + ky - 1, ix = x + kx - 1;
              if (iy < 0 || iy >= 5 || ix < 0 || ix >= 6) continue;
              acc += input.at(c, iy, ix) * wat(o, c, ky, kx);
            }
        CHECK(out->value.at(o, y, x) == doctest::Approx(acc).epsilon(1e-10));
      }

  check_gradients(input, [&](const Var& x) {
    return mean_all(conv2d(x, constant(weight), constant(bias), 1, 1));
  });
  check_gradients(weight, [&](const Var& w) {
    return mean_all(conv2d(constant(input), w, constant(bias), 1, 1));
  });
  check_gradients(bias, [&](const Var& b) {
    return mean_all(conv2d(constant(input), constant(weight), b, 2, 1));
  });
  // Strided path.
  check_gradients(input, [&](const Var& x) {
    return mean_all(conv2d(x, constant(weight), constant(bias), 2, 1));
  });
}

TEST_CASE("conv2d strided output sizes use floor semantics") {
  Rng rng(43);
  const Tensor input = random_uniform({1, 5, 7}, rng);
  const Tensor weight = random_normal({1, 1, 3, 3}, rng, 0.0, 0.5);
  Var out = conv2d(constant(input), constant(weight), nullptr, 2, 1);
  CHECK(out->value.shape() == std::vector<long>{1, 3, 4});
}

TEST_CASE("warp gradients w.r.t. source and disparity match finite differences") {
  Rng rng(51);
  Tensor src = random_uniform({1, 8, 8}, rng);
  // Disparities kept away from integer sample positions and the border clamp
  // so central differences are smooth.
  Tensor disp({1, 8, 8});
  for (long i = 0; i < disp.numel(); ++i) disp[i] = rng.uniform(0.02, 0.06);

  for (WarpDirection dir : {WarpDirection::to_left, WarpDirection::to_right}) {
    check_gradients(disp, [&](const Var& d) {
      return sum_all(warp_horizontal(constant(src), d, dir));
    });
    check_gradients(src, [&](const Var& s) {
      return sum_all(warp_horizontal(s, constant(disp), dir));
    });
  }
}

TEST_CASE("detach cuts the gradient path") {
  Var x = parameter(Tensor::scalar(2.0));
  Var loss = mul(detach(mul(x, x)), x);  // value 8, d/dx through the right factor only
  backward(loss);
  CHECK(loss->value.item() == doctest::Approx(8.0));
  CHECK(x->grad[0] == doctest::Approx(4.0));
}

TEST_CASE("ops reject shape mismatches") {
  Var a = constant(Tensor::zeros({1, 2, 3}));
  Var b = constant(Tensor::zeros({1, 3, 2}));
  CHECK_THROWS_AS((void)add(a, b), ContractError);
  CHECK_THROWS_AS((void)mul(a, b), ContractError);
  CHECK_THROWS_AS((void)box_filter(a, 2), ContractError);
  CHECK_THROWS_AS((void)crop(a, 0, 0, 3, 3), ContractError);
  CHECK_THROWS_AS((void)concat_channels({}), ContractError);
}

TEST_CASE("forward evaluation is deterministic") {
  const Tensor x0 = rand_plane({2, 6, 6}, 61);
  const Tensor w0 = rand_plane({2, 2, 3, 3}, 62, -0.3, 0.3);
  auto run = [&]() {
    Var y = conv2d(constant(x0), constant(w0), nullptr, 1, 1);
    return mean_all(elu_v(y))->value.item();
  };
  const Scalar first = run();
  for (int i = 0; i < 3; ++i) CHECK(run() == first);
}
