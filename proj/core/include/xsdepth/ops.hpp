#pragma once

#include <vector>

#include "xsdepth/autograd.hpp"

namespace xsdepth {

// Differentiable operations. Inputs are [C,H,W] planes unless stated;
// reductions return shape {1}. Shape mismatches throw ContractError.

// Elementwise, same shape.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);

Var add_scalar(const Var& a, Scalar k);
Var mul_scalar(const Var& a, Scalar k);

Var abs_v(const Var& a);
Var exp_v(const Var& a);
Var sigmoid_v(const Var& a);
Var softplus_v(const Var& a);  // log(1 + e^x), numerically stable
Var elu_v(const Var& a);
Var leaky_relu_v(const Var& a, Scalar slope = 0.2);
Var relu_v(const Var& a);

// Reductions.
Var sum_all(const Var& a);
Var mean_all(const Var& a);

// [C,H,W] -> [1,H,W] mean over channels.
Var mean_channels(const Var& a);

// Channel concatenation of same-spatial-size planes.
Var concat_channels(const std::vector<Var>& parts);

// Spatial crop: rows [y0, y0+h), cols [x0, x0+w), all channels.
Var crop(const Var& a, long y0, long x0, long h, long w);

// Unweighted box mean over an odd window, valid region:
// [C,H,W] -> [C,H-window+1,W-window+1].
Var box_filter(const Var& a, int window);

// Convolution: input [C,H,W], weight [O,C,kh,kw], bias [O] (may be null).
Var conv2d(const Var& input, const Var& weight, const Var& bias, int stride, int pad);

// [C,H,W] -> [C,2H,2W], nearest neighbor.
Var upsample_nearest2x(const Var& a);

// General bilinear resize with half-pixel-center sampling and edge clamp.
Var resize_bilinear(const Var& a, long out_h, long out_w);

enum class WarpDirection {
  to_left,   // synthesize a left view: sample source at x + d*W
  to_right,  // synthesize a right view: sample source at x - d*W
};

// Horizontal disparity warp. source [C,H,W], disparity [1,H,W] in fraction
// of image width. Bilinear along x, clamp-to-border. Differentiable w.r.t.
// both source and disparity.
Var warp_horizontal(const Var& source, const Var& disparity, WarpDirection dir);

// Cuts the graph: value is shared, no gradient flows.
Var detach(const Var& a);

inline Var scalar_var(Scalar v) { return constant(Tensor::scalar(v)); }

// Mean of a non-empty list of scalar Vars.
Var average_scalars(const std::vector<Var>& xs);

// --- Non-autograd kernels shared with the plain-tensor (inference) paths ---

Tensor warp_horizontal_tensor(const Tensor& source, const Tensor& disparity, WarpDirection dir);
Tensor resize_bilinear_tensor(const Tensor& a, long out_h, long out_w);
Tensor resize_nearest_tensor(const Tensor& a, long out_h, long out_w);

}  // namespace xsdepth
