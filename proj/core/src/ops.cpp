#include "xsdepth/ops.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace xsdepth {

namespace {

using RowMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using MapConstMat = Eigen::Map<const RowMat>;

void require_same_shape(const Var& a, const Var& b, const char* op) {
  XS_REQUIRE(a && b, std::string(op) + ": null input");
  XS_REQUIRE(a->value.same_shape(b->value),
             std::string(op) + ": shape mismatch " + a->value.shape_str() + " vs " +
                 b->value.shape_str());
}

// Elementwise binary helper: value = f(a,b); backward supplies (da, db) per
// element as functions of (a, b, gout).
template <typename FwdFn, typename BwdFn>
Var binary_op(const Var& a, const Var& b, const char* name, FwdFn fwd, BwdFn bwd) {
  require_same_shape(a, b, name);
  Tensor out(a->value.shape());
  const Scalar* pa = a->value.data();
  const Scalar* pb = b->value.data();
  Scalar* po = out.data();
  const long n = out.numel();
  for (long i = 0; i < n; ++i) po[i] = fwd(pa[i], pb[i]);
  return make_node(std::move(out), {a, b}, [bwd](VarNode& node) {
    VarNode& na = *node.parents[0];
    VarNode& nb = *node.parents[1];
    const long n = node.value.numel();
    const Scalar* pa = na.value.data();
    const Scalar* pb = nb.value.data();
    const Scalar* g = node.grad.data();
    if (na.requires_grad) {
      na.ensure_grad();
      Scalar* da = na.grad.data();
      for (long i = 0; i < n; ++i) da[i] += bwd(pa[i], pb[i], g[i], true);
    }
    if (nb.requires_grad) {
      nb.ensure_grad();
      Scalar* db = nb.grad.data();
      for (long i = 0; i < n; ++i) db[i] += bwd(pa[i], pb[i], g[i], false);
    }
  });
}

// Elementwise unary helper: dy/dx expressed from (x, y).
template <typename FwdFn, typename GradFn>
Var unary_op(const Var& a, const char* name, FwdFn fwd, GradFn dydx) {
  XS_REQUIRE(a != nullptr, std::string(name) + ": null input");
  Tensor out(a->value.shape());
  const Scalar* pa = a->value.data();
  Scalar* po = out.data();
  const long n = out.numel();
  for (long i = 0; i < n; ++i) po[i] = fwd(pa[i]);
  return make_node(std::move(out), {a}, [dydx](VarNode& node) {
    VarNode& na = *node.parents[0];
    if (!na.requires_grad) return;
    na.ensure_grad();
    const long n = node.value.numel();
    const Scalar* px = na.value.data();
    const Scalar* py = node.value.data();
    const Scalar* g = node.grad.data();
    Scalar* da = na.grad.data();
    for (long i = 0; i < n; ++i) da[i] += g[i] * dydx(px[i], py[i]);
  });
}

}  // namespace

Var add(const Var& a, const Var& b) {
  return binary_op(a, b, "add", [](Scalar x, Scalar y) { return x + y; },
                   [](Scalar, Scalar, Scalar g, bool) { return g; });
}

Var sub(const Var& a, const Var& b) {
  return binary_op(a, b, "sub", [](Scalar x, Scalar y) { return x - y; },
                   [](Scalar, Scalar, Scalar g, bool first) { return first ? g : -g; });
}

Var mul(const Var& a, const Var& b) {
  return binary_op(a, b, "mul", [](Scalar x, Scalar y) { return x * y; },
                   [](Scalar x, Scalar y, Scalar g, bool first) { return first ? g * y : g * x; });
}

Var div(const Var& a, const Var& b) {
  return binary_op(a, b, "div", [](Scalar x, Scalar y) { return x / y; },
                   [](Scalar x, Scalar y, Scalar g, bool first) {
                     return first ? g / y : -g * x / (y * y);
                   });
}

Var add_scalar(const Var& a, Scalar k) {
  return unary_op(a, "add_scalar", [k](Scalar x) { return x + k; },
                  [](Scalar, Scalar) { return 1.0; });
}

Var mul_scalar(const Var& a, Scalar k) {
  return unary_op(a, "mul_scalar", [k](Scalar x) { return x * k; },
                  [k](Scalar, Scalar) { return k; });
}

Var abs_v(const Var& a) {
  return unary_op(a, "abs", [](Scalar x) { return std::abs(x); },
                  [](Scalar x, Scalar) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}

Var exp_v(const Var& a) {
  return unary_op(a, "exp", [](Scalar x) { return std::exp(x); },
                  [](Scalar, Scalar y) { return y; });
}

Var sigmoid_v(const Var& a) {
  return unary_op(a, "sigmoid",
                  [](Scalar x) {
                    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
                    Scalar e = std::exp(x);
                    return e / (1.0 + e);
                  },
                  [](Scalar, Scalar y) { return y * (1.0 - y); });
}

Var softplus_v(const Var& a) {
  return unary_op(a, "softplus",
                  [](Scalar x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); },
                  [](Scalar x, Scalar) {
                    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
                    Scalar e = std::exp(x);
                    return e / (1.0 + e);
                  });
}

Var elu_v(const Var& a) {
  return unary_op(a, "elu", [](Scalar x) { return x >= 0 ? x : std::expm1(x); },
                  [](Scalar x, Scalar y) { return x >= 0 ? 1.0 : y + 1.0; });
}

Var leaky_relu_v(const Var& a, Scalar slope) {
  return unary_op(a, "leaky_relu", [slope](Scalar x) { return x >= 0 ? x : slope * x; },
                  [slope](Scalar x, Scalar) { return x >= 0 ? 1.0 : slope; });
}

Var relu_v(const Var& a) {
  return unary_op(a, "relu", [](Scalar x) { return x > 0 ? x : 0.0; },
                  [](Scalar x, Scalar) { return x > 0 ? 1.0 : 0.0; });
}

Var sum_all(const Var& a) {
  XS_REQUIRE(a != nullptr, "sum_all: null input");
  Scalar s = 0.0;
  const Scalar* p = a->value.data();
  for (long i = 0; i < a->value.numel(); ++i) s += p[i];
  return make_node(Tensor::scalar(s), {a}, [](VarNode& node) {
    VarNode& na = *node.parents[0];
    if (!na.requires_grad) return;
    na.ensure_grad();
    const Scalar g = node.grad[0];
    Scalar* da = na.grad.data();
    for (long i = 0; i < na.value.numel(); ++i) da[i] += g;
  });
}

Var mean_all(const Var& a) {
  XS_REQUIRE(a != nullptr, "mean_all: null input");
  const long n = a->value.numel();
  Scalar s = 0.0;
  const Scalar* p = a->value.data();
  for (long i = 0; i < n; ++i) s += p[i];
  return make_node(Tensor::scalar(s / static_cast<Scalar>(n)), {a}, [](VarNode& node) {
    VarNode& na = *node.parents[0];
    if (!na.requires_grad) return;
    na.ensure_grad();
    const long n = na.value.numel();
    const Scalar g = node.grad[0] / static_cast<Scalar>(n);
    Scalar* da = na.grad.data();
    for (long i = 0; i < n; ++i) da[i] += g;
  });
}

Var mean_channels(const Var& a) {
  XS_REQUIRE(a != nullptr, "mean_channels: null input");
  const long c = a->value.channels(), h = a->value.height(), w = a->value.width();
  Tensor out({1, h, w});
  const Scalar inv = 1.0 / static_cast<Scalar>(c);
  for (long ch = 0; ch < c; ++ch) {
    const Scalar* src = a->value.data() + ch * h * w;
    Scalar* dst = out.data();
    for (long i = 0; i < h * w; ++i) dst[i] += src[i] * inv;
  }
  return make_node(std::move(out), {a}, [](VarNode& node) {
    VarNode& na = *node.parents[0];
    if (!na.requires_grad) return;
    na.ensure_grad();
    const long c = na.value.channels(), hw = node.value.height() * node.value.width();
    const Scalar inv = 1.0 / static_cast<Scalar>(c);
    const Scalar* g = node.grad.data();
    for (long ch = 0; ch < c; ++ch) {
      Scalar* da = na.grad.data() + ch * hw;
      for (long i = 0; i < hw; ++i) da[i] += g[i] * inv;
    }
  });
}

Var concat_channels(const std::vector<Var>& parts) {
  XS_REQUIRE(!parts.empty(), "concat_channels: empty list");
  const long h = parts[0]->value.height(), w = parts[0]->value.width();
  long total_c = 0;
  for (const Var& p : parts) {
    XS_REQUIRE(p->value.height() == h && p->value.width() == w,
               "concat_channels: spatial size mismatch");
    total_c += p->value.channels();
  }
  Tensor out({total_c, h, w});
  long off = 0;
  for (const Var& p : parts) {
    std::copy(p->value.data(), p->value.data() + p->value.numel(), out.data() + off);
    off += p->value.numel();
  }
  return make_node(std::move(out), parts, [](VarNode& node) {
    long off = 0;
    for (Var& p : node.parents) {
      const long n = p->value.numel();
      if (p->requires_grad) {
        p->ensure_grad();
        Scalar* dst = p->grad.data();
        const Scalar* g = node.grad.data() + off;
        for (long i = 0; i < n; ++i) dst[i] += g[i];
      }
      off += n;
    }
  });
}

Var crop(const Var& a, long y0, long x0, long h, long w) {
  XS_REQUIRE(a != nullptr, "crop: null input");
  const long c = a->value.channels(), ih = a->value.height(), iw = a->value.width();
  XS_REQUIRE(y0 >= 0 && x0 >= 0 && h >= 1 && w >= 1 && y0 + h <= ih && x0 + w <= iw,
             "crop: window out of range");
  Tensor out({c, h, w});
  for (long ch = 0; ch < c; ++ch)
    for (long y = 0; y < h; ++y) {
      const Scalar* src = &a->value.at(ch, y0 + y, x0);
      Scalar* dst = &out.at(ch, y, 0);
      std::copy(src, src + w, dst);
    }
  return make_node(std::move(out), {a}, [y0, x0](VarNode& node) {
    VarNode& na = *node.parents[0];
    if (!na.requires_grad) return;
    na.ensure_grad();
    const long c = node.value.channels(), h = node.value.height(), w = node.value.width();
    for (long ch = 0; ch < c; ++ch)
      for (long y = 0; y < h; ++y) {
        const Scalar* g = &node.grad.at(ch, y, 0);
        Scalar* dst = &na.grad.at(ch, y0 + y, x0);
        for (long x = 0; x < w; ++x) dst[x] += g[x];
      }
  });
}

Var box_filter(const Var& a, int window) {
  XS_REQUIRE(a != nullptr, "box_filter: null input");
  XS_REQUIRE(window >= 1 && window % 2 == 1, "box_filter: window must be odd and positive");
  const long c = a->value.channels(), h = a->value.height(), w = a->value.width();
  const long k = window;
  XS_REQUIRE(h >= k && w >= k, "box_filter: input smaller than window");
  const long oh = h - k + 1, ow = w - k + 1;
  Tensor out({c, oh, ow});
  const Scalar inv = 1.0 / static_cast<Scalar>(k * k);
  for (long ch = 0; ch < c; ++ch)
    for (long y = 0; y < oh; ++y)
      for (long x = 0; x < ow; ++x) {
        Scalar s = 0.0;
        for (long dy = 0; dy < k; ++dy) {
          const Scalar* row = &a->value.at(ch, y + dy, x);
          for (long dx = 0; dx < k; ++dx) s += row[dx];
        }
        out.at(ch, y, x) = s * inv;
      }
  return make_node(std::move(out), {a}, [k, inv](VarNode& node) {
    VarNode& na = *node.parents[0];
    if (!na.requires_grad) return;
    na.ensure_grad();
    const long c = node.value.channels(), oh = node.value.height(), ow = node.value.width();
    for (long ch = 0; ch < c; ++ch)
      for (long y = 0; y < oh; ++y)
        for (long x = 0; x < ow; ++x) {
          const Scalar g = node.grad.at(ch, y, x) * inv;
          for (long dy = 0; dy < k; ++dy) {
            Scalar* row = &na.grad.at(ch, y + dy, x);
            for (long dx = 0; dx < k; ++dx) row[dx] += g;
          }
        }
  });
}

namespace {

struct ConvDims {
  long c, h, w, o, kh, kw, oh, ow;
  int stride, pad;
};

ConvDims conv_dims(const Tensor& input, const Tensor& weight, int stride, int pad) {
  XS_REQUIRE(input.ndim() == 3, "conv2d: input must be [C,H,W]");
  XS_REQUIRE(weight.ndim() == 4, "conv2d: weight must be [O,C,kh,kw]");
  ConvDims d;
  d.c = input.dim(0);
  d.h = input.dim(1);
  d.w = input.dim(2);
  d.o = weight.dim(0);
  d.kh = weight.dim(2);
  d.kw = weight.dim(3);
  d.stride = stride;
  d.pad = pad;
  XS_REQUIRE(weight.dim(1) == d.c, "conv2d: weight input-channel mismatch");
  XS_REQUIRE(stride >= 1 && pad >= 0, "conv2d: bad stride/pad");
  d.oh = (d.h + 2 * pad - d.kh) / stride + 1;
  d.ow = (d.w + 2 * pad - d.kw) / stride + 1;
  XS_REQUIRE(d.oh >= 1 && d.ow >= 1, "conv2d: kernel larger than padded input");
  return d;
}

// col layout: [C*kh*kw, oh*ow] row-major.
void im2col(const Tensor& input, const ConvDims& d, std::vector<Scalar>& col) {
  col.assign(static_cast<size_t>(d.c * d.kh * d.kw * d.oh * d.ow), 0.0);
  const long n = d.oh * d.ow;
  for (long ch = 0; ch < d.c; ++ch)
    for (long ky = 0; ky < d.kh; ++ky)
      for (long kx = 0; kx < d.kw; ++kx) {
        Scalar* dst = col.data() + ((ch * d.kh + ky) * d.kw + kx) * n;
        for (long oy = 0; oy < d.oh; ++oy) {
          const long iy = oy * d.stride + ky - d.pad;
          if (iy < 0 || iy >= d.h) {
            dst += d.ow;
            continue;
          }
          const Scalar* src_row = &input.at(ch, iy, 0);
          for (long ox = 0; ox < d.ow; ++ox, ++dst) {
            const long ix = ox * d.stride + kx - d.pad;
            if (ix >= 0 && ix < d.w) *dst = src_row[ix];
          }
        }
      }
}

void col2im_accumulate(const std::vector<Scalar>& col, const ConvDims& d, Tensor& dinput) {
  const long n = d.oh * d.ow;
  for (long ch = 0; ch < d.c; ++ch)
    for (long ky = 0; ky < d.kh; ++ky)
      for (long kx = 0; kx < d.kw; ++kx) {
        const Scalar* src = col.data() + ((ch * d.kh + ky) * d.kw + kx) * n;
        for (long oy = 0; oy < d.oh; ++oy) {
          const long iy = oy * d.stride + ky - d.pad;
          if (iy < 0 || iy >= d.h) {
            src += d.ow;
            continue;
          }
          Scalar* dst_row = &dinput.at(ch, iy, 0);
          for (long ox = 0; ox < d.ow; ++ox, ++src) {
            const long ix = ox * d.stride + kx - d.pad;
            if (ix >= 0 && ix < d.w) dst_row[ix] += *src;
          }
        }
      }
}

}  // namespace

Var conv2d(const Var& input, const Var& weight, const Var& bias, int stride, int pad) {
  XS_REQUIRE(input && weight, "conv2d: null input/weight");
  const ConvDims d = conv_dims(input->value, weight->value, stride, pad);
  if (bias) XS_REQUIRE(bias->value.numel() == d.o, "conv2d: bias size mismatch");

  auto col = std::make_shared<std::vector<Scalar>>();
  im2col(input->value, d, *col);
  const long k = d.c * d.kh * d.kw;
  const long n = d.oh * d.ow;

  Tensor out({d.o, d.oh, d.ow});
  {
    MapConstMat wm(weight->value.data(), d.o, k);
    MapConstMat cm(col->data(), k, n);
    MapMat om(out.data(), d.o, n);
    om.noalias() = wm * cm;
    if (bias)
      for (long oc = 0; oc < d.o; ++oc) om.row(oc).array() += bias->value[oc];
  }

  std::vector<Var> parents = {input, weight};
  if (bias) parents.push_back(bias);
  return make_node(std::move(out), std::move(parents), [d, col, k, n](VarNode& node) {
    VarNode& nin = *node.parents[0];
    VarNode& nw = *node.parents[1];
    VarNode* nb = node.parents.size() > 2 ? node.parents[2].get() : nullptr;
    MapConstMat gm(node.grad.data(), d.o, n);
    if (nw.requires_grad) {
      nw.ensure_grad();
      MapMat dwm(nw.grad.data(), d.o, k);
      MapConstMat cm(col->data(), k, n);
      dwm.noalias() += gm * cm.transpose();
    }
    if (nb && nb->requires_grad) {
      nb->ensure_grad();
      // Fixed-order scalar reduction: Eigen's SIMD sum() peels to the data's
      // runtime alignment, which makes the rounding allocation-dependent and
      // breaks byte-identical training logs.
      const Scalar* g = node.grad.data();
      for (long oc = 0; oc < d.o; ++oc) {
        Scalar s = 0.0;
        const Scalar* row = g + oc * n;
        for (long i = 0; i < n; ++i) s += row[i];
        nb->grad[oc] += s;
      }
    }
    if (nin.requires_grad) {
      nin.ensure_grad();
      std::vector<Scalar> dcol(static_cast<size_t>(k * n));
      MapMat dcm(dcol.data(), k, n);
      MapConstMat wm(nw.value.data(), d.o, k);
      dcm.noalias() = wm.transpose() * gm;
      col2im_accumulate(dcol, d, nin.grad);
    }
  });
}

Var upsample_nearest2x(const Var& a) {
  XS_REQUIRE(a != nullptr, "upsample_nearest2x: null input");
  const long c = a->value.channels(), h = a->value.height(), w = a->value.width();
  Tensor out({c, 2 * h, 2 * w});
  for (long ch = 0; ch < c; ++ch)
    for (long y = 0; y < 2 * h; ++y) {
      const Scalar* src = &a->value.at(ch, y / 2, 0);
      Scalar* dst = &out.at(ch, y, 0);
      for (long x = 0; x < 2 * w; ++x) dst[x] = src[x / 2];
    }
  return make_node(std::move(out), {a}, [](VarNode& node) {
    VarNode& na = *node.parents[0];
    if (!na.requires_grad) return;
    na.ensure_grad();
    const long c = na.value.channels(), h = na.value.height(), w = na.value.width();
    for (long ch = 0; ch < c; ++ch)
      for (long y = 0; y < h; ++y)
        for (long x = 0; x < w; ++x) {
          Scalar s = 0.0;
          s += node.grad.at(ch, 2 * y, 2 * x);
          s += node.grad.at(ch, 2 * y, 2 * x + 1);
          s += node.grad.at(ch, 2 * y + 1, 2 * x);
          s += node.grad.at(ch, 2 * y + 1, 2 * x + 1);
          na.grad.at(ch, y, x) += s;
        }
  });
}

namespace {

struct LerpTap {
  long i0, i1;
  Scalar t;
};

LerpTap resize_tap(long out_i, long out_n, long in_n) {
  const Scalar scale = static_cast<Scalar>(in_n) / static_cast<Scalar>(out_n);
  Scalar src = (static_cast<Scalar>(out_i) + 0.5) * scale - 0.5;
  if (src < 0) src = 0;
  if (src > static_cast<Scalar>(in_n - 1)) src = static_cast<Scalar>(in_n - 1);
  LerpTap tap;
  tap.i0 = static_cast<long>(std::floor(src));
  if (tap.i0 > in_n - 2) tap.i0 = std::max<long>(0, in_n - 2);
  tap.i1 = std::min(tap.i0 + 1, in_n - 1);
  tap.t = src - static_cast<Scalar>(tap.i0);
  return tap;
}

}  // namespace

Var resize_bilinear(const Var& a, long out_h, long out_w) {
  XS_REQUIRE(a != nullptr, "resize_bilinear: null input");
  XS_REQUIRE(out_h >= 1 && out_w >= 1, "resize_bilinear: bad output size");
  const long c = a->value.channels(), h = a->value.height(), w = a->value.width();
  if (out_h == h && out_w == w) return a;  // no-op; keeps graphs lean
  Tensor out({c, out_h, out_w});
  std::vector<LerpTap> ty(out_h), tx(out_w);
  for (long y = 0; y < out_h; ++y) ty[y] = resize_tap(y, out_h, h);
  for (long x = 0; x < out_w; ++x) tx[x] = resize_tap(x, out_w, w);
  for (long ch = 0; ch < c; ++ch)
    for (long y = 0; y < out_h; ++y)
      for (long x = 0; x < out_w; ++x) {
        const LerpTap& a_y = ty[y];
        const LerpTap& a_x = tx[x];
        const Scalar v00 = a->value.at(ch, a_y.i0, a_x.i0);
        const Scalar v01 = a->value.at(ch, a_y.i0, a_x.i1);
        const Scalar v10 = a->value.at(ch, a_y.i1, a_x.i0);
        const Scalar v11 = a->value.at(ch, a_y.i1, a_x.i1);
        const Scalar top = v00 + (v01 - v00) * a_x.t;
        const Scalar bot = v10 + (v11 - v10) * a_x.t;
        out.at(ch, y, x) = top + (bot - top) * a_y.t;
      }
  return make_node(std::move(out), {a}, [ty, tx](VarNode& node) {
    VarNode& na = *node.parents[0];
    if (!na.requires_grad) return;
    na.ensure_grad();
    const long c = node.value.channels(), oh = node.value.height(), ow = node.value.width();
    for (long ch = 0; ch < c; ++ch)
      for (long y = 0; y < oh; ++y)
        for (long x = 0; x < ow; ++x) {
          const Scalar g = node.grad.at(ch, y, x);
          const LerpTap& a_y = ty[y];
          const LerpTap& a_x = tx[x];
          na.grad.at(ch, a_y.i0, a_x.i0) += g * (1 - a_y.t) * (1 - a_x.t);
          na.grad.at(ch, a_y.i0, a_x.i1) += g * (1 - a_y.t) * a_x.t;
          na.grad.at(ch, a_y.i1, a_x.i0) += g * a_y.t * (1 - a_x.t);
          na.grad.at(ch, a_y.i1, a_x.i1) += g * a_y.t * a_x.t;
        }
  });
}

namespace {

void check_warp_inputs(const Tensor& source, const Tensor& disparity) {
  XS_REQUIRE(source.ndim() == 3 && disparity.ndim() == 3, "warp: inputs must be [C,H,W]");
  XS_REQUIRE(disparity.channels() == 1, "warp: disparity must have 1 channel");
  XS_REQUIRE(source.height() == disparity.height() && source.width() == disparity.width(),
             "warp: source/disparity size mismatch");
  XS_REQUIRE(source.all_finite(), "warp: non-finite source");
  XS_REQUIRE(disparity.all_finite(), "warp: non-finite disparity");
}

// Sample position for output column x. to_left reads the source to the right
// (x + d*W), to_right reads to the left (x - d*W).
inline Scalar warp_coord(long x, Scalar disp, Scalar width, WarpDirection dir) {
  const Scalar shift = disp * width;
  return dir == WarpDirection::to_left ? static_cast<Scalar>(x) + shift
                                       : static_cast<Scalar>(x) - shift;
}

}  // namespace

Tensor warp_horizontal_tensor(const Tensor& source, const Tensor& disparity, WarpDirection dir) {
  check_warp_inputs(source, disparity);
  const long c = source.channels(), h = source.height(), w = source.width();
  Tensor out({c, h, w});
  for (long y = 0; y < h; ++y)
    for (long x = 0; x < w; ++x) {
      Scalar xs = warp_coord(x, disparity.at(0, y, x), static_cast<Scalar>(w), dir);
      if (xs < 0) xs = 0;
      if (xs > static_cast<Scalar>(w - 1)) xs = static_cast<Scalar>(w - 1);
      const long x0 = std::min(static_cast<long>(std::floor(xs)), w - 1);
      const long x1 = std::min(x0 + 1, w - 1);
      const Scalar t = xs - static_cast<Scalar>(x0);
      for (long ch = 0; ch < c; ++ch)
        out.at(ch, y, x) =
            source.at(ch, y, x0) + (source.at(ch, y, x1) - source.at(ch, y, x0)) * t;
    }
  return out;
}

Var warp_horizontal(const Var& source, const Var& disparity, WarpDirection dir) {
  XS_REQUIRE(source && disparity, "warp: null input");
  Tensor out = warp_horizontal_tensor(source->value, disparity->value, dir);
  return make_node(std::move(out), {source, disparity}, [dir](VarNode& node) {
    VarNode& nsrc = *node.parents[0];
    VarNode& ndisp = *node.parents[1];
    const long c = nsrc.value.channels(), h = nsrc.value.height(), w = nsrc.value.width();
    const bool need_src = nsrc.requires_grad;
    const bool need_disp = ndisp.requires_grad;
    if (need_src) nsrc.ensure_grad();
    if (need_disp) ndisp.ensure_grad();
    const Scalar width = static_cast<Scalar>(w);
    const Scalar sign = dir == WarpDirection::to_left ? 1.0 : -1.0;
    for (long y = 0; y < h; ++y)
      for (long x = 0; x < w; ++x) {
        Scalar xs = warp_coord(x, ndisp.value.at(0, y, x), width, dir);
        const bool clamped = xs <= 0.0 || xs >= static_cast<Scalar>(w - 1);
        if (xs < 0) xs = 0;
        if (xs > static_cast<Scalar>(w - 1)) xs = static_cast<Scalar>(w - 1);
        const long x0 = std::min(static_cast<long>(std::floor(xs)), w - 1);
        const long x1 = std::min(x0 + 1, w - 1);
        const Scalar t = xs - static_cast<Scalar>(x0);
        Scalar ddisp = 0.0;
        for (long ch = 0; ch < c; ++ch) {
          const Scalar g = node.grad.at(ch, y, x);
          if (g == 0.0) continue;
          if (need_src) {
            nsrc.grad.at(ch, y, x0) += g * (1.0 - t);
            nsrc.grad.at(ch, y, x1) += g * t;
          }
          if (need_disp && !clamped)
            ddisp += g * (nsrc.value.at(ch, y, x1) - nsrc.value.at(ch, y, x0));
        }
        if (need_disp && !clamped) ndisp.grad.at(0, y, x) += ddisp * sign * width;
      }
  });
}

Var detach(const Var& a) {
  XS_REQUIRE(a != nullptr, "detach: null input");
  return constant(a->value);
}

Var average_scalars(const std::vector<Var>& xs) {
  XS_REQUIRE(!xs.empty(), "average_scalars: empty list");
  Var acc = xs[0];
  for (size_t i = 1; i < xs.size(); ++i) acc = add(acc, xs[i]);
  return mul_scalar(acc, 1.0 / static_cast<Scalar>(xs.size()));
}

Tensor resize_bilinear_tensor(const Tensor& a, long out_h, long out_w) {
  Var v = resize_bilinear(constant(a), out_h, out_w);
  return v->value;
}

Tensor resize_nearest_tensor(const Tensor& a, long out_h, long out_w) {
  const long c = a.channels(), h = a.height(), w = a.width();
  if (out_h == h && out_w == w) return a;
  Tensor out({c, out_h, out_w});
  for (long ch = 0; ch < c; ++ch)
    for (long y = 0; y < out_h; ++y) {
      long sy = std::min(static_cast<long>((static_cast<Scalar>(y) + 0.5) *
                                           static_cast<Scalar>(h) / static_cast<Scalar>(out_h)),
                         h - 1);
      for (long x = 0; x < out_w; ++x) {
        long sx = std::min(static_cast<long>((static_cast<Scalar>(x) + 0.5) *
                                             static_cast<Scalar>(w) / static_cast<Scalar>(out_w)),
                           w - 1);
        out.at(ch, y, x) = a.at(ch, sy, sx);
      }
    }
  return out;
}

}  // namespace xsdepth
