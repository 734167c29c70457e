#pragma once

// Shared helpers for the unit suites.

#include <functional>

#include "oracles.hpp"
#include "xsdepth/autograd.hpp"

namespace testutil {

using xsdepth::Scalar;
using xsdepth::Tensor;
using xsdepth::Var;

// Checks autodiff gradients of a scalar-valued graph against central finite
// differences over every element of the input.
// graph_fn receives a parameter Var and must return the scalar loss root.
//
// Central differences are only a valid derivative oracle where the loss is
// smooth; near |.| kinks (or bilinear grid crossings) the two-sided window
// averages one-sided slopes. Elements where halving the step changes the FD
// estimate are therefore excluded, with a cap on how many may be skipped.
inline void check_gradients(const Tensor& x0, const std::function<Var(const Var&)>& graph_fn,
                            Scalar h = 1e-4, Scalar rel_tol = 1e-3, Scalar floor = 1e-8) {
  Var x = xsdepth::parameter(x0);
  Var loss = graph_fn(x);
  xsdepth::backward(loss);
  REQUIRE(x->grad.numel() == x0.numel());

  auto value_fn = [&](const Tensor& t) {
    Var v = xsdepth::constant(t);
    return graph_fn(v)->value.item();
  };
  const std::vector<Scalar> fd_h = oracle::fd_gradient(value_fn, x0, h);
  const std::vector<Scalar> fd_h2 = oracle::fd_gradient(value_fn, x0, h / 2);
  long skipped = 0;
  for (long i = 0; i < x0.numel(); ++i) {
    const Scalar want = fd_h2[static_cast<size_t>(i)];
    if (oracle::rel_error(fd_h[static_cast<size_t>(i)], want, floor) > 1e-2) {
      ++skipped;  // FD has not converged: a kink sits inside the window
      continue;
    }
    const Scalar got = x->grad[i];
    INFO("element ", i, ": autodiff ", got, " vs finite difference ", want);
    CHECK(oracle::rel_error(got, want, floor) < rel_tol);
  }
  // The screen must stay the exception, not the rule.
  CHECK(skipped * 5 <= x0.numel());
}

}  // namespace testutil
