#include "xsdepth/tensor.hpp"

#include <sstream>

#include "xsdepth/rng.hpp"

namespace xsdepth {

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape_.size(); ++i) {
    if (i) os << ",";
    os << shape_[i];
  }
  os << "]";
  return os.str();
}

Tensor random_uniform(std::vector<long> shape, Rng& rng, Scalar lo, Scalar hi) {
  Tensor t(std::move(shape));
  for (long i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

Tensor random_normal(std::vector<long> shape, Rng& rng, Scalar mean, Scalar stddev) {
  Tensor t(std::move(shape));
  for (long i = 0; i < t.numel(); ++i) t[i] = rng.normal(mean, stddev);
  return t;
}

}  // namespace xsdepth
