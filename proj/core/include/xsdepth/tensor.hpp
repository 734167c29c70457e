#pragma once

#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "xsdepth/common.hpp"

namespace xsdepth {

// Dense row-major array of Scalars. Almost everything in this library is a
// [channels, height, width] plane; scalars travel as shape {1}.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<long> shape)
      : shape_(std::move(shape)), data_(checked_numel(shape_), 0.0) {}
  Tensor(std::vector<long> shape, std::vector<Scalar> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    XS_REQUIRE(static_cast<long>(data_.size()) == checked_numel(shape_),
               "Tensor: data size does not match shape");
  }

  static Tensor zeros(std::vector<long> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<long> shape, Scalar v) {
    Tensor t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), v);
    return t;
  }
  static Tensor scalar(Scalar v) { return Tensor({1}, {v}); }

  const std::vector<long>& shape() const { return shape_; }
  long dim(int i) const { return shape_.at(static_cast<size_t>(i)); }
  int ndim() const { return static_cast<int>(shape_.size()); }
  long numel() const { return static_cast<long>(data_.size()); }
  bool empty() const { return data_.empty(); }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }
  Scalar& operator[](long i) { return data_[static_cast<size_t>(i)]; }
  Scalar operator[](long i) const { return data_[static_cast<size_t>(i)]; }

  // [C,H,W] accessors.
  long channels() const { return expect3(), shape_[0]; }
  long height() const { return expect3(), shape_[1]; }
  long width() const { return expect3(), shape_[2]; }
  Scalar& at(long c, long y, long x) {
    return data_[static_cast<size_t>((c * shape_[1] + y) * shape_[2] + x)];
  }
  const Scalar& at(long c, long y, long x) const {
    return data_[static_cast<size_t>((c * shape_[1] + y) * shape_[2] + x)];
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  bool all_finite() const {
    for (Scalar v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }
  Scalar item() const {
    XS_REQUIRE(numel() == 1, "Tensor::item on non-scalar tensor");
    return data_[0];
  }

  std::string shape_str() const;

 private:
  void expect3() const {
    XS_REQUIRE(shape_.size() == 3, "Tensor: expected [C,H,W], got " + shape_str());
  }
  static long checked_numel(const std::vector<long>& shape) {
    long n = 1;
    for (long d : shape) {
      XS_REQUIRE(d > 0, "Tensor: non-positive dimension");
      n *= d;
    }
    return n;
  }

  std::vector<long> shape_;
  std::vector<Scalar> data_;
};

Tensor random_uniform(std::vector<long> shape, class Rng& rng, Scalar lo = 0.0, Scalar hi = 1.0);
Tensor random_normal(std::vector<long> shape, class Rng& rng, Scalar mean = 0.0, Scalar stddev = 1.0);

}  // namespace xsdepth
