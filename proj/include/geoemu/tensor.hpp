#pragma once

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "geoemu/error.hpp"

namespace geoemu {

// Dense row-major double tensor, rank 0..4. Rank-3 fields are laid out
// [C, H, W] (channel, latitude row, longitude column).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    data_.assign(static_cast<size_t>(count(shape_)), 0.0);
  }
  Tensor(std::vector<int> shape, double fill) : Tensor(std::move(shape)) {
    for (auto& v : data_) v = fill;
  }
  static Tensor scalar(double v) {
    Tensor t(std::vector<int>{});
    t.data_.assign(1, v);
    return t;
  }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  // 2-D accessor for [R,C] matrices.
  double& at2(int r, int c) {
    return data_[static_cast<size_t>(int64_t(r) * shape_[1] + c)];
  }
  double at2(int r, int c) const {
    return data_[static_cast<size_t>(int64_t(r) * shape_[1] + c)];
  }
  // 3-D accessor for [C,H,W] fields.
  double& at(int c, int h, int w) {
    return data_[static_cast<size_t>((int64_t(c) * shape_[1] + h) * shape_[2] + w)];
  }
  double at(int c, int h, int w) const {
    return data_[static_cast<size_t>((int64_t(c) * shape_[1] + h) * shape_[2] + w)];
  }
  // 4-D accessor for [A,B,H,W].
  double& at4(int a, int b, int h, int w) {
    return data_[static_cast<size_t>(
        ((int64_t(a) * shape_[1] + b) * shape_[2] + h) * shape_[3] + w)];
  }
  double at4(int a, int b, int h, int w) const {
    return data_[static_cast<size_t>(
        ((int64_t(a) * shape_[1] + b) * shape_[2] + h) * shape_[3] + w)];
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  std::string shape_str() const {
    std::string s = "[";
    for (size_t i = 0; i < shape_.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(shape_[i]);
    }
    return s + "]";
  }

  static int64_t count(const std::vector<int>& shape) {
    int64_t n = 1;
    for (int d : shape) {
      if (d < 0) throw validation_error("negative tensor dimension");
      n *= d;
    }
    return n;
  }

 private:
  std::vector<int> shape_;
  std::vector<double> data_;
};

inline void require_same_shape(const Tensor& a, const Tensor& b,
                               const char* what) {
  if (!a.same_shape(b)) {
    throw validation_error(std::string(what) + ": shape mismatch, expected " +
                           a.shape_str() + " got " + b.shape_str());
  }
}

}  // namespace geoemu
