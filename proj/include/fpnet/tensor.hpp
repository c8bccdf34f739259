#ifndef FPNET_TENSOR_HPP
#define FPNET_TENSOR_HPP

#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "fpnet/common.hpp"

namespace fpnet::nn {

/// Dense row-major tensor of doubles. Activations and parameters both use
/// this type; `grad` is allocated lazily for tensors that participate in
/// backprop. All layout conventions are channels-last: images are
/// [batch][height][width][channel].
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty unless requested

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    data.assign(numel(), 0.0);
  }

  static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }

  size_t numel() const {
    size_t n = 1;
    for (int d : shape) {
      if (d < 0) throw Error("Tensor: negative dimension");
      n *= static_cast<size_t>(d);
    }
    return n;
  }

  int dim(size_t i) const {
    if (i >= shape.size()) throw Error("Tensor: dim index out of range");
    return shape[i];
  }

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }

  void zero_grad() {
    std::fill(grad.begin(), grad.end(), 0.0);
  }

  /// Reinterprets the buffer with a new shape of identical element count.
  void reshape(std::vector<int> s) {
    Tensor probe;
    probe.shape = s;
    if (probe.numel() != numel()) throw Error("Tensor::reshape: size mismatch");
    shape = std::move(s);
  }

  double& at(int i) { return data[static_cast<size_t>(i)]; }
  double at(int i) const { return data[static_cast<size_t>(i)]; }

  double& at(int i, int j) {
    return data[static_cast<size_t>(i) * shape[1] + j];
  }
  double at(int i, int j) const {
    return data[static_cast<size_t>(i) * shape[1] + j];
  }

  double& at(int b, int h, int w, int c) {
    return data[((static_cast<size_t>(b) * shape[1] + h) * shape[2] + w) *
                    shape[3] +
                c];
  }
  double at(int b, int h, int w, int c) const {
    return data[((static_cast<size_t>(b) * shape[1] + h) * shape[2] + w) *
                    shape[3] +
                c];
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  std::string shape_str() const {
    std::string s = "[";
    for (size_t i = 0; i < shape.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(shape[i]);
    }
    return s + "]";
  }
};

inline void require_shape(const Tensor& t, const std::vector<int>& s,
                          const char* who) {
  if (t.shape != s) {
    Tensor probe;
    probe.shape = s;
    throw Error(std::string(who) + ": expected shape " + probe.shape_str() +
                ", got " + t.shape_str());
  }
}

}  // namespace fpnet::nn

#endif  // FPNET_TENSOR_HPP
