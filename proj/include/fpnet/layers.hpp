#ifndef FPNET_LAYERS_HPP
#define FPNET_LAYERS_HPP

#include <string>
#include <vector>

#include "fpnet/rng.hpp"
#include "fpnet/tensor.hpp"

namespace fpnet::nn {

/// Flat view of every trainable parameter of a model, in declaration order.
/// The optimizer walks it; checkpoints serialize it in this exact order.
struct ParamSlot {
  std::string name;
  std::vector<double>* value;
  std::vector<double>* grad;
};

class ParamRegistry {
 public:
  void add(std::string name, std::vector<double>& value,
           std::vector<double>& grad) {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    slots_.push_back({std::move(name), &value, &grad});
  }

  const std::vector<ParamSlot>& slots() const { return slots_; }

  size_t param_count() const {
    size_t n = 0;
    for (const auto& s : slots_) n += s.value->size();
    return n;
  }

  void zero_grad() {
    for (auto& s : slots_)
      std::fill(s.grad->begin(), s.grad->end(), 0.0);
  }

 private:
  std::vector<ParamSlot> slots_;
};

/// 2-D convolution, stride 1, zero padding, odd kernel, channels last.
/// Weights are [K][K][Cin][Cout]. Weight init is uniform(-a, a) with
/// a = 1/sqrt(fan_in); biases start at zero.
class Conv2d {
 public:
  Conv2d(int in_ch, int out_ch, int kernel);

  void init(Rng& rng);
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);
  void register_params(ParamRegistry& reg, const std::string& prefix);

  int in_ch() const { return cin_; }
  int out_ch() const { return cout_; }

  std::vector<double> w, b, dw, db;

 private:
  int cin_, cout_, k_;
  Tensor x_cache_;
};

/// Fully connected layer; weights [In][Out], same init scheme as Conv2d.
class Dense {
 public:
  Dense(int in_dim, int out_dim);

  void init(Rng& rng);
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);
  void register_params(ParamRegistry& reg, const std::string& prefix);

  int in_dim() const { return in_; }
  int out_dim() const { return out_; }

  std::vector<double> w, b, dw, db;

 private:
  int in_, out_;
  Tensor x_cache_;
};

/// Batch normalization over the trailing (channel) axis. Accepts any tensor
/// whose last dimension equals the channel count; all leading dimensions are
/// folded into the statistics axis. Running statistics use
/// running = momentum * running + (1 - momentum) * batch.
class BatchNorm {
 public:
  explicit BatchNorm(int channels, double eps = 1e-5, double momentum = 0.9);

  Tensor forward(const Tensor& x, bool train);
  Tensor backward(const Tensor& dy);
  void register_params(ParamRegistry& reg, const std::string& prefix);

  std::vector<double> gamma, beta, dgamma, dbeta;
  std::vector<double> running_mean, running_var;

 private:
  int c_;
  double eps_, momentum_;
  std::vector<double> xhat_, inv_std_;
  std::vector<int> shape_cache_;
};

class LeakyRelu {
 public:
  explicit LeakyRelu(double slope = 0.3) : slope_(slope) {}
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);
  double slope() const { return slope_; }

 private:
  double slope_;
  Tensor x_cache_;
};

class TanhLayer {
 public:
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);

 private:
  Tensor y_cache_;
};

/// Uniform mid-rise quantizer on [-1, 1] with a straight-through gradient.
/// With B bits the 2^B levels are -1 + (k + 0.5) * step for step = 2^(1-B),
/// i.e. cell midpoints of an even partition of [-1, 1]; inputs are clamped
/// to the range first. backward passes gradients through unchanged.
class SteQuantizer {
 public:
  explicit SteQuantizer(int bits);

  double quantize_value(double x) const;
  Tensor forward(const Tensor& x) const;
  Tensor backward(const Tensor& dy) const { return dy; }

  int bits() const { return bits_; }
  int levels() const { return 1 << bits_; }
  double step() const { return 2.0 / levels(); }

 private:
  int bits_;
};

}  // namespace fpnet::nn

#endif  // FPNET_LAYERS_HPP
