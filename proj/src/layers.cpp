#include "fpnet/layers.hpp"

#include <cmath>

#include "fpnet/kernels.hpp"

namespace fpnet::nn {

namespace {

void init_uniform_fan_in(std::vector<double>& w, int fan_in, Rng& rng) {
  const double a = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& v : w) v = rng.uniform(-a, a);
}

}  // namespace

// ---------------------------------------------------------------------------
// Conv2d
// ---------------------------------------------------------------------------

Conv2d::Conv2d(int in_ch, int out_ch, int kernel)
    : cin_(in_ch), cout_(out_ch), k_(kernel) {
  if (in_ch <= 0 || out_ch <= 0) throw Error("Conv2d: bad channel counts");
  if (kernel <= 0 || kernel % 2 == 0)
    throw Error("Conv2d: kernel size must be odd and positive");
  w.assign((size_t)k_ * k_ * cin_ * cout_, 0.0);
  b.assign((size_t)cout_, 0.0);
  dw.assign(w.size(), 0.0);
  db.assign(b.size(), 0.0);
}

void Conv2d::init(Rng& rng) {
  init_uniform_fan_in(w, k_ * k_ * cin_, rng);
  std::fill(b.begin(), b.end(), 0.0);
}

Tensor Conv2d::forward(const Tensor& x) {
  if (x.shape.size() != 4 || x.shape[3] != cin_)
    throw Error("Conv2d::forward: expected [B,H,W," + std::to_string(cin_) +
                "], got " + x.shape_str());
  x_cache_ = x;
  Tensor y({x.shape[0], x.shape[1], x.shape[2], cout_});
  conv2d_forward(x.data.data(), x.shape[0], x.shape[1], x.shape[2], cin_,
                 w.data(), b.data(), k_, cout_, y.data.data());
  return y;
}

Tensor Conv2d::backward(const Tensor& dy) {
  const Tensor& x = x_cache_;
  if (dy.shape.size() != 4 || dy.shape[3] != cout_ ||
      dy.shape[0] != x.shape[0] || dy.shape[1] != x.shape[1] ||
      dy.shape[2] != x.shape[2])
    throw Error("Conv2d::backward: gradient shape mismatch " + dy.shape_str());
  conv2d_backward_params(x.data.data(), dy.data.data(), x.shape[0], x.shape[1],
                         x.shape[2], cin_, k_, cout_, dw.data(), db.data());
  Tensor dx(x.shape);
  conv2d_backward_input(dy.data.data(), x.shape[0], x.shape[1], x.shape[2],
                        cout_, w.data(), k_, cin_, dx.data.data());
  return dx;
}

void Conv2d::register_params(ParamRegistry& reg, const std::string& prefix) {
  reg.add(prefix + ".w", w, dw);
  reg.add(prefix + ".b", b, db);
}

// ---------------------------------------------------------------------------
// Dense
// ---------------------------------------------------------------------------

Dense::Dense(int in_dim, int out_dim) : in_(in_dim), out_(out_dim) {
  if (in_dim <= 0 || out_dim <= 0) throw Error("Dense: bad dimensions");
  w.assign((size_t)in_ * out_, 0.0);
  b.assign((size_t)out_, 0.0);
  dw.assign(w.size(), 0.0);
  db.assign(b.size(), 0.0);
}

void Dense::init(Rng& rng) {
  init_uniform_fan_in(w, in_, rng);
  std::fill(b.begin(), b.end(), 0.0);
}

Tensor Dense::forward(const Tensor& x) {
  if (x.shape.size() != 2 || x.shape[1] != in_)
    throw Error("Dense::forward: expected [B," + std::to_string(in_) +
                "], got " + x.shape_str());
  x_cache_ = x;
  Tensor y({x.shape[0], out_});
  dense_forward(x.data.data(), x.shape[0], in_, w.data(), b.data(), out_,
                y.data.data());
  return y;
}

Tensor Dense::backward(const Tensor& dy) {
  const Tensor& x = x_cache_;
  if (dy.shape.size() != 2 || dy.shape[1] != out_ || dy.shape[0] != x.shape[0])
    throw Error("Dense::backward: gradient shape mismatch " + dy.shape_str());
  dense_backward_params(x.data.data(), dy.data.data(), x.shape[0], in_, out_,
                        dw.data(), db.data());
  Tensor dx(x.shape);
  dense_backward_input(dy.data.data(), x.shape[0], out_, w.data(), in_,
                       dx.data.data());
  return dx;
}

void Dense::register_params(ParamRegistry& reg, const std::string& prefix) {
  reg.add(prefix + ".w", w, dw);
  reg.add(prefix + ".b", b, db);
}

// ---------------------------------------------------------------------------
// BatchNorm
// ---------------------------------------------------------------------------

BatchNorm::BatchNorm(int channels, double eps, double momentum)
    : c_(channels), eps_(eps), momentum_(momentum) {
  if (channels <= 0) throw Error("BatchNorm: bad channel count");
  gamma.assign((size_t)c_, 1.0);
  beta.assign((size_t)c_, 0.0);
  dgamma.assign((size_t)c_, 0.0);
  dbeta.assign((size_t)c_, 0.0);
  running_mean.assign((size_t)c_, 0.0);
  running_var.assign((size_t)c_, 1.0);
  inv_std_.assign((size_t)c_, 0.0);
}

Tensor BatchNorm::forward(const Tensor& x, bool train) {
  if (x.shape.empty() || x.shape.back() != c_)
    throw Error("BatchNorm::forward: trailing dim must be " +
                std::to_string(c_) + ", got " + x.shape_str());
  const int n = static_cast<int>(x.numel() / (size_t)c_);
  Tensor y(x.shape);
  if (train) {
    shape_cache_ = x.shape;
    xhat_.assign(x.data.size(), 0.0);
    batchnorm_forward_train(x.data.data(), n, c_, gamma.data(), beta.data(),
                            eps_, momentum_, running_mean.data(),
                            running_var.data(), y.data.data(), xhat_.data(),
                            inv_std_.data());
  } else {
    batchnorm_forward_infer(x.data.data(), n, c_, gamma.data(), beta.data(),
                            eps_, running_mean.data(), running_var.data(),
                            y.data.data());
  }
  return y;
}

Tensor BatchNorm::backward(const Tensor& dy) {
  if (dy.shape != shape_cache_)
    throw Error("BatchNorm::backward: gradient shape mismatch (was the "
                "forward pass run in training mode?)");
  const int n = static_cast<int>(dy.numel() / (size_t)c_);
  Tensor dx(dy.shape);
  batchnorm_backward(dy.data.data(), xhat_.data(), inv_std_.data(), n, c_,
                     gamma.data(), dgamma.data(), dbeta.data(),
                     dx.data.data());
  return dx;
}

void BatchNorm::register_params(ParamRegistry& reg, const std::string& prefix) {
  reg.add(prefix + ".gamma", gamma, dgamma);
  reg.add(prefix + ".beta", beta, dbeta);
}

// ---------------------------------------------------------------------------
// elementwise layers
// ---------------------------------------------------------------------------

Tensor LeakyRelu::forward(const Tensor& x) {
  x_cache_ = x;
  Tensor y(x.shape);
  leakyrelu_forward(x.data.data(), x.data.size(), slope_, y.data.data());
  return y;
}

Tensor LeakyRelu::backward(const Tensor& dy) {
  if (!dy.same_shape(x_cache_))
    throw Error("LeakyRelu::backward: gradient shape mismatch");
  Tensor dx(dy.shape);
  leakyrelu_backward(dy.data.data(), x_cache_.data.data(), dy.data.size(),
                     slope_, dx.data.data());
  return dx;
}

Tensor TanhLayer::forward(const Tensor& x) {
  Tensor y(x.shape);
  tanh_forward(x.data.data(), x.data.size(), y.data.data());
  y_cache_ = y;
  return y;
}

Tensor TanhLayer::backward(const Tensor& dy) {
  if (!dy.same_shape(y_cache_))
    throw Error("TanhLayer::backward: gradient shape mismatch");
  Tensor dx(dy.shape);
  tanh_backward(dy.data.data(), y_cache_.data.data(), dy.data.size(),
                dx.data.data());
  return dx;
}

// ---------------------------------------------------------------------------
// SteQuantizer
// ---------------------------------------------------------------------------

SteQuantizer::SteQuantizer(int bits) : bits_(bits) {
  if (bits < 1 || bits > 16)
    throw Error("SteQuantizer: bits must be in [1, 16], got " +
                std::to_string(bits));
}

double SteQuantizer::quantize_value(double x) const {
  const int L = levels();
  const double d = step();
  double xc = x < -1.0 ? -1.0 : (x > 1.0 ? 1.0 : x);
  int k = static_cast<int>(std::floor((xc + 1.0) / d));
  if (k < 0) k = 0;
  if (k >= L) k = L - 1;
  return -1.0 + (k + 0.5) * d;
}

Tensor SteQuantizer::forward(const Tensor& x) const {
  Tensor y(x.shape);
  for (size_t i = 0; i < x.data.size(); ++i)
    y.data[i] = quantize_value(x.data[i]);
  return y;
}

}  // namespace fpnet::nn
