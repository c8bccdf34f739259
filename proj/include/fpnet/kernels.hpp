#ifndef FPNET_KERNELS_HPP
#define FPNET_KERNELS_HPP

#include <cstddef>

namespace fpnet::nn {

/// Low-level compute kernels, OpenMP-parallel. Every kernel has a serial
/// twin in fpnet::nn::ref with the same signature and the same summation
/// order, so the two produce bit-identical output; tests and the kernel
/// benchmark compare them. Parallel loops partition disjoint output slots
/// and keep all reductions in a fixed serial order, which makes results
/// independent of the thread count.
///
/// Layout conventions (all row-major, channels last):
///   images  x[B][H][W][C]
///   conv weights w[K][K][Cin][Cout], stride 1, zero padding (K-1)/2, K odd
///   dense weights w[In][Out]
///   batchnorm operates on a [N][C] view (N = B*H*W)

// -- convolution --------------------------------------------------------

void conv2d_forward(const double* x, int B, int H, int W, int Cin,
                    const double* w, const double* bias, int K, int Cout,
                    double* y);

void conv2d_backward_input(const double* dy, int B, int H, int W, int Cout,
                           const double* w, int K, int Cin, double* dx);

/// Accumulates into dw/db (caller zeroes them at optimizer-step boundaries).
void conv2d_backward_params(const double* x, const double* dy, int B, int H,
                            int W, int Cin, int K, int Cout, double* dw,
                            double* db);

// -- dense ---------------------------------------------------------------

void dense_forward(const double* x, int B, int In, const double* w,
                   const double* bias, int Out, double* y);

void dense_backward_input(const double* dy, int B, int Out, const double* w,
                          int In, double* dx);

/// Accumulates into dw/db.
void dense_backward_params(const double* x, const double* dy, int B, int In,
                           int Out, double* dw, double* db);

// -- batch normalization ---------------------------------------------------

/// Training-mode forward. Computes per-channel batch statistics (biased
/// variance), normalizes, applies affine, and updates running statistics
/// in place: running = momentum * running + (1 - momentum) * batch.
/// Caches xhat and inv_std for the backward pass.
void batchnorm_forward_train(const double* x, int N, int C,
                             const double* gamma, const double* beta,
                             double eps, double momentum, double* running_mean,
                             double* running_var, double* y, double* xhat,
                             double* inv_std);

/// Inference-mode forward using running statistics.
void batchnorm_forward_infer(const double* x, int N, int C,
                             const double* gamma, const double* beta,
                             double eps, const double* running_mean,
                             const double* running_var, double* y);

/// Accumulates into dgamma/dbeta; writes dx.
void batchnorm_backward(const double* dy, const double* xhat,
                        const double* inv_std, int N, int C,
                        const double* gamma, double* dgamma, double* dbeta,
                        double* dx);

// -- elementwise -----------------------------------------------------------

void leakyrelu_forward(const double* x, size_t n, double slope, double* y);
void leakyrelu_backward(const double* dy, const double* x, size_t n,
                        double slope, double* dx);

void tanh_forward(const double* x, size_t n, double* y);
/// dx from dy and the cached forward output y.
void tanh_backward(const double* dy, const double* y, size_t n, double* dx);

namespace ref {

void conv2d_forward(const double* x, int B, int H, int W, int Cin,
                    const double* w, const double* bias, int K, int Cout,
                    double* y);
void conv2d_backward_input(const double* dy, int B, int H, int W, int Cout,
                           const double* w, int K, int Cin, double* dx);
void conv2d_backward_params(const double* x, const double* dy, int B, int H,
                            int W, int Cin, int K, int Cout, double* dw,
                            double* db);

void dense_forward(const double* x, int B, int In, const double* w,
                   const double* bias, int Out, double* y);
void dense_backward_input(const double* dy, int B, int Out, const double* w,
                          int In, double* dx);
void dense_backward_params(const double* x, const double* dy, int B, int In,
                           int Out, double* dw, double* db);

void batchnorm_forward_train(const double* x, int N, int C,
                             const double* gamma, const double* beta,
                             double eps, double momentum, double* running_mean,
                             double* running_var, double* y, double* xhat,
                             double* inv_std);
void batchnorm_forward_infer(const double* x, int N, int C,
                             const double* gamma, const double* beta,
                             double eps, const double* running_mean,
                             const double* running_var, double* y);
void batchnorm_backward(const double* dy, const double* xhat,
                        const double* inv_std, int N, int C,
                        const double* gamma, double* dgamma, double* dbeta,
                        double* dx);

void leakyrelu_forward(const double* x, size_t n, double slope, double* y);
void leakyrelu_backward(const double* dy, const double* x, size_t n,
                        double slope, double* dx);

void tanh_forward(const double* x, size_t n, double* y);
void tanh_backward(const double* dy, const double* y, size_t n, double* dx);

}  // namespace ref

}  // namespace fpnet::nn

#endif  // FPNET_KERNELS_HPP
