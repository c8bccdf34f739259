#include "fpnet/kernels.hpp"

#include <cmath>
#include <cstring>
#include <vector>

#include "fpnet/common.hpp"

namespace fpnet::nn {

namespace {

inline void check_conv_args(int B, int H, int W, int Cin, int K, int Cout) {
  if (B < 0 || H <= 0 || W <= 0 || Cin <= 0 || Cout <= 0)
    throw Error("conv2d: bad dimensions");
  if (K <= 0 || K % 2 == 0) throw Error("conv2d: kernel size must be odd");
}

}  // namespace

// ---------------------------------------------------------------------------
// convolution
// ---------------------------------------------------------------------------

void conv2d_forward(const double* x, int B, int H, int W, int Cin,
                    const double* w, const double* bias, int K, int Cout,
                    double* y) {
  check_conv_args(B, H, W, Cin, K, Cout);
  const int P = (K - 1) / 2;
#pragma omp parallel for schedule(static)
  for (int b = 0; b < B; ++b) {
    for (int oy = 0; oy < H; ++oy) {
      for (int ox = 0; ox < W; ++ox) {
        double* yo = y + (((size_t)b * H + oy) * W + ox) * Cout;
        for (int co = 0; co < Cout; ++co) yo[co] = bias[co];
        for (int ky = 0; ky < K; ++ky) {
          const int iy = oy + ky - P;
          if (iy < 0 || iy >= H) continue;
          for (int kx = 0; kx < K; ++kx) {
            const int ix = ox + kx - P;
            if (ix < 0 || ix >= W) continue;
            const double* xi = x + (((size_t)b * H + iy) * W + ix) * Cin;
            const double* wk = w + (((size_t)ky * K + kx) * Cin) * Cout;
            for (int ci = 0; ci < Cin; ++ci) {
              const double xv = xi[ci];
              const double* wr = wk + (size_t)ci * Cout;
              for (int co = 0; co < Cout; ++co) yo[co] += xv * wr[co];
            }
          }
        }
      }
    }
  }
}

void conv2d_backward_input(const double* dy, int B, int H, int W, int Cout,
                           const double* w, int K, int Cin, double* dx) {
  check_conv_args(B, H, W, Cin, K, Cout);
  const int P = (K - 1) / 2;
#pragma omp parallel for schedule(static)
  for (int b = 0; b < B; ++b) {
    for (int iy = 0; iy < H; ++iy) {
      for (int ix = 0; ix < W; ++ix) {
        double* dxo = dx + (((size_t)b * H + iy) * W + ix) * Cin;
        for (int ci = 0; ci < Cin; ++ci) dxo[ci] = 0.0;
        for (int ky = 0; ky < K; ++ky) {
          const int oy = iy - ky + P;
          if (oy < 0 || oy >= H) continue;
          for (int kx = 0; kx < K; ++kx) {
            const int ox = ix - kx + P;
            if (ox < 0 || ox >= W) continue;
            const double* dyo = dy + (((size_t)b * H + oy) * W + ox) * Cout;
            const double* wk = w + (((size_t)ky * K + kx) * Cin) * Cout;
            for (int ci = 0; ci < Cin; ++ci) {
              const double* wr = wk + (size_t)ci * Cout;
              double acc = 0.0;
              for (int co = 0; co < Cout; ++co) acc += dyo[co] * wr[co];
              dxo[ci] += acc;
            }
          }
        }
      }
    }
  }
}

void conv2d_backward_params(const double* x, const double* dy, int B, int H,
                            int W, int Cin, int K, int Cout, double* dw,
                            double* db) {
  check_conv_args(B, H, W, Cin, K, Cout);
  const int P = (K - 1) / 2;
  // Each (ky, kx, ci) owns one contiguous Cout row of dw; batch and spatial
  // sums run serially in a fixed order inside it, so the result does not
  // depend on the thread partition.
  const int slots = K * K * Cin;
#pragma omp parallel for schedule(static)
  for (int slot = 0; slot < slots; ++slot) {
    const int ky = slot / (K * Cin);
    const int kx = (slot / Cin) % K;
    const int ci = slot % Cin;
    double* dwr = dw + (size_t)slot * Cout;
    for (int b = 0; b < B; ++b) {
      for (int oy = 0; oy < H; ++oy) {
        const int iy = oy + ky - P;
        if (iy < 0 || iy >= H) continue;
        for (int ox = 0; ox < W; ++ox) {
          const int ix = ox + kx - P;
          if (ix < 0 || ix >= W) continue;
          const double xv = x[(((size_t)b * H + iy) * W + ix) * Cin + ci];
          const double* dyo = dy + (((size_t)b * H + oy) * W + ox) * Cout;
          for (int co = 0; co < Cout; ++co) dwr[co] += xv * dyo[co];
        }
      }
    }
  }
  for (int b = 0; b < B; ++b) {
    for (int oy = 0; oy < H; ++oy) {
      for (int ox = 0; ox < W; ++ox) {
        const double* dyo = dy + (((size_t)b * H + oy) * W + ox) * Cout;
        for (int co = 0; co < Cout; ++co) db[co] += dyo[co];
      }
    }
  }
}

// ---------------------------------------------------------------------------
// dense
// ---------------------------------------------------------------------------

void dense_forward(const double* x, int B, int In, const double* w,
                   const double* bias, int Out, double* y) {
#pragma omp parallel for schedule(static)
  for (int b = 0; b < B; ++b) {
    double* yo = y + (size_t)b * Out;
    for (int o = 0; o < Out; ++o) yo[o] = bias[o];
    const double* xb = x + (size_t)b * In;
    for (int i = 0; i < In; ++i) {
      const double xv = xb[i];
      const double* wr = w + (size_t)i * Out;
      for (int o = 0; o < Out; ++o) yo[o] += xv * wr[o];
    }
  }
}

void dense_backward_input(const double* dy, int B, int Out, const double* w,
                          int In, double* dx) {
#pragma omp parallel for schedule(static)
  for (int b = 0; b < B; ++b) {
    const double* dyb = dy + (size_t)b * Out;
    double* dxb = dx + (size_t)b * In;
    for (int i = 0; i < In; ++i) {
      const double* wr = w + (size_t)i * Out;
      double acc = 0.0;
      for (int o = 0; o < Out; ++o) acc += dyb[o] * wr[o];
      dxb[i] = acc;
    }
  }
}

void dense_backward_params(const double* x, const double* dy, int B, int In,
                           int Out, double* dw, double* db) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < In; ++i) {
    double* dwr = dw + (size_t)i * Out;
    for (int b = 0; b < B; ++b) {
      const double xv = x[(size_t)b * In + i];
      const double* dyb = dy + (size_t)b * Out;
      for (int o = 0; o < Out; ++o) dwr[o] += xv * dyb[o];
    }
  }
  for (int b = 0; b < B; ++b) {
    const double* dyb = dy + (size_t)b * Out;
    for (int o = 0; o < Out; ++o) db[o] += dyb[o];
  }
}

// ---------------------------------------------------------------------------
// batch normalization
// ---------------------------------------------------------------------------

void batchnorm_forward_train(const double* x, int N, int C,
                             const double* gamma, const double* beta,
                             double eps, double momentum, double* running_mean,
                             double* running_var, double* y, double* xhat,
                             double* inv_std) {
  if (N <= 0) throw Error("batchnorm: empty batch");
  std::vector<double> mean(C, 0.0), var(C, 0.0);
  for (int n = 0; n < N; ++n) {
    const double* xr = x + (size_t)n * C;
    for (int c = 0; c < C; ++c) mean[c] += xr[c];
  }
  for (int c = 0; c < C; ++c) mean[c] /= N;
  for (int n = 0; n < N; ++n) {
    const double* xr = x + (size_t)n * C;
    for (int c = 0; c < C; ++c) {
      const double d = xr[c] - mean[c];
      var[c] += d * d;
    }
  }
  for (int c = 0; c < C; ++c) {
    var[c] /= N;
    inv_std[c] = 1.0 / std::sqrt(var[c] + eps);
    running_mean[c] = momentum * running_mean[c] + (1.0 - momentum) * mean[c];
    running_var[c] = momentum * running_var[c] + (1.0 - momentum) * var[c];
  }
#pragma omp parallel for schedule(static)
  for (int n = 0; n < N; ++n) {
    const double* xr = x + (size_t)n * C;
    double* yr = y + (size_t)n * C;
    double* hr = xhat + (size_t)n * C;
    for (int c = 0; c < C; ++c) {
      const double h = (xr[c] - mean[c]) * inv_std[c];
      hr[c] = h;
      yr[c] = gamma[c] * h + beta[c];
    }
  }
}

void batchnorm_forward_infer(const double* x, int N, int C,
                             const double* gamma, const double* beta,
                             double eps, const double* running_mean,
                             const double* running_var, double* y) {
  std::vector<double> scale(C), shift(C);
  for (int c = 0; c < C; ++c) {
    scale[c] = gamma[c] / std::sqrt(running_var[c] + eps);
    shift[c] = beta[c] - scale[c] * running_mean[c];
  }
#pragma omp parallel for schedule(static)
  for (int n = 0; n < N; ++n) {
    const double* xr = x + (size_t)n * C;
    double* yr = y + (size_t)n * C;
    for (int c = 0; c < C; ++c) yr[c] = scale[c] * xr[c] + shift[c];
  }
}

void batchnorm_backward(const double* dy, const double* xhat,
                        const double* inv_std, int N, int C,
                        const double* gamma, double* dgamma, double* dbeta,
                        double* dx) {
  std::vector<double> sum_dy(C, 0.0), sum_dy_xhat(C, 0.0);
  for (int n = 0; n < N; ++n) {
    const double* dyr = dy + (size_t)n * C;
    const double* hr = xhat + (size_t)n * C;
    for (int c = 0; c < C; ++c) {
      sum_dy[c] += dyr[c];
      sum_dy_xhat[c] += dyr[c] * hr[c];
    }
  }
  for (int c = 0; c < C; ++c) {
    dbeta[c] += sum_dy[c];
    dgamma[c] += sum_dy_xhat[c];
  }
#pragma omp parallel for schedule(static)
  for (int n = 0; n < N; ++n) {
    const double* dyr = dy + (size_t)n * C;
    const double* hr = xhat + (size_t)n * C;
    double* dxr = dx + (size_t)n * C;
    for (int c = 0; c < C; ++c) {
      dxr[c] = gamma[c] * inv_std[c] *
               (dyr[c] - sum_dy[c] / N - hr[c] * sum_dy_xhat[c] / N);
    }
  }
}

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

void leakyrelu_forward(const double* x, size_t n, double slope, double* y) {
#pragma omp parallel for simd schedule(static)
  for (ptrdiff_t i = 0; i < (ptrdiff_t)n; ++i)
    y[i] = x[i] >= 0.0 ? x[i] : slope * x[i];
}

void leakyrelu_backward(const double* dy, const double* x, size_t n,
                        double slope, double* dx) {
#pragma omp parallel for simd schedule(static)
  for (ptrdiff_t i = 0; i < (ptrdiff_t)n; ++i)
    dx[i] = dy[i] * (x[i] >= 0.0 ? 1.0 : slope);
}

void tanh_forward(const double* x, size_t n, double* y) {
#pragma omp parallel for schedule(static)
  for (ptrdiff_t i = 0; i < (ptrdiff_t)n; ++i) y[i] = std::tanh(x[i]);
}

void tanh_backward(const double* dy, const double* y, size_t n, double* dx) {
#pragma omp parallel for simd schedule(static)
  for (ptrdiff_t i = 0; i < (ptrdiff_t)n; ++i)
    dx[i] = dy[i] * (1.0 - y[i] * y[i]);
}

// ---------------------------------------------------------------------------
// serial reference implementations
// ---------------------------------------------------------------------------
// Straight-line loops, no pragmas, same accumulation order as the parallel
// kernels. Kept for parity tests and the kernel benchmark.

namespace ref {

void conv2d_forward(const double* x, int B, int H, int W, int Cin,
                    const double* w, const double* bias, int K, int Cout,
                    double* y) {
  check_conv_args(B, H, W, Cin, K, Cout);
  const int P = (K - 1) / 2;
  for (int b = 0; b < B; ++b)
    for (int oy = 0; oy < H; ++oy)
      for (int ox = 0; ox < W; ++ox) {
        double* yo = y + (((size_t)b * H + oy) * W + ox) * Cout;
        for (int co = 0; co < Cout; ++co) yo[co] = bias[co];
        for (int ky = 0; ky < K; ++ky) {
          const int iy = oy + ky - P;
          if (iy < 0 || iy >= H) continue;
          for (int kx = 0; kx < K; ++kx) {
            const int ix = ox + kx - P;
            if (ix < 0 || ix >= W) continue;
            const double* xi = x + (((size_t)b * H + iy) * W + ix) * Cin;
            const double* wk = w + (((size_t)ky * K + kx) * Cin) * Cout;
            for (int ci = 0; ci < Cin; ++ci)
              for (int co = 0; co < Cout; ++co)
                yo[co] += xi[ci] * wk[(size_t)ci * Cout + co];
          }
        }
      }
}

void conv2d_backward_input(const double* dy, int B, int H, int W, int Cout,
                           const double* w, int K, int Cin, double* dx) {
  check_conv_args(B, H, W, Cin, K, Cout);
  const int P = (K - 1) / 2;
  for (int b = 0; b < B; ++b)
    for (int iy = 0; iy < H; ++iy)
      for (int ix = 0; ix < W; ++ix) {
        double* dxo = dx + (((size_t)b * H + iy) * W + ix) * Cin;
        for (int ci = 0; ci < Cin; ++ci) dxo[ci] = 0.0;
        for (int ky = 0; ky < K; ++ky) {
          const int oy = iy - ky + P;
          if (oy < 0 || oy >= H) continue;
          for (int kx = 0; kx < K; ++kx) {
            const int ox = ix - kx + P;
            if (ox < 0 || ox >= W) continue;
            const double* dyo = dy + (((size_t)b * H + oy) * W + ox) * Cout;
            const double* wk = w + (((size_t)ky * K + kx) * Cin) * Cout;
            for (int ci = 0; ci < Cin; ++ci) {
              double acc = 0.0;
              for (int co = 0; co < Cout; ++co)
                acc += dyo[co] * wk[(size_t)ci * Cout + co];
              dxo[ci] += acc;
            }
          }
        }
      }
}

void conv2d_backward_params(const double* x, const double* dy, int B, int H,
                            int W, int Cin, int K, int Cout, double* dw,
                            double* db) {
  check_conv_args(B, H, W, Cin, K, Cout);
  const int P = (K - 1) / 2;
  for (int slot = 0; slot < K * K * Cin; ++slot) {
    const int ky = slot / (K * Cin);
    const int kx = (slot / Cin) % K;
    const int ci = slot % Cin;
    double* dwr = dw + (size_t)slot * Cout;
    for (int b = 0; b < B; ++b)
      for (int oy = 0; oy < H; ++oy) {
        const int iy = oy + ky - P;
        if (iy < 0 || iy >= H) continue;
        for (int ox = 0; ox < W; ++ox) {
          const int ix = ox + kx - P;
          if (ix < 0 || ix >= W) continue;
          const double xv = x[(((size_t)b * H + iy) * W + ix) * Cin + ci];
          const double* dyo = dy + (((size_t)b * H + oy) * W + ox) * Cout;
          for (int co = 0; co < Cout; ++co) dwr[co] += xv * dyo[co];
        }
      }
  }
  for (int b = 0; b < B; ++b)
    for (int oy = 0; oy < H; ++oy)
      for (int ox = 0; ox < W; ++ox) {
        const double* dyo = dy + (((size_t)b * H + oy) * W + ox) * Cout;
        for (int co = 0; co < Cout; ++co) db[co] += dyo[co];
      }
}

void dense_forward(const double* x, int B, int In, const double* w,
                   const double* bias, int Out, double* y) {
  for (int b = 0; b < B; ++b) {
    double* yo = y + (size_t)b * Out;
    for (int o = 0; o < Out; ++o) yo[o] = bias[o];
    for (int i = 0; i < In; ++i) {
      const double xv = x[(size_t)b * In + i];
      for (int o = 0; o < Out; ++o) yo[o] += xv * w[(size_t)i * Out + o];
    }
  }
}

void dense_backward_input(const double* dy, int B, int Out, const double* w,
                          int In, double* dx) {
  for (int b = 0; b < B; ++b)
    for (int i = 0; i < In; ++i) {
      double acc = 0.0;
      for (int o = 0; o < Out; ++o)
        acc += dy[(size_t)b * Out + o] * w[(size_t)i * Out + o];
      dx[(size_t)b * In + i] = acc;
    }
}

void dense_backward_params(const double* x, const double* dy, int B, int In,
                           int Out, double* dw, double* db) {
  for (int i = 0; i < In; ++i) {
    double* dwr = dw + (size_t)i * Out;
    for (int b = 0; b < B; ++b) {
      const double xv = x[(size_t)b * In + i];
      const double* dyb = dy + (size_t)b * Out;
      for (int o = 0; o < Out; ++o) dwr[o] += xv * dyb[o];
    }
  }
  for (int b = 0; b < B; ++b)
    for (int o = 0; o < Out; ++o) db[o] += dy[(size_t)b * Out + o];
}

void batchnorm_forward_train(const double* x, int N, int C,
                             const double* gamma, const double* beta,
                             double eps, double momentum, double* running_mean,
                             double* running_var, double* y, double* xhat,
                             double* inv_std) {
  if (N <= 0) throw Error("batchnorm: empty batch");
  std::vector<double> mean(C, 0.0), var(C, 0.0);
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) mean[c] += x[(size_t)n * C + c];
  for (int c = 0; c < C; ++c) mean[c] /= N;
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const double d = x[(size_t)n * C + c] - mean[c];
      var[c] += d * d;
    }
  for (int c = 0; c < C; ++c) {
    var[c] /= N;
    inv_std[c] = 1.0 / std::sqrt(var[c] + eps);
    running_mean[c] = momentum * running_mean[c] + (1.0 - momentum) * mean[c];
    running_var[c] = momentum * running_var[c] + (1.0 - momentum) * var[c];
  }
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const double h = (x[(size_t)n * C + c] - mean[c]) * inv_std[c];
      xhat[(size_t)n * C + c] = h;
      y[(size_t)n * C + c] = gamma[c] * h + beta[c];
    }
}

void batchnorm_forward_infer(const double* x, int N, int C,
                             const double* gamma, const double* beta,
                             double eps, const double* running_mean,
                             const double* running_var, double* y) {
  std::vector<double> scale(C), shift(C);
  for (int c = 0; c < C; ++c) {
    scale[c] = gamma[c] / std::sqrt(running_var[c] + eps);
    shift[c] = beta[c] - scale[c] * running_mean[c];
  }
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      y[(size_t)n * C + c] = scale[c] * x[(size_t)n * C + c] + shift[c];
}

void batchnorm_backward(const double* dy, const double* xhat,
                        const double* inv_std, int N, int C,
                        const double* gamma, double* dgamma, double* dbeta,
                        double* dx) {
  std::vector<double> sum_dy(C, 0.0), sum_dy_xhat(C, 0.0);
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      sum_dy[c] += dy[(size_t)n * C + c];
      sum_dy_xhat[c] += dy[(size_t)n * C + c] * xhat[(size_t)n * C + c];
    }
  for (int c = 0; c < C; ++c) {
    dbeta[c] += sum_dy[c];
    dgamma[c] += sum_dy_xhat[c];
  }
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      dx[(size_t)n * C + c] =
          gamma[c] * inv_std[c] *
          (dy[(size_t)n * C + c] - sum_dy[c] / N -
           xhat[(size_t)n * C + c] * sum_dy_xhat[c] / N);
}

void leakyrelu_forward(const double* x, size_t n, double slope, double* y) {
  for (size_t i = 0; i < n; ++i) y[i] = x[i] >= 0.0 ? x[i] : slope * x[i];
}

void leakyrelu_backward(const double* dy, const double* x, size_t n,
                        double slope, double* dx) {
  for (size_t i = 0; i < n; ++i) dx[i] = dy[i] * (x[i] >= 0.0 ? 1.0 : slope);
}

void tanh_forward(const double* x, size_t n, double* y) {
  for (size_t i = 0; i < n; ++i) y[i] = std::tanh(x[i]);
}

void tanh_backward(const double* dy, const double* y, size_t n, double* dx) {
  for (size_t i = 0; i < n; ++i) dx[i] = dy[i] * (1.0 - y[i] * y[i]);
}

}  // namespace ref

}  // namespace fpnet::nn
