// Times the OpenMP kernels against their serial reference twins on
// model-shaped workloads and checks that outputs stay bit-identical.
// Usage: bench_kernels [batch] [reps]

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "fpnet/kernels.hpp"
#include "fpnet/rng.hpp"

using namespace fpnet;

namespace {

double now_s() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

template <class F>
double time_best(F&& fn, int reps) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const double t0 = now_s();
    fn();
    best = std::min(best, now_s() - t0);
  }
  return best;
}

std::vector<double> random_vec(size_t n, uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

bool bits_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

struct Row {
  const char* name;
  double serial_s, parallel_s;
  bool identical;
};

}  // namespace

int main(int argc, char** argv) {
  const int B = argc > 1 ? std::atoi(argv[1]) : 256;
  const int reps = argc > 2 ? std::atoi(argv[2]) : 5;
  const int H = 28, W = 3;  // subcarriers x antennas, as in the model

  std::vector<Row> rows;

  {  // widest residual stage
    const int Cin = 16, Cout = 32, K = 3;
    const auto x = random_vec((size_t)B * H * W * Cin, 1);
    const auto w = random_vec((size_t)K * K * Cin * Cout, 2);
    const auto bias = random_vec(Cout, 3);
    std::vector<double> ys((size_t)B * H * W * Cout), yp(ys.size());
    nn::ref::conv2d_forward(x.data(), B, H, W, Cin, w.data(), bias.data(), K,
                            Cout, ys.data());
    nn::conv2d_forward(x.data(), B, H, W, Cin, w.data(), bias.data(), K, Cout,
                       yp.data());
    const double ts = time_best(
        [&] {
          nn::ref::conv2d_forward(x.data(), B, H, W, Cin, w.data(),
                                  bias.data(), K, Cout, ys.data());
        },
        reps);
    const double tp = time_best(
        [&] {
          nn::conv2d_forward(x.data(), B, H, W, Cin, w.data(), bias.data(), K,
                             Cout, yp.data());
        },
        reps);
    rows.push_back({"conv2d_forward 3x3 16->32", ts, tp, bits_equal(ys, yp)});
  }
  {
    const int Cin = 16, Cout = 32, K = 3;
    const auto dy = random_vec((size_t)B * H * W * Cout, 4);
    const auto w = random_vec((size_t)K * K * Cin * Cout, 5);
    std::vector<double> ds((size_t)B * H * W * Cin), dp(ds.size());
    nn::ref::conv2d_backward_input(dy.data(), B, H, W, Cout, w.data(), K, Cin,
                                   ds.data());
    nn::conv2d_backward_input(dy.data(), B, H, W, Cout, w.data(), K, Cin,
                              dp.data());
    const double ts = time_best(
        [&] {
          nn::ref::conv2d_backward_input(dy.data(), B, H, W, Cout, w.data(),
                                         K, Cin, ds.data());
        },
        reps);
    const double tp = time_best(
        [&] {
          nn::conv2d_backward_input(dy.data(), B, H, W, Cout, w.data(), K,
                                    Cin, dp.data());
        },
        reps);
    rows.push_back(
        {"conv2d_backward_input 3x3 32->16", ts, tp, bits_equal(ds, dp)});
  }
  {
    const int Cin = 16, Cout = 32, K = 3;
    const auto x = random_vec((size_t)B * H * W * Cin, 6);
    const auto dy = random_vec((size_t)B * H * W * Cout, 7);
    std::vector<double> dws((size_t)K * K * Cin * Cout), dbs(Cout);
    std::vector<double> dwp(dws.size()), dbp(Cout);
    nn::ref::conv2d_backward_params(x.data(), dy.data(), B, H, W, Cin, K,
                                    Cout, dws.data(), dbs.data());
    nn::conv2d_backward_params(x.data(), dy.data(), B, H, W, Cin, K, Cout,
                               dwp.data(), dbp.data());
    const bool same = bits_equal(dws, dwp) && bits_equal(dbs, dbp);
    const double ts = time_best(
        [&] {
          std::fill(dws.begin(), dws.end(), 0.0);
          std::fill(dbs.begin(), dbs.end(), 0.0);
          nn::ref::conv2d_backward_params(x.data(), dy.data(), B, H, W, Cin,
                                          K, Cout, dws.data(), dbs.data());
        },
        reps);
    const double tp = time_best(
        [&] {
          std::fill(dwp.begin(), dwp.end(), 0.0);
          std::fill(dbp.begin(), dbp.end(), 0.0);
          nn::conv2d_backward_params(x.data(), dy.data(), B, H, W, Cin, K,
                                     Cout, dwp.data(), dbp.data());
        },
        reps);
    rows.push_back({"conv2d_backward_params 3x3 16->32", ts, tp, same});
  }
  {  // latent projection, batched
    const int In = 168, Out = 512;
    const auto x = random_vec((size_t)B * In, 8);
    const auto w = random_vec((size_t)In * Out, 9);
    const auto bias = random_vec(Out, 10);
    std::vector<double> ys((size_t)B * Out), yp(ys.size());
    nn::ref::dense_forward(x.data(), B, In, w.data(), bias.data(), Out,
                           ys.data());
    nn::dense_forward(x.data(), B, In, w.data(), bias.data(), Out, yp.data());
    const double ts = time_best(
        [&] {
          nn::ref::dense_forward(x.data(), B, In, w.data(), bias.data(), Out,
                                 ys.data());
        },
        reps);
    const double tp = time_best(
        [&] {
          nn::dense_forward(x.data(), B, In, w.data(), bias.data(), Out,
                            yp.data());
        },
        reps);
    rows.push_back({"dense_forward 168->512", ts, tp, bits_equal(ys, yp)});
  }
  {
    const int In = 168, Out = 512;
    const auto x = random_vec((size_t)B * In, 11);
    const auto dy = random_vec((size_t)B * Out, 12);
    std::vector<double> dws((size_t)In * Out), dbs(Out);
    std::vector<double> dwp(dws.size()), dbp(Out);
    nn::ref::dense_backward_params(x.data(), dy.data(), B, In, Out, dws.data(),
                                   dbs.data());
    nn::dense_backward_params(x.data(), dy.data(), B, In, Out, dwp.data(),
                              dbp.data());
    const bool same = bits_equal(dws, dwp) && bits_equal(dbs, dbp);
    const double ts = time_best(
        [&] {
          std::fill(dws.begin(), dws.end(), 0.0);
          std::fill(dbs.begin(), dbs.end(), 0.0);
          nn::ref::dense_backward_params(x.data(), dy.data(), B, In, Out,
                                         dws.data(), dbs.data());
        },
        reps);
    const double tp = time_best(
        [&] {
          std::fill(dwp.begin(), dwp.end(), 0.0);
          std::fill(dbp.begin(), dbp.end(), 0.0);
          nn::dense_backward_params(x.data(), dy.data(), B, In, Out,
                                    dwp.data(), dbp.data());
        },
        reps);
    rows.push_back(
        {"dense_backward_params 168->512", ts, tp, same});
  }
  {
    const int C = 2;
    const int N = B * H * W;
    const auto x = random_vec((size_t)N * C, 13);
    const auto gamma = random_vec(C, 14);
    const auto beta = random_vec(C, 15);
    std::vector<double> ys((size_t)N * C), yp(ys.size());
    std::vector<double> xhs(ys.size()), xhp(ys.size());
    std::vector<double> iss(C), isp(C);
    std::vector<double> rms(C, 0.0), rvs(C, 1.0), rmp(C, 0.0), rvp(C, 1.0);
    nn::ref::batchnorm_forward_train(x.data(), N, C, gamma.data(), beta.data(),
                                     1e-5, 0.9, rms.data(), rvs.data(),
                                     ys.data(), xhs.data(), iss.data());
    nn::batchnorm_forward_train(x.data(), N, C, gamma.data(), beta.data(),
                                1e-5, 0.9, rmp.data(), rvp.data(), yp.data(),
                                xhp.data(), isp.data());
    const bool same = bits_equal(ys, yp) && bits_equal(rms, rmp) &&
                      bits_equal(rvs, rvp);
    const double ts = time_best(
        [&] {
          nn::ref::batchnorm_forward_train(
              x.data(), N, C, gamma.data(), beta.data(), 1e-5, 0.9, rms.data(),
              rvs.data(), ys.data(), xhs.data(), iss.data());
        },
        reps);
    const double tp = time_best(
        [&] {
          nn::batchnorm_forward_train(x.data(), N, C, gamma.data(),
                                      beta.data(), 1e-5, 0.9, rmp.data(),
                                      rvp.data(), yp.data(), xhp.data(),
                                      isp.data());
        },
        reps);
    rows.push_back({"batchnorm_forward_train C=2", ts, tp, same});
  }

#ifdef _OPENMP
  std::printf("threads: %d\n", omp_get_max_threads());
#else
  std::printf("threads: 1 (built without OpenMP)\n");
#endif
  std::printf("batch: %d, reps: %d (best-of)\n\n", B, reps);
  std::printf("%-36s %12s %12s %9s %10s\n", "kernel", "serial (ms)",
              "parallel (ms)", "speedup", "identical");
  bool all_same = true;
  for (const Row& r : rows) {
    std::printf("%-36s %12.3f %12.3f %8.2fx %10s\n", r.name,
                r.serial_s * 1e3, r.parallel_s * 1e3,
                r.serial_s / r.parallel_s, r.identical ? "yes" : "NO");
    all_same = all_same && r.identical;
  }
  if (!all_same) {
    std::fprintf(stderr, "\nmismatch between serial and parallel kernels\n");
    return 1;
  }
  return 0;
}
