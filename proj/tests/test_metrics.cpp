#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>

#include "fpnet/metrics.hpp"
#include "fpnet/rng.hpp"
#include "json.hpp"

using namespace fpnet;
using namespace fpnet::metrics;
using codec::BfmMatrix;

namespace {

BfmMatrix unit_columns(int n_sc, int n_tx, int n_streams, uint64_t seed) {
  Rng rng(seed);
  BfmMatrix m(n_sc, n_tx, n_streams);
  for (int k = 0; k < n_sc; ++k)
    for (int s = 0; s < n_streams; ++s) {
      double norm = 0;
      std::vector<cplx> col(n_tx);
      for (auto& x : col) {
        x = rng.cgaussian();
        norm += std::norm(x);
      }
      norm = std::sqrt(norm);
      for (int t = 0; t < n_tx; ++t) m.at(k, t, s) = col[t] / norm;
    }
  return m;
}

}  // namespace

TEST_CASE("sgcs is one for identical matrices and zero for orthogonal ones") {
  const BfmMatrix v = unit_columns(6, 3, 2, 1);
  CHECK(sgcs(v, v) == doctest::Approx(1.0).epsilon(1e-14));

  BfmMatrix a(1, 2, 1), b(1, 2, 1);
  a.at(0, 0, 0) = cplx(1, 0);
  b.at(0, 1, 0) = cplx(1, 0);
  CHECK(sgcs(a, b) == doctest::Approx(0.0).epsilon(1e-14));

  // Mean over subcarriers: one aligned and one orthogonal pair -> 1/2.
  BfmMatrix c(2, 2, 1), d(2, 2, 1);
  c.at(0, 0, 0) = cplx(1, 0);
  d.at(0, 0, 0) = cplx(1, 0);
  c.at(1, 0, 0) = cplx(1, 0);
  d.at(1, 1, 0) = cplx(1, 0);
  CHECK(sgcs(c, d) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("sgcs ignores per-column phase and scale") {
  const BfmMatrix v = unit_columns(5, 3, 2, 2);
  Rng rng(3);
  BfmMatrix w = v;
  for (int k = 0; k < w.n_sc; ++k)
    for (int s = 0; s < w.n_streams; ++s) {
      const cplx rot =
          std::polar(rng.uniform(0.2, 3.0), rng.uniform(0.0, 6.28));
      for (int t = 0; t < w.n_tx; ++t) w.at(k, t, s) *= rot;
    }
  CHECK(sgcs(w, v) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("sgcs validates shapes and norms") {
  const BfmMatrix v = unit_columns(2, 3, 1, 4);
  const BfmMatrix w = unit_columns(3, 3, 1, 4);
  CHECK_THROWS_AS(sgcs(v, w), Error);

  BfmMatrix z = v;
  for (int t = 0; t < 3; ++t) z.at(1, t, 0) = cplx(0, 0);
  CHECK_THROWS_AS(sgcs(z, v), Error);
}

TEST_CASE("tensor layout sgcs agrees with the matrix form") {
  const BfmMatrix a = unit_columns(4, 3, 2, 5);
  const BfmMatrix b = unit_columns(4, 3, 2, 6);

  auto flatten = [](const BfmMatrix& m) {
    std::vector<double> out;
    for (int k = 0; k < m.n_sc; ++k)
      for (int t = 0; t < m.n_tx; ++t)
        for (int s = 0; s < m.n_streams; ++s) {
          out.push_back(m.at(k, t, s).real());
          out.push_back(m.at(k, t, s).imag());
        }
    return out;
  };

  const double want = sgcs(a, b);
  CHECK(sgcs_tensor(flatten(a), flatten(b), 4, 3, 2) ==
        doctest::Approx(want).epsilon(1e-13));

  // A leading batch axis averages over samples.
  std::vector<double> a2 = flatten(a), b2 = flatten(b);
  const std::vector<double> fa = flatten(a);
  a2.insert(a2.end(), fa.begin(), fa.end());
  const std::vector<double> fb = flatten(a);  // second pair identical
  b2.insert(b2.end(), fb.begin(), fb.end());
  CHECK(sgcs_tensor(a2, b2, 4, 3, 2) ==
        doctest::Approx(0.5 * (want + 1.0)).epsilon(1e-13));
}

TEST_CASE("link simulation rewards accurate beamforming") {
  sim::SystemConfig sys;
  const sim::EnvironmentModel env = sim::generate_environment(sys, 20, 30, 9);
  const sim::CsiBatch batch = sample_csi(
      env, 7, 1, std::numeric_limits<double>::infinity(), 12);
  const sim::CsiSample& s = batch.samples[0];
  const BfmMatrix v = codec::extract_bfm(s, sys, 1);

  const double inf = std::numeric_limits<double>::infinity();
  // Perfect feedback over a noiseless link: error at the clamp floor.
  const double clean = simulate_link_evm(s, sys, v, inf, 16, 3);
  CHECK(clean <= -60.0);
  CHECK(clean >= -80.0);

  // The dominant singular vector maximizes received power, so steering
  // energy away from it costs post-equalization SNR: with the noise draw
  // held fixed, EVM degrades monotonically with the corruption.
  auto corrupted = [&](double t) {
    BfmMatrix w = v;
    for (int k = 0; k < w.n_sc; ++k) {
      const cplx keep = w.at(k, 0, 0);
      w.at(k, 0, 0) = std::cos(t) * keep;
      w.at(k, 1, 0) += std::sin(t) * std::abs(keep);
    }
    return simulate_link_evm(s, sys, w, 20.0, 16, 3);
  };
  const double e0 = corrupted(0.0), e1 = corrupted(0.2), e2 = corrupted(0.6),
               e3 = corrupted(1.2);
  CHECK(e0 < e1);
  CHECK(e1 < e2);
  CHECK(e2 < e3);

  // Noise dominates when the precoder is exact; same seed reproduces.
  const double noisy = simulate_link_evm(s, sys, v, 25.0, 16, 3);
  CHECK(noisy > clean);
  CHECK(noisy == simulate_link_evm(s, sys, v, 25.0, 16, 3));
  CHECK(noisy != simulate_link_evm(s, sys, v, 25.0, 16, 4));
  // The error floor tracks the configured snr.
  CHECK(noisy > -32.0);
  CHECK(noisy < -20.0);
  CHECK(simulate_link_evm(s, sys, v, 15.0, 16, 3) > noisy);

  SUBCASE("singular effective channel is rejected") {
    sim::CsiSample dead = s;
    for (auto& x : dead.h) x = cplx(0, 0);
    CHECK_THROWS_AS(simulate_link_evm(dead, sys, v, inf, 4, 1), Error);
  }
}

TEST_CASE("corruption raises evm in expectation over many draws") {
  sim::SystemConfig sys;
  const sim::EnvironmentModel env = sim::generate_environment(sys, 20, 30, 9);
  const sim::CsiBatch batch = sample_csi(env, 11, 1, 25.0, 4);
  const sim::CsiSample& s = batch.samples[0];
  const BfmMatrix v = codec::extract_bfm(s, sys, 1);

  Rng rng(99);
  double exact_sum = 0, corrupt_sum = 0;
  const int trials = 1000;
  for (int i = 0; i < trials; ++i) {
    BfmMatrix w = v;
    for (int k = 0; k < w.n_sc; ++k)
      for (int t = 0; t < w.n_tx; ++t)
        w.at(k, t, 0) += 0.25 * rng.cgaussian();
    exact_sum += simulate_link_evm(s, sys, v, 20.0, 2, 1000 + i);
    corrupt_sum += simulate_link_evm(s, sys, w, 20.0, 2, 1000 + i);
  }
  CHECK(corrupt_sum / trials > exact_sum / trials);
}

TEST_CASE("gamma lookup walks the mcs ladder") {
  const McsTable std_t = McsTable::standard_ladder();
  CHECK(gamma_from_evm(-5.0, std_t) == 0.0);
  CHECK(gamma_from_evm(-10.0, std_t) == 1.0);
  CHECK(gamma_from_evm(-11.0, std_t) == 1.0);
  CHECK(gamma_from_evm(-16.5, std_t) == 2.0);
  CHECK(gamma_from_evm(-22.0, std_t) == doctest::Approx(8.0 / 3.0));
  CHECK(gamma_from_evm(-26.0, std_t) == 3.0);
  CHECK(gamma_from_evm(-35.0, std_t) == 4.0);

  const McsTable anchor = McsTable::paper_anchor();
  // The two operating points the table was solved from.
  CHECK(gamma_from_evm(-16.28, anchor) == 2.0);
  CHECK(gamma_from_evm(-20.61, anchor) == 3.0);
  CHECK(gamma_from_evm(-7.0, anchor) == 0.0);
  CHECK(gamma_from_evm(-30.0, anchor) == 4.0);

  CHECK_THROWS_AS(McsTable::by_name("nonsense"), Error);

  McsTable bad{{{-10.0, 1.0}, {-9.0, 2.0}}};  // thresholds must descend
  CHECK_THROWS_AS(bad.validate(), Error);
  McsTable bad2{{{-10.0, 2.0}, {-15.0, 1.0}}};  // gammas must increase
  CHECK_THROWS_AS(bad2.validate(), Error);
}

TEST_CASE("gross throughput anchors") {
  sim::SystemConfig sys;  // 28 valid subcarriers, 64 fft + 16 cp, 40 MHz
  CHECK(gross_throughput(3.0, sys) == 42.0e6);
  CHECK(gross_throughput(2.0, sys) == 28.0e6);
  CHECK(gross_throughput(0.0, sys) == 0.0);
}

TEST_CASE("net throughput matches the airtime algebra") {
  // Oracle with round constants: T = 2400 bits / 28 Mb/s = 85.71 us,
  // overhead = 140 us + 100/6 us; net = r * T / (T + T_ov) ~ 9.90 Mb/s.
  TimingModel t;
  t.t_fixed_overhead_s = 140e-6;
  t.r_ctrl_bps = 6e6;
  const double net = net_throughput(28e6, 100, t);
  CHECK(net > 9.8e6);
  CHECK(net < 10.4e6);
  {
    const double T = 300.0 * 8 / 28e6;
    const double ov = 140e-6 + 100 / 6e6;
    CHECK(net == doctest::Approx(28e6 * T / (T + ov)).epsilon(1e-12));
  }

  // The fitted defaults land on the reference operating points.
  const TimingModel fitted;
  CHECK(net_throughput(28e6, 100, fitted) ==
        doctest::Approx(10.349e6).epsilon(1e-3));
  CHECK(net_throughput(42e6, 672, fitted) ==
        doctest::Approx(8.420e6).epsilon(1e-3));
  CHECK(net_throughput(42e6, 896, fitted) ==
        doctest::Approx(7.570e6).epsilon(1e-3));

  // Structure: overhead only ever hurts, and more feedback bits hurt more.
  CHECK(net_throughput(28e6, 0, fitted) < 28e6);
  double prev = net_throughput(28e6, 0, fitted);
  for (int bits : {64, 128, 512, 1024}) {
    const double r = net_throughput(28e6, bits, fitted);
    CHECK(r < prev);
    prev = r;
  }
  CHECK(net_throughput(0.0, 100, fitted) == 0.0);

  TimingModel bad;
  bad.r_ctrl_bps = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
  TimingModel bad2;
  bad2.payload_bytes = -1;
  CHECK_THROWS_AS(bad2.validate(), Error);
}

TEST_CASE("classification accuracy") {
  CHECK(classification_accuracy({1, 2, 3, 4}, {1, 2, 0, 4}) == 0.75);
  CHECK(classification_accuracy({0}, {0}) == 1.0);
  CHECK_THROWS_AS(classification_accuracy({1}, {1, 2}), Error);
  CHECK_THROWS_AS(classification_accuracy({}, {}), Error);
}

TEST_CASE("confusion counts and rates") {
  const AdMetrics m =
      ad_metrics({true, true, false, false}, {true, false, true, false});
  CHECK(m.tp == 1);
  CHECK(m.fp == 1);
  CHECK(m.fn == 1);
  CHECK(m.tn == 1);
  CHECK(m.tpr == 0.5);
  CHECK(m.fpr == 0.5);
  REQUIRE(m.precision.has_value());
  REQUIRE(m.f1.has_value());
  CHECK(*m.precision == 0.5);
  CHECK(*m.f1 == 0.5);

  // No positive predictions: precision and f1 are undefined.
  const AdMetrics none = ad_metrics({false, false}, {true, false});
  CHECK_FALSE(none.precision.has_value());
  CHECK_FALSE(none.f1.has_value());
  CHECK(none.tpr == 0.0);

  CHECK_THROWS_AS(ad_metrics({true}, {true, false}), Error);

  // Reference operating point: TPR 99.02% at FPR 0.245% on a balanced set
  // gives F1 just under 0.994.
  std::vector<bool> flags, truth;
  for (int i = 0; i < 20000; ++i) {  // positives: 196 missed
    truth.push_back(true);
    flags.push_back(i >= 196);
  }
  for (int i = 0; i < 20000; ++i) {  // negatives: 49 false alarms
    truth.push_back(false);
    flags.push_back(i < 49);
  }
  const AdMetrics ref = ad_metrics(flags, truth);
  CHECK(ref.tpr == doctest::Approx(0.9902));
  CHECK(ref.fpr == doctest::Approx(0.00245));
  CHECK(*ref.f1 == doctest::Approx(0.9938).epsilon(1e-3));
}

TEST_CASE("pca projection finds the dominant direction") {
  // Points along a fixed 10-d direction with tiny isotropic residue.
  Rng rng(8);
  std::vector<double> dir(10);
  for (auto& x : dir) x = rng.gaussian();
  std::vector<std::vector<double>> pts;
  std::vector<double> ts;
  for (int i = 0; i < 60; ++i) {
    const double t = rng.uniform(-2, 2);
    ts.push_back(t);
    std::vector<double> p(10);
    for (int d = 0; d < 10; ++d) p[d] = t * dir[d] + 1e-4 * rng.gaussian();
    pts.push_back(p);
  }

  const PcaResult r = pca_project(pts, 17);
  REQUIRE(r.points.size() == pts.size());
  CHECK(r.explained_variance[0] > 0.999);
  CHECK(r.explained_variance[1] < 1e-3);

  // First coordinate orders the points like their line parameter (up to a
  // global sign).
  double corr = 0;
  for (size_t i = 0; i < pts.size(); ++i) corr += r.points[i][0] * ts[i];
  double mag = 0;
  for (size_t i = 0; i < pts.size(); ++i)
    mag += std::abs(r.points[i][0] * ts[i]);
  CHECK(std::abs(corr) == doctest::Approx(mag).epsilon(1e-6));

  // Deterministic in the seed.
  const PcaResult again = pca_project(pts, 17);
  CHECK(again.points == r.points);

  SUBCASE("zero variance maps to the origin") {
    std::vector<std::vector<double>> flat(5, std::vector<double>(4, 2.5));
    const PcaResult z = pca_project(flat, 1);
    for (const auto& p : z.points) {
      CHECK(p[0] == 0.0);
      CHECK(p[1] == 0.0);
    }
    CHECK(z.explained_variance[0] == 0.0);
  }
  SUBCASE("ragged input is rejected") {
    std::vector<std::vector<double>> bad = {{1, 2}, {1, 2, 3}};
    CHECK_THROWS_AS(pca_project(bad, 1), Error);
  }
}

TEST_CASE("metric rows serialize to json with full precision") {
  MetricsReport row;
  row.method = "type0";
  row.feedback_bits = 672;
  row.sgcs = 0.12345678901234567;
  row.r_net = 8.42e6;
  // accuracy, evm_db, gamma, r_gross, confusion stay absent.

  const nlohmann::json j = nlohmann::json::parse(row.to_json());
  CHECK(j.at("method").get<std::string>() == "type0");
  CHECK(j.at("feedback_bits").get<int>() == 672);
  CHECK(j.at("sgcs").get<double>() == 0.12345678901234567);
  CHECK(j.at("r_net").get<double>() == 8.42e6);
  CHECK_FALSE(j.contains("accuracy"));
  CHECK_FALSE(j.contains("evm_db"));
  CHECK_FALSE(j.contains("confusion"));
}
