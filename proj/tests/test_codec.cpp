#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <complex>
#include <vector>

#include "fpnet/bfm_codec.hpp"
#include "fpnet/metrics.hpp"
#include "fpnet/rng.hpp"

using namespace fpnet;
using codec::AngleSet;
using codec::BfmMatrix;
using codec::FeedbackFrame;
using codec::FeedbackType;

namespace {

// Random matrix with orthonormal columns, built by Gram-Schmidt so the test
// does not depend on the library's SVD path.
BfmMatrix random_orthonormal(int n_sc, int n_tx, int n_streams, uint64_t seed) {
  Rng rng(seed);
  BfmMatrix m(n_sc, n_tx, n_streams);
  for (int k = 0; k < n_sc; ++k) {
    for (int s = 0; s < n_streams; ++s) {
      std::vector<cplx> col(n_tx);
      for (auto& x : col) x = rng.cgaussian();
      for (int prev = 0; prev < s; ++prev) {
        cplx dot(0, 0);
        for (int t = 0; t < n_tx; ++t)
          dot += std::conj(m.at(k, t, prev)) * col[t];
        for (int t = 0; t < n_tx; ++t) col[t] -= dot * m.at(k, t, prev);
      }
      double norm = 0;
      for (auto& x : col) norm += std::norm(x);
      norm = std::sqrt(norm);
      for (int t = 0; t < n_tx; ++t) m.at(k, t, s) = col[t] / norm;
    }
  }
  return m;
}

double max_entry_diff(const BfmMatrix& a, const BfmMatrix& b) {
  REQUIRE(a.v.size() == b.v.size());
  double worst = 0;
  for (size_t i = 0; i < a.v.size(); ++i)
    worst = std::max(worst, std::abs(a.v[i] - b.v[i]));
  return worst;
}

AngleSet make_angles(int n_sc, int n_tx, int n_streams,
                     const std::vector<double>& phi,
                     const std::vector<double>& psi) {
  const codec::AngleCount c = codec::angle_count(n_tx, n_streams);
  AngleSet a;
  a.n_sc = n_sc;
  a.n_tx = n_tx;
  a.n_streams = n_streams;
  a.phi_per_sc = c.n_phi;
  a.psi_per_sc = c.n_psi;
  a.phi = phi;
  a.psi = psi;
  return a;
}

}  // namespace

TEST_CASE("angle counts match the standard's table") {
  struct Row {
    int n_tx, n_streams, n_phi, n_psi;
  };
  // (tx, streams) -> angle counts for 2x1 through 4x4.
  const Row table[] = {
      {2, 1, 1, 1}, {2, 2, 1, 1}, {3, 1, 2, 2},  {3, 2, 3, 3}, {3, 3, 3, 3},
      {4, 1, 3, 3}, {4, 2, 5, 5}, {4, 3, 6, 6},  {4, 4, 6, 6},
  };
  for (const Row& r : table) {
    CAPTURE(r.n_tx);
    CAPTURE(r.n_streams);
    const codec::AngleCount c = codec::angle_count(r.n_tx, r.n_streams);
    CHECK(c.n_phi == r.n_phi);
    CHECK(c.n_psi == r.n_psi);
    CHECK(c.bits_type0 == 7 * r.n_phi + 5 * r.n_psi);
    CHECK(c.bits_type1 == 9 * r.n_phi + 7 * r.n_psi);
  }

  CHECK(codec::bits_for(FeedbackType::kType0).b_phi == 7);
  CHECK(codec::bits_for(FeedbackType::kType0).b_psi == 5);
  CHECK(codec::bits_for(FeedbackType::kType1).b_phi == 9);
  CHECK(codec::bits_for(FeedbackType::kType1).b_psi == 7);

  CHECK_THROWS_AS(codec::angle_count(9, 1), Error);
  CHECK_THROWS_AS(codec::angle_count(2, 3), Error);
  CHECK_THROWS_AS(codec::angle_count(0, 0), Error);
}

TEST_CASE("frame totals for the 3x1, 28 subcarrier geometry") {
  CHECK(codec::frame_total_bits(FeedbackType::kType0, 3, 1, 28) == 672);
  CHECK(codec::frame_total_bits(FeedbackType::kType1, 3, 1, 28) == 896);
  // Single subcarrier 2x1: one phi + one psi.
  CHECK(codec::frame_total_bits(FeedbackType::kType0, 2, 1, 1) == 12);
  CHECK(codec::frame_total_bits(FeedbackType::kType1, 2, 1, 1) == 16);
}

TEST_CASE("serialization order interleaves phis and psis sweep by sweep") {
  using E = AngleSet::OrderEntry;
  auto same = [](const std::vector<E>& got,
                 const std::vector<std::pair<bool, int>>& want) {
    REQUIRE(got.size() == want.size());
    for (size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i].is_phi == want[i].first);
      CHECK(got[i].index == want[i].second);
    }
  };
  // 2x1: phi11, psi21.
  same(AngleSet::order(2, 1), {{true, 0}, {false, 0}});
  // 3x1: phi11, phi21, psi21, psi31.
  same(AngleSet::order(3, 1), {{true, 0}, {true, 1}, {false, 0}, {false, 1}});
  // 3x2 adds the second sweep: phi22, psi32.
  same(AngleSet::order(3, 2), {{true, 0},
                               {true, 1},
                               {false, 0},
                               {false, 1},
                               {true, 2},
                               {false, 2}});
  // 4x2: three phis and three psis in sweep 1, then two of each.
  same(AngleSet::order(4, 2), {{true, 0},
                               {true, 1},
                               {true, 2},
                               {false, 0},
                               {false, 1},
                               {false, 2},
                               {true, 3},
                               {true, 4},
                               {false, 3},
                               {false, 4}});
}

TEST_CASE("2x1 Givens angles have a closed form") {
  // v = [a e^{j phi}; b] with a^2 + b^2 = 1 decomposes as
  // phi_11 = phi, psi_21 = atan2(b, a).
  const double a = 0.6, b = 0.8, phi = 0.7;
  BfmMatrix v(1, 2, 1);
  v.at(0, 0, 0) = std::polar(a, phi);
  v.at(0, 1, 0) = cplx(b, 0);

  const AngleSet angles = codec::givens_decompose(v);
  REQUIRE(angles.phi_per_sc == 1);
  REQUIRE(angles.psi_per_sc == 1);
  CHECK(angles.phi_at(0, 0) == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(angles.psi_at(0, 0) ==
        doctest::Approx(0.9272952180016122).epsilon(1e-12));

  const BfmMatrix back = codec::givens_reconstruct(angles);
  CHECK(max_entry_diff(back, v) < 1e-12);
}

TEST_CASE("3x1 Givens angles have a closed form") {
  // v = [a e^{j alpha}; b e^{j beta}; c]: psi_31 = asin(c),
  // psi_21 = atan2(b, a), phi_11 = alpha, phi_21 = beta.
  const double a = 0.48, b = 0.36, c = 0.8;
  BfmMatrix v(1, 3, 1);
  v.at(0, 0, 0) = std::polar(a, 1.1);
  v.at(0, 1, 0) = std::polar(b, 2.2);
  v.at(0, 2, 0) = cplx(c, 0);

  const AngleSet angles = codec::givens_decompose(v);
  REQUIRE(angles.phi_per_sc == 2);
  REQUIRE(angles.psi_per_sc == 2);
  CHECK(angles.phi_at(0, 0) == doctest::Approx(1.1).epsilon(1e-12));
  CHECK(angles.phi_at(0, 1) == doctest::Approx(2.2).epsilon(1e-12));
  CHECK(angles.psi_at(0, 0) ==
        doctest::Approx(0.6435011087932844).epsilon(1e-12));
  CHECK(angles.psi_at(0, 1) ==
        doctest::Approx(0.9272952180016122).epsilon(1e-12));

  const BfmMatrix back = codec::givens_reconstruct(angles);
  CHECK(max_entry_diff(back, v) < 1e-12);
}

TEST_CASE("reconstruction matches an explicit Givens product") {
  // Build the expected 3x2 matrix directly from the rotation product,
  // independent of the library implementation.
  const double p11 = 0.4, p21 = 2.9, p22 = 5.1;
  const double s21 = 0.5, s31 = 1.1, s32 = 0.3;

  auto matmul = [](const std::vector<cplx>& a, const std::vector<cplx>& b) {
    std::vector<cplx> out(9, cplx(0, 0));
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k) out[i * 3 + j] += a[i * 3 + k] * b[k * 3 + j];
    return out;
  };
  auto givens_t = [](int l, int i, double psi) {
    std::vector<cplx> g(9, cplx(0, 0));
    g[0] = g[4] = g[8] = cplx(1, 0);
    g[i * 3 + i] = std::cos(psi);
    g[i * 3 + l] = -std::sin(psi);
    g[l * 3 + i] = std::sin(psi);
    g[l * 3 + l] = std::cos(psi);
    return g;
  };
  auto diag = [](cplx d0, cplx d1, cplx d2) {
    std::vector<cplx> m(9, cplx(0, 0));
    m[0] = d0;
    m[4] = d1;
    m[8] = d2;
    return m;
  };

  std::vector<cplx> prod = diag(std::polar(1.0, p11), std::polar(1.0, p21),
                                cplx(1, 0));
  prod = matmul(prod, givens_t(1, 0, s21));
  prod = matmul(prod, givens_t(2, 0, s31));
  prod = matmul(prod, diag(cplx(1, 0), std::polar(1.0, p22), cplx(1, 0)));
  prod = matmul(prod, givens_t(2, 1, s32));

  const AngleSet angles =
      make_angles(1, 3, 2, {p11, p21, p22}, {s21, s31, s32});
  const BfmMatrix got = codec::givens_reconstruct(angles);
  for (int t = 0; t < 3; ++t)
    for (int s = 0; s < 2; ++s) {
      CHECK(std::abs(got.at(0, t, s) - prod[t * 3 + s]) < 1e-12);
    }

  // And the inverse recovers the angles.
  const AngleSet back = codec::givens_decompose(got);
  for (int i = 0; i < 3; ++i) {
    CHECK(back.phi[i] == doctest::Approx(angles.phi[i]).epsilon(1e-10));
    CHECK(back.psi[i] == doctest::Approx(angles.psi[i]).epsilon(1e-10));
  }
}

TEST_CASE("reconstruct rejects out-of-range angles") {
  CHECK_THROWS_AS(
      codec::givens_reconstruct(make_angles(1, 2, 1, {-0.1}, {0.3})), Error);
  CHECK_THROWS_AS(
      codec::givens_reconstruct(make_angles(1, 2, 1, {6.30}, {0.3})), Error);
  CHECK_THROWS_AS(
      codec::givens_reconstruct(make_angles(1, 2, 1, {0.5}, {2.0})), Error);
  CHECK_THROWS_AS(
      codec::givens_reconstruct(make_angles(1, 2, 1, {0.5}, {-0.01})), Error);
}

TEST_CASE("decompose requires a canonical last row") {
  BfmMatrix v(1, 2, 1);
  v.at(0, 0, 0) = cplx(0.6, 0);
  v.at(0, 1, 0) = cplx(0, 0.8);
  CHECK_THROWS_AS(codec::givens_decompose(v), Error);
}

TEST_CASE("canonicalize makes last-row entries real nonnegative") {
  BfmMatrix v = random_orthonormal(6, 3, 2, 77);
  // Random extra column phases to undo.
  Rng rng(78);
  for (int k = 0; k < v.n_sc; ++k)
    for (int s = 0; s < v.n_streams; ++s) {
      const cplx rot = std::polar(1.0, rng.uniform(0, 2 * kPi));
      for (int t = 0; t < v.n_tx; ++t) v.at(k, t, s) *= rot;
    }

  const BfmMatrix c = codec::canonicalized(v);
  for (int k = 0; k < v.n_sc; ++k)
    for (int s = 0; s < v.n_streams; ++s) {
      const cplx last = c.at(k, v.n_tx - 1, s);
      CHECK(std::abs(last.imag()) < 1e-14);
      CHECK(last.real() >= -1e-14);
      // Entry magnitudes are untouched.
      for (int t = 0; t < v.n_tx; ++t)
        CHECK(std::abs(c.at(k, t, s)) ==
              doctest::Approx(std::abs(v.at(k, t, s))).epsilon(1e-12));
    }

  // Idempotent.
  const BfmMatrix c2 = codec::canonicalized(c);
  CHECK(max_entry_diff(c2, c) == 0.0);
}

TEST_CASE("decompose/reconstruct round trip on random matrices") {
  for (uint64_t seed = 0; seed < 40; ++seed) {
    for (int streams : {1, 2}) {
      const BfmMatrix v =
          codec::canonicalized(random_orthonormal(4, 3, streams, 1000 + seed));
      const BfmMatrix back =
          codec::givens_reconstruct(codec::givens_decompose(v));
      CAPTURE(seed);
      CAPTURE(streams);
      CHECK(max_entry_diff(back, v) < 1e-9);
    }
  }
  // Wider array.
  for (uint64_t seed = 0; seed < 10; ++seed) {
    const BfmMatrix v =
        codec::canonicalized(random_orthonormal(2, 4, 2, 2000 + seed));
    const BfmMatrix back =
        codec::givens_reconstruct(codec::givens_decompose(v));
    CHECK(max_entry_diff(back, v) < 1e-9);
  }
}

TEST_CASE("angle quantizer lands on mid-level grid points") {
  // Type 0: 7-bit phi over [0, 2pi), 5-bit psi over [0, pi/2].
  const AngleSet a = make_angles(1, 2, 1, {3.0}, {1.0});
  const FeedbackFrame f = codec::quantize_angles(a, FeedbackType::kType0);
  CHECK(f.b_phi == 7);
  CHECK(f.b_psi == 5);
  // 12 angle bits pad to two wire bytes.
  CHECK(f.payload_bits() == 16);
  CHECK(f.payload.size() == 2);

  const AngleSet back = codec::dequantize_angles(f);
  // floor(3.0 * 128 / 2pi) = 61 -> (2*61+1) pi / 128.
  CHECK(back.phi_at(0, 0) == doctest::Approx(123 * kPi / 128).epsilon(1e-12));
  // floor(1.0 * 64 / pi) = 20 -> (2*20+1) pi / 128.
  CHECK(back.psi_at(0, 0) == doctest::Approx(41 * kPi / 128).epsilon(1e-12));

  // Quantization error is bounded by half a step.
  CHECK(std::abs(back.phi_at(0, 0) - 3.0) <= kPi / 128 + 1e-12);
  CHECK(std::abs(back.psi_at(0, 0) - 1.0) <= kPi / 128 + 1e-12);

  // Extremes: phi = 0 maps to the first level, psi = pi/2 clamps to the top.
  const AngleSet edges = make_angles(1, 2, 1, {0.0}, {kPi / 2});
  const AngleSet eb =
      codec::dequantize_angles(codec::quantize_angles(edges, FeedbackType::kType0));
  CHECK(eb.phi_at(0, 0) == doctest::Approx(kPi / 128).epsilon(1e-12));
  CHECK(eb.psi_at(0, 0) == doctest::Approx(63 * kPi / 128).epsilon(1e-12));
}

TEST_CASE("quantize of dequantize is bit-exact") {
  Rng rng(5150);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> phi(3 * 3), psi(3 * 3);
    for (auto& x : phi) x = rng.uniform(0, 2 * kPi);
    for (auto& x : psi) x = rng.uniform(0, kPi / 2);
    const AngleSet a = make_angles(3, 3, 2, phi, psi);
    for (FeedbackType kind : {FeedbackType::kType0, FeedbackType::kType1}) {
      const FeedbackFrame f1 = codec::quantize_angles(a, kind);
      const FeedbackFrame f2 =
          codec::quantize_angles(codec::dequantize_angles(f1), kind);
      CHECK(f1.payload == f2.payload);
    }
  }
}

TEST_CASE("payload packs indices LSB-first in table order") {
  // One 2x1 subcarrier, Type 0: 7-bit phi index 85, 5-bit psi index 21.
  // Expected bytes: 0x55 | (21 & 1) << 7 = 0xD5, then 21 >> 1 = 0x0A.
  const AngleSet a =
      make_angles(1, 2, 1, {171 * kPi / 128}, {43 * kPi / 128});
  const FeedbackFrame f = codec::quantize_angles(a, FeedbackType::kType0);
  REQUIRE(f.payload.size() == 2);
  CHECK(f.payload[0] == 0xD5);
  CHECK(f.payload[1] == 0x0A);
}

TEST_CASE("wire frame round trip and validation") {
  const BfmMatrix v = codec::canonicalized(random_orthonormal(28, 3, 1, 31));
  const FeedbackFrame f =
      codec::quantize_angles(codec::givens_decompose(v), FeedbackType::kType1);
  CHECK(f.payload_bits() == 896);

  const std::vector<uint8_t> bytes = codec::serialize_frame(f);
  CHECK(bytes.size() == 3 + f.payload.size());
  CHECK(bytes[0] == 1);  // kind
  CHECK(bytes[1] == 28); // subcarrier count, little endian
  CHECK(bytes[2] == 0);

  const FeedbackFrame g = codec::parse_frame(bytes, 3, 1);
  CHECK(g.kind == f.kind);
  CHECK(g.b_phi == f.b_phi);
  CHECK(g.b_psi == f.b_psi);
  CHECK(g.n_subcarriers == f.n_subcarriers);
  CHECK(g.payload == f.payload);

  // Dequantized angles survive the wire unchanged.
  const AngleSet a1 = codec::dequantize_angles(f);
  const AngleSet a2 = codec::dequantize_angles(g);
  CHECK(a1.phi == a2.phi);
  CHECK(a1.psi == a2.psi);

  SUBCASE("bad kind byte") {
    std::vector<uint8_t> bad = bytes;
    bad[0] = 2;
    CHECK_THROWS_AS(codec::parse_frame(bad, 3, 1), Error);
  }
  SUBCASE("truncated payload") {
    std::vector<uint8_t> bad(bytes.begin(), bytes.end() - 1);
    CHECK_THROWS_AS(codec::parse_frame(bad, 3, 1), Error);
  }
  SUBCASE("trailing bytes") {
    std::vector<uint8_t> bad = bytes;
    bad.push_back(0);
    CHECK_THROWS_AS(codec::parse_frame(bad, 3, 1), Error);
  }
  SUBCASE("too short for a header") {
    CHECK_THROWS_AS(codec::parse_frame({1, 0}, 3, 1), Error);
  }
}

TEST_CASE("subcarrier decimation keeps every g-th entry") {
  std::vector<double> phi(7), psi(7);
  for (int k = 0; k < 7; ++k) {
    phi[k] = 0.1 * k;
    psi[k] = 0.05 + 0.05 * k;
  }
  const AngleSet a = make_angles(7, 2, 1, phi, psi);

  SUBCASE("group of one is the identity") {
    const AngleSet d = codec::decimate_subcarriers(a, 1);
    CHECK(d.phi == a.phi);
    CHECK(d.psi == a.psi);
    const AngleSet e = codec::expand_subcarriers(d, 1, 7);
    CHECK(e.phi == a.phi);
  }
  SUBCASE("group of two") {
    const AngleSet d = codec::decimate_subcarriers(a, 2);
    REQUIRE(d.n_sc == 4);
    CHECK(d.phi == std::vector<double>{phi[0], phi[2], phi[4], phi[6]});
    const AngleSet e = codec::expand_subcarriers(d, 2, 7);
    REQUIRE(e.n_sc == 7);
    CHECK(e.phi == std::vector<double>{phi[0], phi[0], phi[2], phi[2],
                                       phi[4], phi[4], phi[6]});
  }
  SUBCASE("group of three") {
    const AngleSet d = codec::decimate_subcarriers(a, 3);
    REQUIRE(d.n_sc == 3);
    CHECK(d.phi == std::vector<double>{phi[0], phi[3], phi[6]});
    const AngleSet e = codec::expand_subcarriers(d, 3, 7);
    CHECK(e.phi == std::vector<double>{phi[0], phi[0], phi[0], phi[3],
                                       phi[3], phi[3], phi[6]});
  }
}

TEST_CASE("svd reconstructs the input") {
  Rng rng(4242);
  for (int rep = 0; rep < 20; ++rep) {
    const int n_rx = 2, n_tx = 3;
    std::vector<cplx> h(n_rx * n_tx);
    for (auto& x : h) x = rng.cgaussian();

    const codec::SvdResult r = codec::svd(h.data(), n_rx, n_tx);
    REQUIRE((int)r.sigma.size() == 2);
    CHECK(r.sigma[0] >= r.sigma[1]);
    CHECK(r.sigma[1] >= 0);

    // H = sum_k sigma_k u_k v_k^H.
    for (int i = 0; i < n_rx; ++i)
      for (int j = 0; j < n_tx; ++j) {
        cplx acc(0, 0);
        for (int k = 0; k < 2; ++k)
          acc += r.sigma[k] * r.u_at(i, k) * std::conj(r.v_at(j, k));
        CHECK(std::abs(acc - h[i * n_tx + j]) < 1e-10);
      }

    // v_full is unitary.
    for (int a = 0; a < n_tx; ++a)
      for (int b = 0; b < n_tx; ++b) {
        cplx acc(0, 0);
        for (int t = 0; t < n_tx; ++t)
          acc += std::conj(r.v_at(t, a)) * r.v_at(t, b);
        CHECK(std::abs(acc - (a == b ? cplx(1, 0) : cplx(0, 0))) < 1e-10);
      }
  }
}

TEST_CASE("extract_bfm picks the dominant right singular vectors") {
  sim::SystemConfig sys;
  sys.n_tx = 3;
  sys.n_rx = 2;
  sys.n_valid_subcarriers = 1;

  sim::CsiSample s;
  s.h.assign(sys.entries_per_sample(), cplx(0, 0));
  // H = [[1,0,0],[0,0.5,0]]: right singular vectors e1, e2.
  s.at(0, 0, 0, sys) = cplx(1, 0);
  s.at(0, 1, 1, sys) = cplx(0.5, 0);

  const BfmMatrix v = codec::extract_bfm(s, sys, 2);
  REQUIRE(v.n_streams == 2);
  CHECK(std::abs(v.at(0, 0, 0) - cplx(1, 0)) < 1e-12);
  CHECK(std::abs(v.at(0, 1, 1) - cplx(1, 0)) < 1e-12);
  CHECK(std::abs(v.at(0, 2, 0)) < 1e-12);
  CHECK(std::abs(v.at(0, 2, 1)) < 1e-12);

  SUBCASE("rank-deficient channel is rejected by name") {
    sim::CsiSample bad;
    bad.h.assign(sys.entries_per_sample(), cplx(0, 0));
    for (int t = 0; t < 3; ++t) {
      bad.at(0, 0, t, sys) = cplx(1.0 + t, 0);
      bad.at(0, 1, t, sys) = cplx(2.0 * (1.0 + t), 0);  // row 2 = 2 x row 1
    }
    CHECK_THROWS_WITH_AS(codec::extract_bfm(bad, sys, 2),
                         doctest::Contains("subcarrier"), Error);
  }
}

TEST_CASE("codec round trip preserves high similarity") {
  double acc0 = 0, acc1 = 0;
  const int reps = 40;
  for (int rep = 0; rep < reps; ++rep) {
    const BfmMatrix v =
        codec::canonicalized(random_orthonormal(8, 3, 1, 9000 + rep));
    const BfmMatrix r0 = codec::codec_roundtrip(v, FeedbackType::kType0);
    const BfmMatrix r1 = codec::codec_roundtrip(v, FeedbackType::kType1);
    acc0 += metrics::sgcs(r0, v);
    acc1 += metrics::sgcs(r1, v);
  }
  acc0 /= reps;
  acc1 /= reps;
  CHECK(acc0 > 0.99);
  CHECK(acc1 > 0.999);
  CHECK(acc1 >= acc0);
}
