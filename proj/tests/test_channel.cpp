#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <set>

#include "fpnet/channel_sim.hpp"

using namespace fpnet;
using namespace fpnet::sim;

namespace {

EnvironmentModel desk_env(uint64_t seed = 11) {
  SystemConfig sys;
  return generate_environment(sys, 20, 30, seed);
}

bool same_bits(const std::vector<cplx>& a, const std::vector<cplx>& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i)
    if (a[i].real() != b[i].real() || a[i].imag() != b[i].imag()) return false;
  return true;
}

}  // namespace

TEST_CASE("twenty zones tile the desk floor as a 4x5 grid") {
  const EnvironmentModel env = desk_env();
  CHECK(env.grid_nx == 4);
  CHECK(env.grid_ny == 5);
  REQUIRE(env.n_zones() == 20);

  const double zw = env.knobs.floor_w / 4, zh = env.knobs.floor_h / 5;
  for (int iy = 0; iy < 5; ++iy)
    for (int ix = 0; ix < 4; ++ix) {
      // Row-major zone order.
      const ZoneRect& z = env.zones[iy * 4 + ix];
      CHECK(z.x0 == doctest::Approx(ix * zw));
      CHECK(z.y0 == doctest::Approx(iy * zh));
      CHECK(z.w == doctest::Approx(zw));
      CHECK(z.h == doctest::Approx(zh));
      CHECK(env.zone_of_position(z.cx(), z.cy()) == iy * 4 + ix);
    }

  // The OOD corridor lies strictly left of the floor.
  CHECK(env.ood_region.x0 + env.ood_region.w <= 0.0);
  CHECK(env.zone_of_position(env.ood_region.cx(), env.ood_region.cy()) ==
        kOodZone);
  CHECK_THROWS_AS(env.zone_of_position(-100.0, -100.0), Error);

  CHECK(env.scatterers.size() == 30);
  CHECK(env.tag == EnvTag::kStatic);
}

TEST_CASE("impossible tilings are rejected") {
  SystemConfig sys;
  // 7 equal rectangles on a 5.2 x 6.5 floor only tile as 1x7 or 7x1, both
  // more elongated than the default aspect cap.
  CHECK_THROWS_AS(generate_environment(sys, 7, 30, 1), Error);
  CHECK_THROWS_AS(generate_environment(sys, 13, 30, 1), Error);
  CHECK_NOTHROW(generate_environment(sys, 5, 30, 1));
  CHECK_NOTHROW(generate_environment(sys, 40, 30, 1));
}

TEST_CASE("environment generation is deterministic in the seed") {
  const EnvironmentModel a = desk_env(3), b = desk_env(3), c = desk_env(4);
  CHECK(a.hash() == b.hash());
  CHECK(a.hash() != c.hash());
  REQUIRE(a.scatterers.size() == c.scatterers.size());
  bool any_differs = false;
  for (size_t i = 0; i < a.scatterers.size(); ++i) {
    CHECK(a.scatterers[i].x == b.scatterers[i].x);
    any_differs |= a.scatterers[i].x != c.scatterers[i].x;
  }
  CHECK(any_differs);
}

TEST_CASE("csi sampling is deterministic and seed-sensitive") {
  const EnvironmentModel env = desk_env();
  const CsiBatch a = sample_csi(env, 3, 8, 25.0, 42);
  const CsiBatch b = sample_csi(env, 3, 8, 25.0, 42);
  const CsiBatch c = sample_csi(env, 3, 8, 25.0, 43);

  REQUIRE(a.size() == 8);
  REQUIRE(b.size() == 8);
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(same_bits(a.samples[i].h, b.samples[i].h));
    CHECK(a.samples[i].pos_x == b.samples[i].pos_x);
    CHECK(a.samples[i].pos_y == b.samples[i].pos_y);
  }
  CHECK_FALSE(same_bits(a.samples[0].h, c.samples[0].h));
  CHECK(a.manifest.config_hash == b.manifest.config_hash);
  CHECK(a.manifest.config_hash != c.manifest.config_hash);
}

TEST_CASE("sampled packets stay in the requested zone's jitter box") {
  const EnvironmentModel env = desk_env();
  const int zone = 9;
  const ZoneRect& z = env.zones[zone];
  const CsiBatch batch = sample_csi(env, zone, 64, 25.0, 7);
  for (const CsiSample& s : batch.samples) {
    CHECK(s.zone_label == zone);
    CHECK(std::abs(s.pos_x - z.cx()) <= env.knobs.jitter_m + 1e-12);
    CHECK(std::abs(s.pos_y - z.cy()) <= env.knobs.jitter_m + 1e-12);
    CHECK(s.snr_db == 25.0);
    CHECK(s.tag == EnvTag::kStatic);
  }

  const CsiBatch ood = sample_csi(env, kOodZone, 16, 25.0, 7);
  for (const CsiSample& s : ood.samples) {
    CHECK(s.zone_label == kOodZone);
    CHECK(env.ood_region.contains(s.pos_x, s.pos_y));
  }
}

TEST_CASE("channel entries carry float32 precision exactly") {
  const EnvironmentModel env = desk_env();
  const CsiBatch batch = sample_csi(env, 0, 4, 20.0, 99);
  for (const CsiSample& s : batch.samples)
    for (const cplx& x : s.h) {
      CHECK(static_cast<double>(static_cast<float>(x.real())) == x.real());
      CHECK(static_cast<double>(static_cast<float>(x.imag())) == x.imag());
    }
}

TEST_CASE("infinite snr disables noise, invalid snr is rejected") {
  const EnvironmentModel env = desk_env();
  const double inf = std::numeric_limits<double>::infinity();

  // Same seed: the noiseless draw differs from the noisy one only by noise,
  // and is reproducible.
  const CsiBatch clean1 = sample_csi(env, 2, 4, inf, 5);
  const CsiBatch clean2 = sample_csi(env, 2, 4, inf, 5);
  const CsiBatch noisy = sample_csi(env, 2, 4, 10.0, 5);
  CHECK(same_bits(clean1.samples[0].h, clean2.samples[0].h));
  CHECK_FALSE(same_bits(clean1.samples[0].h, noisy.samples[0].h));

  CHECK_THROWS_AS(sample_csi(env, 2, 4, -inf, 5), Error);
  CHECK_THROWS_AS(
      sample_csi(env, 2, 4, std::numeric_limits<double>::quiet_NaN(), 5),
      Error);
  CHECK_THROWS_AS(sample_csi(env, 99, 4, 10.0, 5), Error);
}

TEST_CASE("higher snr means smaller deviation from the clean channel") {
  const EnvironmentModel env = desk_env();
  const double inf = std::numeric_limits<double>::infinity();
  const CsiBatch clean = sample_csi(env, 2, 32, inf, 5);

  auto mean_err = [&](double snr) {
    const CsiBatch noisy = sample_csi(env, 2, 32, snr, 5);
    double err = 0, sig = 0;
    for (size_t i = 0; i < noisy.size(); ++i)
      for (size_t j = 0; j < noisy.samples[i].h.size(); ++j) {
        err += std::norm(noisy.samples[i].h[j] - clean.samples[i].h[j]);
        sig += std::norm(clean.samples[i].h[j]);
      }
    return err / sig;
  };

  const double e0 = mean_err(0.0), e10 = mean_err(10.0), e30 = mean_err(30.0);
  CHECK(e0 > e10);
  CHECK(e10 > e30);
  // The relative noise power tracks the configured snr within a factor.
  CHECK(e10 == doctest::Approx(0.1).epsilon(0.5));
}

TEST_CASE("dataset split partitions each zone with largest remainders") {
  const EnvironmentModel env = desk_env();
  std::vector<CsiBatch> parts;
  for (int z = 0; z < 4; ++z)
    parts.push_back(sample_csi(env, z, 120, 25.0, 100 + z));
  const CsiBatch all = merge_batches(parts);
  REQUIRE(all.size() == 480);

  const DatasetSplit split = split_dataset(all, SplitRatios{0.8, 0.1, 0.1}, 9);
  CHECK(split.train.size() == 384);
  CHECK(split.val.size() == 48);
  CHECK(split.test.size() == 48);

  // Stratification: each zone contributes proportionally.
  std::map<int, int> train_per_zone;
  for (const CsiSample& s : split.train.samples) train_per_zone[s.zone_label]++;
  for (int z = 0; z < 4; ++z) CHECK(train_per_zone[z] == 96);

  // The three parts partition the input: every (pos_x, pos_y) pair shows up
  // exactly once across the outputs.
  std::multiset<std::pair<double, double>> seen, want;
  for (const CsiSample& s : all.samples) want.insert({s.pos_x, s.pos_y});
  for (const CsiBatch* b : {&split.train, &split.val, &split.test})
    for (const CsiSample& s : b->samples) seen.insert({s.pos_x, s.pos_y});
  CHECK(seen == want);

  SUBCASE("split is deterministic in its seed") {
    const DatasetSplit again =
        split_dataset(all, SplitRatios{0.8, 0.1, 0.1}, 9);
    REQUIRE(again.train.size() == split.train.size());
    for (size_t i = 0; i < split.train.size(); ++i)
      CHECK(same_bits(again.train.samples[i].h, split.train.samples[i].h));

    const DatasetSplit other =
        split_dataset(all, SplitRatios{0.8, 0.1, 0.1}, 10);
    bool any = false;
    for (size_t i = 0; i < split.train.size(); ++i)
      any |= !same_bits(other.train.samples[i].h, split.train.samples[i].h);
    CHECK(any);
  }
}

TEST_CASE("largest-remainder rounding on a 7-sample zone") {
  const EnvironmentModel env = desk_env();
  const CsiBatch batch = sample_csi(env, 0, 7, 25.0, 77);
  // 7 * (0.5, 0.25, 0.25) = (3.5, 1.75, 1.75): floors (3, 1, 1), the two
  // leftovers go to the largest remainders.
  const DatasetSplit split =
      split_dataset(batch, SplitRatios{0.5, 0.25, 0.25}, 1);
  CHECK(split.train.size() == 3);
  CHECK(split.val.size() == 2);
  CHECK(split.test.size() == 2);
}

TEST_CASE("split rejects zones too small to cover the ratio parts") {
  const EnvironmentModel env = desk_env();
  const CsiBatch tiny = sample_csi(env, 5, 2, 25.0, 4);
  CHECK_THROWS_WITH_AS(split_dataset(tiny, SplitRatios{0.8, 0.1, 0.1}, 1),
                       doctest::Contains("zone"), Error);
  // Zero-ratio parts don't count against the minimum.
  CHECK_NOTHROW(split_dataset(tiny, SplitRatios{0.5, 0.0, 0.5}, 1));
}

TEST_CASE("merge_batches concatenates and rejects mixed radios") {
  const EnvironmentModel env = desk_env();
  const CsiBatch a = sample_csi(env, 0, 3, 25.0, 1);
  const CsiBatch b = sample_csi(env, 1, 5, 25.0, 2);
  const CsiBatch m = merge_batches({a, b});
  CHECK(m.size() == 8);
  CHECK(m.samples[0].zone_label == 0);
  CHECK(m.samples[3].zone_label == 1);

  SystemConfig other;
  other.n_tx = 4;
  const EnvironmentModel env4 = generate_environment(other, 20, 30, 11);
  const CsiBatch c = sample_csi(env4, 0, 2, 25.0, 3);
  CHECK_THROWS_AS(merge_batches({a, c}), Error);
  CHECK_THROWS_AS(merge_batches({}), Error);
}

TEST_CASE("dataset files round trip bit-exactly") {
  const EnvironmentModel env = desk_env();
  const CsiBatch a = sample_csi(env, 4, 6, 25.0, 21);
  const CsiBatch o = sample_csi(env, kOodZone, 3, 25.0, 22);
  const CsiBatch m = merge_batches({a, o});

  const std::string path = "test_channel_roundtrip.fpds";
  write_dataset(m, path);
  const CsiBatch back = read_dataset(path);
  std::remove(path.c_str());

  REQUIRE(back.size() == m.size());
  CHECK(back.manifest.config_hash == m.manifest.config_hash);
  CHECK(back.sys.n_tx == m.sys.n_tx);
  CHECK(back.sys.carrier_hz == m.sys.carrier_hz);
  for (size_t i = 0; i < m.size(); ++i) {
    CHECK(same_bits(back.samples[i].h, m.samples[i].h));
    CHECK(back.samples[i].zone_label == m.samples[i].zone_label);
    CHECK(back.samples[i].snr_db == m.samples[i].snr_db);
    CHECK(back.samples[i].pos_x == m.samples[i].pos_x);
    CHECK(back.samples[i].pos_y == m.samples[i].pos_y);
    CHECK(back.samples[i].tag == m.samples[i].tag);
  }
}

TEST_CASE("perturbation strength scales scatterer movement") {
  const EnvironmentModel env = desk_env();

  const EnvironmentModel same = perturb_environment(env, 0.0, 55);
  CHECK(same.tag == EnvTag::kDynamic);
  for (size_t i = 0; i < env.scatterers.size(); ++i) {
    CHECK(same.scatterers[i].x == env.scatterers[i].x);
    CHECK(same.scatterers[i].y == env.scatterers[i].y);
    CHECK(same.scatterers[i].reflectivity == env.scatterers[i].reflectivity);
  }

  auto mean_move = [&](double intensity) {
    const EnvironmentModel p = perturb_environment(env, intensity, 55);
    // Geometry other than scatterers stays put.
    CHECK(p.ap_x == env.ap_x);
    CHECK(p.ap_y == env.ap_y);
    CHECK(p.zones.size() == env.zones.size());
    double acc = 0;
    for (size_t i = 0; i < env.scatterers.size(); ++i)
      acc += std::hypot(p.scatterers[i].x - env.scatterers[i].x,
                        p.scatterers[i].y - env.scatterers[i].y);
    return acc / env.scatterers.size();
  };

  const double m1 = mean_move(0.1), m3 = mean_move(0.3), m8 = mean_move(0.8);
  CHECK(m1 > 0);
  CHECK(m1 < m3);
  CHECK(m3 < m8);

  CHECK_THROWS_AS(perturb_environment(env, -0.1, 55), Error);
  CHECK_THROWS_AS(perturb_environment(env, 1.5, 55), Error);
}

TEST_CASE("system config json round trip") {
  SystemConfig sys;
  sys.n_tx = 4;
  sys.n_rx = 3;
  sys.n_streams = 2;
  sys.bandwidth_hz = 80e6;
  sys.carrier_hz = 5.0e9;
  const SystemConfig back =
      system_config_from_json_text(system_config_to_json(sys));
  CHECK(back.n_tx == 4);
  CHECK(back.n_rx == 3);
  CHECK(back.n_streams == 2);
  CHECK(back.bandwidth_hz == 80e6);
  CHECK(back.carrier_hz == 5.0e9);
  CHECK(back.n_fft == sys.n_fft);
  CHECK(back.n_cp == sys.n_cp);
  CHECK(back.n_valid_subcarriers == sys.n_valid_subcarriers);

  CHECK_THROWS_AS(system_config_from_json_text("{"), Error);
}
