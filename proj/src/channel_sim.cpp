#include "fpnet/channel_sim.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "json.hpp"

#include "fpnet/container.hpp"
#include "fpnet/hash.hpp"
#include "fpnet/rng.hpp"

namespace fpnet::sim {

using njson = nlohmann::json;

// ---------------------------------------------------------------------------
// SystemConfig
// ---------------------------------------------------------------------------

void SystemConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v <= 0) throw Error(std::string("SystemConfig: ") + name +
                            " must be positive, got " + std::to_string(v));
  };
  positive(n_tx, "n_tx");
  positive(n_rx, "n_rx");
  positive(n_streams, "n_streams");
  positive(n_valid_subcarriers, "n_valid_subcarriers");
  positive(n_fft, "n_fft");
  if (n_cp < 0) throw Error("SystemConfig: n_cp must be nonnegative");
  if (n_streams > std::min(n_tx, n_rx))
    throw Error("SystemConfig: n_streams exceeds min(n_tx, n_rx)");
  if (n_valid_subcarriers > n_fft)
    throw Error("SystemConfig: n_valid_subcarriers exceeds n_fft");
  if (!(bandwidth_hz > 0) || !std::isfinite(bandwidth_hz))
    throw Error("SystemConfig: bandwidth_hz must be positive and finite");
  if (!(carrier_hz > 0) || !std::isfinite(carrier_hz))
    throw Error("SystemConfig: carrier_hz must be positive and finite");
}

std::string system_config_to_json(const SystemConfig& sys) {
  njson j;
  j["n_tx"] = sys.n_tx;
  j["n_rx"] = sys.n_rx;
  j["n_streams"] = sys.n_streams;
  j["n_valid_subcarriers"] = sys.n_valid_subcarriers;
  j["bandwidth_hz"] = sys.bandwidth_hz;
  j["n_fft"] = sys.n_fft;
  j["n_cp"] = sys.n_cp;
  j["carrier_hz"] = sys.carrier_hz;
  return j.dump();
}

SystemConfig system_config_from_json_text(const std::string& json_text) {
  try {
    njson j = njson::parse(json_text);
    SystemConfig sys;
    sys.n_tx = j.at("n_tx").get<int>();
    sys.n_rx = j.at("n_rx").get<int>();
    sys.n_streams = j.at("n_streams").get<int>();
    sys.n_valid_subcarriers = j.at("n_valid_subcarriers").get<int>();
    sys.bandwidth_hz = j.at("bandwidth_hz").get<double>();
    sys.n_fft = j.at("n_fft").get<int>();
    sys.n_cp = j.at("n_cp").get<int>();
    sys.carrier_hz = j.at("carrier_hz").get<double>();
    sys.validate();
    return sys;
  } catch (const njson::exception& e) {
    throw Error(std::string("system config: malformed json: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// EnvironmentModel
// ---------------------------------------------------------------------------

int EnvironmentModel::zone_of_position(double x, double y) const {
  if (x >= 0 && x <= knobs.floor_w && y >= 0 && y <= knobs.floor_h) {
    const double zw = knobs.floor_w / grid_nx;
    const double zh = knobs.floor_h / grid_ny;
    const int ix = std::min(static_cast<int>(x / zw), grid_nx - 1);
    const int iy = std::min(static_cast<int>(y / zh), grid_ny - 1);
    return iy * grid_nx + ix;
  }
  const ZoneRect& o = ood_region;
  if (x >= o.x0 && x <= o.x0 + o.w && y >= o.y0 && y <= o.y0 + o.h)
    return kOodZone;
  throw Error("zone_of_position: point (" + std::to_string(x) + ", " +
              std::to_string(y) + ") is outside the floor and OOD region");
}

std::string EnvironmentModel::hash() const {
  Fnv1a h;
  h.update(system_config_to_json(sys));
  for (const auto& z : zones) {
    h.update_pod(z.x0).update_pod(z.y0).update_pod(z.w).update_pod(z.h);
  }
  for (const auto& s : scatterers) {
    h.update_pod(s.x).update_pod(s.y);
    h.update_pod(s.reflectivity.real()).update_pod(s.reflectivity.imag());
  }
  h.update_pod(ap_x).update_pod(ap_y);
  h.update_pod(ood_region.x0).update_pod(ood_region.y0);
  h.update_pod(ood_region.w).update_pod(ood_region.h);
  h.update_pod(seed);
  h.update_pod(static_cast<uint8_t>(tag));
  h.update_pod(knobs.floor_w).update_pod(knobs.floor_h);
  h.update_pod(knobs.jitter_m).update_pod(knobs.antenna_spacing_wl);
  h.update_pod(knobs.scatter_gain);
  h.update_pod(knobs.scatter_ring_min_m).update_pod(knobs.scatter_ring_max_m);
  return h.hex();
}

namespace {

/// Best (nx, ny) grid for n_zones on the floor: the factorization whose zone
/// aspect ratio is closest to square. Throws if even the best one is more
/// elongated than knobs.max_zone_aspect.
std::pair<int, int> choose_grid(int n_zones, const EnvKnobs& knobs) {
  if (n_zones < 2) throw Error("generate_environment: n_zones must be >= 2");
  int best_nx = -1, best_ny = -1;
  double best_score = 0.0;
  for (int nx = 1; nx <= n_zones; ++nx) {
    if (n_zones % nx != 0) continue;
    const int ny = n_zones / nx;
    const double aspect =
        (knobs.floor_w / nx) / (knobs.floor_h / ny);
    const double score = std::abs(std::log(aspect));
    if (best_nx < 0 || score < best_score) {
      best_nx = nx;
      best_ny = ny;
      best_score = score;
    }
  }
  const double best_aspect =
      (knobs.floor_w / best_nx) / (knobs.floor_h / best_ny);
  if (best_aspect > knobs.max_zone_aspect ||
      best_aspect < 1.0 / knobs.max_zone_aspect)
    throw Error("generate_environment: " + std::to_string(n_zones) +
                " zones cannot tile the " + std::to_string(knobs.floor_w) +
                "x" + std::to_string(knobs.floor_h) +
                " floor into acceptable rectangles (best aspect " +
                std::to_string(best_aspect) + ")");
  return {best_nx, best_ny};
}

}  // namespace

EnvironmentModel generate_environment(const SystemConfig& sys, int n_zones,
                                      int n_scatterers, uint64_t seed) {
  return generate_environment(sys, n_zones, n_scatterers, seed, EnvKnobs{});
}

EnvironmentModel generate_environment(const SystemConfig& sys, int n_zones,
                                      int n_scatterers, uint64_t seed,
                                      const EnvKnobs& knobs) {
  sys.validate();
  if (n_scatterers < 1)
    throw Error("generate_environment: n_scatterers must be >= 1");
  EnvironmentModel env;
  env.sys = sys;
  env.seed = seed;
  env.knobs = knobs;
  auto [nx, ny] = choose_grid(n_zones, knobs);
  env.grid_nx = nx;
  env.grid_ny = ny;
  const double zw = knobs.floor_w / nx;
  const double zh = knobs.floor_h / ny;
  env.zones.reserve((size_t)n_zones);
  for (int iy = 0; iy < ny; ++iy)
    for (int ix = 0; ix < nx; ++ix)
      env.zones.push_back({ix * zw, iy * zh, zw, zh});

  env.ap_x = 0.5 * knobs.floor_w;
  env.ap_y = knobs.floor_h + knobs.ap_offset_m;
  env.ood_region = {-(knobs.corridor_gap_m + knobs.corridor_w_m), 0.0,
                    knobs.corridor_w_m, knobs.floor_h};

  if (!(knobs.scatter_ring_min_m > 0.0 &&
        knobs.scatter_ring_max_m >= knobs.scatter_ring_min_m))
    throw Error("generate_environment: scatter ring must satisfy 0 < min <= max");
  Rng rng(derive_seed(seed, 0x5ca77e12));
  env.scatterers.reserve((size_t)n_scatterers);
  const double cx = 0.5 * knobs.floor_w, cy = 0.5 * knobs.floor_h;
  for (int s = 0; s < n_scatterers; ++s) {
    Scatterer sc;
    const double r =
        rng.uniform(knobs.scatter_ring_min_m, knobs.scatter_ring_max_m);
    const double th = rng.uniform(0.0, kTwoPi);
    sc.x = cx + r * std::cos(th);
    sc.y = cy + r * std::sin(th);
    sc.reflectivity = rng.cgaussian();
    env.scatterers.push_back(sc);
  }
  return env;
}

EnvironmentModel perturb_environment(const EnvironmentModel& env,
                                     double intensity, uint64_t seed) {
  if (!(intensity >= 0.0 && intensity <= 1.0))
    throw Error("perturb_environment: intensity must be in [0,1], got " +
                std::to_string(intensity));
  EnvironmentModel out = env;
  out.tag = EnvTag::kDynamic;
  if (intensity == 0.0) return out;
  Rng rng(derive_seed(seed, 0xd11f7));
  const double pos_scale = 1.5;  // meters of scatterer motion at intensity 1
  // Reflectivity blends toward a fresh draw; the normalizer keeps unit
  // mean power at every intensity.
  const double a = 1.0 - intensity;
  const double b = intensity;
  const double norm = std::sqrt(a * a + b * b);
  for (auto& s : out.scatterers) {
    s.x += intensity * pos_scale * rng.gaussian();
    s.y += intensity * pos_scale * rng.gaussian();
    s.reflectivity = (a * s.reflectivity + b * rng.cgaussian()) / norm;
  }
  return out;
}

// ---------------------------------------------------------------------------
// sample_csi
// ---------------------------------------------------------------------------

namespace {

double f32_round(double v) { return static_cast<double>(static_cast<float>(v)); }

void synthesize_packet(const EnvironmentModel& env, const ZoneRect& region,
                       bool is_ood, double snr_db, uint64_t packet_seed,
                       CsiSample& out) {
  const SystemConfig& sys = env.sys;
  Rng rng(packet_seed);

  double px, py;
  if (is_ood) {
    px = rng.uniform(region.x0, region.x0 + region.w);
    py = rng.uniform(region.y0, region.y0 + region.h);
  } else {
    const double j = env.knobs.jitter_m;
    px = region.cx() + rng.uniform(-j, j);
    py = region.cy() + rng.uniform(-j, j);
    px = std::clamp(px, region.x0 + 1e-6, region.x0 + region.w - 1e-6);
    py = std::clamp(py, region.y0 + 1e-6, region.y0 + region.h - 1e-6);
  }
  out.pos_x = px;
  out.pos_y = py;

  const double lambda = kSpeedOfLight / sys.carrier_hz;
  const double d_el = env.knobs.antenna_spacing_wl * lambda;
  // Uniform linear arrays along x at both ends.
  std::vector<double> tx_x(sys.n_tx), rx_x(sys.n_rx);
  for (int t = 0; t < sys.n_tx; ++t)
    tx_x[t] = env.ap_x + (t - 0.5 * (sys.n_tx - 1)) * d_el;
  for (int r = 0; r < sys.n_rx; ++r)
    rx_x[r] = px + (r - 0.5 * (sys.n_rx - 1)) * d_el;

  const double d_direct_c = std::hypot(env.ap_x - px, env.ap_y - py);
  const double gain_norm =
      env.knobs.scatter_gain / std::sqrt((double)env.scatterers.size());

  // Path list: direct + one per scatterer. Amplitudes are fixed per packet;
  // per-(subcarrier, rx, tx) phases follow the exact element-pair lengths.
  struct Path {
    cplx amp;
    std::vector<double> len;  // [rx][tx]
  };
  std::vector<Path> paths;
  paths.reserve(env.scatterers.size() + 1);
  {
    Path direct;
    direct.amp = cplx(1.0, 0.0);
    direct.len.resize((size_t)sys.n_rx * sys.n_tx);
    for (int r = 0; r < sys.n_rx; ++r)
      for (int t = 0; t < sys.n_tx; ++t)
        direct.len[(size_t)r * sys.n_tx + t] =
            std::hypot(tx_x[t] - rx_x[r], env.ap_y - py);
    paths.push_back(std::move(direct));
  }
  for (const auto& s : env.scatterers) {
    Path p;
    const double d_s =
        std::hypot(env.ap_x - s.x, env.ap_y - s.y) + std::hypot(s.x - px, s.y - py);
    p.amp = gain_norm * s.reflectivity * (d_direct_c / d_s);
    p.len.resize((size_t)sys.n_rx * sys.n_tx);
    for (int r = 0; r < sys.n_rx; ++r)
      for (int t = 0; t < sys.n_tx; ++t)
        p.len[(size_t)r * sys.n_tx + t] =
            std::hypot(tx_x[t] - s.x, env.ap_y - s.y) +
            std::hypot(s.x - rx_x[r], s.y - py);
    paths.push_back(std::move(p));
  }

  out.h.assign(sys.entries_per_sample(), cplx(0.0, 0.0));
  for (int k = 0; k < sys.n_valid_subcarriers; ++k) {
    const double f = sys.carrier_hz + sys.subcarrier_offset_hz(k);
    const double wavenum = kTwoPi * f / kSpeedOfLight;
    for (const auto& p : paths) {
      for (int r = 0; r < sys.n_rx; ++r)
        for (int t = 0; t < sys.n_tx; ++t) {
          const double ph = -wavenum * p.len[(size_t)r * sys.n_tx + t];
          out.at(k, r, t, sys) += p.amp * cplx(std::cos(ph), std::sin(ph));
        }
    }
  }

  if (!std::isinf(snr_db)) {
    double p_sig = 0.0;
    for (const cplx& v : out.h) p_sig += std::norm(v);
    p_sig /= static_cast<double>(out.h.size());
    const double sigma = std::sqrt(p_sig * db_to_linear(-snr_db));
    for (cplx& v : out.h) v += sigma * rng.cgaussian();
  }
  for (cplx& v : out.h) v = cplx(f32_round(v.real()), f32_round(v.imag()));
}

}  // namespace

CsiBatch sample_csi(const EnvironmentModel& env, int zone, int n_packets,
                    double snr_db, uint64_t seed) {
  env.sys.validate();
  if (std::isnan(snr_db) || snr_db == -HUGE_VAL)
    throw Error("sample_csi: snr_db must be finite or +inf");
  if (n_packets < 0) throw Error("sample_csi: negative n_packets");
  const bool is_ood = zone == kOodZone;
  if (!is_ood && (zone < 0 || zone >= env.n_zones()))
    throw Error("sample_csi: zone " + std::to_string(zone) +
                " does not exist (environment has " +
                std::to_string(env.n_zones()) + " zones)");
  const ZoneRect& region = is_ood ? env.ood_region : env.zones[(size_t)zone];

  CsiBatch batch;
  batch.sys = env.sys;
  batch.manifest.seed = seed;
  {
    Fnv1a h;
    h.update(env.hash());
    h.update_pod(zone).update_pod(n_packets).update_pod(snr_db);
    h.update_pod(seed);
    batch.manifest.config_hash = h.hex();
  }
  batch.samples.resize((size_t)n_packets);
#pragma omp parallel for schedule(static)
  for (int p = 0; p < n_packets; ++p) {
    CsiSample& s = batch.samples[(size_t)p];
    s.zone_label = is_ood ? kOodZone : zone;
    s.tag = env.tag;
    s.snr_db = snr_db;
    synthesize_packet(env, region, is_ood, snr_db,
                      derive_seed(seed, (uint64_t)(zone + 1), (uint64_t)p), s);
  }
  return batch;
}

// ---------------------------------------------------------------------------
// split / merge
// ---------------------------------------------------------------------------

DatasetSplit split_dataset(const CsiBatch& batch, const SplitRatios& ratios,
                           uint64_t seed) {
  const double r[3] = {ratios.train, ratios.val, ratios.test};
  double sum = 0.0;
  for (double v : r) {
    if (v < 0 || !std::isfinite(v))
      throw Error("split_dataset: ratios must be nonnegative and finite");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw Error("split_dataset: ratios must sum to 1, got " +
                std::to_string(sum));
  int parts = 0;
  for (double v : r) parts += v > 0 ? 1 : 0;

  std::map<int, std::vector<size_t>> by_zone;
  for (size_t i = 0; i < batch.samples.size(); ++i)
    by_zone[batch.samples[i].zone_label].push_back(i);

  std::vector<size_t> pick[3];
  for (auto& [zone, idx] : by_zone) {
    const size_t n = idx.size();
    if (n < static_cast<size_t>(parts))
      throw Error("split_dataset: zone " + std::to_string(zone) + " has " +
                  std::to_string(n) + " samples, fewer than the " +
                  std::to_string(parts) + " nonzero split parts");
    Rng rng(derive_seed(seed, static_cast<uint64_t>(int64_t(zone)) + 7));
    rng.shuffle(idx);
    size_t counts[3];
    double frac[3];
    size_t assigned = 0;
    for (int j = 0; j < 3; ++j) {
      const double target = n * r[j];
      counts[j] = static_cast<size_t>(std::floor(target));
      frac[j] = target - static_cast<double>(counts[j]);
      assigned += counts[j];
    }
    while (assigned < n) {  // largest remainder, ties to the earlier part
      int best = 0;
      for (int j = 1; j < 3; ++j)
        if (frac[j] > frac[best]) best = j;
      ++counts[best];
      frac[best] = -1.0;
      ++assigned;
    }
    size_t cursor = 0;
    for (int j = 0; j < 3; ++j) {
      std::vector<size_t> sel(idx.begin() + (ptrdiff_t)cursor,
                              idx.begin() + (ptrdiff_t)(cursor + counts[j]));
      std::sort(sel.begin(), sel.end());
      pick[j].insert(pick[j].end(), sel.begin(), sel.end());
      cursor += counts[j];
    }
  }

  DatasetSplit out;
  CsiBatch* dest[3] = {&out.train, &out.val, &out.test};
  for (int j = 0; j < 3; ++j) {
    std::sort(pick[j].begin(), pick[j].end());
    dest[j]->sys = batch.sys;
    dest[j]->manifest.seed = seed;
    Fnv1a h;
    h.update(batch.manifest.config_hash);
    h.update_pod(seed).update_pod(j);
    dest[j]->manifest.config_hash = h.hex();
    dest[j]->samples.reserve(pick[j].size());
    for (size_t i : pick[j]) dest[j]->samples.push_back(batch.samples[i]);
  }
  return out;
}

CsiBatch merge_batches(const std::vector<CsiBatch>& batches) {
  if (batches.empty()) throw Error("merge_batches: nothing to merge");
  CsiBatch out;
  out.sys = batches.front().sys;
  out.manifest.seed = batches.front().manifest.seed;
  const std::string sys_json = system_config_to_json(out.sys);
  Fnv1a h;
  for (const auto& b : batches) {
    if (system_config_to_json(b.sys) != sys_json)
      throw Error("merge_batches: SystemConfig mismatch between batches");
    h.update(b.manifest.config_hash);
    out.samples.insert(out.samples.end(), b.samples.begin(), b.samples.end());
  }
  out.manifest.config_hash = h.hex();
  return out;
}

// ---------------------------------------------------------------------------
// dataset files
// ---------------------------------------------------------------------------

namespace {
constexpr char kDatasetMagic[4] = {'F', 'P', 'D', 'S'};
constexpr uint32_t kDatasetVersion = 1;
}  // namespace

void write_dataset(const CsiBatch& batch, const std::string& path) {
  const size_t per = batch.sys.entries_per_sample();
  njson j;
  j["schema_version"] = kDatasetVersion;
  j["system"] = njson::parse(system_config_to_json(batch.sys));
  j["record_count"] = batch.samples.size();
  j["seed"] = batch.manifest.seed;
  j["config_hash"] = batch.manifest.config_hash;
  njson labels = njson::array(), tags = njson::array(),
        snrs = njson::array(), positions = njson::array();
  for (const auto& s : batch.samples) {
    labels.push_back(s.zone_label);
    tags.push_back(static_cast<int>(s.tag));
    snrs.push_back(s.snr_db);
    positions.push_back(njson::array({s.pos_x, s.pos_y}));
  }
  j["labels"] = std::move(labels);
  j["tags"] = std::move(tags);
  j["snr_db"] = std::move(snrs);
  j["positions"] = std::move(positions);

  std::vector<double> flat;
  flat.reserve(batch.samples.size() * per * 2);
  for (const auto& s : batch.samples) {
    if (s.h.size() != per)
      throw Error("write_dataset: sample has wrong entry count");
    for (const cplx& v : s.h) {
      flat.push_back(v.real());
      flat.push_back(v.imag());
    }
  }
  const std::vector<uint8_t> blob =
      io::doubles_to_f32le(flat.data(), flat.size());
  io::write_container(path, kDatasetMagic, kDatasetVersion, j.dump(), blob.data(),
                      blob.size());
}

CsiBatch read_dataset(const std::string& path) {
  const io::Container c = io::read_container(path, kDatasetMagic, kDatasetVersion);
  njson j = njson::parse(c.json);
  CsiBatch batch;
  batch.sys = system_config_from_json_text(j.at("system").dump());
  batch.manifest.seed = j.at("seed").get<uint64_t>();
  batch.manifest.config_hash = j.at("config_hash").get<std::string>();
  const size_t n = j.at("record_count").get<size_t>();
  const size_t per = batch.sys.entries_per_sample();
  if (c.blob.size() != n * per * 2 * 4)
    throw Error("read_dataset: manifest record_count disagrees with blob size "
                "in " + path);
  const auto& labels = j.at("labels");
  const auto& tags = j.at("tags");
  const auto& snrs = j.at("snr_db");
  const auto& positions = j.at("positions");
  if (labels.size() != n || tags.size() != n || snrs.size() != n ||
      positions.size() != n)
    throw Error("read_dataset: per-record table length mismatch in " + path);

  const std::vector<double> flat =
      io::f32le_to_doubles(c.blob.data(), c.blob.size());
  batch.samples.resize(n);
  for (size_t i = 0; i < n; ++i) {
    CsiSample& s = batch.samples[i];
    s.zone_label = labels[i].get<int>();
    s.tag = static_cast<EnvTag>(tags[i].get<int>());
    s.snr_db = snrs[i].get<double>();
    s.pos_x = positions[i][0].get<double>();
    s.pos_y = positions[i][1].get<double>();
    s.h.resize(per);
    const double* src = flat.data() + i * per * 2;
    for (size_t e = 0; e < per; ++e) s.h[e] = cplx(src[2 * e], src[2 * e + 1]);
  }
  return batch;
}

}  // namespace fpnet::sim
