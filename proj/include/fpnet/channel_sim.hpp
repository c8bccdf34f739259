#ifndef FPNET_CHANNEL_SIM_HPP
#define FPNET_CHANNEL_SIM_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "fpnet/common.hpp"

namespace fpnet::sim {

/// Radio/system parameters shared by every sample of a dataset.
struct SystemConfig {
  int n_tx = 3;
  int n_rx = 2;
  int n_streams = 1;
  int n_valid_subcarriers = 28;
  double bandwidth_hz = 40e6;
  int n_fft = 64;
  int n_cp = 16;
  double carrier_hz = 2.4e9;

  void validate() const;
  double subcarrier_spacing_hz() const { return bandwidth_hz / n_fft; }
  /// Baseband frequency offset of valid subcarrier k (centered comb).
  double subcarrier_offset_hz(int k) const {
    return (k - 0.5 * (n_valid_subcarriers - 1)) * subcarrier_spacing_hz();
  }
  size_t entries_per_sample() const {
    return (size_t)n_valid_subcarriers * n_rx * n_tx;
  }
};

struct ZoneRect {
  double x0 = 0, y0 = 0, w = 0, h = 0;
  double cx() const { return x0 + 0.5 * w; }
  double cy() const { return y0 + 0.5 * h; }
  bool contains(double x, double y) const {
    return x >= x0 && x < x0 + w && y >= y0 && y < y0 + h;
  }
};

struct Scatterer {
  double x = 0, y = 0;
  cplx reflectivity;
};

enum class EnvTag : uint8_t { kStatic = 0, kDynamic = 1 };

/// Marker passed as the zone argument of sample_csi to draw from the
/// out-of-distribution region instead of a labeled zone.
inline constexpr int kOodZone = -1;

/// Geometry knobs with desk defaults. The floor is tiled by the zone grid;
/// the access point sits centered above the top edge with its uniform linear
/// array parallel to the x axis; the OOD corridor hugs the left edge,
/// disjoint from the floor.
///
/// Scatterers model distant reverberant reflectors (walls, corridors,
/// multi-bounce aggregates) placed in an annulus around the floor center.
/// Their path-length excess over the direct path spans several tens of
/// meters, so their phase decorrelates across the signaling band and each
/// packet's subcarriers sample the position-dependent multipath statistics
/// instead of one flat fade.
struct EnvKnobs {
  double floor_w = 5.2;
  double floor_h = 6.5;
  double jitter_m = 0.3;           // per-packet position jitter radius
  double antenna_spacing_wl = 0.5; // element spacing in carrier wavelengths
  double scatter_gain = 2.0;       // scatterer amplitude before 1/distance scaling
  double scatter_ring_min_m = 8.0; // annulus of scatterer placement around
  double scatter_ring_max_m = 30.0;//   the floor center
  double max_zone_aspect = 4.5;    // tiling rejected past this elongation
  double ap_offset_m = 0.3;        // AP distance above the top edge
  double corridor_gap_m = 0.8;
  double corridor_w_m = 1.4;
};

struct EnvironmentModel {
  SystemConfig sys;
  std::vector<ZoneRect> zones;
  std::vector<Scatterer> scatterers;
  double ap_x = 0, ap_y = 0;
  ZoneRect ood_region;
  uint64_t seed = 0;
  EnvTag tag = EnvTag::kStatic;
  EnvKnobs knobs;
  int grid_nx = 0, grid_ny = 0;

  int n_zones() const { return static_cast<int>(zones.size()); }
  /// Zone index containing (x, y), or kOodZone if inside the OOD region;
  /// throws if the point is in neither.
  int zone_of_position(double x, double y) const;
  /// Content hash over geometry, scatterers and knobs (provenance field).
  std::string hash() const;
};

struct CsiSample {
  /// Channel matrices, [subcarrier][rx][tx] row-major.
  std::vector<cplx> h;
  int zone_label = 0;  // kOodZone for corridor samples
  EnvTag tag = EnvTag::kStatic;
  double snr_db = 0;
  double pos_x = 0, pos_y = 0;

  cplx& at(int k, int r, int t, const SystemConfig& sys) {
    return h[((size_t)k * sys.n_rx + r) * sys.n_tx + t];
  }
  const cplx& at(int k, int r, int t, const SystemConfig& sys) const {
    return h[((size_t)k * sys.n_rx + r) * sys.n_tx + t];
  }
};

struct BatchManifest {
  uint64_t seed = 0;
  std::string config_hash;  // hash of (env hash, zone, snr, packet count)
};

struct CsiBatch {
  SystemConfig sys;
  std::vector<CsiSample> samples;
  BatchManifest manifest;

  size_t size() const { return samples.size(); }
};

/// Deterministically lays out zones, scatterers, AP and OOD region.
/// Throws if n_zones cannot tile the floor into equal rectangles of
/// acceptable aspect ratio.
EnvironmentModel generate_environment(const SystemConfig& sys, int n_zones,
                                      int n_scatterers, uint64_t seed);
EnvironmentModel generate_environment(const SystemConfig& sys, int n_zones,
                                      int n_scatterers, uint64_t seed,
                                      const EnvKnobs& knobs);

/// Draws n_packets channel realizations for one zone (or the OOD region).
/// Each packet sums a direct path and per-scatterer paths with geometry
/// determined delays and array phases, then adds complex Gaussian noise at
/// snr_db (snr_db = +inf disables noise; NaN and -inf are rejected).
/// Entries are rounded to float32 precision so dataset files round-trip
/// bit-exactly. Deterministic in (env, zone, n_packets, snr_db, seed) and
/// independent of thread count.
CsiBatch sample_csi(const EnvironmentModel& env, int zone, int n_packets,
                    double snr_db, uint64_t seed);

/// Jitters scatterer positions and reflectivities proportionally to
/// intensity in [0, 1]; zone geometry and AP stay fixed. intensity = 0
/// returns the input unchanged. The result is tagged dynamic.
EnvironmentModel perturb_environment(const EnvironmentModel& env,
                                     double intensity, uint64_t seed);

struct SplitRatios {
  double train = 0.8, val = 0.1, test = 0.1;
};

struct DatasetSplit {
  CsiBatch train, val, test;
};

/// Stratified per zone with largest-remainder rounding; the three outputs
/// partition the input exactly. Throws if any zone has fewer samples than
/// the number of nonzero ratio parts, naming the zone.
DatasetSplit split_dataset(const CsiBatch& batch, const SplitRatios& ratios,
                           uint64_t seed);

/// Concatenates batches sharing one SystemConfig; manifest hashes chain.
CsiBatch merge_batches(const std::vector<CsiBatch>& batches);

/// Dataset container: JSON manifest + interleaved float32 little-endian
/// complex blob, [packet][subcarrier][rx][tx]. Round trip is bit-exact.
void write_dataset(const CsiBatch& batch, const std::string& path);
CsiBatch read_dataset(const std::string& path);

/// JSON (de)serialization of SystemConfig, used by dataset manifests,
/// checkpoints and run reports.
std::string system_config_to_json(const SystemConfig& sys);
SystemConfig system_config_from_json_text(const std::string& json_text);

}  // namespace fpnet::sim

#endif  // FPNET_CHANNEL_SIM_HPP
