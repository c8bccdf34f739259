#ifndef FPNET_BFM_CODEC_HPP
#define FPNET_BFM_CODEC_HPP

#include <cstdint>
#include <vector>

#include "fpnet/channel_sim.hpp"
#include "fpnet/common.hpp"

namespace fpnet::codec {

/// Singular value decomposition of one per-subcarrier channel matrix
/// H = u * diag(sigma) * v_full^H, sigma descending. Matrices are stored
/// row-major.
struct SvdResult {
  int n_rx = 0, n_tx = 0;
  std::vector<cplx> u;       // n_rx x n_rx
  std::vector<double> sigma; // min(n_rx, n_tx), descending
  std::vector<cplx> v_full;  // n_tx x n_tx

  cplx u_at(int r, int c) const { return u[(size_t)r * n_rx + c]; }
  cplx v_at(int r, int c) const { return v_full[(size_t)r * n_tx + c]; }
};

/// h is row-major n_rx x n_tx. Near-equal singular values (within 1e-9) are
/// ordered deterministically: the tied columns are canonicalized and sorted
/// lexicographically descending by their (re, im) entry sequence.
SvdResult svd(const cplx* h, int n_rx, int n_tx);

/// Beamforming matrix sequence: one n_tx x n_streams matrix per subcarrier,
/// stored [subcarrier][tx][stream].
struct BfmMatrix {
  int n_sc = 0, n_tx = 0, n_streams = 0;
  std::vector<cplx> v;

  BfmMatrix() = default;
  BfmMatrix(int sc, int tx, int streams)
      : n_sc(sc), n_tx(tx), n_streams(streams),
        v((size_t)sc * tx * streams, cplx(0, 0)) {}

  cplx& at(int k, int t, int s) {
    return v[((size_t)k * n_tx + t) * n_streams + s];
  }
  const cplx& at(int k, int t, int s) const {
    return v[((size_t)k * n_tx + t) * n_streams + s];
  }
};

/// Per-subcarrier angle bundle in sweep-major order: for sweep i (1-based,
/// i = 1..min(n_streams, n_tx-1)) first the phases phi_{l,i} for rows
/// l = i..n_tx-1, then the rotations psi_{l,i} for rows l = i+1..n_tx.
/// phi in [0, 2pi), psi in [0, pi/2].
struct AngleSet {
  int n_sc = 0, n_tx = 0, n_streams = 0;
  int phi_per_sc = 0, psi_per_sc = 0;
  std::vector<double> phi;  // [sc][angle]
  std::vector<double> psi;  // [sc][angle]

  double& phi_at(int k, int i) { return phi[(size_t)k * phi_per_sc + i]; }
  double phi_at(int k, int i) const { return phi[(size_t)k * phi_per_sc + i]; }
  double& psi_at(int k, int i) { return psi[(size_t)k * psi_per_sc + i]; }
  double psi_at(int k, int i) const { return psi[(size_t)k * psi_per_sc + i]; }

  /// Canonical per-subcarrier serialization order (the standard's table
  /// order): sweep by sweep, phis of the sweep then psis of the sweep.
  struct OrderEntry {
    bool is_phi;
    int index;  // into the sweep-major phi or psi array
  };
  static std::vector<OrderEntry> order(int n_tx, int n_streams);
};

enum class FeedbackType : uint8_t { kType0 = 0, kType1 = 1 };

struct QuantBits {
  int b_phi = 0, b_psi = 0;
};
QuantBits bits_for(FeedbackType kind);

struct AngleCount {
  int n_phi = 0, n_psi = 0;
  int bits_type0 = 0, bits_type1 = 0;  // per subcarrier
};

/// Angle bookkeeping for an n_tx x n_streams geometry. Throws on
/// unsupported geometry (requires 1 <= n_streams <= n_tx <= 8).
AngleCount angle_count(int n_tx, int n_streams);

/// Quantized feedback report. payload packs the angle indices LSB-first in
/// the canonical order, subcarrier by subcarrier. n_tx/n_streams are carried
/// in memory for self-description; the wire format (serialize_frame) is
/// 1 byte kind + 2 bytes little-endian subcarrier count + payload.
struct FeedbackFrame {
  FeedbackType kind = FeedbackType::kType0;
  int b_phi = 0, b_psi = 0;
  int n_subcarriers = 0;
  int n_tx = 0, n_streams = 0;
  std::vector<uint8_t> payload;

  int payload_bits() const;
};

/// Total payload bits for a geometry/kind/subcarrier count.
int frame_total_bits(FeedbackType kind, int n_tx, int n_streams, int n_sc);

/// Per-subcarrier SVD, first n_streams columns ordered by descending
/// singular value, canonicalized. Throws a degenerate-channel error naming
/// the subcarrier when sigma[n_streams-1] vanishes.
BfmMatrix extract_bfm(const sim::CsiSample& sample, const sim::SystemConfig& sys,
                      int n_streams);

/// Phase-rotates every column so its last entry is real and nonnegative.
/// Idempotent; SGCS-invariant.
void canonicalize(BfmMatrix& v);
BfmMatrix canonicalized(BfmMatrix v);

/// Givens angle extraction (inverse of givens_reconstruct). Requires
/// canonical input; rejects matrices whose last row is materially complex.
AngleSet givens_decompose(const BfmMatrix& v);

/// Forward Givens product applied to the rectangular identity. Output is
/// canonical. Rejects out-of-range angles.
BfmMatrix givens_reconstruct(const AngleSet& angles);

/// Quantizes to the mid-level grid and packs the indices.
/// phi index k = floor(phi * 2^b_phi / (2pi)) mod 2^b_phi with level
/// (2k+1) pi / 2^b_phi; psi index k = floor(psi * 2^(b_psi+1) / pi) clamped
/// to [0, 2^b_psi - 1] with level (2k+1) pi / 2^(b_psi+2).
FeedbackFrame quantize_angles(const AngleSet& angles, FeedbackType kind);

/// Unpacks a frame back to mid-level angle values. quantize(dequantize(.))
/// is bit-exact on any valid frame.
AngleSet dequantize_angles(const FeedbackFrame& frame);

std::vector<uint8_t> serialize_frame(const FeedbackFrame& frame);
FeedbackFrame parse_frame(const std::vector<uint8_t>& bytes, int n_tx,
                          int n_streams);

/// Subcarrier grouping knob: keep every g-th subcarrier's angles
/// (decimate), and the inverse expansion where each kept value is repeated
/// for its group. g = 1 is the identity.
AngleSet decimate_subcarriers(const AngleSet& angles, int group);
AngleSet expand_subcarriers(const AngleSet& angles, int group, int n_sc_out);

/// Full feedback path: decompose -> quantize -> (wire) -> dequantize ->
/// reconstruct. Convenience for metrics and baselines.
BfmMatrix codec_roundtrip(const BfmMatrix& v, FeedbackType kind);

}  // namespace fpnet::codec

#endif  // FPNET_BFM_CODEC_HPP
