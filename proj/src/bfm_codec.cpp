#include "fpnet/bfm_codec.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

namespace fpnet::codec {

namespace {

constexpr double kSigmaTieTol = 1e-9;
constexpr double kCanonicalTol = 1e-9;

using Eigen::MatrixXcd;

MatrixXcd to_eigen(const cplx* h, int rows, int cols) {
  MatrixXcd m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = h[(size_t)r * cols + c];
  return m;
}

/// Phase-rotate one Eigen column in place to the canonical form.
void canonicalize_column(MatrixXcd& m, int col) {
  const int last = static_cast<int>(m.rows()) - 1;
  const cplx w = m(last, col);
  const double mag = std::abs(w);
  if (mag == 0.0) return;
  const cplx rot = std::conj(w) / mag;
  for (int r = 0; r < last; ++r) m(r, col) *= rot;
  m(last, col) = cplx(mag, 0.0);
}

/// Lexicographic descending comparison of two canonicalized columns by
/// their (re, im) entry sequence; deterministic order for tied singular
/// values.
bool column_lex_greater(const MatrixXcd& m, int a, int b) {
  for (int r = 0; r < m.rows(); ++r) {
    const cplx va = m(r, a), vb = m(r, b);
    if (va.real() != vb.real()) return va.real() > vb.real();
    if (va.imag() != vb.imag()) return va.imag() > vb.imag();
  }
  return false;
}

int sweeps_for(int n_tx, int n_streams) {
  return std::min(n_streams, n_tx - 1);
}

class BitWriter {
 public:
  void put(uint32_t value, int bits) {
    for (int i = 0; i < bits; ++i) {
      const size_t pos = n_bits_++;
      if (pos / 8 >= bytes_.size()) bytes_.push_back(0);
      if ((value >> i) & 1u) bytes_[pos / 8] |= (uint8_t)(1u << (pos % 8));
    }
  }
  std::vector<uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<uint8_t> bytes_;
  size_t n_bits_ = 0;
};

class BitReader {
 public:
  BitReader(const std::vector<uint8_t>& bytes) : bytes_(bytes) {}
  uint32_t get(int bits) {
    uint32_t v = 0;
    for (int i = 0; i < bits; ++i) {
      const size_t pos = n_bits_++;
      if (pos / 8 >= bytes_.size())
        throw Error("FeedbackFrame: payload exhausted mid-field");
      if ((bytes_[pos / 8] >> (pos % 8)) & 1u) v |= (1u << i);
    }
    return v;
  }

 private:
  const std::vector<uint8_t>& bytes_;
  size_t n_bits_ = 0;
};

}  // namespace

// ---------------------------------------------------------------------------
// SVD
// ---------------------------------------------------------------------------

SvdResult svd(const cplx* h, int n_rx, int n_tx) {
  if (n_rx <= 0 || n_tx <= 0) throw Error("svd: bad dimensions");
  const MatrixXcd H = to_eigen(h, n_rx, n_tx);

  // Always decompose the tall side so the full unitary on the n_tx side is
  // available: H^H = V diag(sigma) U^H.
  MatrixXcd U, V;
  Eigen::VectorXd S;
  if (n_tx >= n_rx) {
    Eigen::JacobiSVD<MatrixXcd> d(H.adjoint(),
                                  Eigen::ComputeFullU | Eigen::ComputeFullV);
    V = d.matrixU();
    U = d.matrixV();
    S = d.singularValues();
  } else {
    Eigen::JacobiSVD<MatrixXcd> d(H,
                                  Eigen::ComputeFullU | Eigen::ComputeFullV);
    U = d.matrixU();
    V = d.matrixV();
    S = d.singularValues();
  }

  // Deterministic ordering inside degenerate (tied) singular value groups.
  const int n_sigma = static_cast<int>(S.size());
  int g0 = 0;
  while (g0 < n_sigma) {
    int g1 = g0 + 1;
    while (g1 < n_sigma && std::abs(S(g1 - 1) - S(g1)) <= kSigmaTieTol) ++g1;
    if (g1 - g0 > 1) {
      MatrixXcd vc = V;
      for (int c = g0; c < g1; ++c) canonicalize_column(vc, c);
      std::vector<int> order(static_cast<size_t>(g1 - g0));
      for (int i = 0; i < g1 - g0; ++i) order[(size_t)i] = g0 + i;
      std::sort(order.begin(), order.end(), [&](int a, int b) {
        return column_lex_greater(vc, a, b);
      });
      MatrixXcd V2 = V;
      MatrixXcd U2 = U;
      for (int i = 0; i < g1 - g0; ++i) {
        V2.col(g0 + i) = V.col(order[(size_t)i]);
        U2.col(g0 + i) = U.col(order[(size_t)i]);
      }
      V = V2;
      U = U2;
    }
    g0 = g1;
  }

  SvdResult out;
  out.n_rx = n_rx;
  out.n_tx = n_tx;
  out.u.resize((size_t)n_rx * n_rx);
  out.v_full.resize((size_t)n_tx * n_tx);
  out.sigma.resize((size_t)n_sigma);
  for (int r = 0; r < n_rx; ++r)
    for (int c = 0; c < n_rx; ++c) out.u[(size_t)r * n_rx + c] = U(r, c);
  for (int r = 0; r < n_tx; ++r)
    for (int c = 0; c < n_tx; ++c) out.v_full[(size_t)r * n_tx + c] = V(r, c);
  for (int i = 0; i < n_sigma; ++i) out.sigma[(size_t)i] = S(i);
  return out;
}

// ---------------------------------------------------------------------------
// extract / canonicalize
// ---------------------------------------------------------------------------

BfmMatrix extract_bfm(const sim::CsiSample& sample,
                      const sim::SystemConfig& sys, int n_streams) {
  sys.validate();
  if (n_streams < 1 || n_streams > std::min(sys.n_rx, sys.n_tx))
    throw Error("extract_bfm: n_streams must be in [1, min(n_rx, n_tx)]");
  if (sample.h.size() != sys.entries_per_sample())
    throw Error("extract_bfm: sample entry count does not match SystemConfig");

  BfmMatrix out(sys.n_valid_subcarriers, sys.n_tx, n_streams);
  for (int k = 0; k < sys.n_valid_subcarriers; ++k) {
    const SvdResult d =
        svd(sample.h.data() + (size_t)k * sys.n_rx * sys.n_tx, sys.n_rx,
            sys.n_tx);
    const double floor_tol = 1e-12 * std::max(1.0, d.sigma[0]);
    if (d.sigma[(size_t)n_streams - 1] <= floor_tol)
      throw Error("extract_bfm: degenerate channel at subcarrier " +
                  std::to_string(k) + " (sigma[" +
                  std::to_string(n_streams - 1) + "] ~ 0)");
    for (int t = 0; t < sys.n_tx; ++t)
      for (int s = 0; s < n_streams; ++s) out.at(k, t, s) = d.v_at(t, s);
  }
  canonicalize(out);
  return out;
}

void canonicalize(BfmMatrix& v) {
  for (int k = 0; k < v.n_sc; ++k) {
    for (int s = 0; s < v.n_streams; ++s) {
      const cplx w = v.at(k, v.n_tx - 1, s);
      const double mag = std::abs(w);
      if (mag == 0.0) continue;
      const cplx rot = std::conj(w) / mag;
      for (int t = 0; t < v.n_tx - 1; ++t) v.at(k, t, s) *= rot;
      v.at(k, v.n_tx - 1, s) = cplx(mag, 0.0);
    }
  }
}

BfmMatrix canonicalized(BfmMatrix v) {
  canonicalize(v);
  return v;
}

// ---------------------------------------------------------------------------
// angle bookkeeping
// ---------------------------------------------------------------------------

AngleCount angle_count(int n_tx, int n_streams) {
  if (n_streams < 1 || n_streams > n_tx || n_tx > 8)
    throw Error("angle_count: unsupported geometry " + std::to_string(n_tx) +
                "x" + std::to_string(n_streams) +
                " (need 1 <= n_streams <= n_tx <= 8)");
  AngleCount c;
  const int m = sweeps_for(n_tx, n_streams);
  for (int i = 1; i <= m; ++i) {
    c.n_phi += n_tx - i;
    c.n_psi += n_tx - i;
  }
  const QuantBits t0 = bits_for(FeedbackType::kType0);
  const QuantBits t1 = bits_for(FeedbackType::kType1);
  c.bits_type0 = c.n_phi * t0.b_phi + c.n_psi * t0.b_psi;
  c.bits_type1 = c.n_phi * t1.b_phi + c.n_psi * t1.b_psi;
  return c;
}

QuantBits bits_for(FeedbackType kind) {
  switch (kind) {
    case FeedbackType::kType0:
      return {7, 5};
    case FeedbackType::kType1:
      return {9, 7};
  }
  throw Error("bits_for: unknown feedback type");
}

std::vector<AngleSet::OrderEntry> AngleSet::order(int n_tx, int n_streams) {
  angle_count(n_tx, n_streams);  // validates geometry
  std::vector<OrderEntry> out;
  const int m = sweeps_for(n_tx, n_streams);
  int phi_cursor = 0, psi_cursor = 0;
  for (int i = 1; i <= m; ++i) {
    for (int l = i; l <= n_tx - 1; ++l) out.push_back({true, phi_cursor++});
    for (int l = i + 1; l <= n_tx; ++l) out.push_back({false, psi_cursor++});
  }
  return out;
}

int FeedbackFrame::payload_bits() const {
  return static_cast<int>(payload.size()) * 8;
}

int frame_total_bits(FeedbackType kind, int n_tx, int n_streams, int n_sc) {
  const AngleCount c = angle_count(n_tx, n_streams);
  const QuantBits b = bits_for(kind);
  return n_sc * (c.n_phi * b.b_phi + c.n_psi * b.b_psi);
}

// ---------------------------------------------------------------------------
// decompose / reconstruct
// ---------------------------------------------------------------------------

AngleSet givens_decompose(const BfmMatrix& v) {
  const AngleCount count = angle_count(v.n_tx, v.n_streams);
  AngleSet out;
  out.n_sc = v.n_sc;
  out.n_tx = v.n_tx;
  out.n_streams = v.n_streams;
  out.phi_per_sc = count.n_phi;
  out.psi_per_sc = count.n_psi;
  out.phi.assign((size_t)v.n_sc * count.n_phi, 0.0);
  out.psi.assign((size_t)v.n_sc * count.n_psi, 0.0);

  const int nt = v.n_tx;
  const int m = sweeps_for(nt, v.n_streams);
  for (int k = 0; k < v.n_sc; ++k) {
    MatrixXcd W(nt, v.n_streams);
    for (int t = 0; t < nt; ++t)
      for (int s = 0; s < v.n_streams; ++s) W(t, s) = v.at(k, t, s);

    for (int s = 0; s < v.n_streams; ++s) {
      const cplx last = W(nt - 1, s);
      const double cn = W.col(s).norm();
      if (std::abs(last.imag()) > kCanonicalTol * std::max(1.0, cn) ||
          last.real() < -kCanonicalTol)
        throw Error("givens_decompose: input is not canonical at subcarrier " +
                    std::to_string(k) + ", column " + std::to_string(s));
    }

    int phi_cursor = 0, psi_cursor = 0;
    for (int i = 1; i <= m; ++i) {
      // Phases of column i, rows i..nt-1 (1-based); D_i^H application.
      for (int l = i; l <= nt - 1; ++l) {
        const cplx w = W(l - 1, i - 1);
        double ang = (w == cplx(0.0, 0.0)) ? 0.0 : std::arg(w);
        if (ang < 0) ang += kTwoPi;
        if (ang >= kTwoPi) ang = 0.0;
        out.phi_at(k, phi_cursor++) = ang;
        const cplx rot(std::cos(ang), -std::sin(ang));
        for (int s = 1; s <= v.n_streams; ++s) W(l - 1, s - 1) *= rot;
      }
      // Rotations G_{l,i} zero the (l, i) entries top to bottom.
      for (int l = i + 1; l <= nt; ++l) {
        const double a = std::max(W(i - 1, i - 1).real(), 0.0);
        const double b = std::max(W(l - 1, i - 1).real(), 0.0);
        const double ang = std::atan2(b, a);
        out.psi_at(k, psi_cursor++) = ang;
        const double c = std::cos(ang), s = std::sin(ang);
        for (int col = 1; col <= v.n_streams; ++col) {
          const cplx ri = W(i - 1, col - 1);
          const cplx rl = W(l - 1, col - 1);
          W(i - 1, col - 1) = c * ri + s * rl;
          W(l - 1, col - 1) = -s * ri + c * rl;
        }
      }
    }
  }
  return out;
}

BfmMatrix givens_reconstruct(const AngleSet& angles) {
  const AngleCount count = angle_count(angles.n_tx, angles.n_streams);
  if (angles.phi_per_sc != count.n_phi || angles.psi_per_sc != count.n_psi)
    throw Error("givens_reconstruct: angle counts do not match geometry");
  const double tol = 1e-12;
  for (double p : angles.phi)
    if (!(p >= -tol && p < kTwoPi + tol))
      throw Error("givens_reconstruct: phi out of [0, 2pi)");
  for (double p : angles.psi)
    if (!(p >= -tol && p <= kPi / 2 + tol))
      throw Error("givens_reconstruct: psi out of [0, pi/2]");

  const int nt = angles.n_tx;
  const int ns = angles.n_streams;
  const int m = sweeps_for(nt, ns);
  BfmMatrix out(angles.n_sc, nt, ns);

  // Per-sweep base offsets into the sweep-major angle arrays.
  std::vector<int> phi_base((size_t)m + 1, 0), psi_base((size_t)m + 1, 0);
  for (int i = 1; i <= m; ++i) {
    phi_base[(size_t)i] = phi_base[(size_t)i - 1] + (i == 1 ? 0 : nt - (i - 1));
    psi_base[(size_t)i] = psi_base[(size_t)i - 1] + (i == 1 ? 0 : nt - (i - 1));
  }

  for (int k = 0; k < angles.n_sc; ++k) {
    MatrixXcd W = MatrixXcd::Zero(nt, ns);
    for (int s = 0; s < std::min(nt, ns); ++s) W(s, s) = cplx(1.0, 0.0);

    for (int i = m; i >= 1; --i) {
      for (int l = nt; l >= i + 1; --l) {
        const double ang =
            angles.psi_at(k, psi_base[(size_t)i] + (l - i - 1));
        const double c = std::cos(ang), s = std::sin(ang);
        for (int col = 1; col <= ns; ++col) {
          const cplx ri = W(i - 1, col - 1);
          const cplx rl = W(l - 1, col - 1);
          W(i - 1, col - 1) = c * ri - s * rl;
          W(l - 1, col - 1) = s * ri + c * rl;
        }
      }
      for (int l = i; l <= nt - 1; ++l) {
        const double ang = angles.phi_at(k, phi_base[(size_t)i] + (l - i));
        const cplx rot(std::cos(ang), std::sin(ang));
        for (int col = 1; col <= ns; ++col) W(l - 1, col - 1) *= rot;
      }
    }
    for (int t = 0; t < nt; ++t)
      for (int s = 0; s < ns; ++s) out.at(k, t, s) = W(t, s);
  }
  return out;
}

// ---------------------------------------------------------------------------
// quantization and framing
// ---------------------------------------------------------------------------

FeedbackFrame quantize_angles(const AngleSet& angles, FeedbackType kind) {
  const QuantBits bits = bits_for(kind);
  const auto order = AngleSet::order(angles.n_tx, angles.n_streams);
  if (angles.phi_per_sc + angles.psi_per_sc != static_cast<int>(order.size()))
    throw Error("quantize_angles: angle counts do not match geometry");

  const uint32_t phi_levels = 1u << bits.b_phi;
  const uint32_t psi_levels = 1u << bits.b_psi;
  BitWriter w;
  for (int k = 0; k < angles.n_sc; ++k) {
    for (const auto& e : order) {
      if (e.is_phi) {
        const double a = angles.phi_at(k, e.index);
        if (!(a >= 0.0 && a < kTwoPi + 1e-12))
          throw Error("quantize_angles: phi out of range");
        int64_t idx =
            static_cast<int64_t>(std::floor(a * phi_levels / kTwoPi));
        idx %= phi_levels;
        if (idx < 0) idx += phi_levels;
        w.put(static_cast<uint32_t>(idx), bits.b_phi);
      } else {
        const double a = angles.psi_at(k, e.index);
        if (!(a >= -1e-12 && a <= kPi / 2 + 1e-12))
          throw Error("quantize_angles: psi out of range");
        int64_t idx =
            static_cast<int64_t>(std::floor(a * 2.0 * psi_levels / kPi));
        idx = std::clamp<int64_t>(idx, 0, psi_levels - 1);
        w.put(static_cast<uint32_t>(idx), bits.b_psi);
      }
    }
  }

  FeedbackFrame frame;
  frame.kind = kind;
  frame.b_phi = bits.b_phi;
  frame.b_psi = bits.b_psi;
  frame.n_subcarriers = angles.n_sc;
  frame.n_tx = angles.n_tx;
  frame.n_streams = angles.n_streams;
  frame.payload = w.take();
  return frame;
}

namespace {

void check_frame_geometry(const FeedbackFrame& frame) {
  const int bits =
      frame_total_bits(frame.kind, frame.n_tx, frame.n_streams,
                       frame.n_subcarriers);
  const size_t expect = ((size_t)bits + 7) / 8;
  if (frame.payload.size() != expect)
    throw Error("FeedbackFrame: payload is " +
                std::to_string(frame.payload.size()) + " bytes, expected " +
                std::to_string(expect) + " (framing error)");
}

}  // namespace

AngleSet dequantize_angles(const FeedbackFrame& frame) {
  check_frame_geometry(frame);
  const QuantBits bits = bits_for(frame.kind);
  const AngleCount count = angle_count(frame.n_tx, frame.n_streams);
  const auto order = AngleSet::order(frame.n_tx, frame.n_streams);

  AngleSet out;
  out.n_sc = frame.n_subcarriers;
  out.n_tx = frame.n_tx;
  out.n_streams = frame.n_streams;
  out.phi_per_sc = count.n_phi;
  out.psi_per_sc = count.n_psi;
  out.phi.assign((size_t)out.n_sc * count.n_phi, 0.0);
  out.psi.assign((size_t)out.n_sc * count.n_psi, 0.0);

  BitReader r(frame.payload);
  const double phi_levels = static_cast<double>(1u << bits.b_phi);
  const double psi_levels = static_cast<double>(1u << bits.b_psi);
  for (int k = 0; k < out.n_sc; ++k) {
    for (const auto& e : order) {
      if (e.is_phi) {
        const uint32_t idx = r.get(bits.b_phi);
        out.phi_at(k, e.index) = (2.0 * idx + 1.0) * kPi / phi_levels;
      } else {
        const uint32_t idx = r.get(bits.b_psi);
        out.psi_at(k, e.index) = (2.0 * idx + 1.0) * kPi / (4.0 * psi_levels);
      }
    }
  }
  return out;
}

std::vector<uint8_t> serialize_frame(const FeedbackFrame& frame) {
  check_frame_geometry(frame);
  std::vector<uint8_t> out;
  out.reserve(3 + frame.payload.size());
  out.push_back(static_cast<uint8_t>(frame.kind));
  out.push_back(static_cast<uint8_t>(frame.n_subcarriers & 0xff));
  out.push_back(static_cast<uint8_t>((frame.n_subcarriers >> 8) & 0xff));
  out.insert(out.end(), frame.payload.begin(), frame.payload.end());
  return out;
}

FeedbackFrame parse_frame(const std::vector<uint8_t>& bytes, int n_tx,
                          int n_streams) {
  if (bytes.size() < 3)
    throw Error("parse_frame: frame shorter than its 3-byte header");
  if (bytes[0] > 1)
    throw Error("parse_frame: unknown feedback kind " +
                std::to_string(bytes[0]));
  FeedbackFrame frame;
  frame.kind = static_cast<FeedbackType>(bytes[0]);
  const QuantBits bits = bits_for(frame.kind);
  frame.b_phi = bits.b_phi;
  frame.b_psi = bits.b_psi;
  frame.n_subcarriers = bytes[1] | (bytes[2] << 8);
  frame.n_tx = n_tx;
  frame.n_streams = n_streams;
  frame.payload.assign(bytes.begin() + 3, bytes.end());
  check_frame_geometry(frame);
  return frame;
}

AngleSet decimate_subcarriers(const AngleSet& angles, int group) {
  if (group < 1) throw Error("decimate_subcarriers: group must be >= 1");
  if (group == 1) return angles;
  AngleSet out = angles;
  out.n_sc = (angles.n_sc + group - 1) / group;
  out.phi.assign((size_t)out.n_sc * angles.phi_per_sc, 0.0);
  out.psi.assign((size_t)out.n_sc * angles.psi_per_sc, 0.0);
  for (int k = 0; k < out.n_sc; ++k) {
    const int src = k * group;
    for (int i = 0; i < angles.phi_per_sc; ++i)
      out.phi_at(k, i) = angles.phi_at(src, i);
    for (int i = 0; i < angles.psi_per_sc; ++i)
      out.psi_at(k, i) = angles.psi_at(src, i);
  }
  return out;
}

AngleSet expand_subcarriers(const AngleSet& angles, int group, int n_sc_out) {
  if (group < 1) throw Error("expand_subcarriers: group must be >= 1");
  if (group == 1 && n_sc_out == angles.n_sc) return angles;
  if ((n_sc_out + group - 1) / group != angles.n_sc)
    throw Error("expand_subcarriers: grouped count does not cover n_sc_out");
  AngleSet out = angles;
  out.n_sc = n_sc_out;
  out.phi.assign((size_t)n_sc_out * angles.phi_per_sc, 0.0);
  out.psi.assign((size_t)n_sc_out * angles.psi_per_sc, 0.0);
  for (int k = 0; k < n_sc_out; ++k) {
    const int src = k / group;
    for (int i = 0; i < angles.phi_per_sc; ++i)
      out.phi_at(k, i) = angles.phi_at(src, i);
    for (int i = 0; i < angles.psi_per_sc; ++i)
      out.psi_at(k, i) = angles.psi_at(src, i);
  }
  return out;
}

BfmMatrix codec_roundtrip(const BfmMatrix& v, FeedbackType kind) {
  const AngleSet angles = givens_decompose(v);
  const FeedbackFrame frame = quantize_angles(angles, kind);
  const std::vector<uint8_t> wire = serialize_frame(frame);
  const FeedbackFrame parsed = parse_frame(wire, v.n_tx, v.n_streams);
  return givens_reconstruct(dequantize_angles(parsed));
}

}  // namespace fpnet::codec
