#ifndef FPNET_METRICS_HPP
#define FPNET_METRICS_HPP

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "fpnet/bfm_codec.hpp"
#include "fpnet/channel_sim.hpp"

namespace fpnet::metrics {

/// EVM-to-rate lookup: ordered (evm_threshold_db, gamma) rows, thresholds
/// strictly descending, gamma strictly increasing. gamma is the average
/// number of information bits carried per subcarrier at that link quality.
struct McsRow {
  double evm_threshold_db = 0;
  double gamma = 0;
};

struct McsTable {
  std::vector<McsRow> rows;

  void validate() const;

  /// Modulation-bits x code-rate ladder (BPSK 1/2 ... 256QAM 1/2).
  static McsTable standard_ladder();
  /// Two-point anchored table back-solved from the reference operating
  /// points (-16.28 dB -> 2 bits, -20.61 dB -> 3 bits); the default for
  /// throughput evaluation.
  static McsTable paper_anchor();
  static McsTable by_name(const std::string& name);
};

/// Largest gamma whose threshold is >= evm_db; 0 below the loosest row.
double gamma_from_evm(double evm_db, const McsTable& table);

/// Airtime model for the sounding/feedback exchange around each data packet.
struct TimingModel {
  double t_fixed_overhead_s = 131.9e-6;  // NDPA + NDP + ACK + report framing
  double r_ctrl_bps = 7.0e6;             // rate carrying the feedback payload
  int payload_bytes = 300;

  void validate() const;
};

/// Mean over (subcarrier, column) of the squared normalized Hermitian
/// inner-product magnitude |<v_hat, v>|^2 / (|v_hat|^2 |v|^2).
/// Throws on shape mismatch or a zero-norm column.
double sgcs(const codec::BfmMatrix& v_hat, const codec::BfmMatrix& v);

/// Same similarity computed directly on real-interleaved BFM tensors laid
/// out [subcarrier][tx][2*stream] (optionally with a leading batch axis, in
/// which case the mean over the batch is returned).
double sgcs_tensor(const std::vector<double>& v_hat,
                   const std::vector<double>& v, int n_sc, int n_tx,
                   int n_streams);

/// Simulates a precoded QPSK link through sample's channel using v_hat:
/// per subcarrier, y = H v_hat s + n with genie least-squares equalization
/// on H v_hat, EVM = 10 log10(err/sig) over all subcarriers and symbols,
/// clamped below at -80 dB. Precoder columns are normalized to unit power;
/// the AWGN variance is snr_db below the mean power an ideal beamformer
/// would receive, so precoder error translates into post-equalization SNR
/// loss. snr_db=+inf disables noise. Throws if the effective channel is
/// numerically singular.
double simulate_link_evm(const sim::CsiSample& sample,
                         const sim::SystemConfig& sys,
                         const codec::BfmMatrix& v_hat, double snr_db,
                         int n_symbols, uint64_t seed);

/// (n_valid_subcarriers / (n_fft + n_cp)) * bandwidth * gamma.
double gross_throughput(double gamma, const sim::SystemConfig& sys);

/// r_gross * T / (T + T_overhead) with T = payload_bytes*8 / r_gross and
/// T_overhead = t_fixed + feedback_bits / r_ctrl.
double net_throughput(double r_gross, int feedback_bits,
                      const TimingModel& timing);

double classification_accuracy(const std::vector<int>& preds,
                               const std::vector<int>& labels);

/// Binary confusion metrics; truth/flags mark anomalies as true. precision
/// and f1 are absent when undefined (no positive predictions).
struct AdMetrics {
  long tp = 0, fp = 0, tn = 0, fn = 0;
  double tpr = 0, fpr = 0;
  std::optional<double> precision, f1;
};

AdMetrics ad_metrics(const std::vector<bool>& flags,
                     const std::vector<bool>& truth);

/// Top-2 principal component projection via the iterated power method with
/// deflation (deterministic for a fixed seed). explained_variance holds the
/// fraction of total variance captured per component; zero-variance input
/// maps every point to the origin.
struct PcaResult {
  std::vector<std::array<double, 2>> points;
  std::array<double, 2> explained_variance{0.0, 0.0};
};

PcaResult pca_project(const std::vector<std::vector<double>>& codewords,
                      uint64_t seed);

/// One evaluated method row (feedback scheme x metrics); optional fields
/// stay absent where a metric does not apply (e.g. KNN has no SGCS).
struct MetricsReport {
  std::string method;
  std::optional<int> feedback_bits;
  std::optional<double> sgcs, accuracy, evm_db, gamma, r_gross, r_net;
  std::optional<AdMetrics> confusion;

  std::string to_json() const;
};

}  // namespace fpnet::metrics

#endif  // FPNET_METRICS_HPP
