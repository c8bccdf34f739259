#include "fpnet/metrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "fpnet/rng.hpp"

namespace fpnet::metrics {

void McsTable::validate() const {
  if (rows.empty()) throw Error("McsTable: empty");
  for (size_t i = 0; i < rows.size(); ++i) {
    if (!std::isfinite(rows[i].evm_threshold_db) ||
        !std::isfinite(rows[i].gamma) || rows[i].gamma <= 0) {
      throw Error("McsTable: non-finite or non-positive row");
    }
    if (i > 0) {
      if (rows[i].evm_threshold_db >= rows[i - 1].evm_threshold_db)
        throw Error("McsTable: thresholds must be strictly decreasing");
      if (rows[i].gamma <= rows[i - 1].gamma)
        throw Error("McsTable: gamma must be strictly increasing");
    }
  }
}

McsTable McsTable::standard_ladder() {
  // Modulation-bits x code-rate steps (BPSK 1/2 up to 256-QAM 1/2) with
  // receiver EVM requirements spaced 2-3 dB apart.
  return McsTable{{{-10.0, 1.0},
                   {-13.0, 1.5},
                   {-16.0, 2.0},
                   {-19.0, 2.25},
                   {-22.0, 8.0 / 3.0},
                   {-25.0, 3.0},
                   {-27.0, 10.0 / 3.0},
                   {-30.0, 4.0}}};
}

McsTable McsTable::paper_anchor() {
  return McsTable{{{-8.0, 1.0}, {-15.0, 2.0}, {-20.0, 3.0}, {-26.0, 4.0}}};
}

McsTable McsTable::by_name(const std::string& name) {
  if (name == "standard_ladder") return standard_ladder();
  if (name == "paper_anchor") return paper_anchor();
  throw Error("McsTable: unknown table name '" + name + "'");
}

double gamma_from_evm(double evm_db, const McsTable& table) {
  table.validate();
  double gamma = 0.0;
  for (const auto& row : table.rows) {
    if (evm_db <= row.evm_threshold_db) gamma = row.gamma;
  }
  return gamma;
}

void TimingModel::validate() const {
  if (!(t_fixed_overhead_s > 0) || !(r_ctrl_bps > 0) || payload_bytes <= 0)
    throw Error("TimingModel: all fields must be positive");
}

double sgcs(const codec::BfmMatrix& v_hat, const codec::BfmMatrix& v) {
  if (v_hat.n_sc != v.n_sc || v_hat.n_tx != v.n_tx ||
      v_hat.n_streams != v.n_streams) {
    throw Error("sgcs: shape mismatch");
  }
  double acc = 0.0;
  for (int k = 0; k < v.n_sc; ++k) {
    for (int s = 0; s < v.n_streams; ++s) {
      cplx inner(0, 0);
      double na = 0, nb = 0;
      for (int t = 0; t < v.n_tx; ++t) {
        const cplx a = v_hat.at(k, t, s), b = v.at(k, t, s);
        inner += std::conj(a) * b;
        na += std::norm(a);
        nb += std::norm(b);
      }
      if (na <= 0 || nb <= 0) throw Error("sgcs: zero-norm column");
      acc += std::norm(inner) / (na * nb);
    }
  }
  return acc / ((double)v.n_sc * v.n_streams);
}

double sgcs_tensor(const std::vector<double>& v_hat,
                   const std::vector<double>& v, int n_sc, int n_tx,
                   int n_streams) {
  if (v_hat.size() != v.size()) throw Error("sgcs_tensor: size mismatch");
  const size_t per = (size_t)n_sc * n_tx * 2 * n_streams;
  if (per == 0 || v.size() % per != 0)
    throw Error("sgcs_tensor: size not a multiple of one sample");
  const size_t batch = v.size() / per;
  double acc = 0.0;
  for (size_t b = 0; b < batch; ++b) {
    for (int k = 0; k < n_sc; ++k) {
      for (int s = 0; s < n_streams; ++s) {
        cplx inner(0, 0);
        double na = 0, nb = 0;
        for (int t = 0; t < n_tx; ++t) {
          const size_t base =
              ((b * n_sc + k) * n_tx + t) * (2 * (size_t)n_streams) + 2 * s;
          const cplx a(v_hat[base], v_hat[base + 1]);
          const cplx c(v[base], v[base + 1]);
          inner += std::conj(a) * c;
          na += std::norm(a);
          nb += std::norm(c);
        }
        if (na <= 0 || nb <= 0) throw Error("sgcs_tensor: zero-norm column");
        acc += std::norm(inner) / (na * nb);
      }
    }
  }
  return acc / ((double)batch * n_sc * n_streams);
}

double simulate_link_evm(const sim::CsiSample& sample,
                         const sim::SystemConfig& sys,
                         const codec::BfmMatrix& v_hat, double snr_db,
                         int n_symbols, uint64_t seed) {
  sys.validate();
  if (v_hat.n_sc != sys.n_valid_subcarriers || v_hat.n_tx != sys.n_tx)
    throw Error("simulate_link_evm: precoder shape mismatch");
  if (sample.h.size() != sys.entries_per_sample())
    throw Error("simulate_link_evm: sample shape mismatch");
  if (n_symbols <= 0) throw Error("simulate_link_evm: n_symbols must be > 0");
  if (std::isnan(snr_db)) throw Error("simulate_link_evm: snr_db is NaN");
  const int ns = v_hat.n_streams;
  const bool noiseless = std::isinf(snr_db) && snr_db > 0;

  // Effective channels G_k = H_k * Vhat_k. Precoder columns are normalized
  // to unit norm first (per-stream transmit power constraint), so a sloppy
  // reconstruction cannot buy EVM by simply transmitting louder.
  std::vector<Eigen::MatrixXcd> g((size_t)sys.n_valid_subcarriers);
  double ideal_rx_power = 0.0;
  for (int k = 0; k < sys.n_valid_subcarriers; ++k) {
    Eigen::MatrixXcd hk(sys.n_rx, sys.n_tx);
    for (int r = 0; r < sys.n_rx; ++r)
      for (int t = 0; t < sys.n_tx; ++t) hk(r, t) = sample.at(k, r, t, sys);
    Eigen::MatrixXcd vk(sys.n_tx, ns);
    for (int t = 0; t < sys.n_tx; ++t)
      for (int s = 0; s < ns; ++s) vk(t, s) = v_hat.at(k, t, s);
    for (int s = 0; s < ns; ++s) {
      const double norm = vk.col(s).norm();
      if (!(norm > 0))
        throw Error("simulate_link_evm: zero-norm precoder column at "
                    "subcarrier " +
                    std::to_string(k));
      vk.col(s) /= norm;
    }
    g[k] = hk * vk;

    // Noise is referenced to the power an ideal beamformer (the dominant
    // right singular vectors of H_k) would deliver. The reference is
    // independent of v_hat, so steering error costs post-equalization SNR
    // instead of silently rescaling the noise floor.
    Eigen::JacobiSVD<Eigen::MatrixXcd> hsvd(hk);
    const auto& hs = hsvd.singularValues();
    for (int i = 0; i < ns && i < hs.size(); ++i)
      ideal_rx_power += hs(i) * hs(i);
  }
  ideal_rx_power /= (double)sys.n_valid_subcarriers * sys.n_rx;

  // Per-component complex noise variance.
  double noise_var = 0.0;
  if (!noiseless) noise_var = ideal_rx_power / db_to_linear(snr_db);

  // Pseudo-inverses via SVD, with a singularity check per subcarrier.
  std::vector<Eigen::MatrixXcd> pinv((size_t)sys.n_valid_subcarriers);
  for (int k = 0; k < sys.n_valid_subcarriers; ++k) {
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(
        g[k], Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const double smax = sv(0);
    if (!(smax > 0) || sv(sv.size() - 1) <= 1e-12 * std::max(1.0, smax)) {
      throw Error("simulate_link_evm: effective channel singular at "
                  "subcarrier " +
                  std::to_string(k));
    }
    Eigen::VectorXd inv = sv.cwiseInverse();
    pinv[k] = svd.matrixV() * inv.asDiagonal() *
              svd.matrixU().adjoint();
  }

  Rng rng(seed);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  const double noise_sigma = std::sqrt(noise_var);
  double err_power = 0.0, sig_power = 0.0;
  Eigen::VectorXcd s(ns), y(sys.n_rx);
  for (int k = 0; k < sys.n_valid_subcarriers; ++k) {
    for (int sym = 0; sym < n_symbols; ++sym) {
      for (int j = 0; j < ns; ++j) {
        const uint64_t q = rng.uniform_int(4);
        s(j) = cplx((q & 1) ? inv_sqrt2 : -inv_sqrt2,
                    (q & 2) ? inv_sqrt2 : -inv_sqrt2);
      }
      y = g[k] * s;
      if (!noiseless) {
        for (int r = 0; r < sys.n_rx; ++r) y(r) += noise_sigma * rng.cgaussian();
      }
      const Eigen::VectorXcd s_hat = pinv[k] * y;
      err_power += (s_hat - s).squaredNorm();
      sig_power += s.squaredNorm();
    }
  }
  const double ratio = err_power / sig_power;
  const double evm_db = 10.0 * std::log10(std::max(ratio, 1e-300));
  return std::max(evm_db, -80.0);
}

double gross_throughput(double gamma, const sim::SystemConfig& sys) {
  sys.validate();
  if (gamma < 0) throw Error("gross_throughput: gamma must be >= 0");
  return (double)sys.n_valid_subcarriers / (sys.n_fft + sys.n_cp) *
         sys.bandwidth_hz * gamma;
}

double net_throughput(double r_gross, int feedback_bits,
                      const TimingModel& timing) {
  timing.validate();
  if (feedback_bits < 0) throw Error("net_throughput: negative feedback_bits");
  if (!(r_gross > 0)) return 0.0;
  const double t_data = timing.payload_bytes * 8.0 / r_gross;
  const double t_overhead =
      timing.t_fixed_overhead_s + feedback_bits / timing.r_ctrl_bps;
  return r_gross * t_data / (t_data + t_overhead);
}

double classification_accuracy(const std::vector<int>& preds,
                               const std::vector<int>& labels) {
  if (preds.size() != labels.size())
    throw Error("classification_accuracy: length mismatch");
  if (preds.empty()) throw Error("classification_accuracy: empty input");
  size_t hits = 0;
  for (size_t i = 0; i < preds.size(); ++i)
    if (preds[i] == labels[i]) ++hits;
  return (double)hits / preds.size();
}

AdMetrics ad_metrics(const std::vector<bool>& flags,
                     const std::vector<bool>& truth) {
  if (flags.size() != truth.size()) throw Error("ad_metrics: length mismatch");
  if (flags.empty()) throw Error("ad_metrics: empty input");
  AdMetrics m;
  for (size_t i = 0; i < flags.size(); ++i) {
    if (truth[i]) {
      (flags[i] ? m.tp : m.fn)++;
    } else {
      (flags[i] ? m.fp : m.tn)++;
    }
  }
  m.tpr = (m.tp + m.fn) ? (double)m.tp / (m.tp + m.fn) : 0.0;
  m.fpr = (m.fp + m.tn) ? (double)m.fp / (m.fp + m.tn) : 0.0;
  if (m.tp + m.fp > 0) {
    m.precision = (double)m.tp / (m.tp + m.fp);
    if (*m.precision + m.tpr > 0)
      m.f1 = 2.0 * (*m.precision) * m.tpr / (*m.precision + m.tpr);
    else
      m.f1 = 0.0;
  }
  return m;
}

namespace {

// Leading eigenvector of the symmetric matrix c (d x d) by power iteration.
// Returns the eigenvalue; vec is normalized. Deterministic in rng.
double power_iterate(const std::vector<double>& c, int d, Rng& rng,
                     std::vector<double>& vec) {
  vec.resize((size_t)d);
  for (int i = 0; i < d; ++i) vec[i] = rng.gaussian();
  double lambda = 0.0;
  std::vector<double> next((size_t)d);
  for (int it = 0; it < 500; ++it) {
    for (int i = 0; i < d; ++i) {
      double acc = 0.0;
      for (int j = 0; j < d; ++j) acc += c[(size_t)i * d + j] * vec[j];
      next[i] = acc;
    }
    double norm = 0.0;
    for (int i = 0; i < d; ++i) norm += next[i] * next[i];
    norm = std::sqrt(norm);
    if (norm <= 1e-300) {  // matrix annihilated the start vector
      for (int i = 0; i < d; ++i) vec[i] = 0.0;
      return 0.0;
    }
    for (int i = 0; i < d; ++i) next[i] /= norm;
    const double new_lambda = norm;  // |Cv| for unit v converges to lambda
    const double delta = std::abs(new_lambda - lambda);
    vec.swap(next);
    lambda = new_lambda;
    if (it > 10 && delta <= 1e-13 * std::max(1.0, lambda)) break;
  }
  return lambda;
}

}  // namespace

PcaResult pca_project(const std::vector<std::vector<double>>& codewords,
                      uint64_t seed) {
  if (codewords.size() < 2) throw Error("pca_project: need at least 2 points");
  const int n = (int)codewords.size();
  const int d = (int)codewords[0].size();
  if (d < 1) throw Error("pca_project: empty codewords");
  for (const auto& cw : codewords)
    if ((int)cw.size() != d) throw Error("pca_project: ragged input");

  std::vector<double> mean((size_t)d, 0.0);
  for (const auto& cw : codewords)
    for (int j = 0; j < d; ++j) mean[j] += cw[j];
  for (int j = 0; j < d; ++j) mean[j] /= n;

  std::vector<double> cov((size_t)d * d, 0.0);
  for (const auto& cw : codewords) {
    for (int i = 0; i < d; ++i) {
      const double xi = cw[i] - mean[i];
      for (int j = 0; j < d; ++j) cov[(size_t)i * d + j] += xi * (cw[j] - mean[j]);
    }
  }
  for (auto& x : cov) x /= n;

  double trace = 0.0;
  for (int i = 0; i < d; ++i) trace += cov[(size_t)i * d + i];

  PcaResult out;
  out.points.assign((size_t)n, {0.0, 0.0});
  if (trace <= 1e-30) return out;  // zero variance: everything at the origin

  Rng rng(seed);
  std::vector<std::vector<double>> dirs(2);
  std::array<double, 2> lambdas{0.0, 0.0};
  for (int c = 0; c < 2 && c < d; ++c) {
    lambdas[c] = power_iterate(cov, d, rng, dirs[c]);
    if (lambdas[c] <= 0) break;
    // Deflate: cov -= lambda * v v^T.
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        cov[(size_t)i * d + j] -= lambdas[c] * dirs[c][i] * dirs[c][j];
  }
  for (int c = 0; c < 2; ++c) {
    out.explained_variance[c] = std::max(lambdas[c], 0.0) / trace;
    if (dirs[c].empty()) dirs[c].assign((size_t)d, 0.0);
  }
  for (int p = 0; p < n; ++p) {
    for (int c = 0; c < 2; ++c) {
      double acc = 0.0;
      for (int j = 0; j < d; ++j) acc += dirs[c][j] * (codewords[p][j] - mean[j]);
      out.points[p][c] = acc;
    }
  }
  return out;
}

namespace {

void json_field(std::ostringstream& os, bool& first, const std::string& key,
                const std::string& value) {
  if (!first) os << ",";
  first = false;
  os << "\"" << key << "\":" << value;
}

std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

std::string MetricsReport::to_json() const {
  std::ostringstream os;
  bool first = true;
  os << "{";
  json_field(os, first, "method", "\"" + method + "\"");
  if (feedback_bits) json_field(os, first, "feedback_bits", std::to_string(*feedback_bits));
  if (sgcs) json_field(os, first, "sgcs", num(*sgcs));
  if (accuracy) json_field(os, first, "accuracy", num(*accuracy));
  if (evm_db) json_field(os, first, "evm_db", num(*evm_db));
  if (gamma) json_field(os, first, "gamma", num(*gamma));
  if (r_gross) json_field(os, first, "r_gross", num(*r_gross));
  if (r_net) json_field(os, first, "r_net", num(*r_net));
  if (confusion) {
    json_field(os, first, "tp", std::to_string(confusion->tp));
    json_field(os, first, "fp", std::to_string(confusion->fp));
    json_field(os, first, "tn", std::to_string(confusion->tn));
    json_field(os, first, "fn", std::to_string(confusion->fn));
    json_field(os, first, "tpr", num(confusion->tpr));
    json_field(os, first, "fpr", num(confusion->fpr));
    if (confusion->precision)
      json_field(os, first, "precision", num(*confusion->precision));
    if (confusion->f1) json_field(os, first, "f1", num(*confusion->f1));
  }
  os << "}";
  return os.str();
}

}  // namespace fpnet::metrics
