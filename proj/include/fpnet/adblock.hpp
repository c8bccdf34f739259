#ifndef FPNET_ADBLOCK_HPP
#define FPNET_ADBLOCK_HPP

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fpnet/fpnet_model.hpp"

namespace fpnet::ad {

struct AdConfig {
  int latent_len = 20;
  int kernel = 3;  // reported complexity figures suggest 5x5; switchable
  int conv_filters = 2;
  int epochs = 60;  // paper-scale 200
  double lr = 1e-4;
  int batch = 64;
  uint64_t seed = 77;
  int sweep_grid = 200;

  void validate() const;
};

/// Autoencoder over the feedback pipeline's reconstructed BFMs: an encoder
/// identical to the feedback encoder but with an unquantized latent, and a
/// two-ResBlock decoder. Scores are secondary-reconstruction MSE.
struct AdblockModel {
  AdblockModel(const sim::SystemConfig& sys, const AdConfig& cfg);
  AdblockModel(const AdblockModel&) = delete;
  AdblockModel& operator=(const AdblockModel&) = delete;

  void init(uint64_t seed);
  nn::Tensor forward(const nn::Tensor& x, bool train);
  nn::Tensor backward(const nn::Tensor& dv);
  size_t param_count() const { return params.param_count(); }

  sim::SystemConfig sys;
  AdConfig cfg;
  model::Encoder encoder;
  model::Decoder decoder;
  nn::ParamRegistry params;
  double lambda = 0;  // calibrated threshold; 0 until calibration

  std::vector<std::vector<double>*> buffers();
  std::vector<const std::vector<double>*> buffers() const;
};

std::unique_ptr<AdblockModel> build_adblock(const sim::SystemConfig& sys,
                                            const AdConfig& cfg,
                                            uint64_t seed);

struct AdTrainResult {
  std::vector<double> epoch_loss;
};

/// Trains the detector to reconstruct the frozen feedback model's decoder
/// outputs V' on normal (in-region) data only; the feedback model is never
/// modified. normal_bfms holds original BFMs; V' is derived internally.
AdTrainResult train_adblock(model::FpnetModel& fpnet, AdblockModel& ad,
                            const model::BfmDataset& normal_bfms);

/// Mean squared reconstruction error of a single V' (mean over all
/// real/imag entries, so thresholds are shape-independent).
double anomaly_score(AdblockModel& ad, const codec::BfmMatrix& v_prime);

/// Batch scores, one per dataset row.
std::vector<double> anomaly_scores(AdblockModel& ad,
                                   const model::BfmDataset& v_primes,
                                   int batch_size);

struct SweepPoint {
  double threshold = 0;
  double tpr = 0, fpr = 0;
  std::optional<double> precision, f1;
};

struct SweepCurve {
  std::vector<SweepPoint> points;  // ascending thresholds
  double lambda_star = 0;
  size_t best_index = 0;

  std::string to_csv() const;
};

/// Evaluates detection metrics on a grid spanning [min score, max score];
/// the calibrated threshold maximizes F1 with ties broken toward lower FPR.
SweepCurve sweep_threshold(const std::vector<double>& normal_scores,
                           const std::vector<double>& anomaly_scores,
                           int grid);

/// Optional per-class calibration: one threshold per zone, each from the
/// zone's own normal scores against the shared anomaly scores.
std::vector<double> per_class_lambda(const std::vector<double>& normal_scores,
                                     const std::vector<int>& normal_labels,
                                     const std::vector<double>& anomaly_scores,
                                     int n_classes, int grid);

/// Anomalous iff score strictly exceeds lambda.
bool detect(AdblockModel& ad, const codec::BfmMatrix& v_prime, double lambda);

/// Histogram of predicted zones for out-of-distribution inputs when the
/// detector is bypassed; fractions sum to 1.
std::vector<double> misrouting_report(model::FpnetModel& fpnet,
                                      const model::BfmDataset& ood_bfms);

void save_adblock(const AdblockModel& ad, const std::string& path);
std::unique_ptr<AdblockModel> load_adblock(const std::string& path);

}  // namespace fpnet::ad

#endif  // FPNET_ADBLOCK_HPP
