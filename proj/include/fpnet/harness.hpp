#ifndef FPNET_HARNESS_HPP
#define FPNET_HARNESS_HPP

#include <memory>
#include <string>
#include <vector>

#include "fpnet/adblock.hpp"
#include "fpnet/config.hpp"
#include "fpnet/knn.hpp"
#include "fpnet/metrics.hpp"

namespace fpnet::harness {

void ensure_dir(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

/// One experiment's generated data: the environment, the merged CSI batch,
/// stratified splits, and the extracted BFM datasets (labeled splits plus
/// the OOD corridor split into calibration and test halves).
struct DataBundle {
  sim::EnvironmentModel env;
  sim::CsiBatch full;
  sim::CsiBatch csi_test;  // labeled test split at CSI level (link sims)
  model::BfmDataset train, val, test;
  model::BfmDataset ood_calib, ood_test;
};

/// Generates environment + packets from the config (deterministic).
DataBundle prepare_data(const cfg::ExperimentConfig& c);

/// Splits + extracts from an already-generated batch (e.g. read from disk).
DataBundle bundle_from_batch(const cfg::ExperimentConfig& c,
                             const sim::EnvironmentModel& env,
                             const sim::CsiBatch& full);

struct TrainedFpnet {
  std::unique_ptr<model::FpnetModel> net;
  model::TrainResult stage1, stage2;
};

/// Two-step training at the given latent size and loss weight; other
/// settings come from the config.
TrainedFpnet train_fpnet(const cfg::ExperimentConfig& c, const DataBundle& d,
                         int codeword_len, double alpha);

std::string training_log_jsonl(const TrainedFpnet& t);

struct RunReport {
  std::vector<metrics::MetricsReport> rows;
  std::string provenance_json;

  std::string to_json() const;
  std::string to_markdown() const;
  std::string to_csv() const;
};

/// Mean test-set EVM (linear-domain average over sampled links, in dB) for
/// precoders produced by `reconstruct` applied per test sample.
struct MethodEvalInput {
  std::string method;
  int feedback_bits = 0;
  const model::BfmDataset* recon = nullptr;  // aligned with d.test rows
};

metrics::MetricsReport eval_feedback_method(const cfg::ExperimentConfig& c,
                                            const DataBundle& d,
                                            const MethodEvalInput& in);

/// Full Table-II-shaped evaluation: the trained model at its bit budget,
/// the sequential baseline, both standards codecs, and KNN.
RunReport evaluate_all(const cfg::ExperimentConfig& c, const DataBundle& d,
                       model::FpnetModel& fpnet,
                       model::FpnetModel& sfpnet_ae,
                       model::FpnetModel& sfpnet_clf);

/// Reconstruction datasets for the standards codecs (parallel per sample).
model::BfmDataset codec_reconstruct_dataset(const model::BfmDataset& in,
                                            codec::FeedbackType kind);

/// Grid dimensions realizing `target` zones by splitting or merging the
/// environment's base tiling along x; throws when not derivable.
void grid_for_zone_count(const sim::EnvironmentModel& env, int target,
                         int& nx, int& ny);

/// Re-labels every in-region sample by the (nx, ny) position grid; OOD
/// labels are preserved.
sim::CsiBatch relabel_by_grid(const sim::CsiBatch& batch,
                              const sim::EnvironmentModel& env, int nx, int ny);

// ---- command implementations (shared by the CLI and tests) ----

struct RunPaths {
  std::string root;
  std::string config_toml() const { return root + "/config.toml"; }
  std::string dataset() const { return root + "/data/dataset.fpds"; }
  std::string checkpoints() const { return root + "/checkpoints"; }
  std::string logs() const { return root + "/logs"; }
  std::string report_dir() const { return root + "/report"; }
  std::string fpnet_ckpt(int n) const;
  std::string sfpnet_ae_ckpt(int n) const;
  std::string sfpnet_clf_ckpt(int n) const;
  std::string adblock_ckpt() const { return checkpoints() + "/adblock.adck"; }
};

/// Writes the resolved config + hash into the run root.
RunPaths init_run_dir(const cfg::ExperimentConfig& c, const std::string& root);

void cmd_gen_data(const cfg::ExperimentConfig& c, const RunPaths& paths);
void cmd_train(const cfg::ExperimentConfig& c, const RunPaths& paths);
RunReport cmd_eval(const cfg::ExperimentConfig& c, const RunPaths& paths);
void cmd_sweep_alpha(const cfg::ExperimentConfig& c, const RunPaths& paths);
void cmd_sweep_bits(const cfg::ExperimentConfig& c, const RunPaths& paths);
void cmd_sweep_zones(const cfg::ExperimentConfig& c, const RunPaths& paths);
void cmd_drift(const cfg::ExperimentConfig& c, const RunPaths& paths);
void cmd_ad_eval(const cfg::ExperimentConfig& c, const RunPaths& paths);
void cmd_baseline(const cfg::ExperimentConfig& c, const RunPaths& paths);
void cmd_report(const RunPaths& paths);

struct ReproduceResult {
  std::string metric;  // "row_method.field"
  double stored = 0, rederived = 0;
  bool identical = false;
};

/// Re-derives one metric of the stored eval report from config + seeds and
/// compares it bit-for-bit. metric_name empty = seeded random choice.
ReproduceResult cmd_reproduce(const RunPaths& paths, uint64_t choice_seed,
                              const std::string& metric_name);

}  // namespace fpnet::harness

#endif  // FPNET_HARNESS_HPP
