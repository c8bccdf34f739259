#ifndef FPNET_CONFIG_HPP
#define FPNET_CONFIG_HPP

#include <map>
#include <string>
#include <vector>

#include "fpnet/adblock.hpp"
#include "fpnet/channel_sim.hpp"
#include "fpnet/fpnet_model.hpp"
#include "fpnet/metrics.hpp"

namespace fpnet::cfg {

/// Minimal TOML-style value: bare sections, key = value, # comments.
/// Values: integers, floats (inf accepted), booleans, quoted strings, and
/// flat arrays of those.
struct TomlValue {
  enum class Kind { kInt, kFloat, kBool, kString, kArray };
  Kind kind = Kind::kInt;
  long long i = 0;
  double f = 0;
  bool b = false;
  std::string s;
  std::vector<TomlValue> arr;

  double as_number() const;
};

using TomlTable = std::map<std::string, std::map<std::string, TomlValue>>;

/// Parses the subset above; errors carry 1-based line numbers.
TomlTable parse_toml(const std::string& text);

/// Everything one experiment needs, resolved to concrete values.
struct ExperimentConfig {
  sim::SystemConfig system;

  // environment
  int n_zones = 20;
  int n_scatterers = 30;
  uint64_t env_seed = 7;
  sim::EnvKnobs knobs;

  // dataset
  int packets_per_zone = 500;
  int ood_packets = 600;
  double snr_db = 25.0;
  uint64_t data_seed = 101;
  uint64_t split_seed = 11;
  sim::SplitRatios ratios;

  model::EncoderConfig encoder;
  model::TrainConfig train;
  ad::AdConfig adblock;

  // metrics / evaluation
  std::string mcs_table_name = "paper_anchor";
  std::vector<double> mcs_thresholds_db;  // used when mcs_table_name=custom
  std::vector<double> mcs_gammas;
  metrics::TimingModel timing;
  double eval_snr_db = 25.0;
  int eval_symbols = 16;
  uint64_t eval_seed = 5;
  int eval_max_samples = 256;

  // baselines
  int knn_k = 5;

  // sweeps
  std::vector<double> alphas{1, 10, 30, 70, 150, 300};
  std::vector<int> codeword_lens{12, 14, 16, 18, 20};
  std::vector<int> zone_counts{5, 10, 20, 40};
  double drift_intensity = 0.3;
  uint64_t drift_seed = 33;
  std::vector<int> fine_tune_sizes{100, 400, 1600};
  int fine_tune_epochs = 30;

  std::string out_dir = "runs";
  std::string profile = "desk";

  void validate() const;
  metrics::McsTable resolved_mcs() const;
};

ExperimentConfig default_config();

/// Named presets scaling the run budget; file keys still win afterwards.
/// Known: "desk" (identity), "quick", "paper-scale".
void apply_profile(ExperimentConfig& cfg, const std::string& name);

/// Applies parsed key/values over cfg; unknown sections or keys are errors.
void apply_toml(ExperimentConfig& cfg, const TomlTable& table);

/// defaults -> profile -> file contents.
ExperimentConfig load_config(const std::string& path,
                             const std::string& profile);

/// Fully resolved round-trippable text (the provenance copy in run dirs).
std::string config_to_toml(const ExperimentConfig& cfg);

std::string config_hash(const ExperimentConfig& cfg);

}  // namespace fpnet::cfg

#endif  // FPNET_CONFIG_HPP
