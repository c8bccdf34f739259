#ifndef FPNET_FPNET_MODEL_HPP
#define FPNET_FPNET_MODEL_HPP

#include <memory>
#include <string>
#include <vector>

#include "fpnet/adam.hpp"
#include "fpnet/bfm_codec.hpp"
#include "fpnet/channel_sim.hpp"
#include "fpnet/layers.hpp"

namespace fpnet::model {

struct EncoderConfig {
  int codeword_len = 20;  // latent size N
  int quant_bits = 5;
  int conv_filters = 2;
  int kernel = 3;
  /// When false the straight-through quantizer is bypassed while training
  /// and applied only at inference.
  bool quantize_in_training = true;

  int feedback_bits() const { return codeword_len * quant_bits; }
  void validate() const;
};

struct TrainConfig {
  double alpha = 70.0;      // weight on the reconstruction term
  double lr_stage1 = 5e-4;
  double lr_stage2 = 1e-4;
  int epochs_stage1 = 100;
  int epochs_stage2 = 60;
  int batch = 64;
  uint64_t seed = 123;
  /// Optional early stopping (validation accuracy in stage 1, combined
  /// validation loss in stage 2); fixed-epoch runs are the default.
  bool early_stop = false;
  int patience = 20;

  void validate() const;
};

/// Labeled beamforming matrices flattened to training tensors, one row per
/// sample laid out [subcarrier][tx][2*stream] with re/im interleaved.
struct BfmDataset {
  int n_sc = 0, n_tx = 0, n_streams = 0;
  std::vector<double> x;
  std::vector<int> labels;  // zone ids; sim::kOodZone marks corridor samples

  size_t size() const { return labels.size(); }
  size_t sample_len() const { return (size_t)n_sc * n_tx * 2 * n_streams; }
  nn::Tensor gather(const std::vector<size_t>& idx) const;
  BfmDataset subset(const std::vector<size_t>& idx) const;
  std::string content_hash() const;
  int max_label() const;
};

/// Extracts the BFM of every sample in the batch (parallel over samples).
BfmDataset make_bfm_dataset(const sim::CsiBatch& batch,
                            const sim::SystemConfig& sys, int n_streams);

codec::BfmMatrix dataset_row_to_bfm(const BfmDataset& ds, size_t row);
void bfm_to_dataset_row(const codec::BfmMatrix& v, BfmDataset& ds, size_t row);

/// conv(->8) -> LReLU -> conv(->16) -> LReLU -> conv(->32) -> LReLU ->
/// conv(->in_ch), input skip added, then a final LReLU. 3x3 kernels unless
/// configured otherwise, zero padding throughout.
struct ResBlock {
  ResBlock(int in_ch, int kernel);

  nn::Tensor forward(const nn::Tensor& x);
  nn::Tensor backward(const nn::Tensor& dout);
  void init(Rng& rng);
  void register_params(nn::ParamRegistry& reg, const std::string& prefix);

  nn::Conv2d c1, c2, c3, c4;
  nn::LeakyRelu a1, a2, a3, a_out;
};

/// conv(3x3, conv_filters) -> batchnorm -> flatten -> dense(M->N) -> tanh
/// -> straight-through quantizer.
struct Encoder {
  Encoder(const sim::SystemConfig& sys, const EncoderConfig& cfg);

  /// quantize toggles the final quantizer (always on at inference).
  nn::Tensor forward(const nn::Tensor& x, bool train, bool quantize);
  nn::Tensor backward(const nn::Tensor& dz);
  void init(Rng& rng);
  void register_params(nn::ParamRegistry& reg, const std::string& prefix);

  int in_h, in_w, in_ch, flatten_len;
  nn::Conv2d conv;
  nn::BatchNorm bn;
  nn::Dense fc;
  nn::TanhLayer bound;
  nn::SteQuantizer quant;
};

/// dense(N->M) -> reshape -> n_blocks ResBlocks -> final conv (4 blocks for
/// the feedback decoder, 2 in the anomaly detector). No batchnorm.
struct Decoder {
  Decoder(const sim::SystemConfig& sys, const EncoderConfig& cfg,
          int n_blocks = 4);

  nn::Tensor forward(const nn::Tensor& z);
  nn::Tensor backward(const nn::Tensor& dv);
  void init(Rng& rng);
  void register_params(nn::ParamRegistry& reg, const std::string& prefix);

  int out_h, out_w, out_ch, flatten_len;
  nn::Dense fc;
  std::vector<ResBlock> blocks;
  nn::Conv2d final_conv;
};

/// Single dense layer producing class logits from the dequantized codeword.
struct PosHead {
  PosHead(int codeword_len, int n_classes);

  nn::Tensor forward(const nn::Tensor& z) { return fc.forward(z); }
  nn::Tensor backward(const nn::Tensor& dlogits) { return fc.backward(dlogits); }
  void init(Rng& rng);
  void register_params(nn::ParamRegistry& reg, const std::string& prefix);

  nn::Dense fc;
};

/// Joint feedback-compression + positioning model. Non-copyable: parameter
/// registries hold pointers into the layer objects.
struct FpnetModel {
  FpnetModel(const sim::SystemConfig& sys, const EncoderConfig& cfg,
             int n_classes);
  FpnetModel(const FpnetModel&) = delete;
  FpnetModel& operator=(const FpnetModel&) = delete;

  void init(uint64_t seed);
  size_t param_count() const { return all_params.param_count(); }

  /// Quantizer engaged per config while training, always at inference.
  nn::Tensor encode(const nn::Tensor& x, bool train);

  sim::SystemConfig sys;
  EncoderConfig cfg;
  int n_classes;
  Encoder encoder;
  Decoder decoder;
  PosHead head;
  nn::ParamRegistry all_params;       // encoder, decoder, head
  nn::ParamRegistry enc_head_params;  // stage-1 subset

  /// Batchnorm running statistics and any other non-optimized state, in
  /// checkpoint order.
  std::vector<std::vector<double>*> buffers();
  std::vector<const std::vector<double>*> buffers() const;
};

std::unique_ptr<FpnetModel> build_model(const sim::SystemConfig& sys,
                                        const EncoderConfig& cfg,
                                        int n_classes, uint64_t seed);

struct EpochStat {
  int stage = 0;
  int epoch = 0;
  double loss = 0;       // = l_pos + alpha * l_bfm in stage 2
  double l_pos = 0;
  double l_bfm = 0;
  double val_loss = 0;
  double val_accuracy = 0;
  double val_sgcs = 0;  // stage 2 / fine-tune only

  std::string to_jsonl() const;
};

struct TrainResult {
  std::vector<EpochStat> log;
  int best_epoch = -1;
  double best_val_accuracy = 0;
};

/// Positioning-oriented pre-training: encoder + head on the classification
/// loss only; decoder untouched. Retains the best-validation-accuracy
/// parameters. Throws on divergence (non-finite loss) with context.
TrainResult train_stage1(FpnetModel& m, const BfmDataset& train,
                         const BfmDataset& val, const TrainConfig& cfg);

/// End-to-end fine-tuning of all parameters on L_pos + alpha * L_bfm at the
/// reduced learning rate; logs per-epoch validation SGCS and accuracy.
TrainResult train_stage2(FpnetModel& m, const BfmDataset& train,
                         const BfmDataset& val, const TrainConfig& cfg);

/// Continues stage-2 optimization on a stratified subset of new-environment
/// data, logging per-epoch metrics on eval_set. Throws if n_samples exceeds
/// the available data.
TrainResult fine_tune(FpnetModel& m, const BfmDataset& new_train,
                      const BfmDataset& eval_set, size_t n_samples, int epochs,
                      const TrainConfig& cfg);

/// Feedback-only baseline: an autoencoder trained on the reconstruction
/// loss alone, plus a separate encoder-architecture classifier trained on
/// the autoencoder's reconstructed BFMs.
struct SequentialBaseline {
  std::unique_ptr<FpnetModel> autoencoder;
  std::unique_ptr<FpnetModel> classifier;  // decoder unused
  TrainResult ae_log, clf_log;
};

SequentialBaseline train_sequential_baseline(const sim::SystemConfig& sys,
                                             const EncoderConfig& cfg,
                                             const BfmDataset& train,
                                             const BfmDataset& val,
                                             int n_classes,
                                             const TrainConfig& tcfg);

struct InferResult {
  codec::BfmMatrix v_hat;
  std::vector<double> probs;     // length n_classes, sums to 1
  std::vector<double> codeword;  // dequantized levels, length N
};

InferResult infer(FpnetModel& m, const codec::BfmMatrix& v);

struct BatchInfer {
  nn::Tensor v_hat;      // [B, sc, tx, 2*streams]
  nn::Tensor probs;      // [B, C]
  nn::Tensor codewords;  // [B, N]
  std::vector<int> preds;
};

BatchInfer infer_batch(FpnetModel& m, const nn::Tensor& x);

/// Runs the full dataset through the frozen model and returns reconstructed
/// BFMs with the original labels.
BfmDataset reconstruct_dataset(FpnetModel& m, const BfmDataset& in,
                               int batch_size);

struct CheckpointMeta {
  int stage = 0;
  double alpha = 0;
  int epochs_completed = 0;
  std::string data_hash;
};

/// JSON manifest (architecture + metadata) followed by the little-endian
/// float32 parameter blob in registry order, then batchnorm buffers.
void save_checkpoint(const FpnetModel& m, const CheckpointMeta& meta,
                     const std::string& path);
std::unique_ptr<FpnetModel> load_checkpoint(const std::string& path,
                                            CheckpointMeta* meta = nullptr);

}  // namespace fpnet::model

#endif  // FPNET_FPNET_MODEL_HPP
