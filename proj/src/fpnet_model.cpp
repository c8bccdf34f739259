#include "fpnet/fpnet_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "fpnet/container.hpp"
#include "fpnet/hash.hpp"
#include "fpnet/losses.hpp"
#include "fpnet/metrics.hpp"
#include "json.hpp"

namespace fpnet::model {

using nlohmann::json;

void EncoderConfig::validate() const {
  if (codeword_len < 1) throw Error("EncoderConfig: codeword_len must be >= 1");
  if (quant_bits < 1 || quant_bits > 16)
    throw Error("EncoderConfig: quant_bits must be in [1, 16]");
  if (conv_filters < 1) throw Error("EncoderConfig: conv_filters must be >= 1");
  if (kernel < 1 || kernel % 2 == 0)
    throw Error("EncoderConfig: kernel must be odd and positive");
}

void TrainConfig::validate() const {
  if (!(alpha >= 0)) throw Error("TrainConfig: alpha must be >= 0");
  if (!(lr_stage1 > 0) || !(lr_stage2 > 0))
    throw Error("TrainConfig: learning rates must be positive");
  if (lr_stage2 > lr_stage1)
    throw Error("TrainConfig: lr_stage2 must not exceed lr_stage1");
  if (epochs_stage1 < 0 || epochs_stage2 < 0)
    throw Error("TrainConfig: epochs must be >= 0");
  if (batch < 1) throw Error("TrainConfig: batch must be >= 1");
  if (patience < 1) throw Error("TrainConfig: patience must be >= 1");
}

nn::Tensor BfmDataset::gather(const std::vector<size_t>& idx) const {
  const size_t len = sample_len();
  nn::Tensor out({(int)idx.size(), n_sc, n_tx, 2 * n_streams});
  for (size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= size()) throw Error("BfmDataset::gather: index out of range");
    std::copy_n(x.data() + idx[i] * len, len, out.data.data() + i * len);
  }
  return out;
}

BfmDataset BfmDataset::subset(const std::vector<size_t>& idx) const {
  BfmDataset out;
  out.n_sc = n_sc;
  out.n_tx = n_tx;
  out.n_streams = n_streams;
  const size_t len = sample_len();
  out.x.resize(idx.size() * len);
  out.labels.resize(idx.size());
  for (size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= size()) throw Error("BfmDataset::subset: index out of range");
    std::copy_n(x.data() + idx[i] * len, len, out.x.data() + i * len);
    out.labels[i] = labels[idx[i]];
  }
  return out;
}

std::string BfmDataset::content_hash() const {
  Fnv1a h;
  h.update_pod(n_sc).update_pod(n_tx).update_pod(n_streams);
  h.update(x.data(), x.size() * sizeof(double));
  h.update(labels.data(), labels.size() * sizeof(int));
  return h.hex();
}

int BfmDataset::max_label() const {
  int m = -1;
  for (int l : labels) m = std::max(m, l);
  return m;
}

BfmDataset make_bfm_dataset(const sim::CsiBatch& batch,
                            const sim::SystemConfig& sys, int n_streams) {
  BfmDataset ds;
  ds.n_sc = sys.n_valid_subcarriers;
  ds.n_tx = sys.n_tx;
  ds.n_streams = n_streams;
  ds.x.assign(batch.size() * ds.sample_len(), 0.0);
  ds.labels.resize(batch.size());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < (long)batch.size(); ++i) {
    const codec::BfmMatrix v =
        codec::extract_bfm(batch.samples[(size_t)i], sys, n_streams);
    bfm_to_dataset_row(v, ds, (size_t)i);
    ds.labels[(size_t)i] = batch.samples[(size_t)i].zone_label;
  }
  return ds;
}

codec::BfmMatrix dataset_row_to_bfm(const BfmDataset& ds, size_t row) {
  if (row >= ds.size()) throw Error("dataset_row_to_bfm: row out of range");
  codec::BfmMatrix v(ds.n_sc, ds.n_tx, ds.n_streams);
  const double* p = ds.x.data() + row * ds.sample_len();
  for (int k = 0; k < ds.n_sc; ++k)
    for (int t = 0; t < ds.n_tx; ++t)
      for (int s = 0; s < ds.n_streams; ++s) {
        const size_t off =
            ((size_t)k * ds.n_tx + t) * (2 * (size_t)ds.n_streams) + 2 * s;
        v.at(k, t, s) = cplx(p[off], p[off + 1]);
      }
  return v;
}

void bfm_to_dataset_row(const codec::BfmMatrix& v, BfmDataset& ds, size_t row) {
  if (v.n_sc != ds.n_sc || v.n_tx != ds.n_tx || v.n_streams != ds.n_streams)
    throw Error("bfm_to_dataset_row: shape mismatch");
  if (row >= ds.size()) throw Error("bfm_to_dataset_row: row out of range");
  double* p = ds.x.data() + row * ds.sample_len();
  for (int k = 0; k < ds.n_sc; ++k)
    for (int t = 0; t < ds.n_tx; ++t)
      for (int s = 0; s < ds.n_streams; ++s) {
        const size_t off =
            ((size_t)k * ds.n_tx + t) * (2 * (size_t)ds.n_streams) + 2 * s;
        p[off] = v.at(k, t, s).real();
        p[off + 1] = v.at(k, t, s).imag();
      }
}

ResBlock::ResBlock(int in_ch, int kernel)
    : c1(in_ch, 8, kernel),
      c2(8, 16, kernel),
      c3(16, 32, kernel),
      c4(32, in_ch, kernel) {}

nn::Tensor ResBlock::forward(const nn::Tensor& x) {
  nn::Tensor h = a1.forward(c1.forward(x));
  h = a2.forward(c2.forward(h));
  h = a3.forward(c3.forward(h));
  h = c4.forward(h);
  if (!h.same_shape(x)) throw Error("ResBlock: skip shape mismatch");
  for (size_t i = 0; i < h.data.size(); ++i) h.data[i] += x.data[i];
  return a_out.forward(h);
}

nn::Tensor ResBlock::backward(const nn::Tensor& dout) {
  const nn::Tensor ds = a_out.backward(dout);
  nn::Tensor d = c4.backward(ds);
  d = a3.backward(d);
  d = c3.backward(d);
  d = a2.backward(d);
  d = c2.backward(d);
  d = a1.backward(d);
  nn::Tensor dx = c1.backward(d);
  for (size_t i = 0; i < dx.data.size(); ++i) dx.data[i] += ds.data[i];
  return dx;
}

void ResBlock::init(Rng& rng) {
  c1.init(rng);
  c2.init(rng);
  c3.init(rng);
  c4.init(rng);
}

void ResBlock::register_params(nn::ParamRegistry& reg,
                               const std::string& prefix) {
  c1.register_params(reg, prefix + ".c1");
  c2.register_params(reg, prefix + ".c2");
  c3.register_params(reg, prefix + ".c3");
  c4.register_params(reg, prefix + ".c4");
}

Encoder::Encoder(const sim::SystemConfig& sys, const EncoderConfig& cfg)
    : in_h(sys.n_valid_subcarriers),
      in_w(sys.n_tx),
      in_ch(2 * sys.n_streams),
      flatten_len(sys.n_valid_subcarriers * sys.n_tx * cfg.conv_filters),
      conv(2 * sys.n_streams, cfg.conv_filters, cfg.kernel),
      bn(cfg.conv_filters),
      fc(sys.n_valid_subcarriers * sys.n_tx * cfg.conv_filters,
         cfg.codeword_len),
      quant(cfg.quant_bits) {}

nn::Tensor Encoder::forward(const nn::Tensor& x, bool train, bool quantize) {
  if (x.shape.size() != 4 || x.dim(1) != in_h || x.dim(2) != in_w ||
      x.dim(3) != in_ch) {
    throw Error("Encoder: expected input [B," + std::to_string(in_h) + "," +
                std::to_string(in_w) + "," + std::to_string(in_ch) + "], got " +
                x.shape_str());
  }
  nn::Tensor h = bn.forward(conv.forward(x), train);
  h.reshape({x.dim(0), flatten_len});
  nn::Tensor z = bound.forward(fc.forward(h));
  return quantize ? quant.forward(z) : z;
}

nn::Tensor Encoder::backward(const nn::Tensor& dz) {
  nn::Tensor d = fc.backward(bound.backward(quant.backward(dz)));
  const int batch = d.dim(0);
  d.reshape({batch, in_h, in_w, conv.out_ch()});
  return conv.backward(bn.backward(d));
}

void Encoder::init(Rng& rng) {
  conv.init(rng);
  fc.init(rng);
}

void Encoder::register_params(nn::ParamRegistry& reg,
                              const std::string& prefix) {
  conv.register_params(reg, prefix + ".conv");
  bn.register_params(reg, prefix + ".bn");
  fc.register_params(reg, prefix + ".fc");
}

Decoder::Decoder(const sim::SystemConfig& sys, const EncoderConfig& cfg,
                 int n_blocks)
    : out_h(sys.n_valid_subcarriers),
      out_w(sys.n_tx),
      out_ch(2 * sys.n_streams),
      flatten_len(sys.n_valid_subcarriers * sys.n_tx * 2 * sys.n_streams),
      fc(cfg.codeword_len,
         sys.n_valid_subcarriers * sys.n_tx * 2 * sys.n_streams),
      final_conv(2 * sys.n_streams, 2 * sys.n_streams, cfg.kernel) {
  if (n_blocks < 1) throw Error("Decoder: need at least one ResBlock");
  for (int i = 0; i < n_blocks; ++i) blocks.emplace_back(out_ch, cfg.kernel);
}

nn::Tensor Decoder::forward(const nn::Tensor& z) {
  nn::Tensor h = fc.forward(z);
  h.reshape({z.dim(0), out_h, out_w, out_ch});
  for (auto& b : blocks) h = b.forward(h);
  return final_conv.forward(h);
}

nn::Tensor Decoder::backward(const nn::Tensor& dv) {
  nn::Tensor d = final_conv.backward(dv);
  for (auto it = blocks.rbegin(); it != blocks.rend(); ++it) d = it->backward(d);
  d.reshape({dv.dim(0), flatten_len});
  return fc.backward(d);
}

void Decoder::init(Rng& rng) {
  fc.init(rng);
  for (auto& b : blocks) b.init(rng);
  final_conv.init(rng);
}

void Decoder::register_params(nn::ParamRegistry& reg,
                              const std::string& prefix) {
  fc.register_params(reg, prefix + ".fc");
  for (size_t i = 0; i < blocks.size(); ++i)
    blocks[i].register_params(reg, prefix + ".res" + std::to_string(i));
  final_conv.register_params(reg, prefix + ".final");
}

PosHead::PosHead(int codeword_len, int n_classes)
    : fc(codeword_len, n_classes) {}

void PosHead::init(Rng& rng) { fc.init(rng); }

void PosHead::register_params(nn::ParamRegistry& reg,
                              const std::string& prefix) {
  fc.register_params(reg, prefix + ".fc");
}

FpnetModel::FpnetModel(const sim::SystemConfig& s, const EncoderConfig& c,
                       int classes)
    : sys(s), cfg(c), n_classes(classes), encoder(s, c), decoder(s, c),
      head(c.codeword_len, classes) {
  sys.validate();
  cfg.validate();
  if (n_classes < 2) throw Error("FpnetModel: need at least 2 classes");
  encoder.register_params(all_params, "encoder");
  decoder.register_params(all_params, "decoder");
  head.register_params(all_params, "head");
  encoder.register_params(enc_head_params, "encoder");
  head.register_params(enc_head_params, "head");
}

void FpnetModel::init(uint64_t seed) {
  Rng rng(derive_seed(seed, 0x1417u));
  encoder.init(rng);
  decoder.init(rng);
  head.init(rng);
}

nn::Tensor FpnetModel::encode(const nn::Tensor& x, bool train) {
  const bool quantize = train ? cfg.quantize_in_training : true;
  return encoder.forward(x, train, quantize);
}

std::vector<std::vector<double>*> FpnetModel::buffers() {
  return {&encoder.bn.running_mean, &encoder.bn.running_var};
}

std::vector<const std::vector<double>*> FpnetModel::buffers() const {
  return {&encoder.bn.running_mean, &encoder.bn.running_var};
}

std::unique_ptr<FpnetModel> build_model(const sim::SystemConfig& sys,
                                        const EncoderConfig& cfg,
                                        int n_classes, uint64_t seed) {
  auto m = std::make_unique<FpnetModel>(sys, cfg, n_classes);
  m->init(seed);
  return m;
}

std::string EpochStat::to_jsonl() const {
  std::ostringstream os;
  os.precision(17);
  os << "{\"stage\":" << stage << ",\"epoch\":" << epoch << ",\"loss\":" << loss
     << ",\"l_pos\":" << l_pos << ",\"l_bfm\":" << l_bfm
     << ",\"val_loss\":" << val_loss << ",\"val_accuracy\":" << val_accuracy
     << ",\"val_sgcs\":" << val_sgcs << "}";
  return os.str();
}

namespace {

// Snapshot of every registered parameter plus model buffers, for
// best-epoch retention.
struct StateSnapshot {
  std::vector<std::vector<double>> values;

  static StateSnapshot take(FpnetModel& m, const nn::ParamRegistry& reg) {
    StateSnapshot s;
    for (const auto& slot : reg.slots()) s.values.push_back(*slot.value);
    for (const auto* buf : m.buffers()) s.values.push_back(*buf);
    return s;
  }

  void restore(FpnetModel& m, const nn::ParamRegistry& reg) const {
    size_t i = 0;
    for (const auto& slot : reg.slots()) *slot.value = values[i++];
    for (auto* buf : m.buffers()) *buf = values[i++];
  }
};

std::vector<size_t> epoch_permutation(size_t n, uint64_t seed, int stage,
                                      int epoch) {
  std::vector<size_t> perm(n);
  for (size_t i = 0; i < n; ++i) perm[i] = i;
  Rng rng(derive_seed(seed, ((uint64_t)stage << 32) | (uint32_t)epoch, 0x5u));
  rng.shuffle(perm);
  return perm;
}

std::vector<int> batch_labels(const BfmDataset& ds,
                              const std::vector<size_t>& idx) {
  std::vector<int> out(idx.size());
  for (size_t i = 0; i < idx.size(); ++i) out[i] = ds.labels[idx[i]];
  return out;
}

struct EvalMetrics {
  double l_pos = 0, l_bfm = 0, loss = 0, accuracy = 0, sgcs = 0;
};

int argmax_row(const nn::Tensor& t, int row) {
  int best = 0;
  const int c = t.dim(1);
  for (int j = 1; j < c; ++j)
    if (t.at(row, j) > t.at(row, best)) best = j;
  return best;
}

// Inference-mode pass over a labeled dataset; SGCS/reconstruction terms are
// computed only when with_recon is set.
EvalMetrics evaluate(FpnetModel& m, const BfmDataset& ds, int batch,
                     double alpha, bool with_recon) {
  if (ds.size() == 0) throw Error("evaluate: empty dataset");
  EvalMetrics out;
  size_t hits = 0;
  double sum_pos = 0, sum_bfm = 0, sum_sgcs = 0;
  for (size_t start = 0; start < ds.size(); start += (size_t)batch) {
    std::vector<size_t> idx;
    for (size_t i = start; i < std::min(ds.size(), start + (size_t)batch); ++i)
      idx.push_back(i);
    const nn::Tensor xb = ds.gather(idx);
    const std::vector<int> yb = batch_labels(ds, idx);
    nn::Tensor z = m.encode(xb, false);
    nn::Tensor logits = m.head.forward(z);
    nn::Tensor probs;
    sum_pos += nn::softmax_xent_loss(logits, yb, nullptr, &probs) * idx.size();
    for (size_t i = 0; i < idx.size(); ++i)
      if (argmax_row(probs, (int)i) == yb[i]) ++hits;
    if (with_recon) {
      const nn::Tensor v_hat = m.decoder.forward(z);
      sum_bfm += nn::mse_loss(v_hat, xb) * idx.size();
      sum_sgcs += metrics::sgcs_tensor(v_hat.data, xb.data, ds.n_sc, ds.n_tx,
                                       ds.n_streams) *
                  idx.size();
    }
  }
  const double n = (double)ds.size();
  out.l_pos = sum_pos / n;
  out.l_bfm = sum_bfm / n;
  out.loss = out.l_pos + alpha * out.l_bfm;
  out.accuracy = (double)hits / n;
  out.sgcs = sum_sgcs / n;
  return out;
}

void check_labels(const BfmDataset& ds, int n_classes, const char* who) {
  for (int l : ds.labels)
    if (l < 0 || l >= n_classes)
      throw Error(std::string(who) + ": label " + std::to_string(l) +
                  " outside [0, " + std::to_string(n_classes) + ")");
}

}  // namespace

TrainResult train_stage1(FpnetModel& m, const BfmDataset& train,
                         const BfmDataset& val, const TrainConfig& cfg) {
  cfg.validate();
  check_labels(train, m.n_classes, "train_stage1");
  check_labels(val, m.n_classes, "train_stage1");
  if (train.size() == 0) throw Error("train_stage1: empty training set");

  TrainResult res;
  nn::Adam adam(m.enc_head_params, {cfg.lr_stage1});
  StateSnapshot best = StateSnapshot::take(m, m.enc_head_params);
  double best_acc = -1.0;
  int best_epoch = -1, since_best = 0;

  for (int epoch = 0; epoch < cfg.epochs_stage1; ++epoch) {
    const auto perm = epoch_permutation(train.size(), cfg.seed, 1, epoch);
    double epoch_loss = 0;
    for (size_t start = 0; start < perm.size(); start += (size_t)cfg.batch) {
      const std::vector<size_t> idx(
          perm.begin() + start,
          perm.begin() + std::min(perm.size(), start + cfg.batch));
      const nn::Tensor xb = train.gather(idx);
      const std::vector<int> yb = batch_labels(train, idx);
      nn::Tensor z = m.encode(xb, true);
      nn::Tensor logits = m.head.forward(z);
      nn::Tensor dlogits;
      const double loss = nn::softmax_xent_loss(logits, yb, &dlogits);
      if (!std::isfinite(loss)) {
        throw Error("train_stage1: non-finite loss at epoch " +
                    std::to_string(epoch) + ", batch offset " +
                    std::to_string(start) + " (lr=" +
                    std::to_string(cfg.lr_stage1) + ")");
      }
      m.enc_head_params.zero_grad();
      m.encoder.backward(m.head.backward(dlogits));
      adam.step();
      epoch_loss += loss * idx.size();
    }
    const EvalMetrics ev = evaluate(m, val, cfg.batch, 0.0, false);
    EpochStat st;
    st.stage = 1;
    st.epoch = epoch;
    st.loss = st.l_pos = epoch_loss / train.size();
    st.val_loss = ev.l_pos;
    st.val_accuracy = ev.accuracy;
    res.log.push_back(st);
    if (ev.accuracy > best_acc) {
      best_acc = ev.accuracy;
      best_epoch = epoch;
      best = StateSnapshot::take(m, m.enc_head_params);
      since_best = 0;
    } else if (++since_best >= cfg.patience && cfg.early_stop) {
      break;
    }
  }
  if (best_epoch >= 0) best.restore(m, m.enc_head_params);
  res.best_epoch = best_epoch;
  res.best_val_accuracy = std::max(best_acc, 0.0);
  return res;
}

namespace {

// Shared stage-2 style loop: combined loss over all parameters at the
// reduced rate. stage tags the log rows; bfm_only drops the positioning
// term (sequential autoencoder training).
TrainResult combined_loop(FpnetModel& m, const BfmDataset& train,
                          const BfmDataset& val, const TrainConfig& cfg,
                          int stage, int epochs, double lr, bool bfm_only) {
  if (train.size() == 0) throw Error("train_stage2: empty training set");
  if (!bfm_only) {
    check_labels(train, m.n_classes, "train_stage2");
    check_labels(val, m.n_classes, "train_stage2");
  }
  TrainResult res;
  nn::Adam adam(m.all_params, {lr});
  double best_val_loss = std::numeric_limits<double>::infinity();
  int since_best = 0;

  for (int epoch = 0; epoch < epochs; ++epoch) {
    const auto perm = epoch_permutation(train.size(), cfg.seed, stage, epoch);
    double ep_pos = 0, ep_bfm = 0;
    for (size_t start = 0; start < perm.size(); start += (size_t)cfg.batch) {
      const std::vector<size_t> idx(
          perm.begin() + start,
          perm.begin() + std::min(perm.size(), start + cfg.batch));
      const nn::Tensor xb = train.gather(idx);
      nn::Tensor z = m.encode(xb, true);

      double l_pos = 0;
      nn::Tensor dz_head;
      if (!bfm_only) {
        const std::vector<int> yb = batch_labels(train, idx);
        nn::Tensor logits = m.head.forward(z);
        nn::Tensor dlogits;
        l_pos = nn::softmax_xent_loss(logits, yb, &dlogits);
        dz_head = m.head.backward(dlogits);
      }

      nn::Tensor v_hat = m.decoder.forward(z);
      nn::Tensor dv;
      const double l_bfm = nn::mse_loss(v_hat, xb, &dv);
      const double loss = bfm_only ? l_bfm : l_pos + cfg.alpha * l_bfm;
      if (!std::isfinite(loss)) {
        throw Error("train_stage2: non-finite loss at epoch " +
                    std::to_string(epoch) + ", batch offset " +
                    std::to_string(start) + " (l_pos=" + std::to_string(l_pos) +
                    ", l_bfm=" + std::to_string(l_bfm) +
                    ", lr=" + std::to_string(lr) + ")");
      }
      m.all_params.zero_grad();
      const double scale = bfm_only ? 1.0 : cfg.alpha;
      for (auto& g : dv.data) g *= scale;
      nn::Tensor dz = m.decoder.backward(dv);
      if (!bfm_only) {
        for (size_t i = 0; i < dz.data.size(); ++i)
          dz.data[i] += dz_head.data[i];
      }
      m.encoder.backward(dz);
      adam.step();
      ep_pos += l_pos * idx.size();
      ep_bfm += l_bfm * idx.size();
    }
    const EvalMetrics ev =
        evaluate(m, val, cfg.batch, bfm_only ? 1.0 : cfg.alpha, true);
    EpochStat st;
    st.stage = stage;
    st.epoch = epoch;
    st.l_pos = ep_pos / train.size();
    st.l_bfm = ep_bfm / train.size();
    st.loss = bfm_only ? st.l_bfm : st.l_pos + cfg.alpha * st.l_bfm;
    st.val_loss = bfm_only ? ev.l_bfm : ev.loss;
    st.val_accuracy = ev.accuracy;
    st.val_sgcs = ev.sgcs;
    res.log.push_back(st);
    if (st.val_loss < best_val_loss) {
      best_val_loss = st.val_loss;
      res.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.patience && cfg.early_stop) {
      break;
    }
    res.best_val_accuracy = std::max(res.best_val_accuracy, ev.accuracy);
  }
  return res;
}

}  // namespace

TrainResult train_stage2(FpnetModel& m, const BfmDataset& train,
                         const BfmDataset& val, const TrainConfig& cfg) {
  cfg.validate();
  return combined_loop(m, train, val, cfg, 2, cfg.epochs_stage2, cfg.lr_stage2,
                       false);
}

TrainResult fine_tune(FpnetModel& m, const BfmDataset& new_train,
                      const BfmDataset& eval_set, size_t n_samples, int epochs,
                      const TrainConfig& cfg) {
  cfg.validate();
  if (n_samples == 0) throw Error("fine_tune: n_samples must be positive");
  if (n_samples > new_train.size()) {
    throw Error("fine_tune: requested " + std::to_string(n_samples) +
                " samples but only " + std::to_string(new_train.size()) +
                " available");
  }
  check_labels(new_train, m.n_classes, "fine_tune");

  // Stratified subsample: per-label quotas by largest remainder, then a
  // seeded shuffle inside each label group.
  std::vector<std::vector<size_t>> groups((size_t)m.n_classes);
  for (size_t i = 0; i < new_train.size(); ++i)
    groups[(size_t)new_train.labels[i]].push_back(i);
  Rng rng(derive_seed(cfg.seed, 0xF17Eu));
  for (auto& g : groups) rng.shuffle(g);

  const double frac = (double)n_samples / new_train.size();
  std::vector<size_t> quota(groups.size());
  std::vector<std::pair<double, size_t>> rema;
  size_t assigned = 0;
  for (size_t c = 0; c < groups.size(); ++c) {
    const double want = frac * groups[c].size();
    quota[c] = (size_t)want;
    quota[c] = std::min(quota[c], groups[c].size());
    assigned += quota[c];
    rema.push_back({want - (double)quota[c], c});
  }
  std::sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  for (size_t r = 0; assigned < n_samples; r = (r + 1) % rema.size()) {
    const size_t c = rema[r].second;
    if (quota[c] < groups[c].size()) {
      ++quota[c];
      ++assigned;
    }
  }
  std::vector<size_t> pick;
  for (size_t c = 0; c < groups.size(); ++c)
    pick.insert(pick.end(), groups[c].begin(), groups[c].begin() + quota[c]);
  std::sort(pick.begin(), pick.end());
  const BfmDataset sub = new_train.subset(pick);

  return combined_loop(m, sub, eval_set, cfg, 3, epochs, cfg.lr_stage2, false);
}

SequentialBaseline train_sequential_baseline(const sim::SystemConfig& sys,
                                             const EncoderConfig& cfg,
                                             const BfmDataset& train,
                                             const BfmDataset& val,
                                             int n_classes,
                                             const TrainConfig& tcfg) {
  tcfg.validate();
  SequentialBaseline out;
  out.autoencoder =
      build_model(sys, cfg, n_classes, derive_seed(tcfg.seed, 0xAEu));

  // Reconstruction-only training with the same two-rate schedule as the
  // joint model's total budget.
  TrainConfig ae_cfg = tcfg;
  TrainResult ae1 = combined_loop(*out.autoencoder, train, val, ae_cfg, 2,
                                  tcfg.epochs_stage1, tcfg.lr_stage1, true);
  TrainResult ae2 = combined_loop(*out.autoencoder, train, val, ae_cfg, 2,
                                  tcfg.epochs_stage2, tcfg.lr_stage2, true);
  out.ae_log = ae1;
  out.ae_log.log.insert(out.ae_log.log.end(), ae2.log.begin(), ae2.log.end());

  // Separate positioning classifier consuming the autoencoder's
  // reconstructed BFMs.
  const BfmDataset recon_train =
      reconstruct_dataset(*out.autoencoder, train, tcfg.batch);
  const BfmDataset recon_val =
      reconstruct_dataset(*out.autoencoder, val, tcfg.batch);
  out.classifier =
      build_model(sys, cfg, n_classes, derive_seed(tcfg.seed, 0xC1Fu));
  out.clf_log = train_stage1(*out.classifier, recon_train, recon_val, tcfg);
  return out;
}

namespace {

struct ForwardOut {
  nn::Tensor z, v_hat, probs;
};

ForwardOut forward_infer(FpnetModel& m, const nn::Tensor& x) {
  ForwardOut r;
  r.z = m.encode(x, false);
  r.v_hat = m.decoder.forward(r.z);
  nn::Tensor logits = m.head.forward(r.z);
  r.probs = nn::Tensor({logits.dim(0), logits.dim(1)});
  for (int i = 0; i < logits.dim(0); ++i) {
    std::vector<double> row(logits.dim(1));
    for (int j = 0; j < logits.dim(1); ++j) row[(size_t)j] = logits.at(i, j);
    const std::vector<double> p = nn::softmax(row);
    for (int j = 0; j < logits.dim(1); ++j) r.probs.at(i, j) = p[(size_t)j];
  }
  return r;
}

}  // namespace

InferResult infer(FpnetModel& m, const codec::BfmMatrix& v) {
  if (v.n_sc != m.sys.n_valid_subcarriers || v.n_tx != m.sys.n_tx ||
      v.n_streams != m.sys.n_streams) {
    throw Error("infer: BFM shape mismatch");
  }
  BfmDataset one;
  one.n_sc = v.n_sc;
  one.n_tx = v.n_tx;
  one.n_streams = v.n_streams;
  one.x.assign(one.sample_len(), 0.0);
  one.labels = {0};
  bfm_to_dataset_row(v, one, 0);
  const nn::Tensor x = one.gather({0});
  ForwardOut f = forward_infer(m, x);

  InferResult r;
  BfmDataset rec = one;
  rec.x = f.v_hat.data;
  r.v_hat = dataset_row_to_bfm(rec, 0);
  r.probs.assign((size_t)m.n_classes, 0.0);
  for (int j = 0; j < m.n_classes; ++j) r.probs[(size_t)j] = f.probs.at(0, j);
  r.codeword.assign(f.z.data.begin(), f.z.data.end());
  return r;
}

BatchInfer infer_batch(FpnetModel& m, const nn::Tensor& x) {
  ForwardOut f = forward_infer(m, x);
  BatchInfer r;
  r.v_hat = std::move(f.v_hat);
  r.codewords = std::move(f.z);
  r.preds.resize((size_t)x.dim(0));
  for (int i = 0; i < x.dim(0); ++i) r.preds[(size_t)i] = argmax_row(f.probs, i);
  r.probs = std::move(f.probs);
  return r;
}

BfmDataset reconstruct_dataset(FpnetModel& m, const BfmDataset& in,
                               int batch_size) {
  if (batch_size < 1) throw Error("reconstruct_dataset: batch_size must be >= 1");
  BfmDataset out = in;  // copies labels and shape; x overwritten below
  for (size_t start = 0; start < in.size(); start += (size_t)batch_size) {
    std::vector<size_t> idx;
    for (size_t i = start; i < std::min(in.size(), start + batch_size); ++i)
      idx.push_back(i);
    const nn::Tensor xb = in.gather(idx);
    nn::Tensor z = m.encode(xb, false);
    const nn::Tensor v_hat = m.decoder.forward(z);
    std::copy(v_hat.data.begin(), v_hat.data.end(),
              out.x.begin() + start * in.sample_len());
  }
  return out;
}

void save_checkpoint(const FpnetModel& m, const CheckpointMeta& meta,
                     const std::string& path) {
  json manifest;
  manifest["schema_version"] = 1;
  manifest["kind"] = "fpnet";
  manifest["system"] = json::parse(sim::system_config_to_json(m.sys));
  manifest["encoder"] = {{"codeword_len", m.cfg.codeword_len},
                         {"quant_bits", m.cfg.quant_bits},
                         {"conv_filters", m.cfg.conv_filters},
                         {"kernel", m.cfg.kernel},
                         {"quantize_in_training", m.cfg.quantize_in_training}};
  manifest["n_classes"] = m.n_classes;
  manifest["stage"] = meta.stage;
  manifest["alpha"] = meta.alpha;
  manifest["epochs_completed"] = meta.epochs_completed;
  manifest["data_hash"] = meta.data_hash;
  manifest["param_count"] = m.all_params.param_count();

  std::vector<double> flat;
  flat.reserve(m.all_params.param_count());
  for (const auto& slot : m.all_params.slots())
    flat.insert(flat.end(), slot.value->begin(), slot.value->end());
  for (const auto* buf : m.buffers())
    flat.insert(flat.end(), buf->begin(), buf->end());
  manifest["state_count"] = flat.size();

  const std::vector<uint8_t> blob =
      io::doubles_to_f32le(flat.data(), flat.size());
  io::write_container(path, "FPCK", 1, manifest.dump(), blob.data(),
                      blob.size());
}

std::unique_ptr<FpnetModel> load_checkpoint(const std::string& path,
                                            CheckpointMeta* meta) {
  const io::Container c = io::read_container(path, "FPCK", 1);
  const json manifest = json::parse(c.json);
  if (manifest.at("kind").get<std::string>() != "fpnet")
    throw Error("load_checkpoint: not an fpnet checkpoint: " + path);
  const sim::SystemConfig sys =
      sim::system_config_from_json_text(manifest.at("system").dump());
  EncoderConfig cfg;
  const json& enc = manifest.at("encoder");
  cfg.codeword_len = enc.at("codeword_len").get<int>();
  cfg.quant_bits = enc.at("quant_bits").get<int>();
  cfg.conv_filters = enc.at("conv_filters").get<int>();
  cfg.kernel = enc.at("kernel").get<int>();
  cfg.quantize_in_training = enc.at("quantize_in_training").get<bool>();

  auto m = std::make_unique<FpnetModel>(sys, cfg,
                                        manifest.at("n_classes").get<int>());
  const std::vector<double> flat =
      io::f32le_to_doubles(c.blob.data(), c.blob.size());
  size_t need = m->all_params.param_count();
  for (const auto* buf : m->buffers()) need += buf->size();
  if (flat.size() != need ||
      manifest.at("state_count").get<size_t>() != flat.size()) {
    throw Error("load_checkpoint: state size mismatch in " + path);
  }
  size_t off = 0;
  for (const auto& slot : m->all_params.slots()) {
    std::copy_n(flat.begin() + off, slot.value->size(), slot.value->begin());
    off += slot.value->size();
  }
  for (auto* buf : m->buffers()) {
    std::copy_n(flat.begin() + off, buf->size(), buf->begin());
    off += buf->size();
  }
  if (meta) {
    meta->stage = manifest.at("stage").get<int>();
    meta->alpha = manifest.at("alpha").get<double>();
    meta->epochs_completed = manifest.at("epochs_completed").get<int>();
    meta->data_hash = manifest.at("data_hash").get<std::string>();
  }
  return m;
}

}  // namespace fpnet::model
