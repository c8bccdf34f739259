#include "fpnet/adblock.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fpnet/container.hpp"
#include "fpnet/losses.hpp"
#include "json.hpp"

namespace fpnet::ad {

using nlohmann::json;

void AdConfig::validate() const {
  if (latent_len < 1) throw Error("AdConfig: latent_len must be >= 1");
  if (kernel < 1 || kernel % 2 == 0)
    throw Error("AdConfig: kernel must be odd and positive");
  if (conv_filters < 1) throw Error("AdConfig: conv_filters must be >= 1");
  if (epochs < 0) throw Error("AdConfig: epochs must be >= 0");
  if (!(lr > 0)) throw Error("AdConfig: lr must be positive");
  if (batch < 1) throw Error("AdConfig: batch must be >= 1");
  if (sweep_grid < 2) throw Error("AdConfig: sweep_grid must be >= 2");
}

namespace {

model::EncoderConfig arch_of(const AdConfig& cfg) {
  model::EncoderConfig e;
  e.codeword_len = cfg.latent_len;
  e.quant_bits = 5;  // present for architecture parity; never applied
  e.conv_filters = cfg.conv_filters;
  e.kernel = cfg.kernel;
  e.quantize_in_training = false;
  return e;
}

}  // namespace

AdblockModel::AdblockModel(const sim::SystemConfig& s, const AdConfig& c)
    : sys(s), cfg(c), encoder(s, arch_of(c)), decoder(s, arch_of(c), 2) {
  sys.validate();
  cfg.validate();
  encoder.register_params(params, "ad.encoder");
  decoder.register_params(params, "ad.decoder");
}

void AdblockModel::init(uint64_t seed) {
  Rng rng(derive_seed(seed, 0xADB0u));
  encoder.init(rng);
  decoder.init(rng);
}

nn::Tensor AdblockModel::forward(const nn::Tensor& x, bool train) {
  nn::Tensor z = encoder.forward(x, train, /*quantize=*/false);
  return decoder.forward(z);
}

nn::Tensor AdblockModel::backward(const nn::Tensor& dv) {
  return encoder.backward(decoder.backward(dv));
}

std::vector<std::vector<double>*> AdblockModel::buffers() {
  return {&encoder.bn.running_mean, &encoder.bn.running_var};
}

std::vector<const std::vector<double>*> AdblockModel::buffers() const {
  return {&encoder.bn.running_mean, &encoder.bn.running_var};
}

std::unique_ptr<AdblockModel> build_adblock(const sim::SystemConfig& sys,
                                            const AdConfig& cfg,
                                            uint64_t seed) {
  auto m = std::make_unique<AdblockModel>(sys, cfg);
  m->init(seed);
  return m;
}

AdTrainResult train_adblock(model::FpnetModel& fpnet, AdblockModel& ad,
                            const model::BfmDataset& normal_bfms) {
  if (normal_bfms.size() == 0) throw Error("train_adblock: empty normal set");
  for (int l : normal_bfms.labels)
    if (l < 0)
      throw Error("train_adblock: normal data must come from in-region zones");

  // The detector learns the distribution of the feedback pipeline's outputs,
  // not of the raw BFMs.
  const model::BfmDataset v_prime =
      model::reconstruct_dataset(fpnet, normal_bfms, ad.cfg.batch);

  AdTrainResult res;
  nn::Adam adam(ad.params, {ad.cfg.lr});
  for (int epoch = 0; epoch < ad.cfg.epochs; ++epoch) {
    std::vector<size_t> perm(v_prime.size());
    for (size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    Rng rng(derive_seed(ad.cfg.seed, 0xADE0u, (uint64_t)epoch));
    rng.shuffle(perm);

    double ep_loss = 0;
    for (size_t start = 0; start < perm.size();
         start += (size_t)ad.cfg.batch) {
      const std::vector<size_t> idx(
          perm.begin() + start,
          perm.begin() + std::min(perm.size(), start + (size_t)ad.cfg.batch));
      const nn::Tensor xb = v_prime.gather(idx);
      nn::Tensor out = ad.forward(xb, true);
      nn::Tensor dout;
      const double loss = nn::mse_loss(out, xb, &dout);
      if (!std::isfinite(loss)) {
        throw Error("train_adblock: non-finite loss at epoch " +
                    std::to_string(epoch) + ", batch offset " +
                    std::to_string(start));
      }
      ad.params.zero_grad();
      ad.backward(dout);
      adam.step();
      ep_loss += loss * idx.size();
    }
    res.epoch_loss.push_back(ep_loss / v_prime.size());
  }
  return res;
}

double anomaly_score(AdblockModel& ad, const codec::BfmMatrix& v_prime) {
  model::BfmDataset one;
  one.n_sc = v_prime.n_sc;
  one.n_tx = v_prime.n_tx;
  one.n_streams = v_prime.n_streams;
  one.x.assign(one.sample_len(), 0.0);
  one.labels = {0};
  model::bfm_to_dataset_row(v_prime, one, 0);
  return anomaly_scores(ad, one, 1)[0];
}

std::vector<double> anomaly_scores(AdblockModel& ad,
                                   const model::BfmDataset& v_primes,
                                   int batch_size) {
  if (batch_size < 1) throw Error("anomaly_scores: batch_size must be >= 1");
  if (v_primes.n_sc != ad.sys.n_valid_subcarriers ||
      v_primes.n_tx != ad.sys.n_tx || v_primes.n_streams != ad.sys.n_streams)
    throw Error("anomaly_scores: dataset shape mismatch");
  const size_t len = v_primes.sample_len();
  std::vector<double> scores(v_primes.size(), 0.0);
  for (size_t start = 0; start < v_primes.size(); start += (size_t)batch_size) {
    std::vector<size_t> idx;
    for (size_t i = start;
         i < std::min(v_primes.size(), start + (size_t)batch_size); ++i)
      idx.push_back(i);
    const nn::Tensor xb = v_primes.gather(idx);
    const nn::Tensor out = ad.forward(xb, false);
    for (size_t i = 0; i < idx.size(); ++i) {
      double acc = 0;
      for (size_t j = 0; j < len; ++j) {
        const double d = out.data[i * len + j] - xb.data[i * len + j];
        acc += d * d;
      }
      scores[start + i] = acc / (double)len;
    }
  }
  return scores;
}

SweepCurve sweep_threshold(const std::vector<double>& normal_scores,
                           const std::vector<double>& anomaly_scores,
                           int grid) {
  if (normal_scores.empty() || anomaly_scores.empty())
    throw Error("sweep_threshold: both score sets must be non-empty");
  if (grid < 2) throw Error("sweep_threshold: grid must be >= 2");

  double lo = normal_scores[0], hi = normal_scores[0];
  for (double s : normal_scores) {
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  for (double s : anomaly_scores) {
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }

  SweepCurve curve;
  double best_f1 = -1.0, best_fpr = 2.0;
  for (int g = 0; g < grid; ++g) {
    const double lam = lo + (hi - lo) * g / (grid - 1);
    SweepPoint pt;
    pt.threshold = lam;
    long tp = 0, fp = 0;
    for (double s : anomaly_scores)
      if (s > lam) ++tp;
    for (double s : normal_scores)
      if (s > lam) ++fp;
    pt.tpr = (double)tp / anomaly_scores.size();
    pt.fpr = (double)fp / normal_scores.size();
    if (tp + fp > 0) {
      const double prec = (double)tp / (tp + fp);
      pt.precision = prec;
      pt.f1 = (prec + pt.tpr > 0) ? 2 * prec * pt.tpr / (prec + pt.tpr) : 0.0;
    }
    const double f1 = pt.f1.value_or(0.0);
    if (f1 > best_f1 || (f1 == best_f1 && pt.fpr < best_fpr)) {
      best_f1 = f1;
      best_fpr = pt.fpr;
      curve.best_index = (size_t)g;
      curve.lambda_star = lam;
    }
    curve.points.push_back(pt);
  }
  return curve;
}

std::vector<double> per_class_lambda(const std::vector<double>& normal_scores,
                                     const std::vector<int>& normal_labels,
                                     const std::vector<double>& anomaly_scores,
                                     int n_classes, int grid) {
  if (normal_scores.size() != normal_labels.size())
    throw Error("per_class_lambda: length mismatch");
  if (n_classes < 1) throw Error("per_class_lambda: n_classes must be >= 1");
  std::vector<double> lambdas((size_t)n_classes, 0.0);
  for (int c = 0; c < n_classes; ++c) {
    std::vector<double> cls;
    for (size_t i = 0; i < normal_scores.size(); ++i)
      if (normal_labels[i] == c) cls.push_back(normal_scores[i]);
    if (cls.empty())
      throw Error("per_class_lambda: no normal scores for class " +
                  std::to_string(c));
    lambdas[(size_t)c] = sweep_threshold(cls, anomaly_scores, grid).lambda_star;
  }
  return lambdas;
}

bool detect(AdblockModel& ad, const codec::BfmMatrix& v_prime, double lambda) {
  if (!(lambda > 0)) throw Error("detect: threshold not calibrated");
  return anomaly_score(ad, v_prime) > lambda;
}

std::vector<double> misrouting_report(model::FpnetModel& fpnet,
                                      const model::BfmDataset& ood_bfms) {
  if (ood_bfms.size() == 0) throw Error("misrouting_report: empty OOD set");
  std::vector<double> frac((size_t)fpnet.n_classes, 0.0);
  for (size_t start = 0; start < ood_bfms.size(); start += 256) {
    std::vector<size_t> idx;
    for (size_t i = start; i < std::min(ood_bfms.size(), start + (size_t)256);
         ++i)
      idx.push_back(i);
    const model::BatchInfer bi = model::infer_batch(fpnet, ood_bfms.gather(idx));
    for (int p : bi.preds) frac[(size_t)p] += 1.0;
  }
  for (auto& f : frac) f /= (double)ood_bfms.size();
  return frac;
}

std::string SweepCurve::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "threshold,tpr,fpr,precision,f1\n";
  for (const auto& p : points) {
    os << p.threshold << "," << p.tpr << "," << p.fpr << ",";
    if (p.precision) os << *p.precision;
    os << ",";
    if (p.f1) os << *p.f1;
    os << "\n";
  }
  return os.str();
}

void save_adblock(const AdblockModel& ad, const std::string& path) {
  json manifest;
  manifest["schema_version"] = 1;
  manifest["kind"] = "adblock";
  manifest["system"] = json::parse(sim::system_config_to_json(ad.sys));
  manifest["config"] = {{"latent_len", ad.cfg.latent_len},
                        {"kernel", ad.cfg.kernel},
                        {"conv_filters", ad.cfg.conv_filters},
                        {"epochs", ad.cfg.epochs},
                        {"lr", ad.cfg.lr},
                        {"batch", ad.cfg.batch},
                        {"seed", ad.cfg.seed},
                        {"sweep_grid", ad.cfg.sweep_grid}};
  manifest["lambda"] = ad.lambda;

  std::vector<double> flat;
  for (const auto& slot : ad.params.slots())
    flat.insert(flat.end(), slot.value->begin(), slot.value->end());
  for (const auto* buf : ad.buffers())
    flat.insert(flat.end(), buf->begin(), buf->end());
  manifest["state_count"] = flat.size();

  const std::vector<uint8_t> blob =
      io::doubles_to_f32le(flat.data(), flat.size());
  io::write_container(path, "ADCK", 1, manifest.dump(), blob.data(),
                      blob.size());
}

std::unique_ptr<AdblockModel> load_adblock(const std::string& path) {
  const io::Container c = io::read_container(path, "ADCK", 1);
  const json manifest = json::parse(c.json);
  if (manifest.at("kind").get<std::string>() != "adblock")
    throw Error("load_adblock: not an adblock checkpoint: " + path);
  const sim::SystemConfig sys =
      sim::system_config_from_json_text(manifest.at("system").dump());
  AdConfig cfg;
  const json& jc = manifest.at("config");
  cfg.latent_len = jc.at("latent_len").get<int>();
  cfg.kernel = jc.at("kernel").get<int>();
  cfg.conv_filters = jc.at("conv_filters").get<int>();
  cfg.epochs = jc.at("epochs").get<int>();
  cfg.lr = jc.at("lr").get<double>();
  cfg.batch = jc.at("batch").get<int>();
  cfg.seed = jc.at("seed").get<uint64_t>();
  cfg.sweep_grid = jc.at("sweep_grid").get<int>();

  auto m = std::make_unique<AdblockModel>(sys, cfg);
  const std::vector<double> flat =
      io::f32le_to_doubles(c.blob.data(), c.blob.size());
  size_t need = m->params.param_count();
  for (const auto* buf : m->buffers()) need += buf->size();
  if (flat.size() != need ||
      manifest.at("state_count").get<size_t>() != flat.size())
    throw Error("load_adblock: state size mismatch in " + path);
  size_t off = 0;
  for (const auto& slot : m->params.slots()) {
    std::copy_n(flat.begin() + off, slot.value->size(), slot.value->begin());
    off += slot.value->size();
  }
  for (auto* buf : m->buffers()) {
    std::copy_n(flat.begin() + off, buf->size(), buf->begin());
    off += buf->size();
  }
  m->lambda = manifest.at("lambda").get<double>();
  return m;
}

}  // namespace fpnet::ad
