#include "fpnet/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <exception>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"

#include "fpnet/common.hpp"
#include "fpnet/hash.hpp"
#include "fpnet/rng.hpp"

namespace fs = std::filesystem;
using njson = nlohmann::json;

namespace fpnet::harness {

void ensure_dir(const std::string& path) {
  std::error_code ec;
  fs::create_directories(path, ec);
  if (ec) throw Error("cannot create directory " + path + ": " + ec.message());
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot open " + path + " for writing");
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!f) throw Error("short write to " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

namespace {

std::string fmt17(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::string fmt_fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string alpha_label(double a) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", a);
  return buf;
}

void require_file(const std::string& path, const std::string& producer) {
  if (!fs::exists(path))
    throw Error("missing " + path + "; run `fpnet-lab " + producer +
                "` first");
}

std::string hash_file(const std::string& path) {
  return hash_string_hex(read_text_file(path));
}

sim::CsiBatch filter_batch(const sim::CsiBatch& in, bool keep_ood) {
  sim::CsiBatch out;
  out.sys = in.sys;
  out.manifest = in.manifest;
  out.manifest.config_hash += keep_ood ? ":ood" : ":zones";
  for (const auto& s : in.samples)
    if ((s.zone_label == sim::kOodZone) == keep_ood) out.samples.push_back(s);
  return out;
}

int n_classes_of(const DataBundle& d) {
  const int m = std::max({d.train.max_label(), d.val.max_label(),
                          d.test.max_label()});
  if (m < 0) throw Error("dataset splits contain no labeled samples");
  return m + 1;
}

std::vector<int> predict_all(model::FpnetModel& m, const model::BfmDataset& ds,
                             int batch) {
  std::vector<int> preds;
  preds.reserve(ds.size());
  for (size_t i = 0; i < ds.size(); i += static_cast<size_t>(batch)) {
    const size_t n = std::min(static_cast<size_t>(batch), ds.size() - i);
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), i);
    model::BatchInfer bi = model::infer_batch(m, ds.gather(idx));
    preds.insert(preds.end(), bi.preds.begin(), bi.preds.end());
  }
  return preds;
}

std::string log_jsonl(const model::TrainResult& r) {
  std::string out;
  for (const auto& st : r.log) out += st.to_jsonl() + "\n";
  return out;
}

model::EpochStat final_stats(const TrainedFpnet& t) {
  if (!t.stage2.log.empty()) return t.stage2.log.back();
  if (!t.stage1.log.empty()) return t.stage1.log.back();
  return {};
}

double dataset_sgcs(model::FpnetModel& m, const model::BfmDataset& ref,
                    int batch) {
  const model::BfmDataset rec = model::reconstruct_dataset(m, ref, batch);
  return metrics::sgcs_tensor(rec.x, ref.x, ref.n_sc, ref.n_tx, ref.n_streams);
}

DataBundle load_bundle(const cfg::ExperimentConfig& c, const RunPaths& paths) {
  require_file(paths.dataset(), "gen-data");
  sim::CsiBatch full = sim::read_dataset(paths.dataset());
  if (sim::system_config_to_json(full.sys) !=
      sim::system_config_to_json(c.system))
    throw Error("dataset at " + paths.dataset() +
                " was generated under a different system config; rerun "
                "`fpnet-lab gen-data`");
  const sim::EnvironmentModel env = sim::generate_environment(
      c.system, c.n_zones, c.n_scatterers, c.env_seed, c.knobs);
  return bundle_from_batch(c, env, full);
}

metrics::MetricsReport codec_row(const cfg::ExperimentConfig& c,
                                 const DataBundle& d,
                                 codec::FeedbackType kind) {
  const model::BfmDataset rec = codec_reconstruct_dataset(d.test, kind);
  MethodEvalInput in;
  in.method = kind == codec::FeedbackType::kType0 ? "type0" : "type1";
  in.feedback_bits = codec::frame_total_bits(
      kind, c.system.n_tx, c.system.n_streams, c.system.n_valid_subcarriers);
  in.recon = &rec;
  return eval_feedback_method(c, d, in);
}

metrics::MetricsReport knn_row(const cfg::ExperimentConfig& c,
                               const DataBundle& d) {
  metrics::MetricsReport row;
  row.method = "knn_k" + std::to_string(c.knn_k);
  row.accuracy = baseline::knn_accuracy(d.train, d.test, c.knn_k);
  return row;
}

njson base_provenance(const cfg::ExperimentConfig& c, const DataBundle& d) {
  njson p;
  p["config_hash"] = cfg::config_hash(c);
  p["environment"] = d.env.hash();
  p["train_data"] = d.train.content_hash();
  p["test_data"] = d.test.content_hash();
  p["seeds"]["env"] = std::to_string(c.env_seed);
  p["seeds"]["data"] = std::to_string(c.data_seed);
  p["seeds"]["split"] = std::to_string(c.split_seed);
  p["seeds"]["train"] = std::to_string(c.train.seed);
  p["seeds"]["eval"] = std::to_string(c.eval_seed);
  return p;
}

/// Loads the checkpoints cmd_train produced and evaluates them; shared by
/// cmd_eval (which persists the outputs) and cmd_reproduce (which only
/// compares).
RunReport eval_core(const cfg::ExperimentConfig& c, const RunPaths& paths) {
  const DataBundle d = load_bundle(c, paths);
  const int n = c.encoder.codeword_len;
  require_file(paths.fpnet_ckpt(n), "train");
  require_file(paths.sfpnet_ae_ckpt(n), "train");
  require_file(paths.sfpnet_clf_ckpt(n), "train");
  auto fp = model::load_checkpoint(paths.fpnet_ckpt(n));
  auto ae = model::load_checkpoint(paths.sfpnet_ae_ckpt(n));
  auto clf = model::load_checkpoint(paths.sfpnet_clf_ckpt(n));
  RunReport rep = evaluate_all(c, d, *fp, *ae, *clf);
  njson p = base_provenance(c, d);
  p["dataset_file"] = hash_file(paths.dataset());
  p["fpnet_checkpoint"] = hash_file(paths.fpnet_ckpt(n));
  p["sfpnet_ae_checkpoint"] = hash_file(paths.sfpnet_ae_ckpt(n));
  p["sfpnet_clf_checkpoint"] = hash_file(paths.sfpnet_clf_ckpt(n));
  rep.provenance_json = p.dump();
  return rep;
}

bool find_metric(const njson& report, const std::string& method,
                 const std::string& field, double* out) {
  for (const auto& row : report.at("rows")) {
    if (row.at("method").get<std::string>() != method) continue;
    if (!row.contains(field)) return false;
    *out = row.at(field).get<double>();
    return true;
  }
  return false;
}

}  // namespace

DataBundle prepare_data(const cfg::ExperimentConfig& c) {
  c.validate();
  const sim::EnvironmentModel env = sim::generate_environment(
      c.system, c.n_zones, c.n_scatterers, c.env_seed, c.knobs);
  std::vector<sim::CsiBatch> parts;
  for (int z = 0; z < c.n_zones; ++z)
    parts.push_back(
        sim::sample_csi(env, z, c.packets_per_zone, c.snr_db, c.data_seed));
  if (c.ood_packets > 0)
    parts.push_back(sim::sample_csi(env, sim::kOodZone, c.ood_packets,
                                    c.snr_db, c.data_seed));
  return bundle_from_batch(c, env, sim::merge_batches(parts));
}

DataBundle bundle_from_batch(const cfg::ExperimentConfig& c,
                             const sim::EnvironmentModel& env,
                             const sim::CsiBatch& full) {
  DataBundle d;
  d.env = env;
  d.full = full;
  const sim::CsiBatch labeled = filter_batch(full, false);
  const sim::CsiBatch ood = filter_batch(full, true);
  if (labeled.size() == 0) throw Error("dataset has no labeled samples");
  const sim::DatasetSplit split =
      sim::split_dataset(labeled, c.ratios, c.split_seed);
  d.csi_test = split.test;
  const int ns = c.system.n_streams;
  d.train = model::make_bfm_dataset(split.train, c.system, ns);
  d.val = model::make_bfm_dataset(split.val, c.system, ns);
  d.test = model::make_bfm_dataset(split.test, c.system, ns);
  if (ood.size() > 0) {
    const sim::SplitRatios half{0.5, 0.0, 0.5};
    const sim::DatasetSplit osplit =
        sim::split_dataset(ood, half, derive_seed(c.split_seed, 0x00D));
    d.ood_calib = model::make_bfm_dataset(osplit.train, c.system, ns);
    d.ood_test = model::make_bfm_dataset(osplit.test, c.system, ns);
  } else {
    d.ood_calib.n_sc = d.ood_test.n_sc = d.train.n_sc;
    d.ood_calib.n_tx = d.ood_test.n_tx = d.train.n_tx;
    d.ood_calib.n_streams = d.ood_test.n_streams = d.train.n_streams;
  }
  return d;
}

TrainedFpnet train_fpnet(const cfg::ExperimentConfig& c, const DataBundle& d,
                         int codeword_len, double alpha) {
  model::EncoderConfig ec = c.encoder;
  ec.codeword_len = codeword_len;
  model::TrainConfig tc = c.train;
  tc.alpha = alpha;
  TrainedFpnet t;
  t.net = model::build_model(c.system, ec, n_classes_of(d), tc.seed);
  t.stage1 = model::train_stage1(*t.net, d.train, d.val, tc);
  t.stage2 = model::train_stage2(*t.net, d.train, d.val, tc);
  return t;
}

std::string training_log_jsonl(const TrainedFpnet& t) {
  return log_jsonl(t.stage1) + log_jsonl(t.stage2);
}

std::string RunReport::to_json() const {
  std::ostringstream os;
  os << "{\n  \"provenance\": "
     << (provenance_json.empty() ? "{}" : provenance_json)
     << ",\n  \"rows\": [\n";
  for (size_t i = 0; i < rows.size(); ++i)
    os << "    " << rows[i].to_json() << (i + 1 < rows.size() ? ",\n" : "\n");
  os << "  ]\n}\n";
  return os.str();
}

std::string RunReport::to_markdown() const {
  std::ostringstream os;
  os << "| method | feedback bits | SGCS | accuracy | EVM (dB) | spectral "
        "eff. | gross (Mb/s) | net (Mb/s) |\n";
  os << "|---|---|---|---|---|---|---|---|\n";
  for (const auto& r : rows) {
    os << "| " << r.method << " | "
       << (r.feedback_bits ? std::to_string(*r.feedback_bits) : "") << " | "
       << (r.sgcs ? fmt_fixed(*r.sgcs, 4) : "") << " | "
       << (r.accuracy ? fmt_fixed(100.0 * *r.accuracy, 2) + "%" : "") << " | "
       << (r.evm_db ? fmt_fixed(*r.evm_db, 2) : "") << " | "
       << (r.gamma ? fmt_fixed(*r.gamma, 3) : "") << " | "
       << (r.r_gross ? fmt_fixed(*r.r_gross / 1e6, 3) : "") << " | "
       << (r.r_net ? fmt_fixed(*r.r_net / 1e6, 3) : "") << " |\n";
  }
  return os.str();
}

std::string RunReport::to_csv() const {
  auto opt = [](const std::optional<double>& v) {
    return v ? fmt17(*v) : std::string();
  };
  std::ostringstream os;
  os << "method,feedback_bits,sgcs,accuracy,evm_db,gamma,r_gross_bps,"
        "r_net_bps\n";
  for (const auto& r : rows) {
    os << r.method << ','
       << (r.feedback_bits ? std::to_string(*r.feedback_bits) : "") << ','
       << opt(r.sgcs) << ',' << opt(r.accuracy) << ',' << opt(r.evm_db) << ','
       << opt(r.gamma) << ',' << opt(r.r_gross) << ',' << opt(r.r_net)
       << "\n";
  }
  return os.str();
}

metrics::MetricsReport eval_feedback_method(const cfg::ExperimentConfig& c,
                                            const DataBundle& d,
                                            const MethodEvalInput& in) {
  if (in.recon == nullptr)
    throw Error("eval_feedback_method: no reconstruction dataset");
  if (in.recon->size() != d.test.size())
    throw Error("eval_feedback_method: reconstruction rows (" +
                std::to_string(in.recon->size()) +
                ") do not match the test split (" +
                std::to_string(d.test.size()) + ")");
  if (d.test.size() == 0) throw Error("eval_feedback_method: empty test split");

  metrics::MetricsReport r;
  r.method = in.method;
  r.feedback_bits = in.feedback_bits;
  r.sgcs = metrics::sgcs_tensor(in.recon->x, d.test.x, d.test.n_sc,
                                d.test.n_tx, d.test.n_streams);

  const size_t n_eval =
      std::min(static_cast<size_t>(c.eval_max_samples), d.test.size());
  std::vector<double> lin(n_eval, 0.0);
  std::exception_ptr err = nullptr;
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(n_eval); ++i) {
    try {
      const codec::BfmMatrix v_hat =
          model::dataset_row_to_bfm(*in.recon, static_cast<size_t>(i));
      const double evm_db = metrics::simulate_link_evm(
          d.csi_test.samples[static_cast<size_t>(i)], c.system, v_hat,
          c.eval_snr_db, c.eval_symbols,
          derive_seed(c.eval_seed, static_cast<uint64_t>(i)));
      lin[static_cast<size_t>(i)] = std::pow(10.0, evm_db / 10.0);
    } catch (...) {
#pragma omp critical
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);

  double mean = 0.0;
  for (double v : lin) mean += v;
  mean /= static_cast<double>(n_eval);
  r.evm_db = 10.0 * std::log10(mean);
  r.gamma = metrics::gamma_from_evm(*r.evm_db, c.resolved_mcs());
  r.r_gross = metrics::gross_throughput(*r.gamma, c.system);
  r.r_net = *r.r_gross > 0.0 ? metrics::net_throughput(
                                   *r.r_gross, in.feedback_bits, c.timing)
                             : 0.0;
  return r;
}

RunReport evaluate_all(const cfg::ExperimentConfig& c, const DataBundle& d,
                       model::FpnetModel& fpnet, model::FpnetModel& sfpnet_ae,
                       model::FpnetModel& sfpnet_clf) {
  RunReport rep;
  const int batch = c.train.batch;

  {
    const model::BfmDataset rec =
        model::reconstruct_dataset(fpnet, d.test, batch);
    MethodEvalInput in;
    in.method = "fpnet_n" + std::to_string(fpnet.cfg.codeword_len);
    in.feedback_bits = fpnet.cfg.feedback_bits();
    in.recon = &rec;
    metrics::MetricsReport row = eval_feedback_method(c, d, in);
    row.accuracy = metrics::classification_accuracy(
        predict_all(fpnet, d.test, batch), d.test.labels);
    rep.rows.push_back(row);
  }
  {
    const model::BfmDataset rec =
        model::reconstruct_dataset(sfpnet_ae, d.test, batch);
    MethodEvalInput in;
    in.method = "sfpnet_n" + std::to_string(sfpnet_ae.cfg.codeword_len);
    in.feedback_bits = sfpnet_ae.cfg.feedback_bits();
    in.recon = &rec;
    metrics::MetricsReport row = eval_feedback_method(c, d, in);
    row.accuracy = metrics::classification_accuracy(
        predict_all(sfpnet_clf, rec, batch), d.test.labels);
    rep.rows.push_back(row);
  }
  rep.rows.push_back(codec_row(c, d, codec::FeedbackType::kType0));
  rep.rows.push_back(codec_row(c, d, codec::FeedbackType::kType1));
  rep.rows.push_back(knn_row(c, d));

  rep.provenance_json = base_provenance(c, d).dump();
  return rep;
}

model::BfmDataset codec_reconstruct_dataset(const model::BfmDataset& in,
                                            codec::FeedbackType kind) {
  model::BfmDataset out = in;
  std::exception_ptr err = nullptr;
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(in.size()); ++i) {
    try {
      const codec::BfmMatrix v =
          model::dataset_row_to_bfm(in, static_cast<size_t>(i));
      model::bfm_to_dataset_row(codec::codec_roundtrip(v, kind), out,
                                static_cast<size_t>(i));
    } catch (...) {
#pragma omp critical
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
  return out;
}

void grid_for_zone_count(const sim::EnvironmentModel& env, int target,
                         int& nx, int& ny) {
  const int bx = env.grid_nx, by = env.grid_ny;
  if (bx <= 0 || by <= 0)
    throw Error("grid_for_zone_count: environment has no grid tiling");
  if (target <= 0) throw Error("grid_for_zone_count: zone count must be positive");
  if (target % by != 0)
    throw Error("cannot derive " + std::to_string(target) + " zones from the " +
                std::to_string(bx) + "x" + std::to_string(by) +
                " base grid: the count must be a multiple of " +
                std::to_string(by) + " rows");
  const int tx = target / by;
  if (tx % bx != 0 && bx % tx != 0)
    throw Error("cannot derive " + std::to_string(target) + " zones from the " +
                std::to_string(bx) + "x" + std::to_string(by) +
                " base grid: " + std::to_string(tx) +
                " columns is neither a multiple nor a divisor of " +
                std::to_string(bx));
  nx = tx;
  ny = by;
}

sim::CsiBatch relabel_by_grid(const sim::CsiBatch& batch,
                              const sim::EnvironmentModel& env, int nx,
                              int ny) {
  if (nx <= 0 || ny <= 0) throw Error("relabel_by_grid: grid must be positive");
  sim::CsiBatch out = batch;
  const double zw = env.knobs.floor_w / nx;
  const double zh = env.knobs.floor_h / ny;
  for (auto& s : out.samples) {
    if (s.zone_label == sim::kOodZone) continue;
    const int ix = std::clamp(static_cast<int>(std::floor(s.pos_x / zw)), 0,
                              nx - 1);
    const int iy = std::clamp(static_cast<int>(std::floor(s.pos_y / zh)), 0,
                              ny - 1);
    s.zone_label = iy * nx + ix;
  }
  out.manifest.config_hash = batch.manifest.config_hash + ":grid" +
                             std::to_string(nx) + "x" + std::to_string(ny);
  return out;
}

std::string RunPaths::fpnet_ckpt(int n) const {
  return checkpoints() + "/fpnet_n" + std::to_string(n) + ".fpck";
}

std::string RunPaths::sfpnet_ae_ckpt(int n) const {
  return checkpoints() + "/sfpnet_ae_n" + std::to_string(n) + ".fpck";
}

std::string RunPaths::sfpnet_clf_ckpt(int n) const {
  return checkpoints() + "/sfpnet_clf_n" + std::to_string(n) + ".fpck";
}

RunPaths init_run_dir(const cfg::ExperimentConfig& c, const std::string& root) {
  RunPaths p;
  p.root = root;
  ensure_dir(root);
  ensure_dir(root + "/data");
  ensure_dir(p.checkpoints());
  ensure_dir(p.logs());
  ensure_dir(p.report_dir());
  write_text_file(p.config_toml(), cfg::config_to_toml(c));
  write_text_file(root + "/config_hash.txt", cfg::config_hash(c) + "\n");
  return p;
}

void cmd_gen_data(const cfg::ExperimentConfig& c, const RunPaths& paths) {
  const DataBundle d = prepare_data(c);
  sim::write_dataset(d.full, paths.dataset());
  njson m;
  m["environment"] = d.env.hash();
  m["zones"] = d.env.n_zones();
  m["samples"] = d.full.size();
  m["train"] = d.train.size();
  m["val"] = d.val.size();
  m["test"] = d.test.size();
  m["ood_calibration"] = d.ood_calib.size();
  m["ood_test"] = d.ood_test.size();
  write_text_file(paths.root + "/data/manifest.json", m.dump(2) + "\n");
}

void cmd_train(const cfg::ExperimentConfig& c, const RunPaths& paths) {
  const DataBundle d = load_bundle(c, paths);
  const int n = c.encoder.codeword_len;
  const std::string tag = std::to_string(n);

  TrainedFpnet t = train_fpnet(c, d, n, c.train.alpha);
  model::CheckpointMeta meta;
  meta.stage = 2;
  meta.alpha = c.train.alpha;
  meta.epochs_completed =
      static_cast<int>(t.stage1.log.size() + t.stage2.log.size());
  meta.data_hash = d.train.content_hash();
  model::save_checkpoint(*t.net, meta, paths.fpnet_ckpt(n));
  write_text_file(paths.logs() + "/fpnet_n" + tag + ".jsonl",
                  training_log_jsonl(t));

  model::SequentialBaseline sb = model::train_sequential_baseline(
      c.system, c.encoder, d.train, d.val, n_classes_of(d), c.train);
  model::CheckpointMeta am;
  am.stage = 2;
  am.alpha = 0.0;
  am.epochs_completed = static_cast<int>(sb.ae_log.log.size());
  am.data_hash = meta.data_hash;
  model::save_checkpoint(*sb.autoencoder, am, paths.sfpnet_ae_ckpt(n));
  model::CheckpointMeta cm;
  cm.stage = 1;
  cm.alpha = 0.0;
  cm.epochs_completed = static_cast<int>(sb.clf_log.log.size());
  cm.data_hash = meta.data_hash;
  model::save_checkpoint(*sb.classifier, cm, paths.sfpnet_clf_ckpt(n));
  write_text_file(paths.logs() + "/sfpnet_ae_n" + tag + ".jsonl",
                  log_jsonl(sb.ae_log));
  write_text_file(paths.logs() + "/sfpnet_clf_n" + tag + ".jsonl",
                  log_jsonl(sb.clf_log));
}

RunReport cmd_eval(const cfg::ExperimentConfig& c, const RunPaths& paths) {
  RunReport rep = eval_core(c, paths);
  ensure_dir(paths.report_dir());
  write_text_file(paths.report_dir() + "/report.json", rep.to_json());
  write_text_file(paths.report_dir() + "/report.md", rep.to_markdown());
  write_text_file(paths.report_dir() + "/rows.csv", rep.to_csv());
  return rep;
}

void cmd_sweep_alpha(const cfg::ExperimentConfig& c, const RunPaths& paths) {
  const DataBundle d = load_bundle(c, paths);
  const int n = c.encoder.codeword_len;
  const int batch = c.train.batch;
  std::ostringstream csv;
  csv << "alpha,val_sgcs,val_accuracy,test_sgcs,test_accuracy\n";
  for (double a : c.alphas) {
    TrainedFpnet t = train_fpnet(c, d, n, a);
    const model::EpochStat last = final_stats(t);
    const double tsg = dataset_sgcs(*t.net, d.test, batch);
    const double tacc = metrics::classification_accuracy(
        predict_all(*t.net, d.test, batch), d.test.labels);
    csv << alpha_label(a) << ',' << fmt17(last.val_sgcs) << ','
        << fmt17(last.val_accuracy) << ',' << fmt17(tsg) << ',' << fmt17(tacc)
        << "\n";
    model::CheckpointMeta meta;
    meta.stage = 2;
    meta.alpha = a;
    meta.epochs_completed =
        static_cast<int>(t.stage1.log.size() + t.stage2.log.size());
    meta.data_hash = d.train.content_hash();
    model::save_checkpoint(*t.net, meta,
                           paths.checkpoints() + "/fpnet_n" +
                               std::to_string(n) + "_a" + alpha_label(a) +
                               ".fpck");
    write_text_file(paths.logs() + "/sweep_alpha_a" + alpha_label(a) +
                        ".jsonl",
                    training_log_jsonl(t));
  }
  ensure_dir(paths.report_dir());
  write_text_file(paths.report_dir() + "/sweep_alpha.csv", csv.str());
}

void cmd_sweep_bits(const cfg::ExperimentConfig& c, const RunPaths& paths) {
  const DataBundle d = load_bundle(c, paths);
  const int batch = c.train.batch;
  std::ostringstream csv;
  csv << "codeword_len,feedback_bits,val_sgcs,val_accuracy,test_sgcs,"
         "test_accuracy\n";
  for (int n : c.codeword_lens) {
    TrainedFpnet t = train_fpnet(c, d, n, c.train.alpha);
    const model::EpochStat last = final_stats(t);
    const double tsg = dataset_sgcs(*t.net, d.test, batch);
    const double tacc = metrics::classification_accuracy(
        predict_all(*t.net, d.test, batch), d.test.labels);
    csv << n << ',' << t.net->cfg.feedback_bits() << ','
        << fmt17(last.val_sgcs) << ',' << fmt17(last.val_accuracy) << ','
        << fmt17(tsg) << ',' << fmt17(tacc) << "\n";
    model::CheckpointMeta meta;
    meta.stage = 2;
    meta.alpha = c.train.alpha;
    meta.epochs_completed =
        static_cast<int>(t.stage1.log.size() + t.stage2.log.size());
    meta.data_hash = d.train.content_hash();
    model::save_checkpoint(*t.net, meta, paths.fpnet_ckpt(n));
    write_text_file(paths.logs() + "/sweep_bits_n" + std::to_string(n) +
                        ".jsonl",
                    training_log_jsonl(t));
  }
  ensure_dir(paths.report_dir());
  write_text_file(paths.report_dir() + "/sweep_bits.csv", csv.str());
}

void cmd_sweep_zones(const cfg::ExperimentConfig& c, const RunPaths& paths) {
  const DataBundle base = load_bundle(c, paths);
  const int n = c.encoder.codeword_len;
  const int batch = c.train.batch;
  std::ostringstream csv;
  csv << "zones,grid_nx,grid_ny,val_sgcs,val_accuracy,test_sgcs,"
         "test_accuracy\n";
  for (int zc : c.zone_counts) {
    int nx = 0, ny = 0;
    grid_for_zone_count(base.env, zc, nx, ny);
    const sim::CsiBatch relabeled =
        relabel_by_grid(base.full, base.env, nx, ny);
    const DataBundle dz = bundle_from_batch(c, base.env, relabeled);
    TrainedFpnet t = train_fpnet(c, dz, n, c.train.alpha);
    const model::EpochStat last = final_stats(t);
    const double tsg = dataset_sgcs(*t.net, dz.test, batch);
    const double tacc = metrics::classification_accuracy(
        predict_all(*t.net, dz.test, batch), dz.test.labels);
    csv << zc << ',' << nx << ',' << ny << ',' << fmt17(last.val_sgcs) << ','
        << fmt17(last.val_accuracy) << ',' << fmt17(tsg) << ',' << fmt17(tacc)
        << "\n";
    model::CheckpointMeta meta;
    meta.stage = 2;
    meta.alpha = c.train.alpha;
    meta.epochs_completed =
        static_cast<int>(t.stage1.log.size() + t.stage2.log.size());
    meta.data_hash = dz.train.content_hash();
    model::save_checkpoint(*t.net, meta,
                           paths.checkpoints() + "/fpnet_n" +
                               std::to_string(n) + "_z" + std::to_string(zc) +
                               ".fpck");
    write_text_file(paths.logs() + "/sweep_zones_z" + std::to_string(zc) +
                        ".jsonl",
                    training_log_jsonl(t));
  }
  ensure_dir(paths.report_dir());
  write_text_file(paths.report_dir() + "/sweep_zones.csv", csv.str());
}

void cmd_drift(const cfg::ExperimentConfig& c, const RunPaths& paths) {
  const DataBundle da = load_bundle(c, paths);
  const int n = c.encoder.codeword_len;
  require_file(paths.fpnet_ckpt(n), "train");

  const sim::EnvironmentModel env_b =
      sim::perturb_environment(da.env, c.drift_intensity, c.drift_seed);
  const uint64_t seed_b = derive_seed(c.data_seed, 0xB);
  std::vector<sim::CsiBatch> parts;
  for (int z = 0; z < da.env.n_zones(); ++z)
    parts.push_back(
        sim::sample_csi(env_b, z, c.packets_per_zone, c.snr_db, seed_b));
  if (c.ood_packets > 0)
    parts.push_back(
        sim::sample_csi(env_b, sim::kOodZone, c.ood_packets, c.snr_db, seed_b));
  const DataBundle db = bundle_from_batch(c, env_b, sim::merge_batches(parts));

  auto before = model::load_checkpoint(paths.fpnet_ckpt(n));
  const int batch = c.train.batch;
  const double acc_in = metrics::classification_accuracy(
      predict_all(*before, da.test, batch), da.test.labels);
  const double acc_pre = metrics::classification_accuracy(
      predict_all(*before, db.test, batch), db.test.labels);
  const double sgcs_pre = dataset_sgcs(*before, db.test, batch);

  std::ostringstream csv;
  csv << "budget,final_accuracy,final_sgcs\n";
  njson out;
  out["intensity"] = c.drift_intensity;
  out["in_environment_accuracy"] = acc_in;
  out["pre_adaptation_accuracy"] = acc_pre;
  out["pre_adaptation_sgcs"] = sgcs_pre;
  njson budgets = njson::array();
  for (int budget : c.fine_tune_sizes) {
    auto m = model::load_checkpoint(paths.fpnet_ckpt(n));
    const model::TrainResult r =
        model::fine_tune(*m, db.train, db.test, static_cast<size_t>(budget),
                         c.fine_tune_epochs, c.train);
    const model::EpochStat last =
        r.log.empty() ? model::EpochStat{} : r.log.back();
    csv << budget << ',' << fmt17(last.val_accuracy) << ','
        << fmt17(last.val_sgcs) << "\n";
    njson b;
    b["budget"] = budget;
    b["final_accuracy"] = last.val_accuracy;
    b["final_sgcs"] = last.val_sgcs;
    budgets.push_back(b);
    write_text_file(paths.logs() + "/drift_ft" + std::to_string(budget) +
                        ".jsonl",
                    log_jsonl(r));
    model::CheckpointMeta meta;
    meta.stage = 3;
    meta.alpha = c.train.alpha;
    meta.epochs_completed = static_cast<int>(r.log.size());
    meta.data_hash = db.train.content_hash();
    model::save_checkpoint(*m, meta,
                           paths.checkpoints() + "/fpnet_n" +
                               std::to_string(n) + "_ft" +
                               std::to_string(budget) + ".fpck");
  }
  out["budgets"] = budgets;
  ensure_dir(paths.report_dir());
  write_text_file(paths.report_dir() + "/drift.csv", csv.str());
  write_text_file(paths.report_dir() + "/drift.json", out.dump(2) + "\n");
}

void cmd_ad_eval(const cfg::ExperimentConfig& c, const RunPaths& paths) {
  const DataBundle d = load_bundle(c, paths);
  const int n = c.encoder.codeword_len;
  require_file(paths.fpnet_ckpt(n), "train");
  if (d.ood_calib.size() == 0 || d.ood_test.size() == 0)
    throw Error(
        "anomaly evaluation needs corridor packets; set dataset.ood_packets "
        "> 0 and rerun `fpnet-lab gen-data`");

  auto fp = model::load_checkpoint(paths.fpnet_ckpt(n));
  auto ad = ad::build_adblock(c.system, c.adblock, c.adblock.seed);
  const ad::AdTrainResult tr = ad::train_adblock(*fp, *ad, d.train);

  const int batch = c.adblock.batch;
  auto scores_of = [&](const model::BfmDataset& ds) {
    return ad::anomaly_scores(*ad, model::reconstruct_dataset(*fp, ds, batch),
                              batch);
  };
  const std::vector<double> s_val = scores_of(d.val);
  const std::vector<double> s_ocal = scores_of(d.ood_calib);
  const ad::SweepCurve curve =
      ad::sweep_threshold(s_val, s_ocal, c.adblock.sweep_grid);
  ad->lambda = curve.lambda_star;

  const std::vector<double> s_test = scores_of(d.test);
  const std::vector<double> s_otest = scores_of(d.ood_test);
  std::vector<bool> flags, truth;
  flags.reserve(s_test.size() + s_otest.size());
  truth.reserve(flags.capacity());
  for (double s : s_test) {
    flags.push_back(s > ad->lambda);
    truth.push_back(false);
  }
  for (double s : s_otest) {
    flags.push_back(s > ad->lambda);
    truth.push_back(true);
  }
  const metrics::AdMetrics met = metrics::ad_metrics(flags, truth);
  const std::vector<double> mis = ad::misrouting_report(*fp, d.ood_test);
  const std::vector<double> pcl = ad::per_class_lambda(
      s_val, d.val.labels, s_ocal, n_classes_of(d), c.adblock.sweep_grid);

  // latent panel: codewords of normal test + corridor samples in 2-d
  std::vector<std::vector<double>> codes;
  std::vector<int> code_labels;
  auto collect = [&](const model::BfmDataset& ds) {
    const int len = fp->cfg.codeword_len;
    for (size_t i = 0; i < ds.size(); i += static_cast<size_t>(batch)) {
      const size_t m = std::min(static_cast<size_t>(batch), ds.size() - i);
      std::vector<size_t> idx(m);
      std::iota(idx.begin(), idx.end(), i);
      model::BatchInfer bi = model::infer_batch(*fp, ds.gather(idx));
      for (size_t r = 0; r < m; ++r) {
        codes.emplace_back(bi.codewords.data.begin() + r * len,
                           bi.codewords.data.begin() + (r + 1) * len);
        code_labels.push_back(ds.labels[i + r]);
      }
    }
  };
  collect(d.test);
  collect(d.ood_test);
  const metrics::PcaResult pca =
      metrics::pca_project(codes, derive_seed(c.eval_seed, 0x9CA));
  std::ostringstream pcsv;
  pcsv << "x,y,zone\n";
  for (size_t i = 0; i < pca.points.size(); ++i)
    pcsv << fmt17(pca.points[i][0]) << ',' << fmt17(pca.points[i][1]) << ','
         << code_labels[i] << "\n";

  std::ostringstream lcsv;
  lcsv << "epoch,loss\n";
  for (size_t e = 0; e < tr.epoch_loss.size(); ++e)
    lcsv << e + 1 << ',' << fmt17(tr.epoch_loss[e]) << "\n";

  njson rep;
  rep["lambda"] = ad->lambda;
  rep["sweep_grid"] = c.adblock.sweep_grid;
  rep["tp"] = met.tp;
  rep["fp"] = met.fp;
  rep["tn"] = met.tn;
  rep["fn"] = met.fn;
  rep["tpr"] = met.tpr;
  rep["fpr"] = met.fpr;
  if (met.precision) rep["precision"] = *met.precision;
  if (met.f1) rep["f1"] = *met.f1;
  rep["misrouting"] = mis;
  rep["per_class_lambda"] = pcl;
  rep["explained_variance"] = pca.explained_variance;
  rep["counts"]["normal_calibration"] = s_val.size();
  rep["counts"]["ood_calibration"] = s_ocal.size();
  rep["counts"]["normal_test"] = s_test.size();
  rep["counts"]["ood_test"] = s_otest.size();

  ensure_dir(paths.report_dir());
  write_text_file(paths.report_dir() + "/ad_report.json", rep.dump(2) + "\n");
  write_text_file(paths.report_dir() + "/ad_sweep.csv", curve.to_csv());
  write_text_file(paths.report_dir() + "/ad_pca.csv", pcsv.str());
  write_text_file(paths.logs() + "/adblock_loss.csv", lcsv.str());
  ad::save_adblock(*ad, paths.adblock_ckpt());
}

void cmd_baseline(const cfg::ExperimentConfig& c, const RunPaths& paths) {
  const DataBundle d = load_bundle(c, paths);
  RunReport rep;
  rep.rows.push_back(codec_row(c, d, codec::FeedbackType::kType0));
  rep.rows.push_back(codec_row(c, d, codec::FeedbackType::kType1));
  rep.rows.push_back(knn_row(c, d));
  rep.provenance_json = base_provenance(c, d).dump();
  ensure_dir(paths.report_dir());
  write_text_file(paths.report_dir() + "/baseline.json", rep.to_json());
  write_text_file(paths.report_dir() + "/baseline.md", rep.to_markdown());
  write_text_file(paths.report_dir() + "/baseline.csv", rep.to_csv());
}

void cmd_report(const RunPaths& paths) {
  struct Part {
    const char* title;
    const char* file;
    const char* kind;  // md | csv | json
    const char* verb;
  };
  const Part parts[] = {
      {"Feedback and positioning", "report.md", "md", "eval"},
      {"Non-learned baselines", "baseline.md", "md", "baseline"},
      {"Loss-weight sweep", "sweep_alpha.csv", "csv", "sweep-alpha"},
      {"Codeword-length sweep", "sweep_bits.csv", "csv", "sweep-bits"},
      {"Zone-count sweep", "sweep_zones.csv", "csv", "sweep-zones"},
      {"Environment drift", "drift.json", "json", "drift"},
      {"Anomaly detection", "ad_report.json", "json", "ad-eval"},
  };
  std::ostringstream os;
  os << "# Run summary\n";
  const std::string hash_path = paths.root + "/config_hash.txt";
  if (fs::exists(hash_path)) {
    std::string h = read_text_file(hash_path);
    while (!h.empty() && (h.back() == '\n' || h.back() == '\r')) h.pop_back();
    os << "\nconfig " << h << "\n";
  }
  std::vector<const Part*> missing;
  for (const Part& p : parts) {
    const std::string path = paths.report_dir() + "/" + p.file;
    if (!fs::exists(path)) {
      missing.push_back(&p);
      continue;
    }
    os << "\n## " << p.title << "\n\n";
    const std::string body = read_text_file(path);
    if (std::strcmp(p.kind, "md") == 0) {
      os << body;
    } else {
      os << "```" << (std::strcmp(p.kind, "csv") == 0 ? "csv" : "json")
         << "\n"
         << body;
      if (!body.empty() && body.back() != '\n') os << "\n";
      os << "```\n";
    }
  }
  if (!missing.empty()) {
    os << "\n## Not generated\n\n";
    for (const Part* p : missing)
      os << "- `" << p->file << "` (run `fpnet-lab " << p->verb << "`)\n";
  }
  ensure_dir(paths.report_dir());
  write_text_file(paths.report_dir() + "/summary.md", os.str());
}

ReproduceResult cmd_reproduce(const RunPaths& paths, uint64_t choice_seed,
                              const std::string& metric_name) {
  require_file(paths.config_toml(), "gen-data");
  const std::string report_path = paths.report_dir() + "/report.json";
  require_file(report_path, "eval");
  const cfg::ExperimentConfig c = cfg::load_config(paths.config_toml(), "desk");

  const njson stored = njson::parse(read_text_file(report_path));
  struct Entry {
    std::string method, field;
    double value;
  };
  static const char* kFields[] = {"feedback_bits", "sgcs", "accuracy",
                                  "evm_db",        "gamma", "r_gross",
                                  "r_net"};
  std::vector<Entry> entries;
  for (const auto& row : stored.at("rows")) {
    const std::string method = row.at("method").get<std::string>();
    for (const char* f : kFields)
      if (row.contains(f))
        entries.push_back({method, f, row.at(f).get<double>()});
  }
  if (entries.empty()) throw Error("stored report has no numeric metrics");

  size_t pick = entries.size();
  if (metric_name.empty()) {
    Rng rng(derive_seed(choice_seed, 0x9E9D0));
    pick = static_cast<size_t>(rng.uniform_int(entries.size()));
  } else {
    for (size_t i = 0; i < entries.size(); ++i)
      if (entries[i].method + "." + entries[i].field == metric_name) {
        pick = i;
        break;
      }
    if (pick == entries.size()) {
      std::string avail;
      for (const auto& e : entries)
        avail += (avail.empty() ? "" : ", ") + e.method + "." + e.field;
      throw Error("unknown metric \"" + metric_name + "\"; available: " +
                  avail);
    }
  }

  const RunReport fresh = eval_core(c, paths);
  const njson fj = njson::parse(fresh.to_json());
  ReproduceResult rr;
  rr.metric = entries[pick].method + "." + entries[pick].field;
  rr.stored = entries[pick].value;
  if (!find_metric(fj, entries[pick].method, entries[pick].field,
                   &rr.rederived))
    throw Error("re-derived report is missing " + rr.metric);
  uint64_t a = 0, b = 0;
  std::memcpy(&a, &rr.stored, sizeof a);
  std::memcpy(&b, &rr.rederived, sizeof b);
  rr.identical = a == b;
  return rr;
}

}  // namespace fpnet::harness
