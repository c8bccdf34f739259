#include "fpnet/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "fpnet/hash.hpp"

namespace fpnet::cfg {

double TomlValue::as_number() const {
  if (kind == Kind::kInt) return (double)i;
  if (kind == Kind::kFloat) return f;
  throw Error("config: expected a number");
}

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

[[noreturn]] void fail(int line, const std::string& msg) {
  throw Error("config: line " + std::to_string(line) + ": " + msg);
}

// Removes a trailing comment, respecting quoted strings.
std::string strip_comment(const std::string& s, int line) {
  std::string out;
  bool in_str = false;
  for (size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (in_str) {
      out += c;
      if (c == '\\' && i + 1 < s.size()) {
        out += s[++i];
      } else if (c == '"') {
        in_str = false;
      }
      continue;
    }
    if (c == '"') {
      in_str = true;
      out += c;
    } else if (c == '#') {
      break;
    } else {
      out += c;
    }
  }
  if (in_str) fail(line, "unterminated string");
  return out;
}

std::string parse_string_literal(const std::string& raw, int line) {
  if (raw.size() < 2 || raw.front() != '"' || raw.back() != '"')
    fail(line, "malformed string literal: " + raw);
  std::string out;
  for (size_t i = 1; i + 1 < raw.size(); ++i) {
    char c = raw[i];
    if (c == '\\') {
      if (i + 2 >= raw.size()) fail(line, "dangling escape");
      const char n = raw[++i];
      if (n == 'n') out += '\n';
      else if (n == 't') out += '\t';
      else if (n == '"') out += '"';
      else if (n == '\\') out += '\\';
      else fail(line, std::string("unsupported escape \\") + n);
    } else if (c == '"') {
      fail(line, "unescaped quote inside string");
    } else {
      out += c;
    }
  }
  return out;
}

TomlValue parse_scalar(const std::string& raw, int line) {
  TomlValue v;
  if (!raw.empty() && raw.front() == '"') {
    v.kind = TomlValue::Kind::kString;
    v.s = parse_string_literal(raw, line);
    return v;
  }
  if (raw == "true" || raw == "false") {
    v.kind = TomlValue::Kind::kBool;
    v.b = (raw == "true");
    return v;
  }
  const bool floaty = raw.find_first_of(".eE") != std::string::npos ||
                      raw.find("inf") != std::string::npos ||
                      raw.find("nan") != std::string::npos;
  const char* txt = raw.c_str();
  char* end = nullptr;
  if (!floaty) {
    errno = 0;
    const long long n = std::strtoll(txt, &end, 10);
    if (end == txt + raw.size() && errno == 0) {
      v.kind = TomlValue::Kind::kInt;
      v.i = n;
      return v;
    }
  }
  end = nullptr;
  const double d = std::strtod(txt, &end);
  if (end != txt + raw.size() || raw.empty())
    fail(line, "cannot parse value: " + raw);
  v.kind = TomlValue::Kind::kFloat;
  v.f = d;
  return v;
}

// Splits an array body on top-level commas (strings may contain commas).
std::vector<std::string> split_array(const std::string& body, int line) {
  std::vector<std::string> parts;
  std::string cur;
  bool in_str = false;
  for (size_t i = 0; i < body.size(); ++i) {
    const char c = body[i];
    if (in_str) {
      cur += c;
      if (c == '\\' && i + 1 < body.size()) cur += body[++i];
      else if (c == '"') in_str = false;
    } else if (c == '"') {
      in_str = true;
      cur += c;
    } else if (c == ',') {
      parts.push_back(trim(cur));
      cur.clear();
    } else if (c == '[' || c == ']') {
      fail(line, "nested arrays are not supported");
    } else {
      cur += c;
    }
  }
  const std::string last = trim(cur);
  if (!last.empty()) parts.push_back(last);
  for (const auto& p : parts)
    if (p.empty()) fail(line, "empty array element");
  return parts;
}

bool valid_key(const std::string& k) {
  if (k.empty()) return false;
  for (char c : k)
    if (!std::isalnum((unsigned char)c) && c != '_') return false;
  return true;
}

}  // namespace

TomlTable parse_toml(const std::string& text) {
  TomlTable table;
  std::string section;
  std::istringstream is(text);
  std::string raw_line;
  int line = 0;
  while (std::getline(is, raw_line)) {
    ++line;
    const std::string s = trim(strip_comment(raw_line, line));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') fail(line, "malformed section header: " + s);
      section = trim(s.substr(1, s.size() - 2));
      if (!valid_key(section)) fail(line, "bad section name: " + section);
      continue;
    }
    const size_t eq = s.find('=');
    if (eq == std::string::npos) fail(line, "expected key = value: " + s);
    const std::string key = trim(s.substr(0, eq));
    const std::string val = trim(s.substr(eq + 1));
    if (!valid_key(key)) fail(line, "bad key name: " + key);
    if (section.empty()) fail(line, "key outside any [section]: " + key);
    if (val.empty()) fail(line, "missing value for key: " + key);
    if (table[section].count(key)) fail(line, "duplicate key: " + key);

    TomlValue v;
    if (val.front() == '[') {
      if (val.back() != ']') fail(line, "malformed array: " + val);
      v.kind = TomlValue::Kind::kArray;
      for (const auto& e : split_array(val.substr(1, val.size() - 2), line))
        v.arr.push_back(parse_scalar(e, line));
    } else {
      v = parse_scalar(val, line);
    }
    table[section][key] = std::move(v);
  }
  return table;
}

namespace {

[[noreturn]] void bad_key(const std::string& where) {
  throw Error("config: unknown key " + where);
}

double want_f(const TomlValue& v, const std::string& where) {
  if (v.kind != TomlValue::Kind::kInt && v.kind != TomlValue::Kind::kFloat)
    throw Error("config: " + where + " must be a number");
  return v.as_number();
}

int want_i(const TomlValue& v, const std::string& where) {
  if (v.kind != TomlValue::Kind::kInt)
    throw Error("config: " + where + " must be an integer");
  return (int)v.i;
}

uint64_t want_u64(const TomlValue& v, const std::string& where) {
  if (v.kind != TomlValue::Kind::kInt || v.i < 0)
    throw Error("config: " + where + " must be a non-negative integer");
  return (uint64_t)v.i;
}

bool want_b(const TomlValue& v, const std::string& where) {
  if (v.kind != TomlValue::Kind::kBool)
    throw Error("config: " + where + " must be true or false");
  return v.b;
}

std::string want_s(const TomlValue& v, const std::string& where) {
  if (v.kind != TomlValue::Kind::kString)
    throw Error("config: " + where + " must be a quoted string");
  return v.s;
}

std::vector<double> want_farr(const TomlValue& v, const std::string& where) {
  if (v.kind != TomlValue::Kind::kArray)
    throw Error("config: " + where + " must be an array");
  std::vector<double> out;
  for (const auto& e : v.arr) out.push_back(want_f(e, where));
  return out;
}

std::vector<int> want_iarr(const TomlValue& v, const std::string& where) {
  if (v.kind != TomlValue::Kind::kArray)
    throw Error("config: " + where + " must be an array");
  std::vector<int> out;
  for (const auto& e : v.arr) out.push_back(want_i(e, where));
  return out;
}

}  // namespace

void apply_toml(ExperimentConfig& c, const TomlTable& table) {
  for (const auto& [section, kvs] : table) {
    for (const auto& [key, v] : kvs) {
      const std::string where = section + "." + key;
      if (section == "system") {
        if (key == "n_tx") c.system.n_tx = want_i(v, where);
        else if (key == "n_rx") c.system.n_rx = want_i(v, where);
        else if (key == "n_streams") c.system.n_streams = want_i(v, where);
        else if (key == "n_valid_subcarriers")
          c.system.n_valid_subcarriers = want_i(v, where);
        else if (key == "bandwidth_hz") c.system.bandwidth_hz = want_f(v, where);
        else if (key == "n_fft") c.system.n_fft = want_i(v, where);
        else if (key == "n_cp") c.system.n_cp = want_i(v, where);
        else if (key == "carrier_hz") c.system.carrier_hz = want_f(v, where);
        else bad_key(where);
      } else if (section == "environment") {
        if (key == "n_zones") c.n_zones = want_i(v, where);
        else if (key == "n_scatterers") c.n_scatterers = want_i(v, where);
        else if (key == "seed") c.env_seed = want_u64(v, where);
        else if (key == "floor_w") c.knobs.floor_w = want_f(v, where);
        else if (key == "floor_h") c.knobs.floor_h = want_f(v, where);
        else if (key == "jitter_m") c.knobs.jitter_m = want_f(v, where);
        else if (key == "antenna_spacing_wl")
          c.knobs.antenna_spacing_wl = want_f(v, where);
        else if (key == "scatter_gain") c.knobs.scatter_gain = want_f(v, where);
        else if (key == "scatter_ring_min_m")
          c.knobs.scatter_ring_min_m = want_f(v, where);
        else if (key == "scatter_ring_max_m")
          c.knobs.scatter_ring_max_m = want_f(v, where);
        else if (key == "max_zone_aspect")
          c.knobs.max_zone_aspect = want_f(v, where);
        else if (key == "ap_offset_m") c.knobs.ap_offset_m = want_f(v, where);
        else if (key == "corridor_gap_m")
          c.knobs.corridor_gap_m = want_f(v, where);
        else if (key == "corridor_w_m") c.knobs.corridor_w_m = want_f(v, where);
        else bad_key(where);
      } else if (section == "dataset") {
        if (key == "packets_per_zone") c.packets_per_zone = want_i(v, where);
        else if (key == "ood_packets") c.ood_packets = want_i(v, where);
        else if (key == "snr_db") c.snr_db = want_f(v, where);
        else if (key == "seed") c.data_seed = want_u64(v, where);
        else if (key == "split_seed") c.split_seed = want_u64(v, where);
        else if (key == "ratio_train") c.ratios.train = want_f(v, where);
        else if (key == "ratio_val") c.ratios.val = want_f(v, where);
        else if (key == "ratio_test") c.ratios.test = want_f(v, where);
        else bad_key(where);
      } else if (section == "encoder") {
        if (key == "codeword_len") c.encoder.codeword_len = want_i(v, where);
        else if (key == "quant_bits") c.encoder.quant_bits = want_i(v, where);
        else if (key == "conv_filters")
          c.encoder.conv_filters = want_i(v, where);
        else if (key == "kernel") c.encoder.kernel = want_i(v, where);
        else if (key == "quantize_in_training")
          c.encoder.quantize_in_training = want_b(v, where);
        else bad_key(where);
      } else if (section == "train") {
        if (key == "alpha") c.train.alpha = want_f(v, where);
        else if (key == "lr_stage1") c.train.lr_stage1 = want_f(v, where);
        else if (key == "lr_stage2") c.train.lr_stage2 = want_f(v, where);
        else if (key == "epochs_stage1")
          c.train.epochs_stage1 = want_i(v, where);
        else if (key == "epochs_stage2")
          c.train.epochs_stage2 = want_i(v, where);
        else if (key == "batch") c.train.batch = want_i(v, where);
        else if (key == "seed") c.train.seed = want_u64(v, where);
        else if (key == "early_stop") c.train.early_stop = want_b(v, where);
        else if (key == "patience") c.train.patience = want_i(v, where);
        else bad_key(where);
      } else if (section == "adblock") {
        if (key == "latent_len") c.adblock.latent_len = want_i(v, where);
        else if (key == "kernel") c.adblock.kernel = want_i(v, where);
        else if (key == "conv_filters")
          c.adblock.conv_filters = want_i(v, where);
        else if (key == "epochs") c.adblock.epochs = want_i(v, where);
        else if (key == "lr") c.adblock.lr = want_f(v, where);
        else if (key == "batch") c.adblock.batch = want_i(v, where);
        else if (key == "seed") c.adblock.seed = want_u64(v, where);
        else if (key == "sweep_grid") c.adblock.sweep_grid = want_i(v, where);
        else bad_key(where);
      } else if (section == "metrics") {
        if (key == "mcs_table") c.mcs_table_name = want_s(v, where);
        else if (key == "mcs_thresholds_db")
          c.mcs_thresholds_db = want_farr(v, where);
        else if (key == "mcs_gammas") c.mcs_gammas = want_farr(v, where);
        else if (key == "t_fixed_overhead_s")
          c.timing.t_fixed_overhead_s = want_f(v, where);
        else if (key == "r_ctrl_bps") c.timing.r_ctrl_bps = want_f(v, where);
        else if (key == "payload_bytes")
          c.timing.payload_bytes = want_i(v, where);
        else if (key == "eval_snr_db") c.eval_snr_db = want_f(v, where);
        else if (key == "eval_symbols") c.eval_symbols = want_i(v, where);
        else if (key == "eval_seed") c.eval_seed = want_u64(v, where);
        else if (key == "eval_max_samples")
          c.eval_max_samples = want_i(v, where);
        else bad_key(where);
      } else if (section == "baseline") {
        if (key == "knn_k") c.knn_k = want_i(v, where);
        else bad_key(where);
      } else if (section == "sweeps") {
        if (key == "alphas") c.alphas = want_farr(v, where);
        else if (key == "codeword_lens") c.codeword_lens = want_iarr(v, where);
        else if (key == "zone_counts") c.zone_counts = want_iarr(v, where);
        else if (key == "drift_intensity")
          c.drift_intensity = want_f(v, where);
        else if (key == "drift_seed") c.drift_seed = want_u64(v, where);
        else if (key == "fine_tune_sizes")
          c.fine_tune_sizes = want_iarr(v, where);
        else if (key == "fine_tune_epochs")
          c.fine_tune_epochs = want_i(v, where);
        else bad_key(where);
      } else if (section == "output") {
        if (key == "dir") c.out_dir = want_s(v, where);
        else bad_key(where);
      } else {
        throw Error("config: unknown section [" + section + "]");
      }
    }
  }
}

void ExperimentConfig::validate() const {
  system.validate();
  encoder.validate();
  train.validate();
  adblock.validate();
  timing.validate();
  resolved_mcs().validate();
  if (n_zones < 2) throw Error("config: environment.n_zones must be >= 2");
  if (n_scatterers < 0)
    throw Error("config: environment.n_scatterers must be >= 0");
  if (packets_per_zone < 1)
    throw Error("config: dataset.packets_per_zone must be >= 1");
  if (ood_packets < 2) throw Error("config: dataset.ood_packets must be >= 2");
  if (std::isnan(snr_db)) throw Error("config: dataset.snr_db is NaN");
  const double rs = ratios.train + ratios.val + ratios.test;
  if (ratios.train < 0 || ratios.val < 0 || ratios.test < 0 ||
      std::abs(rs - 1.0) > 1e-9)
    throw Error("config: dataset split ratios must be non-negative and sum to 1");
  if (eval_symbols < 1) throw Error("config: metrics.eval_symbols must be >= 1");
  if (eval_max_samples < 1)
    throw Error("config: metrics.eval_max_samples must be >= 1");
  if (knn_k < 1) throw Error("config: baseline.knn_k must be >= 1");
  if (alphas.empty() || codeword_lens.empty() || zone_counts.empty() ||
      fine_tune_sizes.empty())
    throw Error("config: sweep lists must be non-empty");
  for (int n : codeword_lens)
    if (n < 1) throw Error("config: sweeps.codeword_lens entries must be >= 1");
  for (int z : zone_counts)
    if (z < 2) throw Error("config: sweeps.zone_counts entries must be >= 2");
  for (int s : fine_tune_sizes)
    if (s < 1) throw Error("config: sweeps.fine_tune_sizes entries must be >= 1");
  if (drift_intensity < 0 || drift_intensity > 1)
    throw Error("config: sweeps.drift_intensity must be in [0, 1]");
  if (fine_tune_epochs < 0)
    throw Error("config: sweeps.fine_tune_epochs must be >= 0");
  if (out_dir.empty()) throw Error("config: output.dir must be non-empty");
}

metrics::McsTable ExperimentConfig::resolved_mcs() const {
  if (mcs_table_name == "custom") {
    if (mcs_thresholds_db.empty() ||
        mcs_thresholds_db.size() != mcs_gammas.size())
      throw Error(
          "config: custom mcs table needs equal-length non-empty "
          "metrics.mcs_thresholds_db and metrics.mcs_gammas");
    metrics::McsTable t;
    for (size_t i = 0; i < mcs_gammas.size(); ++i)
      t.rows.push_back({mcs_thresholds_db[i], mcs_gammas[i]});
    return t;
  }
  return metrics::McsTable::by_name(mcs_table_name);
}

ExperimentConfig default_config() { return ExperimentConfig{}; }

void apply_profile(ExperimentConfig& c, const std::string& name) {
  if (name == "desk" || name.empty()) {
    c.profile = "desk";
    return;
  }
  if (name == "quick") {
    c.profile = "quick";
    c.train.epochs_stage1 = 30;
    c.train.epochs_stage2 = 15;
    c.adblock.epochs = 30;
    c.eval_max_samples = 128;
    c.fine_tune_epochs = 20;
    c.fine_tune_sizes = {100, 500, 2500};
    return;
  }
  if (name == "paper-scale") {
    c.profile = "paper-scale";
    c.train.epochs_stage1 = 500;
    c.train.epochs_stage2 = 300;
    c.adblock.epochs = 200;
    c.eval_max_samples = 1000;
    c.fine_tune_sizes = {100, 500, 2000};
    return;
  }
  throw Error("config: unknown profile '" + name +
              "' (known: desk, quick, paper-scale)");
}

ExperimentConfig load_config(const std::string& path,
                             const std::string& profile) {
  ExperimentConfig c = default_config();
  apply_profile(c, profile);
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw Error("config: cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    apply_toml(c, parse_toml(buf.str()));
  }
  c.validate();
  return c;
}

namespace {

std::string fmt_f(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_farr(const std::vector<double>& a) {
  std::string s = "[";
  for (size_t i = 0; i < a.size(); ++i) {
    if (i) s += ", ";
    s += fmt_f(a[i]);
  }
  return s + "]";
}

std::string fmt_iarr(const std::vector<int>& a) {
  std::string s = "[";
  for (size_t i = 0; i < a.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(a[i]);
  }
  return s + "]";
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"' || ch == '\\') out += '\\';
    out += ch;
  }
  return out + "\"";
}

}  // namespace

std::string config_to_toml(const ExperimentConfig& c) {
  std::ostringstream os;
  os << "# resolved experiment configuration (profile: " << c.profile << ")\n";
  os << "[system]\n";
  os << "n_tx = " << c.system.n_tx << "\n";
  os << "n_rx = " << c.system.n_rx << "\n";
  os << "n_streams = " << c.system.n_streams << "\n";
  os << "n_valid_subcarriers = " << c.system.n_valid_subcarriers << "\n";
  os << "bandwidth_hz = " << fmt_f(c.system.bandwidth_hz) << "\n";
  os << "n_fft = " << c.system.n_fft << "\n";
  os << "n_cp = " << c.system.n_cp << "\n";
  os << "carrier_hz = " << fmt_f(c.system.carrier_hz) << "\n";
  os << "\n[environment]\n";
  os << "n_zones = " << c.n_zones << "\n";
  os << "n_scatterers = " << c.n_scatterers << "\n";
  os << "seed = " << c.env_seed << "\n";
  os << "floor_w = " << fmt_f(c.knobs.floor_w) << "\n";
  os << "floor_h = " << fmt_f(c.knobs.floor_h) << "\n";
  os << "jitter_m = " << fmt_f(c.knobs.jitter_m) << "\n";
  os << "antenna_spacing_wl = " << fmt_f(c.knobs.antenna_spacing_wl) << "\n";
  os << "scatter_gain = " << fmt_f(c.knobs.scatter_gain) << "\n";
  os << "scatter_ring_min_m = " << fmt_f(c.knobs.scatter_ring_min_m) << "\n";
  os << "scatter_ring_max_m = " << fmt_f(c.knobs.scatter_ring_max_m) << "\n";
  os << "max_zone_aspect = " << fmt_f(c.knobs.max_zone_aspect) << "\n";
  os << "ap_offset_m = " << fmt_f(c.knobs.ap_offset_m) << "\n";
  os << "corridor_gap_m = " << fmt_f(c.knobs.corridor_gap_m) << "\n";
  os << "corridor_w_m = " << fmt_f(c.knobs.corridor_w_m) << "\n";
  os << "\n[dataset]\n";
  os << "packets_per_zone = " << c.packets_per_zone << "\n";
  os << "ood_packets = " << c.ood_packets << "\n";
  os << "snr_db = " << fmt_f(c.snr_db) << "\n";
  os << "seed = " << c.data_seed << "\n";
  os << "split_seed = " << c.split_seed << "\n";
  os << "ratio_train = " << fmt_f(c.ratios.train) << "\n";
  os << "ratio_val = " << fmt_f(c.ratios.val) << "\n";
  os << "ratio_test = " << fmt_f(c.ratios.test) << "\n";
  os << "\n[encoder]\n";
  os << "codeword_len = " << c.encoder.codeword_len << "\n";
  os << "quant_bits = " << c.encoder.quant_bits << "\n";
  os << "conv_filters = " << c.encoder.conv_filters << "\n";
  os << "kernel = " << c.encoder.kernel << "\n";
  os << "quantize_in_training = "
     << (c.encoder.quantize_in_training ? "true" : "false") << "\n";
  os << "\n[train]\n";
  os << "alpha = " << fmt_f(c.train.alpha) << "\n";
  os << "lr_stage1 = " << fmt_f(c.train.lr_stage1) << "\n";
  os << "lr_stage2 = " << fmt_f(c.train.lr_stage2) << "\n";
  os << "epochs_stage1 = " << c.train.epochs_stage1 << "\n";
  os << "epochs_stage2 = " << c.train.epochs_stage2 << "\n";
  os << "batch = " << c.train.batch << "\n";
  os << "seed = " << c.train.seed << "\n";
  os << "early_stop = " << (c.train.early_stop ? "true" : "false") << "\n";
  os << "patience = " << c.train.patience << "\n";
  os << "\n[adblock]\n";
  os << "latent_len = " << c.adblock.latent_len << "\n";
  os << "kernel = " << c.adblock.kernel << "\n";
  os << "conv_filters = " << c.adblock.conv_filters << "\n";
  os << "epochs = " << c.adblock.epochs << "\n";
  os << "lr = " << fmt_f(c.adblock.lr) << "\n";
  os << "batch = " << c.adblock.batch << "\n";
  os << "seed = " << c.adblock.seed << "\n";
  os << "sweep_grid = " << c.adblock.sweep_grid << "\n";
  os << "\n[metrics]\n";
  os << "mcs_table = " << quote(c.mcs_table_name) << "\n";
  if (c.mcs_table_name == "custom") {
    os << "mcs_thresholds_db = " << fmt_farr(c.mcs_thresholds_db) << "\n";
    os << "mcs_gammas = " << fmt_farr(c.mcs_gammas) << "\n";
  }
  os << "t_fixed_overhead_s = " << fmt_f(c.timing.t_fixed_overhead_s) << "\n";
  os << "r_ctrl_bps = " << fmt_f(c.timing.r_ctrl_bps) << "\n";
  os << "payload_bytes = " << c.timing.payload_bytes << "\n";
  os << "eval_snr_db = " << fmt_f(c.eval_snr_db) << "\n";
  os << "eval_symbols = " << c.eval_symbols << "\n";
  os << "eval_seed = " << c.eval_seed << "\n";
  os << "eval_max_samples = " << c.eval_max_samples << "\n";
  os << "\n[baseline]\n";
  os << "knn_k = " << c.knn_k << "\n";
  os << "\n[sweeps]\n";
  os << "alphas = " << fmt_farr(c.alphas) << "\n";
  os << "codeword_lens = " << fmt_iarr(c.codeword_lens) << "\n";
  os << "zone_counts = " << fmt_iarr(c.zone_counts) << "\n";
  os << "drift_intensity = " << fmt_f(c.drift_intensity) << "\n";
  os << "drift_seed = " << c.drift_seed << "\n";
  os << "fine_tune_sizes = " << fmt_iarr(c.fine_tune_sizes) << "\n";
  os << "fine_tune_epochs = " << c.fine_tune_epochs << "\n";
  os << "\n[output]\n";
  os << "dir = " << quote(c.out_dir) << "\n";
  return os.str();
}

std::string config_hash(const ExperimentConfig& c) {
  return hash_string_hex(config_to_toml(c));
}

}  // namespace fpnet::cfg
