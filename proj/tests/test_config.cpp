#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "fpnet/config.hpp"

using namespace fpnet;
using namespace fpnet::cfg;

namespace {

bool mentions(const Error& e, const std::string& needle) {
  return std::string(e.what()).find(needle) != std::string::npos;
}

}  // namespace

TEST_CASE("toml parser handles the supported value kinds") {
  const std::string text =
      "# leading comment\n"
      "[dataset]\n"
      "packets_per_zone = 42   # trailing comment\n"
      "snr_db = inf\n"
      "\n"
      "[train]\n"
      "alpha = 7.5\n"
      "early_stop = true\n"
      "\n"
      "[metrics]\n"
      "mcs_table = \"standard_ladder\"\n"
      "mcs_thresholds_db = [-8.0, -15, -20.5]\n"
      "\n"
      "[sweeps]\n"
      "zone_counts = [5, 20]\n";
  const TomlTable t = parse_toml(text);

  CHECK(t.at("dataset").at("packets_per_zone").kind == TomlValue::Kind::kInt);
  CHECK(t.at("dataset").at("packets_per_zone").i == 42);
  CHECK(std::isinf(t.at("dataset").at("snr_db").f));
  CHECK(t.at("train").at("alpha").f == doctest::Approx(7.5));
  CHECK(t.at("train").at("early_stop").b == true);
  CHECK(t.at("metrics").at("mcs_table").s == "standard_ladder");

  const auto& arr = t.at("metrics").at("mcs_thresholds_db").arr;
  REQUIRE(arr.size() == 3);
  CHECK(arr[0].as_number() == doctest::Approx(-8.0));
  CHECK(arr[1].as_number() == doctest::Approx(-15.0));
  CHECK(arr[2].as_number() == doctest::Approx(-20.5));
  CHECK(t.at("sweeps").at("zone_counts").arr[1].i == 20);
}

TEST_CASE("toml parser reports the offending line") {
  auto line_of = [](const std::string& text) -> std::string {
    try {
      parse_toml(text);
    } catch (const Error& e) {
      return e.what();
    }
    return "";
  };
  CHECK(line_of("[a]\nuseless\n").find("line 2") != std::string::npos);
  CHECK(line_of("key_outside = 1\n").find("line 1") != std::string::npos);
  CHECK(line_of("[a\n").find("line 1") != std::string::npos);
  CHECK(line_of("[a]\nx = \"open\n").find("line 2") != std::string::npos);
  CHECK(line_of("[a]\nx = [1, [2]]\n").find("line 2") != std::string::npos);
  CHECK(line_of("[a]\nx = 1\nx = 2\n").find("line 3") != std::string::npos);
  CHECK(line_of("[a]\nx =\n").find("line 2") != std::string::npos);
}

TEST_CASE("unknown sections and keys are named in errors") {
  ExperimentConfig c = default_config();
  CHECK_THROWS_WITH_AS(apply_toml(c, parse_toml("[nosuch]\nx = 1\n")),
                       doctest::Contains("[nosuch]"), Error);
  try {
    apply_toml(c, parse_toml("[dataset]\npackets = 3\n"));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(mentions(e, "dataset.packets"));
  }
  try {
    apply_toml(c, parse_toml("[train]\nalpha = \"lots\"\n"));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(mentions(e, "train.alpha"));
    CHECK(mentions(e, "number"));
  }
}

TEST_CASE("profiles scale the run budget and reject unknown names") {
  ExperimentConfig desk = default_config();
  apply_profile(desk, "desk");
  CHECK(desk.profile == "desk");
  CHECK(desk.train.epochs_stage1 == default_config().train.epochs_stage1);

  ExperimentConfig quick = default_config();
  apply_profile(quick, "quick");
  CHECK(quick.profile == "quick");
  CHECK(quick.train.epochs_stage1 == 30);
  CHECK(quick.train.epochs_stage2 == 15);
  // The dataset itself is not shrunk; only budgets are.
  CHECK(quick.packets_per_zone == desk.packets_per_zone);

  ExperimentConfig paper = default_config();
  apply_profile(paper, "paper-scale");
  CHECK(paper.train.epochs_stage1 == 500);

  ExperimentConfig c = default_config();
  CHECK_THROWS_AS(apply_profile(c, "warp-speed"), Error);
}

TEST_CASE("defaults match the documented experiment setup") {
  const ExperimentConfig c = default_config();
  CHECK(c.n_zones == 20);
  CHECK(c.n_scatterers == 30);
  CHECK(c.packets_per_zone == 500);
  CHECK(c.knobs.jitter_m == doctest::Approx(0.3));
  CHECK(c.snr_db == doctest::Approx(25.0));
  CHECK(c.eval_snr_db == doctest::Approx(25.0));
  CHECK(c.system.n_tx == 3);
  CHECK(c.system.n_rx == 2);
  CHECK(c.system.n_streams == 1);
  CHECK(c.system.n_valid_subcarriers == 28);
  CHECK(c.encoder.codeword_len == 20);
  CHECK(c.encoder.quant_bits == 5);
  CHECK(c.train.alpha == doctest::Approx(70.0));
  CHECK(c.train.lr_stage1 == doctest::Approx(5e-4));
  CHECK(c.train.lr_stage2 == doctest::Approx(1e-4));
  CHECK(c.train.batch == 64);
  CHECK(c.ratios.train == doctest::Approx(0.8));
  CHECK(c.mcs_table_name == "paper_anchor");
  CHECK(c.knn_k == 5);
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("file keys override profile values") {
  const std::string path = "test_config_override.toml";
  {
    std::ofstream out(path);
    out << "[train]\nepochs_stage1 = 3\n[encoder]\ncodeword_len = 16\n";
  }
  const ExperimentConfig c = load_config(path, "quick");
  CHECK(c.profile == "quick");
  CHECK(c.train.epochs_stage1 == 3);    // file wins
  CHECK(c.train.epochs_stage2 == 15);   // profile survives
  CHECK(c.encoder.codeword_len == 16);
  std::remove(path.c_str());

  CHECK_THROWS_AS(load_config("no_such_file.toml", "desk"), Error);
}

TEST_CASE("resolved config text round trips exactly") {
  ExperimentConfig c = default_config();
  apply_profile(c, "quick");
  apply_toml(c, parse_toml("[dataset]\nsnr_db = 18.25\n[sweeps]\nalphas = "
                           "[1.0, 70.0]\n[metrics]\nmcs_table = \"custom\"\n"
                           "mcs_thresholds_db = [-10.0]\nmcs_gammas = [2.0]\n"));
  const std::string text = config_to_toml(c);

  ExperimentConfig back = default_config();
  apply_toml(back, parse_toml(text));
  // The leading comment names the profile, which is not itself a key; the
  // key/value payload must round trip byte for byte.
  const auto payload = [](const std::string& s) {
    return s.substr(s.find("[system]"));
  };
  CHECK(payload(config_to_toml(back)) == payload(text));
  CHECK(back.snr_db == doctest::Approx(18.25));
  CHECK(back.alphas.size() == 2);
  CHECK(back.resolved_mcs().rows.size() == 1);
}

TEST_CASE("config hash tracks content, not instance") {
  const ExperimentConfig a = default_config();
  const ExperimentConfig b = default_config();
  CHECK(config_hash(a) == config_hash(b));

  ExperimentConfig c = default_config();
  c.train.seed += 1;
  CHECK(config_hash(c) != config_hash(a));

  ExperimentConfig d = default_config();
  d.knobs.scatter_gain += 0.25;
  CHECK(config_hash(d) != config_hash(a));
}

TEST_CASE("validation catches inconsistent experiment settings") {
  auto expect_throw = [](void (*mutate)(ExperimentConfig&),
                         const std::string& needle) {
    ExperimentConfig c = default_config();
    mutate(c);
    try {
      c.validate();
      FAIL_CHECK("expected a validation error mentioning " << needle);
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
  };
  expect_throw([](ExperimentConfig& c) { c.n_zones = 1; }, "n_zones");
  expect_throw([](ExperimentConfig& c) { c.packets_per_zone = 0; },
               "packets_per_zone");
  expect_throw([](ExperimentConfig& c) { c.ratios.val = 0.5; }, "ratios");
  expect_throw([](ExperimentConfig& c) { c.eval_symbols = 0; },
               "eval_symbols");
  expect_throw([](ExperimentConfig& c) { c.zone_counts = {}; }, "sweep");
  expect_throw([](ExperimentConfig& c) { c.drift_intensity = 1.5; },
               "drift_intensity");
  expect_throw([](ExperimentConfig& c) { c.mcs_table_name = "custom"; },
               "custom");
  expect_throw([](ExperimentConfig& c) { c.out_dir = ""; }, "output.dir");
}

TEST_CASE("custom mcs tables resolve from the config lists") {
  ExperimentConfig c = default_config();
  c.mcs_table_name = "custom";
  c.mcs_thresholds_db = {-10.0, -20.0};
  c.mcs_gammas = {1.0, 3.0};
  const metrics::McsTable t = c.resolved_mcs();
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0].evm_threshold_db == doctest::Approx(-10.0));
  CHECK(t.rows[1].gamma == doctest::Approx(3.0));
  CHECK_NOTHROW(c.validate());

  c.mcs_gammas = {1.0};
  CHECK_THROWS_AS(c.resolved_mcs(), Error);
}
