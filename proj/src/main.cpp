#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"

#include "fpnet/harness.hpp"

namespace {

fpnet::cfg::ExperimentConfig resolve_config(const std::string& path,
                                            const std::string& profile) {
  if (!path.empty()) return fpnet::cfg::load_config(path, profile);
  fpnet::cfg::ExperimentConfig c = fpnet::cfg::default_config();
  fpnet::cfg::apply_profile(c, profile);
  c.validate();
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "synthetic-channel lab for compressed beamforming feedback, zone "
      "positioning and feedback anomaly detection"};
  app.require_subcommand(1);

  std::string config_path, out_dir, profile = "desk";
  app.add_option("--config", config_path,
                 "TOML config file (built-in defaults when omitted)");
  app.add_option("--out", out_dir,
                 "run directory (default: <output.out_dir>/<config hash>)");
  app.add_option("--profile", profile, "desk | quick | paper-scale")
      ->capture_default_str();

  auto* sc_gen =
      app.add_subcommand("gen-data", "generate the channel dataset");
  auto* sc_train = app.add_subcommand(
      "train", "train the joint model and the sequential baseline");
  auto* sc_eval =
      app.add_subcommand("eval", "evaluate all methods on the test split");
  auto* sc_sa = app.add_subcommand(
      "sweep-alpha", "retrain across reconstruction-loss weights");
  auto* sc_sb =
      app.add_subcommand("sweep-bits", "retrain across codeword lengths");
  auto* sc_sz = app.add_subcommand("sweep-zones",
                                   "retrain across zone-grid resolutions");
  auto* sc_dr = app.add_subcommand(
      "drift", "perturb the environment and fine-tune on drifted data");
  auto* sc_ad = app.add_subcommand(
      "ad-eval", "train and calibrate the feedback anomaly detector");
  auto* sc_bl = app.add_subcommand(
      "baseline", "evaluate the non-learned baselines only");
  auto* sc_rp = app.add_subcommand(
      "report", "stitch generated artifacts into report/summary.md");
  auto* sc_re = app.add_subcommand(
      "reproduce", "re-derive one stored metric and compare bit-for-bit");

  std::string metric;
  uint64_t choice_seed = 0;
  sc_re->add_option(
      "--metric", metric,
      "method.field (e.g. fpnet_n20.sgcs); random choice when omitted");
  sc_re->add_option("--seed", choice_seed,
                    "selection seed for the random metric choice");

  for (CLI::App* sc : {sc_gen, sc_train, sc_eval, sc_sa, sc_sb, sc_sz, sc_dr,
                       sc_ad, sc_bl, sc_rp, sc_re})
    sc->fallthrough();

  CLI11_PARSE(app, argc, argv);

  using namespace fpnet;
  try {
    const cfg::ExperimentConfig c = resolve_config(config_path, profile);
    const std::string root =
        out_dir.empty()
            ? c.out_dir + "/" + cfg::config_hash(c).substr(0, 12)
            : out_dir;

    // reproduce and report read an existing run dir and must not rewrite
    // its stored config
    if (sc_re->parsed()) {
      harness::RunPaths p;
      p.root = root;
      const harness::ReproduceResult rr =
          harness::cmd_reproduce(p, choice_seed, metric);
      std::printf("metric     %s\n", rr.metric.c_str());
      std::printf("stored     %.17g\n", rr.stored);
      std::printf("rederived  %.17g\n", rr.rederived);
      std::printf("identical  %s\n", rr.identical ? "yes" : "no");
      return rr.identical ? 0 : 1;
    }
    if (sc_rp->parsed()) {
      harness::RunPaths p;
      p.root = root;
      harness::cmd_report(p);
      std::printf("wrote %s/summary.md\n", p.report_dir().c_str());
      return 0;
    }

    const harness::RunPaths p = harness::init_run_dir(c, root);
    if (sc_gen->parsed()) {
      harness::cmd_gen_data(c, p);
      std::printf("wrote %s\n", p.dataset().c_str());
    } else if (sc_train->parsed()) {
      harness::cmd_train(c, p);
      std::printf("checkpoints in %s\n", p.checkpoints().c_str());
    } else if (sc_eval->parsed()) {
      const harness::RunReport rep = harness::cmd_eval(c, p);
      std::fputs(rep.to_markdown().c_str(), stdout);
      std::printf("report in %s\n", p.report_dir().c_str());
    } else if (sc_sa->parsed()) {
      harness::cmd_sweep_alpha(c, p);
      std::printf("wrote %s/sweep_alpha.csv\n", p.report_dir().c_str());
    } else if (sc_sb->parsed()) {
      harness::cmd_sweep_bits(c, p);
      std::printf("wrote %s/sweep_bits.csv\n", p.report_dir().c_str());
    } else if (sc_sz->parsed()) {
      harness::cmd_sweep_zones(c, p);
      std::printf("wrote %s/sweep_zones.csv\n", p.report_dir().c_str());
    } else if (sc_dr->parsed()) {
      harness::cmd_drift(c, p);
      std::printf("wrote %s/drift.json\n", p.report_dir().c_str());
    } else if (sc_ad->parsed()) {
      harness::cmd_ad_eval(c, p);
      std::printf("wrote %s/ad_report.json\n", p.report_dir().c_str());
    } else if (sc_bl->parsed()) {
      harness::cmd_baseline(c, p);
      std::printf("wrote %s/baseline.csv\n", p.report_dir().c_str());
    }
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
