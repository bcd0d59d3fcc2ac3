// tape: command-line driver for posterior-difference unlearning audits.
//
// Subcommands: train, audit, baseline, sweep, dynamics, report.
// Exit codes: 0 success, 1 usage error, 2 runtime error.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tape/audit.hpp"
#include "tape/errors.hpp"
#include "tape/nn.hpp"

namespace {

std::vector<double> parse_values(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stod(item));
  }
  return out;
}

std::string default_out_dir() {
  const char* env = std::getenv("TAPE_OUT_DIR");
  return env ? env : ".";
}

void write_or_print(const std::string& text, const std::string& path) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(path);
  if (!f) throw tape::ArgumentError("cannot open output file " + path);
  f << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"TAPE unlearning audit toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 0;
  std::size_t ess = 0;
  double alpha = -1.0;
  std::string out_dir;
  std::string out_path;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON experiment config");
    cmd->add_option("--seed", seed, "override the config's seed");
    cmd->add_option("--ess", ess, "override the erased sample size");
    cmd->add_option("--alpha", alpha, "override the UDP perturbation limit");
    cmd->add_option("--out-dir", out_dir, "output directory");
  };

  CLI::App* train = app.add_subcommand("train", "train the base model and save a checkpoint");
  add_common(train);
  std::string ckpt_path;
  train->add_option("--out", ckpt_path, "checkpoint path (default <out-dir>/model.json)");

  CLI::App* audit = app.add_subcommand("audit", "run a full posterior-difference audit");
  add_common(audit);

  CLI::App* baseline = app.add_subcommand("baseline", "run the backdoor-verification baseline");
  add_common(baseline);

  CLI::App* sweep_cmd = app.add_subcommand("sweep", "sweep ess or alpha over seeds, emit CSV");
  add_common(sweep_cmd);
  std::string axis = "ess";
  std::string values_csv;
  std::string seeds_csv = "42";
  sweep_cmd->add_option("--axis", axis, "sweep axis: ess | alpha")
      ->check(CLI::IsMember({"ess", "alpha"}));
  sweep_cmd->add_option("--values", values_csv, "comma-separated axis values")->required();
  sweep_cmd->add_option("--seeds", seeds_csv, "comma-separated seeds");
  sweep_cmd->add_option("--out", out_path, "CSV output path (default stdout)");

  CLI::App* dynamics = app.add_subcommand("dynamics", "ascent forgetting curves, emit CSV");
  add_common(dynamics);
  dynamics->add_option("--out", out_path, "CSV output path (default stdout)");

  CLI::App* report_cmd = app.add_subcommand("report", "render a JSON report as a text table");
  std::string report_path;
  report_cmd->add_option("--input", report_path, "AuditReport JSON path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << e.what() << "\n\n" << app.help() << "\n";
    return 1;
  }

  tape::ExperimentConfig cfg;
  try {
    if (!config_path.empty()) cfg = tape::load_config(config_path);
  } catch (const tape::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  if (seed != 0) cfg.seed = seed;
  if (ess != 0) cfg.ess = ess;
  if (alpha >= 0.0) {
    cfg.udp.alpha = alpha;
    cfg.udp_on = true;
  }
  if (!out_dir.empty()) cfg.out_dir = out_dir;
  if (cfg.out_dir.empty()) cfg.out_dir = default_out_dir();

  try {
    if (*train) {
      tape::SyntheticSpec spec = cfg.synthetic;
      spec.seed = tape::derive_seed(cfg.seed, 10);
      tape::LabeledDataset data =
          cfg.idx_images.empty() ? tape::gen_synthetic(spec)
                                 : tape::load_idx(cfg.idx_images, cfg.idx_labels);
      tape::MlpSpec mspec;
      mspec.layer_widths.push_back(data.dims());
      for (std::size_t w : cfg.hidden_widths) mspec.layer_widths.push_back(w);
      mspec.layer_widths.push_back(std::size_t(data.num_classes));
      tape::TrainConfig tc = cfg.train;
      tc.seed = tape::derive_seed(cfg.seed, 14);
      tape::ModelParams params = tape::sgd_train(mspec, data, tc);
      std::string path = ckpt_path.empty() ? cfg.out_dir + "/model.json" : ckpt_path;
      tape::save_checkpoint(path, mspec, cfg.seed, params);
      std::cout << "saved checkpoint to " << path << "\n";
    } else if (*audit) {
      tape::AuditReport r = tape::run_tape_audit(cfg);
      std::cout << tape::render_report(r);
    } else if (*baseline) {
      cfg.baseline = tape::BaselineKind::mib;
      tape::AuditReport r = tape::run_mib_baseline(cfg);
      std::cout << tape::render_report(r);
    } else if (*sweep_cmd) {
      std::vector<double> values = parse_values(values_csv);
      std::vector<std::uint64_t> seeds;
      for (double s : parse_values(seeds_csv))
        seeds.push_back(std::uint64_t(s));
      tape::SweepAxis ax =
          axis == "alpha" ? tape::SweepAxis::alpha : tape::SweepAxis::ess;
      std::vector<tape::SweepRow> rows = tape::sweep(cfg, ax, values, seeds);
      write_or_print(tape::sweep_csv(rows), out_path);
    } else if (*dynamics) {
      std::vector<tape::DynamicsRow> rows = tape::fig2_dynamics(cfg);
      write_or_print(tape::dynamics_csv(rows), out_path);
    } else if (*report_cmd) {
      tape::AuditReport r = tape::load_report(report_path);
      std::cout << tape::render_report(r);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
