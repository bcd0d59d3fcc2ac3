#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "tape/dataset.hpp"
#include "tape/nn.hpp"
#include "tape/reconstructor.hpp"
#include "tape/strategies.hpp"

namespace tape {

enum class UnlearnerKind { retrain, sisa, influence, newton, ascent };
enum class BaselineKind { none, mib };

std::string to_string(UnlearnerKind k);
UnlearnerKind unlearner_from_string(const std::string& s);

// Full experiment description. All stage seeds are derived from `seed`, so
// a (config, seed) pair pins every output bit except wall-clock timings.
struct ExperimentConfig {
  // Dataset: synthetic profile unless IDX paths are given. The default
  // noise keeps the classes overlapping; a fully separable problem
  // saturates the softmax and starves the posterior difference of signal.
  static SyntheticSpec default_synthetic() {
    SyntheticSpec s;
    s.noise_sigma = 0.35;
    return s;
  }

  SyntheticSpec synthetic = default_synthetic();
  std::string idx_images;
  std::string idx_labels;

  std::vector<std::size_t> hidden_widths = {32, 32, 32};
  TrainConfig train{150, 16, 0.1, 0};

  std::size_t local_size = 40;
  std::size_t ess = 1;
  double epsilon = -1.0;

  UdpConfig udp;
  UidConfig uid;
  RecTrainConfig rec;
  TrainConfig verifier_train{150, 8, 0.2, 0};
  std::size_t verifier_hidden = 32;

  UnlearnerKind unlearner = UnlearnerKind::retrain;
  std::size_t sisa_k = 5;
  double newton_damping = 1e-3;
  std::size_t ascent_epochs = 90;
  double ascent_lr = 0.005;

  bool udp_on = false;
  bool uid_on = true;
  BaselineKind baseline = BaselineKind::none;

  std::size_t trigger_patch_dims = 2;
  double trigger_value = 1.0;
  int trigger_target = 0;
  std::size_t dynamics_backdoor_count = 40;

  std::uint64_t seed = 42;
  std::string out_dir;

  void check() const;
};

nlohmann::json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
void save_config(const ExperimentConfig& cfg, const std::string& path);

struct AuditReport {
  double model_accuracy = 0.0;
  double rec_similarity = 0.0;
  double verifiability = 0.0;
  std::map<std::string, double> timings;  // seconds per phase
  std::map<std::string, double> extras;
  nlohmann::json config_echo;
  std::uint64_t seed = 0;

  // Audit cost excludes base training (and the server's unlearning).
  double audit_seconds() const;
  // MIB verification cost includes its backdoor training.
  double baseline_seconds() const;
};

nlohmann::json report_to_json(const AuditReport& r);
AuditReport report_from_json(const nlohmann::json& j);
void save_report(const AuditReport& r, const std::string& path);
AuditReport load_report(const std::string& path);
// Aligned text table of one report.
std::string render_report(const AuditReport& r);

// End-to-end TAPE audit on the configured dataset and unlearner.
AuditReport run_tape_audit(const ExperimentConfig& cfg);

// Backdoor-verification baseline: injects label-flipped triggered samples
// during training, unlearns them, and reports verifiability 1 iff the
// backdoor was implanted (pre-unlearning success >= 0.5) and removed
// (post-unlearning success <= 0.1).
AuditReport run_mib_baseline(const ExperimentConfig& cfg);

enum class SweepAxis { ess, alpha };

struct SweepRow {
  std::string axis;
  double axis_value;
  std::uint64_t seed;
  bool failed = false;
  double model_acc = 0.0;
  double rec_sim = 0.0;
  double verifiability = 0.0;
  double audit_seconds = 0.0;
  double baseline_seconds = 0.0;
};

// One row per (axis value x seed), in that order; failed cells are recorded
// and never abort the others.
std::vector<SweepRow> sweep(const ExperimentConfig& cfg, SweepAxis axis,
                            const std::vector<double>& values,
                            const std::vector<std::uint64_t>& seeds);
std::string sweep_csv(const std::vector<SweepRow>& rows);

struct DynamicsRow {
  std::size_t epoch;
  double acc_backdoor;
  double acc_genuine;
  double acc_test;
};

// Gradient-ascent forgetting of a backdoored set, tracking backdoor success,
// genuine-unlearned-sample accuracy and test accuracy per epoch.
std::vector<DynamicsRow> fig2_dynamics(const ExperimentConfig& cfg);
std::string dynamics_csv(const std::vector<DynamicsRow>& rows);

}  // namespace tape
