#include "tape/audit.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>

#include "tape/errors.hpp"
#include "tape/shadow.hpp"
#include "tape/unlearn.hpp"
#include "tape/verifier.hpp"

namespace tape {

namespace {

class Timer {
 public:
  Timer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

// Stage indices for deriving per-stage seeds from the master seed.
enum Stage : std::uint64_t {
  kDataStage = 10,
  kSelectLocal = 12,
  kSelectUnlearn = 13,
  kBaseTrain = 14,
  kRecTrain = 15,
  kUdp = 16,
  kUid = 17,
  kVerifier = 18,
  kDynamicsBackdoor = 20,
  kDynamicsGenuine = 21,
};

struct PreparedData {
  LabeledDataset train;
  LabeledDataset test;
};

PreparedData prepare_data(const ExperimentConfig& cfg) {
  PreparedData out;
  if (!cfg.idx_images.empty()) {
    LabeledDataset all = load_idx(cfg.idx_images, cfg.idx_labels);
    std::size_t n_train = std::max<std::size_t>(1, all.size() * 4 / 5);
    std::vector<std::size_t> tr(n_train), te(all.size() - n_train);
    std::iota(tr.begin(), tr.end(), 0);
    std::iota(te.begin(), te.end(), n_train);
    out.train = all.subset(IndexSet(std::move(tr)));
    out.test = all.subset(IndexSet(std::move(te)));
    return out;
  }
  // Train and test share class centers: draw one oversized set and split
  // each class-major block.
  SyntheticSpec spec = cfg.synthetic;
  const std::size_t test_pc = std::max<std::size_t>(1, spec.samples_per_class / 4);
  spec.samples_per_class = cfg.synthetic.samples_per_class + test_pc;
  spec.seed = derive_seed(cfg.seed, kDataStage);
  LabeledDataset all = gen_synthetic(spec);
  std::vector<std::size_t> tr, te;
  for (int c = 0; c < spec.num_classes; ++c) {
    std::size_t base = std::size_t(c) * spec.samples_per_class;
    for (std::size_t i = 0; i < cfg.synthetic.samples_per_class; ++i)
      tr.push_back(base + i);
    for (std::size_t i = cfg.synthetic.samples_per_class;
         i < spec.samples_per_class; ++i)
      te.push_back(base + i);
  }
  out.train = all.subset(IndexSet(std::move(tr)));
  out.test = all.subset(IndexSet(std::move(te)));
  return out;
}

MlpSpec model_spec(const ExperimentConfig& cfg, const LabeledDataset& data) {
  MlpSpec spec;
  spec.layer_widths.push_back(data.dims());
  for (std::size_t w : cfg.hidden_widths) spec.layer_widths.push_back(w);
  spec.layer_widths.push_back(std::size_t(data.num_classes));
  spec.head = Head::softmax_ce;
  return spec;
}

using Predictor = std::function<std::vector<double>(std::span<const double>)>;

double predictor_accuracy(const Predictor& pred, const LabeledDataset& data) {
  std::size_t hits = 0;
  for (std::size_t r = 0; r < data.size(); ++r) {
    std::vector<double> p = pred(data.features.row(r));
    std::size_t arg = std::size_t(
        std::max_element(p.begin(), p.end()) - p.begin());
    if (int(arg) == data.labels[r]) ++hits;
  }
  return double(hits) / double(data.size());
}

PosteriorVector predictor_posteriors(const Predictor& pred,
                                     const LabeledDataset& data,
                                     const IndexSet& local) {
  PosteriorVector out;
  out.local_size = local.size();
  out.num_classes = std::size_t(data.num_classes);
  for (std::size_t i : local) {
    std::vector<double> p = pred(data.features.row(i));
    out.values.insert(out.values.end(), p.begin(), p.end());
  }
  return out;
}

struct UnlearnOutcome {
  Predictor pre;        // service model before unlearning
  Predictor post;       // service model after unlearning
  double setup_seconds = 0.0;   // extra service-side training (SISA ensemble)
  double unlearn_seconds = 0.0;
};

UnlearnOutcome run_unlearner(const ExperimentConfig& cfg, const MlpSpec& spec,
                             const LabeledDataset& data, const IndexSet& unlearn,
                             const ModelParams& theta_t,
                             const TrainConfig& train_cfg) {
  auto single = [spec](ModelParams p) {
    return Predictor([spec, p = std::move(p)](std::span<const double> x) {
      return mlp_forward(p, spec, x);
    });
  };

  UnlearnOutcome out;
  out.pre = single(theta_t);
  switch (cfg.unlearner) {
    case UnlearnerKind::retrain: {
      Timer t;
      UnlearnRequest req{data, unlearn, theta_t, spec, train_cfg};
      out.post = single(retrain_unlearn(req));
      out.unlearn_seconds = t.seconds();
      break;
    }
    case UnlearnerKind::influence: {
      Timer t;
      out.post = single(influence_unlearn(theta_t, spec, data, unlearn,
                                          cfg.epsilon));
      out.unlearn_seconds = t.seconds();
      break;
    }
    case UnlearnerKind::newton: {
      Timer t;
      out.post = single(newton_unlearn(theta_t, spec, data, unlearn,
                                       cfg.newton_damping));
      out.unlearn_seconds = t.seconds();
      break;
    }
    case UnlearnerKind::ascent: {
      Timer t;
      auto traj = ascent_unlearn(theta_t, spec, data.subset(unlearn), {},
                                 cfg.ascent_epochs, cfg.ascent_lr);
      out.post = single(traj.back().params);
      out.unlearn_seconds = t.seconds();
      break;
    }
    case UnlearnerKind::sisa: {
      // Erased samples are co-located in shard 0 (the most favorable case);
      // the rest rotate across all shards.
      std::vector<std::size_t> assignment(data.size());
      std::size_t counter = 0;
      for (std::size_t i = 0; i < data.size(); ++i)
        assignment[i] = unlearn.contains(i) ? 0 : (counter++) % cfg.sisa_k;
      Timer setup;
      SisaEnsemble ensemble =
          sisa_train(data, spec, train_cfg, std::move(assignment));
      out.setup_seconds = setup.seconds();
      out.pre = [ensemble](std::span<const double> x) {
        return sisa_predict(ensemble, x);
      };
      Timer t;
      UnlearnRequest req{data, unlearn, theta_t, spec, train_cfg};
      SisaEnsemble after = sisa_unlearn(ensemble, req);
      out.unlearn_seconds = t.seconds();
      out.post = [after](std::span<const double> x) {
        return sisa_predict(after, x);
      };
      break;
    }
  }
  return out;
}

TriggerSpec make_trigger(const ExperimentConfig& cfg, std::size_t dims) {
  if (cfg.trigger_patch_dims == 0 || cfg.trigger_patch_dims > dims)
    throw ArgumentError("trigger patch dims out of range");
  std::vector<std::size_t> patch;
  for (std::size_t j = dims - cfg.trigger_patch_dims; j < dims; ++j)
    patch.push_back(j);
  return TriggerSpec{IndexSet(std::move(patch)), cfg.trigger_value,
                     cfg.trigger_target};
}

// Triggered non-target-class test samples, relabeled to the trigger target;
// accuracy on this set is the backdoor success rate.
LabeledDataset backdoor_eval_set(const LabeledDataset& test,
                                 const TriggerSpec& trig) {
  std::vector<std::size_t> nontarget;
  for (std::size_t i = 0; i < test.size(); ++i)
    if (test.labels[i] != trig.target_label) nontarget.push_back(i);
  if (nontarget.empty())
    throw ArgumentError("backdoor eval: no non-target-class samples");
  LabeledDataset sub = test.subset(IndexSet(std::move(nontarget)));
  std::vector<std::size_t> all(sub.size());
  std::iota(all.begin(), all.end(), 0);
  return apply_trigger(sub, IndexSet(std::move(all)), trig, true);
}

}  // namespace

std::string to_string(UnlearnerKind k) {
  switch (k) {
    case UnlearnerKind::retrain: return "retrain";
    case UnlearnerKind::sisa: return "sisa";
    case UnlearnerKind::influence: return "influence";
    case UnlearnerKind::newton: return "newton";
    case UnlearnerKind::ascent: return "ascent";
  }
  return "retrain";
}

UnlearnerKind unlearner_from_string(const std::string& s) {
  if (s == "retrain") return UnlearnerKind::retrain;
  if (s == "sisa") return UnlearnerKind::sisa;
  if (s == "influence") return UnlearnerKind::influence;
  if (s == "newton") return UnlearnerKind::newton;
  if (s == "ascent") return UnlearnerKind::ascent;
  throw ParseError("unknown unlearner kind '" + s + "'");
}

void ExperimentConfig::check() const {
  train.check();
  verifier_train.check();
  rec.check();
  udp.check();
  uid.check();
  if (ess < 1 || ess > local_size)
    throw ArgumentError("ExperimentConfig: need 1 <= ess <= local_size");
  if (epsilon < -1.0 || epsilon > 0.0)
    throw ArgumentError("ExperimentConfig: epsilon must be in [-1, 0]");
  if (sisa_k < 1) throw ArgumentError("ExperimentConfig: sisa_k must be >= 1");
}

double AuditReport::audit_seconds() const {
  double s = 0.0;
  for (const char* k : {"shadow_build", "rec_train", "udp", "verifier"}) {
    auto it = timings.find(k);
    if (it != timings.end()) s += it->second;
  }
  return s;
}

double AuditReport::baseline_seconds() const {
  double s = 0.0;
  for (const char* k : {"base_train", "verifier"}) {
    auto it = timings.find(k);
    if (it != timings.end()) s += it->second;
  }
  return s;
}

nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  return {
      {"format_version", "tape-config-1"},
      {"synthetic",
       {{"num_classes", cfg.synthetic.num_classes},
        {"dims", cfg.synthetic.dims},
        {"samples_per_class", cfg.synthetic.samples_per_class},
        {"class_center_spread", cfg.synthetic.class_center_spread},
        {"noise_sigma", cfg.synthetic.noise_sigma}}},
      {"idx_images", cfg.idx_images},
      {"idx_labels", cfg.idx_labels},
      {"hidden_widths", cfg.hidden_widths},
      {"train",
       {{"epochs", cfg.train.epochs},
        {"batch_size", cfg.train.batch_size},
        {"learning_rate", cfg.train.learning_rate}}},
      {"local_size", cfg.local_size},
      {"ess", cfg.ess},
      {"epsilon", cfg.epsilon},
      {"udp",
       {{"alpha", cfg.udp.alpha},
        {"restarts", cfg.udp.restarts},
        {"steps", cfg.udp.steps},
        {"step_size", cfg.udp.step_size}}},
      {"uid", {{"sigma", cfg.uid.sigma}}},
      {"rec",
       {{"epochs", cfg.rec.epochs},
        {"batch_size", cfg.rec.batch_size},
        {"learning_rate", cfg.rec.learning_rate},
        {"latent_width", cfg.rec.latent_width},
        {"hidden_width", cfg.rec.hidden_width}}},
      {"verifier",
       {{"epochs", cfg.verifier_train.epochs},
        {"batch_size", cfg.verifier_train.batch_size},
        {"learning_rate", cfg.verifier_train.learning_rate},
        {"hidden_width", cfg.verifier_hidden}}},
      {"unlearner", to_string(cfg.unlearner)},
      {"sisa_k", cfg.sisa_k},
      {"newton_damping", cfg.newton_damping},
      {"ascent_epochs", cfg.ascent_epochs},
      {"ascent_lr", cfg.ascent_lr},
      {"udp_on", cfg.udp_on},
      {"uid_on", cfg.uid_on},
      {"baseline", cfg.baseline == BaselineKind::mib ? "mib" : "none"},
      {"trigger",
       {{"patch_dims", cfg.trigger_patch_dims},
        {"value", cfg.trigger_value},
        {"target", cfg.trigger_target}}},
      {"dynamics_backdoor_count", cfg.dynamics_backdoor_count},
      {"seed", cfg.seed},
      {"out_dir", cfg.out_dir},
  };
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
  if (j.value("format_version", "") != "tape-config-1")
    throw ParseError("config: unexpected format_version");
  ExperimentConfig cfg;
  if (j.contains("synthetic")) {
    const auto& s = j.at("synthetic");
    cfg.synthetic.num_classes = s.value("num_classes", cfg.synthetic.num_classes);
    cfg.synthetic.dims = s.value("dims", cfg.synthetic.dims);
    cfg.synthetic.samples_per_class =
        s.value("samples_per_class", cfg.synthetic.samples_per_class);
    cfg.synthetic.class_center_spread =
        s.value("class_center_spread", cfg.synthetic.class_center_spread);
    cfg.synthetic.noise_sigma = s.value("noise_sigma", cfg.synthetic.noise_sigma);
  }
  cfg.idx_images = j.value("idx_images", cfg.idx_images);
  cfg.idx_labels = j.value("idx_labels", cfg.idx_labels);
  cfg.hidden_widths = j.value("hidden_widths", cfg.hidden_widths);
  if (j.contains("train")) {
    const auto& t = j.at("train");
    cfg.train.epochs = t.value("epochs", cfg.train.epochs);
    cfg.train.batch_size = t.value("batch_size", cfg.train.batch_size);
    cfg.train.learning_rate = t.value("learning_rate", cfg.train.learning_rate);
  }
  cfg.local_size = j.value("local_size", cfg.local_size);
  cfg.ess = j.value("ess", cfg.ess);
  cfg.epsilon = j.value("epsilon", cfg.epsilon);
  if (j.contains("udp")) {
    const auto& u = j.at("udp");
    cfg.udp.alpha = u.value("alpha", cfg.udp.alpha);
    cfg.udp.restarts = u.value("restarts", cfg.udp.restarts);
    cfg.udp.steps = u.value("steps", cfg.udp.steps);
    cfg.udp.step_size = u.value("step_size", cfg.udp.step_size);
  }
  if (j.contains("uid")) cfg.uid.sigma = j.at("uid").value("sigma", cfg.uid.sigma);
  if (j.contains("rec")) {
    const auto& r = j.at("rec");
    cfg.rec.epochs = r.value("epochs", cfg.rec.epochs);
    cfg.rec.batch_size = r.value("batch_size", cfg.rec.batch_size);
    cfg.rec.learning_rate = r.value("learning_rate", cfg.rec.learning_rate);
    cfg.rec.latent_width = r.value("latent_width", cfg.rec.latent_width);
    cfg.rec.hidden_width = r.value("hidden_width", cfg.rec.hidden_width);
  }
  if (j.contains("verifier")) {
    const auto& v = j.at("verifier");
    cfg.verifier_train.epochs = v.value("epochs", cfg.verifier_train.epochs);
    cfg.verifier_train.batch_size =
        v.value("batch_size", cfg.verifier_train.batch_size);
    cfg.verifier_train.learning_rate =
        v.value("learning_rate", cfg.verifier_train.learning_rate);
    cfg.verifier_hidden = v.value("hidden_width", cfg.verifier_hidden);
  }
  cfg.unlearner =
      unlearner_from_string(j.value("unlearner", to_string(cfg.unlearner)));
  cfg.sisa_k = j.value("sisa_k", cfg.sisa_k);
  cfg.newton_damping = j.value("newton_damping", cfg.newton_damping);
  cfg.ascent_epochs = j.value("ascent_epochs", cfg.ascent_epochs);
  cfg.ascent_lr = j.value("ascent_lr", cfg.ascent_lr);
  cfg.udp_on = j.value("udp_on", cfg.udp_on);
  cfg.uid_on = j.value("uid_on", cfg.uid_on);
  std::string b = j.value("baseline", "none");
  if (b != "none" && b != "mib") throw ParseError("config: unknown baseline");
  cfg.baseline = b == "mib" ? BaselineKind::mib : BaselineKind::none;
  if (j.contains("trigger")) {
    const auto& t = j.at("trigger");
    cfg.trigger_patch_dims = t.value("patch_dims", cfg.trigger_patch_dims);
    cfg.trigger_value = t.value("value", cfg.trigger_value);
    cfg.trigger_target = t.value("target", cfg.trigger_target);
  }
  cfg.dynamics_backdoor_count =
      j.value("dynamics_backdoor_count", cfg.dynamics_backdoor_count);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.out_dir = j.value("out_dir", cfg.out_dir);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ParseError("config: cannot open " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("config: bad document in " + path + ": " + e.what());
  }
  return config_from_json(j);
}

void save_config(const ExperimentConfig& cfg, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw ArgumentError("config: cannot open " + path);
  f << config_to_json(cfg).dump(2) << "\n";
}

nlohmann::json report_to_json(const AuditReport& r) {
  return {{"model_accuracy", r.model_accuracy},
          {"rec_similarity", r.rec_similarity},
          {"verifiability", r.verifiability},
          {"timings", r.timings},
          {"extras", r.extras},
          {"config", r.config_echo},
          {"seed", r.seed}};
}

AuditReport report_from_json(const nlohmann::json& j) {
  AuditReport r;
  r.model_accuracy = j.at("model_accuracy").get<double>();
  r.rec_similarity = j.at("rec_similarity").get<double>();
  r.verifiability = j.at("verifiability").get<double>();
  r.timings = j.at("timings").get<std::map<std::string, double>>();
  r.extras = j.value("extras", std::map<std::string, double>{});
  r.config_echo = j.value("config", nlohmann::json::object());
  r.seed = j.at("seed").get<std::uint64_t>();
  return r;
}

void save_report(const AuditReport& r, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw ArgumentError("report: cannot open " + path);
  f << report_to_json(r).dump(2) << "\n";
}

AuditReport load_report(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ParseError("report: cannot open " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("report: bad document in " + path + ": " + e.what());
  }
  return report_from_json(j);
}

std::string render_report(const AuditReport& r) {
  std::ostringstream os;
  auto line = [&](const std::string& k, double v, const char* unit = "") {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%-28s %12.6f%s\n", k.c_str(), v, unit);
    os << buf;
  };
  os << "metric                              value\n";
  os << "-----------------------------------------\n";
  line("model_accuracy", r.model_accuracy);
  line("rec_similarity", r.rec_similarity);
  line("verifiability", r.verifiability);
  for (const auto& [k, v] : r.timings) line("timing." + k, v, " s");
  line("audit_seconds", r.audit_seconds(), " s");
  for (const auto& [k, v] : r.extras) line("extra." + k, v);
  line("seed", double(r.seed));
  return os.str();
}

AuditReport run_tape_audit(const ExperimentConfig& cfg) {
  cfg.check();
  AuditReport report;
  report.seed = cfg.seed;
  report.config_echo = config_to_json(cfg);

  PreparedData data = prepare_data(cfg);
  MlpSpec spec = model_spec(cfg, data.train);

  Rng local_rng(derive_seed(cfg.seed, kSelectLocal));
  IndexSet local = select_local(data.train, cfg.local_size, local_rng);
  Rng unlearn_rng(derive_seed(cfg.seed, kSelectUnlearn));
  IndexSet unlearn = select_unlearn(local, cfg.ess, unlearn_rng);

  TrainConfig train_cfg = cfg.train;
  train_cfg.seed = derive_seed(cfg.seed, kBaseTrain);
  Timer t_base;
  ModelParams theta_t = sgd_train(spec, data.train, train_cfg);
  double base_seconds = t_base.seconds();

  Timer t_shadow;
  std::vector<ShadowPair> corpus =
      build_shadow_corpus(theta_t, spec, data.train, local, cfg.epsilon);
  report.timings["shadow_build"] = t_shadow.seconds();

  RecTrainConfig rec_cfg = cfg.rec;
  rec_cfg.seed = derive_seed(cfg.seed, kRecTrain);
  Timer t_rec;
  Reconstructor ae = train_reconstructor(corpus, rec_cfg);
  report.timings["rec_train"] = t_rec.seconds();

  LabeledDataset unlearn_data = data.train;
  double udp_seconds = 0.0;
  if (cfg.udp_on) {
    UdpConfig udp_cfg = cfg.udp;
    udp_cfg.seed = derive_seed(cfg.seed, kUdp);
    Timer t_udp;
    Matrix perturbed = udp_perturb(theta_t, spec, ae, data.train, local,
                                   unlearn, cfg.epsilon, udp_cfg);
    udp_seconds = t_udp.seconds();
    for (std::size_t u = 0; u < unlearn.size(); ++u)
      std::copy(perturbed.row(u).begin(), perturbed.row(u).end(),
                unlearn_data.features.row(unlearn[u]).begin());
  }
  report.timings["udp"] = udp_seconds;

  UnlearnOutcome outcome =
      run_unlearner(cfg, spec, unlearn_data, unlearn, theta_t, train_cfg);
  report.timings["base_train"] = base_seconds + outcome.setup_seconds;
  report.timings["unlearn"] = outcome.unlearn_seconds;

  PosteriorVector y_t = predictor_posteriors(outcome.pre, unlearn_data, local);
  PosteriorVector y_u = predictor_posteriors(outcome.post, unlearn_data, local);
  PosteriorDiff delta = posterior_difference(y_t, y_u);

  std::map<std::size_t, PosteriorDiff> diffs;
  if (cfg.ess == 1) {
    diffs[unlearn[0]] = delta;
  } else if (cfg.uid_on) {
    UidConfig uid_cfg = cfg.uid;
    uid_cfg.seed = derive_seed(cfg.seed, kUid);
    std::vector<PosteriorDiff> shares =
        uid_divide(delta, theta_t, spec, unlearn_data, unlearn, uid_cfg);
    for (std::size_t u = 0; u < unlearn.size(); ++u)
      diffs[unlearn[u]] = std::move(shares[u]);
  } else {
    for (std::size_t u : unlearn) diffs[u] = delta;  // ablation: no division
  }

  Matrix x_hat(unlearn.size(), data.train.dims());
  Matrix x_orig(unlearn.size(), data.train.dims());
  for (std::size_t u = 0; u < unlearn.size(); ++u) {
    std::vector<double> rec = reconstruct(ae, diffs.at(unlearn[u]));
    std::copy(rec.begin(), rec.end(), x_hat.row(u).begin());
    auto row = data.train.features.row(unlearn[u]);
    std::copy(row.begin(), row.end(), x_orig.row(u).begin());
  }
  report.rec_similarity = reconstruction_similarity(x_hat, x_orig);

  TrainConfig ver_cfg = cfg.verifier_train;
  ver_cfg.seed = derive_seed(cfg.seed, kVerifier);
  Timer t_ver;
  VerificationDataset vset =
      build_verification_set(ae, diffs, data.train, local, unlearn);
  VerifierModel verifier = train_verifier(vset, ver_cfg, cfg.verifier_hidden);
  report.verifiability = verifiability(verifier, ae, diffs, data.train, unlearn);
  report.timings["verifier"] = t_ver.seconds();

  report.model_accuracy = predictor_accuracy(outcome.post, data.test);

  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    save_report(report, cfg.out_dir + "/report.json");
  }
  return report;
}

AuditReport run_mib_baseline(const ExperimentConfig& cfg) {
  cfg.check();
  AuditReport report;
  report.seed = cfg.seed;
  report.config_echo = config_to_json(cfg);

  PreparedData data = prepare_data(cfg);
  MlpSpec spec = model_spec(cfg, data.train);
  TriggerSpec trig = make_trigger(cfg, data.train.dims());

  Rng local_rng(derive_seed(cfg.seed, kSelectLocal));
  IndexSet local = select_local(data.train, cfg.local_size, local_rng);
  Rng unlearn_rng(derive_seed(cfg.seed, kSelectUnlearn));
  IndexSet unlearn = select_unlearn(local, cfg.ess, unlearn_rng);

  LabeledDataset bd_train = apply_trigger(data.train, unlearn, trig, true);

  TrainConfig train_cfg = cfg.train;
  train_cfg.seed = derive_seed(cfg.seed, kBaseTrain);
  Timer t_base;
  ModelParams theta_t = sgd_train(spec, bd_train, train_cfg);
  report.timings["base_train"] = t_base.seconds();

  LabeledDataset bd_eval = backdoor_eval_set(data.test, trig);
  Timer t_eval;
  double pre_success = accuracy(theta_t, spec, bd_eval);

  UnlearnOutcome outcome =
      run_unlearner(cfg, spec, bd_train, unlearn, theta_t, train_cfg);
  double post_success = predictor_accuracy(outcome.post, bd_eval);
  report.timings["verifier"] = t_eval.seconds() - outcome.unlearn_seconds -
                               outcome.setup_seconds;
  report.timings["unlearn"] = outcome.unlearn_seconds;

  bool implanted = pre_success >= 0.5;
  bool removed = post_success <= 0.1;
  report.verifiability = (implanted && removed) ? 1.0 : 0.0;
  report.rec_similarity = 0.0;
  report.extras["backdoor_pre_success"] = pre_success;
  report.extras["backdoor_post_success"] = post_success;
  report.model_accuracy = predictor_accuracy(outcome.post, data.test);

  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    save_report(report, cfg.out_dir + "/baseline_report.json");
  }
  return report;
}

std::vector<SweepRow> sweep(const ExperimentConfig& cfg, SweepAxis axis,
                            const std::vector<double>& values,
                            const std::vector<std::uint64_t>& seeds) {
  if (values.empty()) throw ArgumentError("sweep: empty axis values");
  if (seeds.empty()) throw ArgumentError("sweep: empty seed list");
  std::vector<SweepRow> rows;
  for (double value : values) {
    for (std::uint64_t seed : seeds) {
      SweepRow row;
      row.axis = axis == SweepAxis::ess ? "ess" : "alpha";
      row.axis_value = value;
      row.seed = seed;
      try {
        ExperimentConfig cell = cfg;
        cell.seed = seed;
        cell.out_dir.clear();
        if (axis == SweepAxis::ess) {
          cell.ess = std::size_t(value);
        } else {
          cell.udp.alpha = value;
          cell.udp_on = true;
        }
        AuditReport r = run_tape_audit(cell);
        row.model_acc = r.model_accuracy;
        row.rec_sim = r.rec_similarity;
        row.verifiability = r.verifiability;
        row.audit_seconds = r.audit_seconds();
        if (cfg.baseline == BaselineKind::mib) {
          AuditReport b = run_mib_baseline(cell);
          row.baseline_seconds = b.baseline_seconds();
        } else {
          row.baseline_seconds = std::nan("");
        }
      } catch (const std::exception&) {
        row.failed = true;
      }
      rows.push_back(row);
    }
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << "axis,axis_value,seed,model_acc,rec_sim,verifiability,audit_seconds,"
        "baseline_seconds\n";
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << ',' << buf;
  };
  for (const SweepRow& r : rows) {
    os << r.axis;
    num(r.axis_value);
    os << ',' << r.seed;
    if (r.failed) {
      os << ",nan,nan,nan,nan,nan";
    } else {
      num(r.model_acc);
      num(r.rec_sim);
      num(r.verifiability);
      num(r.audit_seconds);
      num(r.baseline_seconds);
    }
    os << "\n";
  }
  return os.str();
}

std::vector<DynamicsRow> fig2_dynamics(const ExperimentConfig& cfg) {
  cfg.check();
  PreparedData data = prepare_data(cfg);
  MlpSpec spec = model_spec(cfg, data.train);
  TriggerSpec trig = make_trigger(cfg, data.train.dims());

  Rng bd_rng(derive_seed(cfg.seed, kDynamicsBackdoor));
  IndexSet backdoor = select_local(data.train, cfg.dynamics_backdoor_count, bd_rng);
  IndexSet remaining = backdoor.complement(data.train.size());
  Rng gen_rng(derive_seed(cfg.seed, kDynamicsGenuine));
  IndexSet genuine =
      select_unlearn(remaining, cfg.dynamics_backdoor_count, gen_rng);

  LabeledDataset bd_train = apply_trigger(data.train, backdoor, trig, true);
  TrainConfig train_cfg = cfg.train;
  train_cfg.seed = derive_seed(cfg.seed, kBaseTrain);
  ModelParams theta_t = sgd_train(spec, bd_train, train_cfg);

  LabeledDataset forget = bd_train.subset(backdoor);
  LabeledDataset bd_eval = backdoor_eval_set(data.test, trig);
  LabeledDataset genuine_eval = data.train.subset(genuine);

  auto traj = ascent_unlearn(theta_t, spec, forget,
                             {&bd_eval, &genuine_eval, &data.test},
                             cfg.ascent_epochs, cfg.ascent_lr);
  std::vector<DynamicsRow> rows;
  rows.reserve(traj.size());
  for (const AscentRecord& rec : traj)
    rows.push_back({rec.epoch, rec.accuracies[0], rec.accuracies[1],
                    rec.accuracies[2]});
  return rows;
}

std::string dynamics_csv(const std::vector<DynamicsRow>& rows) {
  std::ostringstream os;
  os << "epoch,acc_backdoor,acc_genuine,acc_test\n";
  char buf[64];
  for (const DynamicsRow& r : rows) {
    os << r.epoch;
    for (double v : {r.acc_backdoor, r.acc_genuine, r.acc_test}) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      os << ',' << buf;
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace tape
