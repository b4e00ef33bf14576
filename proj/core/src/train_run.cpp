#include "json.hpp"

#include "odenet/trainer.hpp"

namespace odenet::train {

namespace {

using Json = nlohmann::ordered_json;

Json metrics_json(const Metrics& m) { return Json{{"loss", m.loss}, {"accuracy", m.accuracy}}; }

Json spec_json(const arch::NetworkSpec& s) {
  Json j;
  j["kind"] = std::string(arch::to_string(s.kind));
  j["depth"] = s.depth;
  j["width"] = s.width;
  j["input_dim"] = s.input_dim;
  j["classes"] = s.classes;
  if (s.kind == arch::ArchKind::polynet) j["poly_order"] = s.poly_order;
  if (s.kind == arch::ArchKind::lm_resnet) j["k_init"] = {s.k_init_lo, s.k_init_hi};
  j["policy"] = std::string(arch::to_string(s.policy.kind));
  if (s.policy.kind == arch::PolicyKind::stochastic_depth) j["p_l"] = s.policy.p_l;
  return j;
}

}  // namespace

std::string serialize_run(const TrainRun& run) {
  const TrainConfig& c = run.config;
  Json j;
  j["format"] = "odenet-train-run";
  j["version"] = 1;
  j["seed"] = c.seed;
  Json cfg;
  cfg["spec"] = spec_json(c.spec);
  cfg["epochs"] = c.epochs;
  cfg["batch_size"] = c.batch_size;
  cfg["lr"] = c.lr.initial;
  cfg["lr_decay_epochs"] = c.lr.decay_epochs;
  cfg["lr_decay_factor"] = c.lr.factor;
  cfg["momentum"] = c.momentum;
  cfg["weight_decay"] = c.weight_decay;
  j["config"] = cfg;
  j["failed"] = run.failed;
  if (run.failed) {
    j["failure_epoch"] = run.failure_epoch.value_or(0);
    j["failure_message"] = run.failure_message;
  } else {
    j["final_train"] = metrics_json(run.final_train);
    j["final_test"] = metrics_json(run.final_test);
  }
  Json curves = Json::array();
  for (const EpochMetrics& e : run.curves) {
    curves.push_back(Json{{"epoch", e.epoch},
                          {"lr", e.lr},
                          {"train_loss", e.train_loss},
                          {"train_accuracy", e.train_accuracy},
                          {"test_loss", e.test_loss},
                          {"test_accuracy", e.test_accuracy}});
  }
  j["curves"] = curves;
  if (c.spec.kind == arch::ArchKind::lm_resnet) {
    j["k_values"] = run.k_values;
    j["k_outside_unit_interval"] = run.k_audit.outside;
    j["k_on_boundary"] = run.k_audit.boundary;
  }
  return j.dump(2) + "\n";
}

}  // namespace odenet::train
