#ifndef ADVSR_PLAN_H_
#define ADVSR_PLAN_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "advsr/attacks.h"
#include "advsr/corpus.h"
#include "advsr/features.h"
#include "advsr/model.h"

namespace advsr::harness {

// One member of the model panel. Either trained from `arch` or loaded from
// `checkpoint`.
struct ModelSpec {
  std::string id;
  model::Arch arch = model::Arch::kFfCtc;
  std::optional<std::filesystem::path> checkpoint;
  std::uint64_t seed = 1;
  long steps = 1500;
  double lr = 3e-3;
  std::size_t batch = 8;
  std::optional<std::size_t> train_subset;  // first n training utterances
  std::string encoder;                      // enc_head: id of the pretrained encoder
  bool freeze = false;                      // enc_head: keep encoder weights fixed
};

struct ExperimentPlan {
  std::vector<ModelSpec> models;
  std::vector<attacks::AttackConfig> attacks;
  std::vector<double> snr_grid;  // descending
  std::vector<std::string> targets;
  std::size_t subset = 100;  // utterances for CW and Genetic
  std::optional<std::size_t> eval_limit;  // caps every evaluation set
  std::uint64_t seed = 0;
  model::FeatureConfig features;
  corpus::CorpusConfig corpus;

  const ModelSpec& model(std::string_view id) const;
};

// JSON document. Unknown keys anywhere are errors, as are missing required
// fields and violated invariants; all surface as PlanError naming the key.
ExperimentPlan parse_plan(std::string_view text);
ExperimentPlan load_plan(const std::filesystem::path& path);

// Checks the plan invariants; also applied by parse_plan.
void validate(const ExperimentPlan& plan);

}  // namespace advsr::harness

#endif  // ADVSR_PLAN_H_
