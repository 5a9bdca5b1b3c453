#ifndef ADVSR_HARNESS_H_
#define ADVSR_HARNESS_H_

#include <atomic>
#include <cstddef>
#include <exception>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "advsr/attacks.h"
#include "advsr/corpus.h"
#include "advsr/metrics.h"
#include "advsr/model.h"
#include "advsr/plan.h"

namespace advsr::harness {

struct RunOptions {
  std::filesystem::path out_dir = "out";
  std::size_t workers = 1;
  bool save_adv = false;  // WAV + JSON sidecar per adversarial example
  std::ostream* log = nullptr;
};

// fn(0) ... fn(n - 1) on up to `workers` threads. Results come back in index
// order; if any call throws, the exception of the lowest failing index is
// rethrown after all threads finish.
template <typename T>
std::vector<T> parallel_map(std::size_t n, std::size_t workers,
                            const std::function<T(std::size_t)>& fn) {
  std::vector<std::optional<T>> slots(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  const auto run = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        slots[i].emplace(fn(i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t k = std::max<std::size_t>(1, std::min(workers, n));
  if (k == 1) {
    run();
  } else {
    std::vector<std::thread> threads;
    threads.reserve(k);
    for (std::size_t t = 0; t < k; ++t) threads.emplace_back(run);
    for (auto& t : threads) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<T> out;
  out.reserve(n);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

// Trained or loaded models, in plan order.
struct Panel {
  std::vector<model::TrainedModel> models;

  const model::TrainedModel& get(std::string_view id) const;
  // Models that decode text (have a CTC head).
  std::vector<const model::TrainedModel*> decoders() const;
  // Bare pretrained encoders.
  std::vector<const model::TrainedModel*> encoders() const;
};

std::filesystem::path checkpoint_path(const RunOptions& opts, std::string_view model_id);

// Writes the corpus described by the plan (or the defaults) to `dir`.
corpus::Corpus cmd_gen_corpus(const corpus::CorpusConfig& config, const std::filesystem::path& dir);

// Trains, pretrains or fine-tunes every model, writing
// `<out>/models/<id>.ckpt` and `<out>/models/panel.json`. Training failures
// are rethrown as TrainingError naming the model.
Panel cmd_train(const ExperimentPlan& plan, const corpus::Corpus& data, const RunOptions& opts);

// Loads every model of the plan from its checkpoint. Throws PlanError when a
// checkpoint is missing.
Panel load_panel(const ExperimentPlan& plan, const RunOptions& opts);

// Test utterances used for evaluation, sorted by id and capped by
// eval_limit (and additionally by subset when `limited`).
std::vector<corpus::Utterance> evaluation_set(const ExperimentPlan& plan,
                                              const corpus::Corpus& data, bool limited);

struct SweepRow {
  std::string model;
  std::string attack;
  double snr_db = 0.0;  // bound
  double mean_wer = 0.0;
  double mean_snr_db = 0.0;  // achieved
  std::size_t n = 0;
};

// Every decoder x {pgd_l2, pgd_linf, kenansville attacks of the plan} x
// snr_grid on the full evaluation set. Writes `<out>/sweep.csv` and one
// `<out>/sweep_<attack>.svg` per attack.
std::vector<SweepRow> cmd_sweep(const ExperimentPlan& plan, const corpus::Corpus& data,
                                const RunOptions& opts);

struct TargetedRow {
  std::string model;
  double clean_wer = 0.0;
  std::optional<double> cw_wer;  // versus the target
  std::optional<double> cw_snr_db;
  std::optional<double> cw_accuracy;  // percent of feasible utterances
  std::optional<double> genetic_wer;  // versus the label
  std::size_t infeasible = 0;
};

// CW (toward select_target of each label) and Genetic on the subset. Writes
// `<out>/targeted.csv` and `<out>/targeted_infeasible.csv`.
std::vector<TargetedRow> cmd_targeted(const ExperimentPlan& plan, const corpus::Corpus& data,
                                      const RunOptions& opts);

struct TransferCell {
  std::string attack;  // attack label, e.g. "pgd_l2@25"
  std::string source;
  std::string target;
  metrics::SummaryRow summary;
  double clean_wer = 0.0;  // target model with a zero perturbation, same utterances
};

struct TransferMatrix {
  std::vector<TransferCell> cells;

  const TransferCell& at(std::string_view attack, std::string_view source,
                         std::string_view target) const;
};

// For each PGD, CW and SSL attack of the plan: craft on every source, apply
// to every decoder. PGD and CW sources are the decoders, SSL sources the
// encoders. Writes `<out>/transfer.csv`.
TransferMatrix cmd_transfer(const ExperimentPlan& plan, const corpus::Corpus& data,
                            const RunOptions& opts);

// Short attack label: name plus budget, e.g. "pgd_linf@30", "cw".
std::string attack_label(const attacks::AttackConfig& config);

// Attack config with the plan seed applied.
attacks::AttackConfig seeded(attacks::AttackConfig config, std::uint64_t seed);

// Writes `<dir>/<utt>.wav` (x + delta) and `<dir>/<utt>.json` with the
// metadata and the exact float64 perturbation.
void save_adversarial(const attacks::AdversarialExample& adv, const corpus::Utterance& utt,
                      const std::string& model_id, const attacks::AttackConfig& config,
                      const std::filesystem::path& dir);

// Reads back a sidecar and recomputes the SNR of its perturbation against
// the clean utterance.
double sidecar_snr_db(const std::filesystem::path& json_path, const corpus::Utterance& utt);

}  // namespace advsr::harness

#endif  // ADVSR_HARNESS_H_
