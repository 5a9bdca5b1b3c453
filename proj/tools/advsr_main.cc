// advsr: command-line driver for corpus generation, panel training, attack
// sweeps, targeted runs, transfer matrices and chart rendering.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "advsr/corpus.h"
#include "advsr/error.h"
#include "advsr/harness.h"
#include "advsr/plan.h"
#include "advsr/report.h"

namespace {

namespace fs = std::filesystem;
using namespace advsr;

struct Common {
  std::string plan;
  std::string corpus;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  std::size_t workers = 1;
  bool save_adv = false;
};

void add_common(CLI::App* cmd, Common& c, bool attacks) {
  cmd->add_option("--plan", c.plan, "Experiment plan (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--corpus", c.corpus, "Corpus directory written by gen-corpus")
      ->required()
      ->check(CLI::ExistingDirectory);
  cmd->add_option("--out", c.out, "Output directory")->capture_default_str();
  cmd->add_option("--seed", c.seed, "Override the plan seed");
  cmd->add_option("--workers", c.workers, "Worker threads")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  if (attacks) cmd->add_flag("--save-adv", c.save_adv, "Write adversarial WAVs and sidecars");
}

harness::ExperimentPlan plan_of(const Common& c) {
  harness::ExperimentPlan plan = harness::load_plan(c.plan);
  if (c.seed) plan.seed = *c.seed;
  return plan;
}

harness::RunOptions options_of(const Common& c) {
  harness::RunOptions o;
  o.out_dir = c.out;
  o.workers = c.workers;
  o.save_adv = c.save_adv;
  o.log = &std::cerr;
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial robustness benchmark for small speech recognisers"};
  app.require_subcommand(1);

  std::string gen_out = "corpus";
  std::string gen_plan;
  std::optional<std::uint64_t> gen_seed;
  auto* gen = app.add_subcommand("gen-corpus", "Generate the synthetic corpus");
  gen->add_option("--out", gen_out, "Corpus directory")->capture_default_str();
  gen->add_option("--plan", gen_plan, "Take corpus settings from a plan")
      ->check(CLI::ExistingFile);
  gen->add_option("--seed", gen_seed, "Corpus seed");

  Common train_c, sweep_c, targeted_c, transfer_c;
  auto* train = app.add_subcommand("train", "Train the model panel");
  add_common(train, train_c, false);
  auto* sweep = app.add_subcommand("sweep", "WER versus SNR for PGD and Kenansville");
  add_common(sweep, sweep_c, true);
  auto* targeted = app.add_subcommand("targeted", "CW and Genetic table");
  add_common(targeted, targeted_c, true);
  auto* transfer = app.add_subcommand("transfer", "Transfer matrix for PGD, CW and SSL");
  add_common(transfer, transfer_c, true);

  std::vector<std::string> report_csvs;
  std::string report_out = "out";
  auto* report = app.add_subcommand("report", "Render sweep CSVs as SVG charts");
  report->add_option("csv", report_csvs, "Sweep CSV files")->required()->check(CLI::ExistingFile);
  report->add_option("--out", report_out, "Output directory")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      corpus::CorpusConfig cfg;
      if (!gen_plan.empty()) cfg = harness::load_plan(gen_plan).corpus;
      if (gen_seed) cfg.seed = *gen_seed;
      const auto c = harness::cmd_gen_corpus(cfg, gen_out);
      std::cerr << "gen-corpus: " << c.train.size() << " train, " << c.test.size()
                << " test utterances in " << gen_out << "\n";
    } else if (*train) {
      harness::cmd_train(plan_of(train_c), corpus::load_corpus(train_c.corpus),
                         options_of(train_c));
    } else if (*sweep) {
      harness::cmd_sweep(plan_of(sweep_c), corpus::load_corpus(sweep_c.corpus),
                         options_of(sweep_c));
    } else if (*targeted) {
      harness::cmd_targeted(plan_of(targeted_c), corpus::load_corpus(targeted_c.corpus),
                            options_of(targeted_c));
    } else if (*transfer) {
      harness::cmd_transfer(plan_of(transfer_c), corpus::load_corpus(transfer_c.corpus),
                            options_of(transfer_c));
    } else if (*report) {
      std::vector<fs::path> paths(report_csvs.begin(), report_csvs.end());
      for (const auto& p : harness::cmd_report(paths, report_out)) {
        std::cout << p.string() << "\n";
      }
    }
  } catch (const ParseError& e) {
    std::cerr << "advsr: parse error: " << e.what() << "\n";
    return 2;
  } catch (const PlanError& e) {
    std::cerr << "advsr: plan error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "advsr: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
