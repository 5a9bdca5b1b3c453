#include "advsr/harness.h"

#include <algorithm>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "advsr/checkpoint.h"
#include "advsr/error.h"
#include "advsr/report.h"
#include "advsr/train.h"
#include "json.hpp"

namespace advsr::harness {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void log(const RunOptions& opts, const std::string& line) {
  if (opts.log != nullptr) *opts.log << line << '\n' << std::flush;
}

void write_file(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f << bytes;
  if (!f) throw IoError("write failed: " + path.string());
}

std::string opt_number(const std::optional<double>& v) { return v ? format_number(*v) : ""; }

bool is_sweepable(const attacks::AttackConfig& a) {
  return std::holds_alternative<attacks::PgdConfig>(a) ||
         std::holds_alternative<attacks::KenansvilleConfig>(a);
}

attacks::AttackConfig with_snr(attacks::AttackConfig a, double snr) {
  if (auto* p = std::get_if<attacks::PgdConfig>(&a)) {
    p->snr_db = snr;
    p->eps.reset();
  } else if (auto* k = std::get_if<attacks::KenansvilleConfig>(&a)) {
    k->snr_db = snr;
  }
  return a;
}

std::string budget(const std::optional<double>& snr, const std::optional<double>& eps) {
  if (eps) return "@eps=" + format_number(*eps);
  return "@" + format_number(*snr);
}

std::vector<metrics::AttackRecord> apply_all(const std::vector<attacks::AdversarialExample>& advs,
                                             const std::vector<corpus::Utterance>& utts,
                                             const model::TrainedModel& target,
                                             const RunOptions& opts) {
  return parallel_map<metrics::AttackRecord>(
      utts.size(), opts.workers,
      [&](std::size_t i) { return attacks::transfer_apply(advs[i], utts[i], target); });
}

double clean_wer(const model::TrainedModel& m, const std::vector<corpus::Utterance>& utts,
                 const RunOptions& opts) {
  const auto recs = parallel_map<metrics::AttackRecord>(utts.size(), opts.workers, [&](std::size_t i) {
    attacks::AdversarialExample zero;
    zero.utterance_id = utts[i].id;
    zero.delta = signal::Perturbation::zeros(utts[i].waveform.size());
    zero.snr_db = std::numeric_limits<double>::infinity();
    return attacks::transfer_apply(zero, utts[i], m);
  });
  return metrics::summarize(recs).mean_wer;
}

fs::path adv_dir(const RunOptions& opts, const std::string& command, const std::string& model_id,
                 const std::string& label) {
  std::string safe = label;
  std::replace(safe.begin(), safe.end(), '@', '_');
  std::replace(safe.begin(), safe.end(), '=', '_');
  return opts.out_dir / "adv" / command / model_id / safe;
}

void maybe_save(const RunOptions& opts, const std::string& command, const std::string& model_id,
                const attacks::AttackConfig& cfg,
                const std::vector<attacks::AdversarialExample>& advs,
                const std::vector<corpus::Utterance>& utts) {
  if (!opts.save_adv) return;
  const fs::path dir = adv_dir(opts, command, model_id, attack_label(cfg));
  for (std::size_t i = 0; i < advs.size(); ++i) save_adversarial(advs[i], utts[i], model_id, cfg, dir);
}

const char* provenance_name(model::Provenance::Kind k) {
  switch (k) {
    case model::Provenance::Kind::kScratch: return "scratch";
    case model::Provenance::Kind::kPretrained: return "pretrained";
    case model::Provenance::Kind::kFinetuned: return "finetuned";
  }
  return "unknown";
}

std::span<const corpus::Utterance> training_slice(const ModelSpec& spec, const corpus::Corpus& data) {
  std::span<const corpus::Utterance> all(data.train);
  if (!spec.train_subset) return all;
  if (*spec.train_subset == 0 || *spec.train_subset > all.size()) {
    throw PlanError("model '" + spec.id + "': train_subset must be in [1, " +
                    std::to_string(all.size()) + "]");
  }
  return all.first(*spec.train_subset);
}

model::TrainedModel build(const ModelSpec& spec, const ExperimentPlan& plan,
                          const corpus::Corpus& data, const std::vector<model::TrainedModel>& done) {
  if (spec.checkpoint) {
    model::TrainedModel m = model::load_checkpoint(*spec.checkpoint);
    m.id = spec.id;
    return m;
  }
  const auto slice = training_slice(spec, data);
  model::TrainConfig tc;
  tc.lr = spec.lr;
  tc.steps = spec.steps;
  tc.seed = spec.seed;
  tc.batch = spec.batch;
  model::TrainedModel m;
  switch (spec.arch) {
    case model::Arch::kFfCtc:
    case model::Arch::kRnnCtc:
      m = model::train_supervised(spec.arch, slice, plan.features, tc);
      break;
    case model::Arch::kEncoder: {
      model::PretrainConfig pc;
      pc.lr = spec.lr;
      pc.steps = spec.steps;
      pc.seed = spec.seed;
      pc.batch = spec.batch;
      m = model::pretrain_contrastive(slice, plan.features, pc);
      break;
    }
    case model::Arch::kEncHead: {
      const auto enc = std::find_if(done.begin(), done.end(),
                                    [&](const auto& d) { return d.id == spec.encoder; });
      if (enc == done.end()) throw PlanError("encoder '" + spec.encoder + "' is not available");
      m = model::finetune_head(*enc, slice, tc, spec.freeze);
      break;
    }
  }
  m.id = spec.id;
  return m;
}

}  // namespace

const model::TrainedModel& Panel::get(std::string_view id) const {
  for (const auto& m : models) {
    if (m.id == id) return m;
  }
  throw PlanError("model '" + std::string(id) + "' is not in the panel");
}

std::vector<const model::TrainedModel*> Panel::decoders() const {
  std::vector<const model::TrainedModel*> out;
  for (const auto& m : models) {
    if (model::has_head(m.arch)) out.push_back(&m);
  }
  return out;
}

std::vector<const model::TrainedModel*> Panel::encoders() const {
  std::vector<const model::TrainedModel*> out;
  for (const auto& m : models) {
    if (m.arch == model::Arch::kEncoder) out.push_back(&m);
  }
  return out;
}

std::filesystem::path checkpoint_path(const RunOptions& opts, std::string_view model_id) {
  return opts.out_dir / "models" / (std::string(model_id) + ".ckpt");
}

std::string attack_label(const attacks::AttackConfig& config) {
  const std::string name = attacks::attack_name(config);
  if (const auto* p = std::get_if<attacks::PgdConfig>(&config)) return name + budget(p->snr_db, p->eps);
  if (const auto* g = std::get_if<attacks::GeneticConfig>(&config)) return name + budget(g->snr_db, g->eps);
  if (const auto* s = std::get_if<attacks::SslConfig>(&config)) return name + budget(s->snr_db, s->eps);
  if (const auto* k = std::get_if<attacks::KenansvilleConfig>(&config)) {
    return name + "@" + format_number(k->snr_db);
  }
  return name;
}

attacks::AttackConfig seeded(attacks::AttackConfig config, std::uint64_t seed) {
  std::visit(
      [seed](auto& c) {
        if constexpr (requires { c.seed; }) c.seed = seed;
      },
      config);
  return config;
}

corpus::Corpus cmd_gen_corpus(const corpus::CorpusConfig& config, const std::filesystem::path& dir) {
  corpus::Corpus c = corpus::generate_corpus(config);
  corpus::write_corpus(c, dir);
  return c;
}

Panel cmd_train(const ExperimentPlan& plan, const corpus::Corpus& data, const RunOptions& opts) {
  validate(plan);
  Panel panel;
  const auto test = evaluation_set(plan, data, false);
  json manifest = json::array();
  for (const auto& spec : plan.models) {
    log(opts, "train: " + spec.id);
    model::TrainedModel m;
    try {
      m = build(spec, plan, data, panel.models);
    } catch (const TrainingError& e) {
      throw TrainingError("model '" + spec.id + "': " + e.what(), e.step());
    }
    const fs::path path = checkpoint_path(opts, spec.id);
    fs::create_directories(path.parent_path());
    model::save_checkpoint(m, path);

    json entry = {{"id", m.id},
                  {"arch", std::string(model::arch_name(m.arch))},
                  {"checkpoint", path.filename().string()},
                  {"digest", model::param_digest(m.params)},
                  {"provenance",
                   {{"kind", provenance_name(m.provenance.kind)},
                    {"seed", m.provenance.seed},
                    {"pretrain_id", m.provenance.pretrain_id}}}};
    if (model::has_head(m.arch)) {
      const double wer = clean_wer(m, test, opts);
      entry["clean_test_wer"] = wer;
      log(opts, "train: " + spec.id + " clean test WER " + format_number(wer));
    } else {
      const double acc = model::frame_matching_accuracy(m, test, 8, plan.seed);
      entry["frame_matching_accuracy"] = acc;
      log(opts, "train: " + spec.id + " frame matching accuracy " + format_number(acc));
    }
    manifest.push_back(std::move(entry));
    panel.models.push_back(std::move(m));
  }
  write_file(opts.out_dir / "models" / "panel.json", json{{"models", manifest}}.dump(2) + "\n");
  return panel;
}

Panel load_panel(const ExperimentPlan& plan, const RunOptions& opts) {
  Panel panel;
  for (const auto& spec : plan.models) {
    const fs::path path = spec.checkpoint ? *spec.checkpoint : checkpoint_path(opts, spec.id);
    if (!fs::exists(path)) {
      throw PlanError("missing checkpoint for model '" + spec.id + "': " + path.string() +
                      " (run the train command first)");
    }
    model::TrainedModel m = model::load_checkpoint(path);
    m.id = spec.id;
    panel.models.push_back(std::move(m));
  }
  return panel;
}

std::vector<corpus::Utterance> evaluation_set(const ExperimentPlan& plan,
                                              const corpus::Corpus& data, bool limited) {
  std::vector<corpus::Utterance> out = data.test;
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  std::size_t cap = out.size();
  if (plan.eval_limit) cap = std::min(cap, *plan.eval_limit);
  if (limited) cap = std::min(cap, plan.subset);
  if (limited && plan.subset > data.test.size()) {
    throw PlanError("subset " + std::to_string(plan.subset) + " exceeds the " +
                    std::to_string(data.test.size()) + " test utterances");
  }
  out.erase(out.begin() + static_cast<std::ptrdiff_t>(cap), out.end());
  if (out.empty()) throw PlanError("evaluation set is empty");
  return out;
}

std::vector<SweepRow> cmd_sweep(const ExperimentPlan& plan, const corpus::Corpus& data,
                                const RunOptions& opts) {
  validate(plan);
  const Panel panel = load_panel(plan, opts);
  const auto utts = evaluation_set(plan, data, false);
  std::vector<attacks::AttackConfig> sweep;
  std::vector<std::string> names;
  for (const auto& a : plan.attacks) {
    if (!is_sweepable(a)) continue;
    const std::string name = attacks::attack_name(a);
    if (std::find(names.begin(), names.end(), name) != names.end()) {
      throw PlanError("sweep: attack '" + name + "' is listed twice");
    }
    names.push_back(name);
    sweep.push_back(seeded(a, plan.seed));
  }

  std::vector<SweepRow> rows;
  for (const auto* m : panel.decoders()) {
    for (const auto& base : sweep) {
      for (double snr : plan.snr_grid) {
        const attacks::AttackConfig cfg = with_snr(base, snr);
        const auto advs = parallel_map<attacks::AdversarialExample>(
            utts.size(), opts.workers, [&](std::size_t i) {
              if (const auto* p = std::get_if<attacks::PgdConfig>(&cfg)) {
                return attacks::pgd(*m, utts[i], *p);
              }
              return attacks::kenansville_attack(utts[i],
                                                 std::get<attacks::KenansvilleConfig>(cfg));
            });
        maybe_save(opts, "sweep", m->id, cfg, advs, utts);
        const auto recs = apply_all(advs, utts, *m, opts);
        const auto s = metrics::summarize(recs, m->id, attacks::attack_name(cfg));
        rows.push_back(SweepRow{m->id, s.attack_id, snr, s.mean_wer, s.mean_snr, s.n});
        log(opts, "sweep: " + m->id + " " + s.attack_id + " @" + format_number(snr) +
                      " dB: WER " + format_number(s.mean_wer) + ", SNR " +
                      format_number(s.mean_snr));
      }
    }
  }

  CsvTable table;
  table.header = {"model", "attack", "snr_db", "mean_wer", "mean_snr_db", "n"};
  for (const auto& r : rows) {
    table.rows.push_back({r.model, r.attack, format_number(r.snr_db), format_number(r.mean_wer),
                          format_number(r.mean_snr_db), std::to_string(r.n)});
  }
  const std::string csv = to_csv(table);
  write_file(opts.out_dir / "sweep.csv", csv);
  for (const auto& [attack, chart] : sweep_charts(parse_csv(csv))) {
    write_file(opts.out_dir / ("sweep_" + attack + ".svg"), render_svg(chart));
  }
  return rows;
}

std::vector<TargetedRow> cmd_targeted(const ExperimentPlan& plan, const corpus::Corpus& data,
                                      const RunOptions& opts) {
  validate(plan);
  const Panel panel = load_panel(plan, opts);
  const auto utts = evaluation_set(plan, data, true);
  std::optional<attacks::CwConfig> cw;
  std::optional<attacks::GeneticConfig> genetic;
  for (const auto& a : plan.attacks) {
    if (const auto* c = std::get_if<attacks::CwConfig>(&a); c && !cw) cw = *c;
    if (const auto* g = std::get_if<attacks::GeneticConfig>(&a); g && !genetic) {
      genetic = std::get<attacks::GeneticConfig>(seeded(*g, plan.seed));
    }
  }
  if (cw && plan.targets.empty()) throw PlanError("targeted: no targets configured");

  std::vector<TargetedRow> rows;
  CsvTable infeasible;
  infeasible.header = {"model", "utterance", "target"};
  for (const auto* m : panel.decoders()) {
    TargetedRow row;
    row.model = m->id;
    row.clean_wer = clean_wer(*m, utts, opts);
    if (cw) {
      using Outcome = std::optional<attacks::AdversarialExample>;
      const auto outcomes = parallel_map<Outcome>(utts.size(), opts.workers, [&](std::size_t i) {
        const std::string target = corpus::select_target(utts[i].transcript, plan.targets);
        try {
          return Outcome(attacks::cw_attack(*m, utts[i], target, *cw));
        } catch (const InfeasibleTargetError&) {
          return Outcome();
        }
      });
      std::vector<attacks::AdversarialExample> advs;
      std::vector<corpus::Utterance> feasible;
      for (std::size_t i = 0; i < utts.size(); ++i) {
        if (outcomes[i]) {
          advs.push_back(*outcomes[i]);
          feasible.push_back(utts[i]);
        } else {
          const std::string target = corpus::select_target(utts[i].transcript, plan.targets);
          infeasible.rows.push_back({m->id, utts[i].id, target});
          log(opts, "targeted: " + m->id + " " + utts[i].id + ": target '" + target +
                        "' infeasible, excluded");
          ++row.infeasible;
        }
      }
      maybe_save(opts, "targeted", m->id, *cw, advs, feasible);
      if (!advs.empty()) {
        const auto recs = apply_all(advs, feasible, *m, opts);
        const auto s = metrics::summarize(recs, m->id, "cw");
        row.cw_wer = s.mean_wer_vs_target;
        row.cw_snr_db = s.mean_snr;
        row.cw_accuracy = s.accuracy;
      }
    }
    if (genetic) {
      const auto advs = parallel_map<attacks::AdversarialExample>(
          utts.size(), opts.workers,
          [&](std::size_t i) { return attacks::genetic_attack(*m, utts[i], *genetic); });
      maybe_save(opts, "targeted", m->id, *genetic, advs, utts);
      row.genetic_wer = metrics::summarize(apply_all(advs, utts, *m, opts)).mean_wer;
    }
    log(opts, "targeted: " + m->id + " clean " + format_number(row.clean_wer) + ", cw acc " +
                  opt_number(row.cw_accuracy) + " at SNR " + opt_number(row.cw_snr_db) +
                  ", genetic " + opt_number(row.genetic_wer));
    rows.push_back(row);
  }

  CsvTable table;
  table.header = {"model", "clean_wer", "cw_wer", "cw_snr", "cw_accuracy", "genetic_wer"};
  for (const auto& r : rows) {
    table.rows.push_back({r.model, format_number(r.clean_wer), opt_number(r.cw_wer),
                          opt_number(r.cw_snr_db), opt_number(r.cw_accuracy),
                          opt_number(r.genetic_wer)});
  }
  write_file(opts.out_dir / "targeted.csv", to_csv(table));
  write_file(opts.out_dir / "targeted_infeasible.csv", to_csv(infeasible));
  return rows;
}

const TransferCell& TransferMatrix::at(std::string_view attack, std::string_view source,
                                       std::string_view target) const {
  for (const auto& c : cells) {
    if (c.attack == attack && c.source == source && c.target == target) return c;
  }
  throw PlanError("no transfer cell " + std::string(attack) + " " + std::string(source) + " -> " +
                  std::string(target));
}

TransferMatrix cmd_transfer(const ExperimentPlan& plan, const corpus::Corpus& data,
                            const RunOptions& opts) {
  validate(plan);
  const Panel panel = load_panel(plan, opts);
  const auto decoders = panel.decoders();
  if (panel.models.size() < 2) throw PlanError("transfer needs at least two models");
  const auto full = evaluation_set(plan, data, false);
  const auto limited = evaluation_set(plan, data, true);

  // Clean WER per target on each evaluation set: the zero-perturbation control.
  std::map<std::pair<std::string, bool>, double> control;
  const auto clean_for = [&](const model::TrainedModel& t, bool lim) {
    const auto key = std::make_pair(t.id, lim);
    if (!control.count(key)) control[key] = clean_wer(t, lim ? limited : full, opts);
    return control[key];
  };

  TransferMatrix matrix;
  for (const auto& raw : plan.attacks) {
    const attacks::AttackConfig cfg = seeded(raw, plan.seed);
    const bool is_pgd = std::holds_alternative<attacks::PgdConfig>(cfg);
    const bool is_cw = std::holds_alternative<attacks::CwConfig>(cfg);
    const bool is_ssl = std::holds_alternative<attacks::SslConfig>(cfg);
    if (!is_pgd && !is_cw && !is_ssl) continue;
    const std::string label = attack_label(cfg);
    const auto& utts = is_cw ? limited : full;
    const auto sources = is_ssl ? panel.encoders() : decoders;
    if (sources.empty()) {
      log(opts, "transfer: " + label + " has no source model, skipped");
      continue;
    }
    for (const auto* src : sources) {
      using Outcome = std::optional<attacks::AdversarialExample>;
      const auto outcomes = parallel_map<Outcome>(utts.size(), opts.workers, [&](std::size_t i) {
        if (const auto* p = std::get_if<attacks::PgdConfig>(&cfg)) {
          return Outcome(attacks::pgd(*src, utts[i], *p));
        }
        if (const auto* s = std::get_if<attacks::SslConfig>(&cfg)) {
          return Outcome(attacks::ssl_attack(*src, utts[i], *s));
        }
        const std::string target = corpus::select_target(utts[i].transcript, plan.targets);
        try {
          return Outcome(attacks::cw_attack(*src, utts[i], target, std::get<attacks::CwConfig>(cfg)));
        } catch (const InfeasibleTargetError&) {
          return Outcome();
        }
      });
      std::vector<attacks::AdversarialExample> advs;
      std::vector<corpus::Utterance> kept;
      for (std::size_t i = 0; i < utts.size(); ++i) {
        if (outcomes[i]) {
          advs.push_back(*outcomes[i]);
          kept.push_back(utts[i]);
        } else {
          log(opts, "transfer: " + label + " " + src->id + " " + utts[i].id +
                        ": infeasible target, excluded");
        }
      }
      if (advs.empty()) continue;
      maybe_save(opts, "transfer", src->id, cfg, advs, kept);
      for (const auto* dst : decoders) {
        const auto recs = apply_all(advs, kept, *dst, opts);
        TransferCell cell{label, src->id, dst->id, metrics::summarize(recs, dst->id, label),
                          kept.size() == utts.size() ? clean_for(*dst, is_cw)
                                                     : clean_wer(*dst, kept, opts)};
        log(opts, "transfer: " + label + " " + src->id + " -> " + dst->id + ": WER " +
                      format_number(cell.summary.mean_wer) + " (clean " +
                      format_number(cell.clean_wer) + ")");
        matrix.cells.push_back(std::move(cell));
      }
    }
  }

  CsvTable table;
  table.header = {"attack",      "source",   "target",    "mean_wer", "mean_snr_db",
                  "mean_wer_vs_target", "accuracy", "clean_wer", "n"};
  for (const auto& c : matrix.cells) {
    table.rows.push_back({c.attack, c.source, c.target, format_number(c.summary.mean_wer),
                          format_number(c.summary.mean_snr), opt_number(c.summary.mean_wer_vs_target),
                          opt_number(c.summary.accuracy), format_number(c.clean_wer),
                          std::to_string(c.summary.n)});
  }
  write_file(opts.out_dir / "transfer.csv", to_csv(table));
  return matrix;
}

void save_adversarial(const attacks::AdversarialExample& adv, const corpus::Utterance& utt,
                      const std::string& model_id, const attacks::AttackConfig& config,
                      const std::filesystem::path& dir) {
  fs::create_directories(dir);
  signal::save_wav(signal::apply(utt.waveform, adv.delta), dir / (utt.id + ".wav"));
  const auto d = adv.delta.values();
  json meta = {{"utterance_id", adv.utterance_id},
               {"model", model_id},
               {"attack", adv.attack},
               {"config", attacks::config_string(config)},
               {"config_digest", adv.config_digest},
               {"eps", adv.eps},
               {"delta", std::vector<double>(d.begin(), d.end())}};
  // JSON has no infinity; an all-zero perturbation is recorded as null.
  meta["snr_db"] = std::isfinite(adv.snr_db) ? json(adv.snr_db) : json(nullptr);
  meta["target"] = adv.target ? json(*adv.target) : json(nullptr);
  meta["succeeded"] = adv.succeeded ? json(*adv.succeeded) : json(nullptr);
  meta["saturated"] = adv.saturated;
  meta["error"] = adv.error ? json(*adv.error) : json(nullptr);
  write_file(dir / (utt.id + ".json"), meta.dump(1) + "\n");
}

double sidecar_snr_db(const std::filesystem::path& json_path, const corpus::Utterance& utt) {
  std::ifstream in(json_path);
  if (!in) throw IoError("cannot open " + json_path.string());
  json meta;
  try {
    meta = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(json_path.string() + ": " + e.what());
  }
  const auto delta = meta.at("delta").get<std::vector<double>>();
  return signal::snr_db(utt.waveform, signal::Perturbation(delta));
}

}  // namespace advsr::harness
