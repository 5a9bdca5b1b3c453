#include "advsr/plan.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "advsr/error.h"
#include "json.hpp"

namespace advsr::harness {
namespace {

using nlohmann::json;

// Reads fields of one JSON object and rejects keys nobody asked for.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw PlanError(where() + " must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <typename T>
  std::optional<T> get(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return std::nullopt;
    try {
      return j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw PlanError(where(key) + ": " + e.what());
    }
  }

  template <typename T>
  T get_or(const std::string& key, T fallback) {
    auto v = get<T>(key);
    return v ? *v : fallback;
  }

  template <typename T>
  T require(const std::string& key) {
    auto v = get<T>(key);
    if (!v) throw PlanError(where(key) + " is required");
    return *v;
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw PlanError("unknown key " + where(key));
    }
  }

  std::string where(const std::string& key = {}) const {
    return key.empty() ? "'" + path_ + "'" : "'" + path_ + "." + key + "'";
  }
  const std::string& path() const { return path_; }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

signal::NormKind parse_norm(const std::string& s, const std::string& where) {
  if (s == "l2") return signal::NormKind::kL2;
  if (s == "linf") return signal::NormKind::kLinf;
  throw PlanError(where + ": norm must be \"l2\" or \"linf\", got \"" + s + "\"");
}

// An explicit eps replaces the default SNR budget.
void read_budget(Section& s, std::optional<double>& snr_db, std::optional<double>& eps) {
  eps = s.get<double>("eps");
  if (auto v = s.get<double>("snr_db")) {
    snr_db = v;
  } else if (eps) {
    snr_db.reset();
  }
}

attacks::AttackConfig parse_attack(const json& j, const std::string& path) {
  Section s(j, path);
  const auto type = s.require<std::string>("type");
  attacks::AttackConfig out;
  if (type == "pgd") {
    attacks::PgdConfig c;
    c.norm = parse_norm(s.get_or<std::string>("norm", "l2"), s.where("norm"));
    read_budget(s, c.snr_db, c.eps);
    c.steps = s.get_or("steps", c.steps);
    c.step_frac = s.get<double>("step_frac");
    c.rand_init = s.get_or("rand_init", c.rand_init);
    out = c;
  } else if (type == "cw") {
    attacks::CwConfig c;
    c.c = s.get_or("c", c.c);
    c.lr = s.get_or("lr", c.lr);
    c.steps = s.get_or("steps", c.steps);
    c.eps_init = s.get<double>("eps_init");
    c.decay = s.get_or("decay", c.decay);
    c.check_every = s.get_or("check_every", c.check_every);
    out = c;
  } else if (type == "genetic") {
    attacks::GeneticConfig c;
    c.pop = s.get_or("pop", c.pop);
    c.iters = s.get_or("iters", c.iters);
    read_budget(s, c.snr_db, c.eps);
    c.mut_std = s.get_or("mut_std", c.mut_std);
    c.elite = s.get_or("elite", c.elite);
    out = c;
  } else if (type == "kenansville") {
    attacks::KenansvilleConfig c;
    c.snr_db = s.get_or("snr_db", c.snr_db);
    c.tol_db = s.get_or("tol_db", c.tol_db);
    out = c;
  } else if (type == "ssl") {
    attacks::SslConfig c;
    read_budget(s, c.snr_db, c.eps);
    c.steps = s.get_or("steps", c.steps);
    c.step_frac = s.get<double>("step_frac");
    out = c;
  } else {
    throw PlanError(s.where("type") + ": unknown attack type \"" + type + "\"");
  }
  s.finish();
  try {
    attacks::validate(out);
  } catch (const ConfigError& e) {
    throw PlanError(s.where() + ": " + e.what());
  }
  return out;
}

ModelSpec parse_model(const json& j, const std::string& path) {
  Section s(j, path);
  ModelSpec m;
  m.id = s.require<std::string>("id");
  if (auto ckpt = s.get<std::string>("checkpoint")) m.checkpoint = *ckpt;
  if (auto arch = s.get<std::string>("arch")) {
    try {
      m.arch = model::parse_arch(*arch);
    } catch (const Error& e) {
      throw PlanError(s.where("arch") + ": " + e.what());
    }
  } else if (!m.checkpoint) {
    throw PlanError(s.where("arch") + " is required unless a checkpoint is given");
  }
  m.seed = s.get_or("seed", m.seed);
  m.steps = s.get_or("steps", m.steps);
  m.lr = s.get_or("lr", m.lr);
  m.batch = s.get_or("batch", m.batch);
  m.train_subset = s.get<std::size_t>("train_subset");
  m.encoder = s.get_or<std::string>("encoder", "");
  m.freeze = s.get_or("freeze", m.freeze);
  s.finish();
  return m;
}

model::FeatureConfig parse_features(const json& j) {
  Section s(j, "features");
  model::FeatureConfig f;
  f.frame_len = s.get_or("frame_len", f.frame_len);
  f.hop = s.get_or("hop", f.hop);
  f.n_bins = s.get_or("n_bins", f.n_bins);
  f.floor = s.get_or("floor", f.floor);
  s.finish();
  return f;
}

corpus::CorpusConfig parse_corpus(const json& j) {
  Section s(j, "corpus");
  corpus::CorpusConfig c;
  c.n_train = s.get_or("n_train", c.n_train);
  c.n_test = s.get_or("n_test", c.n_test);
  c.seed = s.get_or("seed", c.seed);
  c.min_chars = s.get_or("min_chars", c.min_chars);
  c.max_chars = s.get_or("max_chars", c.max_chars);
  c.sample_rate = s.get_or("sample_rate", c.sample_rate);
  c.symbol_dur = s.get_or("symbol_dur", c.symbol_dur);
  c.noise_std = s.get_or("noise_std", c.noise_std);
  s.finish();
  return c;
}

}  // namespace

const ModelSpec& ExperimentPlan::model(std::string_view id) const {
  for (const auto& m : models) {
    if (m.id == id) return m;
  }
  throw PlanError("no model with id '" + std::string(id) + "' in plan");
}

void validate(const ExperimentPlan& plan) {
  if (plan.models.empty()) throw PlanError("plan lists no models");
  if (plan.attacks.empty()) throw PlanError("plan lists no attacks");
  std::set<std::string> ids;
  for (const auto& m : plan.models) {
    if (m.id.empty()) throw PlanError("model id must not be empty");
    if (m.id.find_first_of("/\\.") != std::string::npos || m.id.find(',') != std::string::npos) {
      throw PlanError("model id '" + m.id + "' must not contain '/', '\\', '.' or ','");
    }
    if (!ids.insert(m.id).second) throw PlanError("duplicate model id '" + m.id + "'");
    if (!m.checkpoint && m.arch == model::Arch::kEncHead) {
      if (m.encoder.empty()) throw PlanError("model '" + m.id + "' needs an encoder");
      const auto& enc = plan.model(m.encoder);
      if (!enc.checkpoint && enc.arch != model::Arch::kEncoder) {
        throw PlanError("model '" + m.id + "': '" + m.encoder + "' is not an encoder");
      }
    }
  }
  // Encoders must be declared before the heads that use them.
  std::set<std::string> earlier;
  for (const auto& m : plan.models) {
    if (!m.encoder.empty() && !earlier.count(m.encoder)) {
      throw PlanError("model '" + m.id + "' refers to encoder '" + m.encoder +
                      "' before it is declared");
    }
    earlier.insert(m.id);
  }
  for (std::size_t i = 0; i < plan.snr_grid.size(); ++i) {
    if (!std::isfinite(plan.snr_grid[i])) throw PlanError("snr_grid values must be finite");
    if (i > 0 && !(plan.snr_grid[i] < plan.snr_grid[i - 1])) {
      throw PlanError("snr_grid must be strictly descending");
    }
  }
  if (plan.subset == 0) throw PlanError("subset must be positive");
  if (plan.eval_limit && *plan.eval_limit == 0) throw PlanError("eval_limit must be positive");
  for (const auto& t : plan.targets) {
    if (t.empty()) throw PlanError("targets must not be empty strings");
  }
  for (const auto& a : plan.attacks) {
    if (std::holds_alternative<attacks::CwConfig>(a) && plan.targets.empty()) {
      throw PlanError("a cw attack needs a non-empty targets list");
    }
  }
  try {
    plan.features.validate();
    corpus::validate(plan.corpus);
  } catch (const ConfigError& e) {
    throw PlanError(e.what());
  }
}

ExperimentPlan parse_plan(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw PlanError(std::string("plan is not valid JSON: ") + e.what());
  }
  Section s(j, "plan");
  ExperimentPlan plan;
  const json& models = s.raw("models");
  if (!models.is_array()) throw PlanError("'plan.models' must be a list");
  for (std::size_t i = 0; i < models.size(); ++i) {
    plan.models.push_back(parse_model(models[i], "models[" + std::to_string(i) + "]"));
  }
  if (!s.has("attacks")) throw PlanError("'plan.attacks' is required");
  const json& atk = s.raw("attacks");
  if (!atk.is_array()) throw PlanError("'plan.attacks' must be a list");
  for (std::size_t i = 0; i < atk.size(); ++i) {
    plan.attacks.push_back(parse_attack(atk[i], "attacks[" + std::to_string(i) + "]"));
  }
  plan.snr_grid = s.get_or("snr_grid", plan.snr_grid);
  plan.targets = s.get_or("targets", plan.targets);
  plan.subset = s.get_or("subset", plan.subset);
  plan.eval_limit = s.get<std::size_t>("eval_limit");
  plan.seed = s.get_or("seed", plan.seed);
  if (s.has("features")) plan.features = parse_features(s.raw("features"));
  if (s.has("corpus")) plan.corpus = parse_corpus(s.raw("corpus"));
  plan.corpus.frame_len = plan.features.frame_len;
  plan.corpus.hop = plan.features.hop;
  s.finish();
  validate(plan);
  return plan;
}

ExperimentPlan load_plan(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open plan file " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return parse_plan(os.str());
}

}  // namespace advsr::harness
