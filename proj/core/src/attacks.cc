#include "advsr/attacks.h"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "advsr/ctc.h"
#include "advsr/dsp.h"
#include "advsr/error.h"
#include "advsr/grad.h"

namespace advsr::attacks {
namespace {

using grad::Shape;
using grad::Tape;
using grad::Tensor;

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : "none"; }

std::string hex_fnv(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

void check_budget(const std::optional<double>& eps, const std::optional<double>& snr_db) {
  if (eps) {
    if (!(std::isfinite(*eps) && *eps > 0.0)) throw ConfigError("eps must be positive and finite");
  } else if (!snr_db || !std::isfinite(*snr_db)) {
    throw ConfigError("either eps or a finite snr_db is required");
  }
}

struct Validator {
  void operator()(const PgdConfig& c) const {
    check_budget(c.eps, c.snr_db);
    if (c.steps < 0) throw ConfigError("pgd steps must be non-negative");
    if (c.step_frac && !(*c.step_frac > 0.0)) throw ConfigError("step_frac must be positive");
  }
  void operator()(const CwConfig& c) const {
    if (!(c.c > 0.0)) throw ConfigError("cw c must be positive");
    if (!(c.lr > 0.0)) throw ConfigError("cw lr must be positive");
    if (c.steps < 0) throw ConfigError("cw steps must be non-negative");
    if (!(c.decay > 0.0 && c.decay < 1.0)) throw ConfigError("cw decay must lie in (0, 1)");
    if (c.check_every <= 0) throw ConfigError("cw check_every must be positive");
    if (c.eps_init && !(*c.eps_init > 0.0)) throw ConfigError("cw eps_init must be positive");
  }
  void operator()(const GeneticConfig& c) const {
    check_budget(c.eps, c.snr_db);
    if (c.pop < 2) throw ConfigError("genetic pop must be at least 2");
    if (c.iters < 0) throw ConfigError("genetic iters must be non-negative");
    if (c.elite > c.pop) throw ConfigError("genetic elite exceeds pop");
    if (!(c.mut_std >= 0.0)) throw ConfigError("genetic mut_std must be non-negative");
  }
  void operator()(const KenansvilleConfig& c) const {
    if (!std::isfinite(c.snr_db)) throw ConfigError("kenansville snr_db must be finite");
    if (!(c.tol_db > 0.0)) throw ConfigError("kenansville tol_db must be positive");
  }
  void operator()(const SslConfig& c) const {
    check_budget(c.eps, c.snr_db);
    if (c.steps < 0) throw ConfigError("ssl steps must be non-negative");
    if (c.step_frac && !(*c.step_frac > 0.0)) throw ConfigError("step_frac must be positive");
  }
};

struct Namer {
  std::string operator()(const PgdConfig& c) const {
    return c.norm == NormKind::kL2 ? "pgd_l2" : "pgd_linf";
  }
  std::string operator()(const CwConfig&) const { return "cw"; }
  std::string operator()(const GeneticConfig&) const { return "genetic"; }
  std::string operator()(const KenansvilleConfig&) const { return "kenansville"; }
  std::string operator()(const SslConfig&) const { return "ssl"; }
};

struct Describer {
  std::string operator()(const PgdConfig& c) const {
    return "pgd;norm=" + std::string(c.norm == NormKind::kL2 ? "l2" : "linf") +
           ";snr_db=" + fmt(c.snr_db) + ";eps=" + fmt(c.eps) +
           ";steps=" + std::to_string(c.steps) + ";step_frac=" + fmt(c.step_frac) +
           ";rand_init=" + (c.rand_init ? "1" : "0") + ";seed=" + std::to_string(c.seed);
  }
  std::string operator()(const CwConfig& c) const {
    return "cw;c=" + fmt(c.c) + ";lr=" + fmt(c.lr) + ";steps=" + std::to_string(c.steps) +
           ";eps_init=" + fmt(c.eps_init) + ";decay=" + fmt(c.decay) +
           ";check_every=" + std::to_string(c.check_every);
  }
  std::string operator()(const GeneticConfig& c) const {
    return "genetic;pop=" + std::to_string(c.pop) + ";iters=" + std::to_string(c.iters) +
           ";eps=" + fmt(c.eps) + ";snr_db=" + fmt(c.snr_db) + ";eps_rule=linf_typical_l2" +
           ";mut_std=" + fmt(c.mut_std) + ";elite=" + std::to_string(c.elite) +
           ";seed=" + std::to_string(c.seed);
  }
  std::string operator()(const KenansvilleConfig& c) const {
    return "kenansville;snr_db=" + fmt(c.snr_db) + ";tol_db=" + fmt(c.tol_db);
  }
  std::string operator()(const SslConfig& c) const {
    return "ssl;snr_db=" + fmt(c.snr_db) + ";eps=" + fmt(c.eps) +
           ";steps=" + std::to_string(c.steps) + ";step_frac=" + fmt(c.step_frac) +
           ";seed=" + std::to_string(c.seed);
  }
};

AdversarialExample make_example(const corpus::Utterance& utt, const AttackConfig& cfg) {
  AdversarialExample adv;
  adv.utterance_id = utt.id;
  adv.attack = attack_name(cfg);
  adv.config_digest = config_digest(cfg);
  adv.delta = signal::Perturbation::zeros(utt.waveform.size());
  return adv;
}

void finish(AdversarialExample& adv, const corpus::Utterance& utt, std::vector<double> delta) {
  adv.delta = signal::Perturbation(std::move(delta));
  adv.snr_db = signal::snr_db(utt.waveform, adv.delta);
}

std::vector<double> perturbed(std::span<const double> x, std::span<const double> delta) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + delta[i];
  return out;
}

// CTC loss of `label` on x + delta and its gradient with respect to delta.
double ctc_value_and_grad(const model::TrainedModel& m, std::span<const double> x,
                          std::span<const double> delta, std::span<const int> label,
                          std::vector<double>& g) {
  Tape tape;
  model::Binding p(tape, m);
  Tensor d = tape.leaf(Shape{1, delta.size()}, {delta.begin(), delta.end()}, true);
  Tensor xs = tape.constant_view(Shape{1, x.size()}, x);
  Tensor loss = model::ctc_loss(model::waveform_logprobs(p, grad::add(xs, d)), label,
                                model::Vocabulary::blank_id());
  tape.backward(loss);
  g.assign(d.grad().begin(), d.grad().end());
  return loss.item();
}

double ctc_value(const model::TrainedModel& m, std::span<const double> x,
                 std::span<const double> delta, std::span<const int> label) {
  const std::vector<double> xd = perturbed(x, delta);
  Tape tape;
  model::Binding p(tape, m);
  Tensor w = tape.constant_view(Shape{1, xd.size()}, xd);
  return model::ctc_loss(model::waveform_logprobs(p, w), label, model::Vocabulary::blank_id())
      .item();
}

std::string decode(const model::TrainedModel& m, const signal::Waveform& x,
                   std::span<const double> delta) {
  return model::transcribe(m, signal::Waveform(perturbed(x.samples(), delta), x.sample_rate()));
}

// |c(x + delta) - c0|^2 and its gradient.
double repr_value_and_grad(const model::TrainedModel& enc, std::span<const double> x,
                           std::span<const double> delta, const grad::Matrix& c0,
                           std::vector<double>* g) {
  Tape tape;
  model::Binding p(tape, enc);
  Tensor d = tape.leaf(Shape{1, delta.size()}, {delta.begin(), delta.end()}, g != nullptr);
  Tensor xs = tape.constant_view(Shape{1, x.size()}, x);
  Tensor c = model::encoder_representation(p, grad::add(xs, d));
  Tensor ref = tape.constant_view(c0.shape, c0.data);
  Tensor diff = grad::sub(c, ref);
  Tensor loss = grad::sum(grad::mul(diff, diff));
  if (g != nullptr) {
    tape.backward(loss);
    g->assign(d.grad().begin(), d.grad().end());
  }
  return loss.item();
}

double step_size(const std::optional<double>& step_frac, int steps, double eps) {
  const double frac = step_frac ? *step_frac : 2.5 / std::max(steps, 1);
  return frac * eps;
}

}  // namespace

std::string attack_name(const AttackConfig& config) { return std::visit(Namer{}, config); }

std::string config_string(const AttackConfig& config) { return std::visit(Describer{}, config); }

std::string config_digest(const AttackConfig& config) { return hex_fnv(config_string(config)); }

void validate(const AttackConfig& config) { std::visit(Validator{}, config); }

void project_inplace(std::span<double> delta, double eps, NormKind kind) {
  if (!(eps > 0.0)) throw DomainError("projection radius must be positive");
  if (kind == NormKind::kLinf) {
    for (double& v : delta) v = std::clamp(v, -eps, eps);
    return;
  }
  double ss = 0.0;
  for (double v : delta) ss += v * v;
  const double n = std::sqrt(ss);
  if (n <= eps) return;
  const double s = eps / n;
  for (double& v : delta) v *= s;
  // Rounding in the scale can leave the norm a hair above eps.
  double ss2 = 0.0;
  for (double v : delta) ss2 += v * v;
  if (std::sqrt(ss2) > eps) {
    const double t = std::nextafter(eps / std::sqrt(ss2), 0.0);
    for (double& v : delta) v *= t;
  }
}

std::vector<double> project(std::span<const double> delta, double eps, NormKind kind) {
  std::vector<double> out(delta.begin(), delta.end());
  project_inplace(out, eps, kind);
  return out;
}

void ascent_step(std::span<double> delta, std::span<const double> g, double alpha, double eps,
                 NormKind kind) {
  if (delta.size() != g.size()) throw ShapeError("gradient length mismatch");
  if (kind == NormKind::kLinf) {
    for (std::size_t i = 0; i < delta.size(); ++i) {
      const double s = g[i] > 0.0 ? 1.0 : (g[i] < 0.0 ? -1.0 : 0.0);
      delta[i] += alpha * s;
    }
  } else {
    double ss = 0.0;
    for (double v : g) ss += v * v;
    const double n = std::sqrt(ss);
    if (n > 0.0) {
      for (std::size_t i = 0; i < delta.size(); ++i) delta[i] += alpha * g[i] / n;
    }
  }
  project_inplace(delta, eps, kind);
}

void clip_to_range(std::span<const double> x, std::span<double> delta) {
  if (x.size() != delta.size()) throw ShapeError("perturbation length mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) {
    delta[i] = std::clamp(delta[i], -1.0 - x[i], 1.0 - x[i]);
  }
}

std::uint64_t utterance_seed(std::uint64_t seed, std::string_view utterance_id) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : utterance_id) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

double resolve_eps(std::span<const double> x, std::optional<double> eps,
                   std::optional<double> snr_db, NormKind kind) {
  check_budget(eps, snr_db);
  if (eps) return *eps;
  const double l2 = signal::eps_from_snr(x, *snr_db);
  return kind == NormKind::kL2 ? l2 : l2 / std::sqrt(static_cast<double>(x.size()));
}

AdversarialExample pgd(const model::TrainedModel& m, const corpus::Utterance& utt,
                       const PgdConfig& config) {
  validate(config);
  AdversarialExample adv = make_example(utt, config);
  const auto x = utt.waveform.samples();
  const std::vector<int> label = m.vocab.encode(utt.transcript);
  const double eps = resolve_eps(x, config.eps, config.snr_db, config.norm);
  const double alpha = step_size(config.step_frac, config.steps, eps);
  adv.eps = eps;

  std::vector<double> delta(x.size(), 0.0);
  if (config.rand_init) {
    std::mt19937_64 rng(utterance_seed(config.seed, utt.id));
    std::uniform_real_distribution<double> u(-eps, eps);
    for (double& v : delta) v = u(rng);
    project_inplace(delta, eps, config.norm);
    clip_to_range(x, delta);
  }
  std::vector<double> g;
  try {
    for (int step = 0; step < config.steps; ++step) {
      adv.trace.push_back(ctc_value_and_grad(m, x, delta, label, g));
      std::vector<double> next = delta;
      ascent_step(next, g, alpha, eps, config.norm);
      clip_to_range(x, next);
      delta = std::move(next);
    }
    adv.trace.push_back(ctc_value(m, x, delta, label));
  } catch (const NumericError& e) {
    adv.error = e.what();
  }
  finish(adv, utt, std::move(delta));
  return adv;
}

AdversarialExample cw_attack(const model::TrainedModel& m, const corpus::Utterance& utt,
                             const std::string& target, const CwConfig& config) {
  validate(config);
  AdversarialExample adv = make_example(utt, config);
  adv.target = target;
  const auto x = utt.waveform.samples();
  const std::vector<int> label = m.vocab.encode(target);
  const std::size_t frames = model::num_frames(x.size(), m.feat);
  if (!model::ctc_feasible(frames, label)) {
    throw InfeasibleTargetError("target '" + target + "' needs " +
                                std::to_string(model::ctc_min_frames(label)) + " frames, " +
                                utt.id + " has " + std::to_string(frames));
  }
  double eps = config.eps_init ? *config.eps_init : signal::eps_from_snr(utt.waveform, 10.0);
  adv.eps = eps;

  std::vector<double> delta(x.size(), 0.0);
  std::optional<std::vector<double>> best;
  double best_l2 = std::numeric_limits<double>::infinity();
  double best_eps = eps;  // bound in force when `best` was found
  grad::AdamState state;
  const grad::AdamConfig adam{config.lr, 0.9, 0.999, 1e-8};
  std::vector<double> g;

  try {
    for (int step = 0;; ++step) {
      if (step % config.check_every == 0 || step == config.steps) {
        if (metrics::attack_success(decode(m, utt.waveform, delta), target)) {
          const double l2 = signal::norm(delta, NormKind::kL2);
          if (!best || l2 < best_l2) {
            best = delta;
            best_l2 = l2;
            best_eps = eps;
          }
          const double linf = signal::norm(*best, NormKind::kLinf);
          if (linf == 0.0) break;
          eps = config.decay * linf;
          project_inplace(delta, eps, NormKind::kLinf);
        }
      }
      if (step >= config.steps) break;
      const double ctc = ctc_value_and_grad(m, x, delta, label, g);
      double ss = 0.0;
      for (std::size_t i = 0; i < delta.size(); ++i) {
        ss += delta[i] * delta[i];
        g[i] = config.c * g[i] + 2.0 * delta[i];
      }
      adv.trace.push_back(config.c * ctc + ss);
      std::span<double> params[] = {delta};
      std::span<const double> grads[] = {g};
      grad::adam_step(params, grads, state, adam);
      project_inplace(delta, eps, NormKind::kLinf);
      clip_to_range(x, delta);
    }
  } catch (const NumericError& e) {
    adv.error = e.what();
  }
  adv.eps = best ? best_eps : eps;
  if (best) {
    adv.succeeded = true;
    finish(adv, utt, std::move(*best));
  } else {
    adv.succeeded = false;
    finish(adv, utt, std::move(delta));
  }
  return adv;
}

AdversarialExample genetic_attack(const model::TrainedModel& m, const corpus::Utterance& utt,
                                  const GeneticConfig& config) {
  validate(config);
  AdversarialExample adv = make_example(utt, config);
  const auto x = utt.waveform.samples();
  const std::size_t n = x.size();
  const std::vector<int> label = m.vocab.encode(utt.transcript);
  double eps = 0.0;
  if (config.eps) {
    eps = *config.eps;
  } else {
    eps = std::sqrt(3.0) * signal::eps_from_snr(x, *config.snr_db) /
          std::sqrt(static_cast<double>(n));
  }
  adv.eps = eps;

  std::mt19937_64 rng(utterance_seed(config.seed, utt.id));
  std::uniform_real_distribution<double> init(-eps, eps);
  std::normal_distribution<double> mutation(0.0, config.mut_std * eps);
  std::bernoulli_distribution coin(0.5);

  std::vector<std::vector<double>> pop(config.pop, std::vector<double>(n));
  std::vector<double> fitness(config.pop);
  for (std::size_t i = 0; i < config.pop; ++i) {
    for (double& v : pop[i]) v = init(rng);
    clip_to_range(x, pop[i]);
    fitness[i] = ctc_value(m, x, pop[i], label);
  }

  std::vector<std::size_t> order(config.pop);
  const auto rank = [&] {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return fitness[a] > fitness[b]; });
  };
  for (int gen = 0;; ++gen) {
    rank();
    adv.trace.push_back(fitness[order[0]]);
    if (gen >= config.iters) break;

    std::vector<std::vector<double>> next;
    std::vector<double> next_fitness;
    next.reserve(config.pop);
    for (std::size_t e = 0; e < config.elite; ++e) {
      next.push_back(pop[order[e]]);
      next_fitness.push_back(fitness[order[e]]);
    }
    // Fitness-proportional selection; losses are non-negative.
    std::discrete_distribution<std::size_t> parent(fitness.begin(), fitness.end());
    while (next.size() < config.pop) {
      const auto& a = pop[parent(rng)];
      const auto& b = pop[parent(rng)];
      std::vector<double> child(n);
      for (std::size_t i = 0; i < n; ++i) child[i] = (coin(rng) ? a[i] : b[i]) + mutation(rng);
      project_inplace(child, eps, NormKind::kLinf);
      clip_to_range(x, child);
      next_fitness.push_back(ctc_value(m, x, child, label));
      next.push_back(std::move(child));
    }
    pop = std::move(next);
    fitness = std::move(next_fitness);
  }
  finish(adv, utt, std::move(pop[order[0]]));
  return adv;
}

AdversarialExample kenansville_attack(const corpus::Utterance& utt,
                                      const KenansvilleConfig& config) {
  validate(config);
  AdversarialExample adv = make_example(utt, config);
  const auto x = utt.waveform.samples();
  const dsp::Spectrum spec = dsp::rfft(x);
  const dsp::PsdProfile prof = dsp::psd(spec);
  const std::size_t bins = prof.power.size();

  std::vector<std::size_t> order(bins);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return prof.power[a] < prof.power[b];
  });
  // cum[k]: power removed by zeroing the first k bins of `order`.
  std::vector<double> cum(bins + 1, 0.0);
  for (std::size_t k = 0; k < bins; ++k) cum[k + 1] = cum[k] + prof.power[order[k]];
  const double total = cum[bins];
  const auto snr_of = [&](std::size_t k) {
    return cum[k] > 0.0 ? 10.0 * std::log10(total / cum[k])
                        : std::numeric_limits<double>::infinity();
  };

  // Largest k <= bins - 1 with snr_of(k) >= target; snr_of is non-increasing.
  const std::size_t max_k = bins - 1;
  std::size_t k = 0;
  if (snr_of(max_k) >= config.snr_db) {
    k = max_k;
    adv.saturated = snr_of(max_k) > config.snr_db + config.tol_db;
  } else {
    std::size_t lo = 0, hi = max_k;  // snr_of(lo) >= target > snr_of(hi)
    while (hi - lo > 1) {
      const std::size_t mid = lo + (hi - lo) / 2;
      if (snr_of(mid) >= config.snr_db) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    k = lo;
  }

  // delta is minus the inverse transform of the removed bins alone, so an
  // empty removal set gives an exact zero.
  adv.removed_bins.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  std::vector<double> delta(x.size(), 0.0);
  if (!adv.removed_bins.empty()) {
    dsp::Spectrum removed = spec;
    std::fill(removed.bins.begin(), removed.bins.end(), std::complex<double>{});
    for (std::size_t b : adv.removed_bins) removed.bins[b] = spec.bins[b];
    const std::vector<double> r = dsp::irfft(removed);
    for (std::size_t i = 0; i < x.size(); ++i) delta[i] = -r[i];
  }
  clip_to_range(x, delta);
  finish(adv, utt, std::move(delta));
  return adv;
}

AdversarialExample ssl_attack(const model::TrainedModel& encoder, const corpus::Utterance& utt,
                              const SslConfig& config) {
  validate(config);
  if (!model::has_encoder(encoder.arch)) {
    throw ContractError("ssl attack needs a model with an encoder, got " +
                        std::string(model::arch_name(encoder.arch)));
  }
  AdversarialExample adv = make_example(utt, config);
  const auto x = utt.waveform.samples();
  const double eps = resolve_eps(x, config.eps, config.snr_db, NormKind::kLinf);
  const double alpha = step_size(config.step_frac, config.steps, eps);
  adv.eps = eps;
  const grad::Matrix c0 = model::encoder_representation(encoder, utt.waveform);

  // The objective has a stationary point at delta = 0, so a zero gradient is
  // replaced by a random sign direction from the per-utterance stream.
  std::mt19937_64 rng(utterance_seed(config.seed, utt.id));
  std::bernoulli_distribution coin(0.5);
  std::vector<double> delta(x.size(), 0.0);
  std::vector<double> g;
  try {
    for (int step = 0; step < config.steps; ++step) {
      adv.trace.push_back(repr_value_and_grad(encoder, x, delta, c0, &g));
      if (std::all_of(g.begin(), g.end(), [](double v) { return v == 0.0; })) {
        for (double& v : g) v = coin(rng) ? 1.0 : -1.0;
      }
      std::vector<double> next = delta;
      ascent_step(next, g, alpha, eps, NormKind::kLinf);
      clip_to_range(x, next);
      delta = std::move(next);
    }
    adv.trace.push_back(repr_value_and_grad(encoder, x, delta, c0, nullptr));
  } catch (const NumericError& e) {
    adv.error = e.what();
  }
  finish(adv, utt, std::move(delta));
  return adv;
}

metrics::AttackRecord transfer_apply(const AdversarialExample& adv,
                                     const corpus::Utterance& source_utt,
                                     const model::TrainedModel& target_model) {
  if (adv.delta.size() != source_utt.waveform.size()) {
    throw ContractError("perturbation length " + std::to_string(adv.delta.size()) +
                        " does not match utterance " + source_utt.id);
  }
  metrics::AttackRecord rec;
  rec.utterance_id = source_utt.id;
  rec.decoded = model::transcribe(target_model, signal::apply(source_utt.waveform, adv.delta));
  rec.wer_vs_label = metrics::wer(rec.decoded, source_utt.transcript);
  if (adv.target) {
    rec.wer_vs_target = metrics::wer(rec.decoded, *adv.target);
    rec.success = metrics::attack_success(rec.decoded, *adv.target);
  }
  rec.snr_db = adv.snr_db;
  return rec;
}

double representation_distance(const model::TrainedModel& encoder, const signal::Waveform& x,
                                std::span<const double> delta) {
  if (!model::has_encoder(encoder.arch)) throw ContractError("model has no encoder");
  if (delta.size() != x.size()) throw ShapeError("perturbation length mismatch");
  const grad::Matrix c0 = model::encoder_representation(encoder, x);
  return repr_value_and_grad(encoder, x.samples(), delta, c0, nullptr);
}

double label_loss(const model::TrainedModel& m, const corpus::Utterance& utt,
                  std::span<const double> delta) {
  if (delta.size() != utt.waveform.size()) throw ShapeError("perturbation length mismatch");
  return ctc_value(m, utt.waveform.samples(), delta, m.vocab.encode(utt.transcript));
}

}  // namespace advsr::attacks
