#ifndef ADVSR_ATTACKS_H_
#define ADVSR_ATTACKS_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "advsr/corpus.h"
#include "advsr/metrics.h"
#include "advsr/model.h"
#include "advsr/signal.h"

namespace advsr::attacks {

using signal::NormKind;

// Perturbation budgets are given either as an absolute radius `eps` or as an
// SNR in dB, converted per utterance. For L2 balls the radius is
// eps_from_snr(x, snr). For Linf balls it is that radius divided by sqrt(N),
// so a perturbation saturating every coordinate still meets the SNR.

// Untargeted projected gradient ascent on the CTC loss of the true label.
struct PgdConfig {
  NormKind norm = NormKind::kL2;
  std::optional<double> snr_db = 25.0;
  std::optional<double> eps;  // overrides snr_db
  int steps = 100;
  std::optional<double> step_frac;  // alpha = step_frac * eps; default 2.5 / steps
  bool rand_init = false;
  std::uint64_t seed = 0;
};

// Targeted attack: Adam on c * CTC(x + delta, target) + |delta|_2^2 under an
// Linf bound that shrinks each time the target is reached.
struct CwConfig {
  double c = 1.0;
  double lr = 0.01;
  int steps = 5000;
  std::optional<double> eps_init;  // default eps_from_snr(x, 10 dB)
  double decay = 0.8;
  int check_every = 50;
};

// Black-box untargeted search; fitness is the CTC loss of the true label.
struct GeneticConfig {
  std::size_t pop = 50;
  int iters = 2000;
  std::optional<double> eps;
  // Uniform noise in the Linf ball has expected L2 norm eps * sqrt(N / 3);
  // the radius is chosen so that this matches the requested SNR.
  std::optional<double> snr_db = 20.0;
  double mut_std = 0.05;  // in units of eps
  std::size_t elite = 5;
  std::uint64_t seed = 0;
};

// Model-free removal of the lowest-power DFT bins of the whole utterance.
struct KenansvilleConfig {
  double snr_db = 20.0;
  double tol_db = 0.5;
};

// Label-free Linf PGD maximising |c(x + delta) - c(x)|_2^2.
struct SslConfig {
  std::optional<double> snr_db = 20.0;
  std::optional<double> eps;
  int steps = 500;
  std::optional<double> step_frac;
  std::uint64_t seed = 0;
};

using AttackConfig =
    std::variant<PgdConfig, CwConfig, GeneticConfig, KenansvilleConfig, SslConfig>;

// "pgd_l2", "pgd_linf", "cw", "genetic", "kenansville", "ssl".
std::string attack_name(const AttackConfig& config);
// Canonical text of every field, and its 64-bit FNV-1a digest in hex.
std::string config_string(const AttackConfig& config);
std::string config_digest(const AttackConfig& config);
void validate(const AttackConfig& config);

struct AdversarialExample {
  std::string utterance_id;
  signal::Perturbation delta = signal::Perturbation::zeros(1);
  double snr_db = 0.0;
  std::string attack;
  std::string config_digest;
  double eps = 0.0;  // radius actually enforced (0 for Kenansville)
  std::optional<std::string> target;
  std::optional<bool> succeeded;
  bool saturated = false;            // Kenansville could not reach the target SNR
  std::optional<std::string> error;  // attack aborted, delta is the last good iterate
  // Objective trace: PGD/SSL loss per iterate (last entry is the final
  // iterate), genetic best fitness per generation, CW loss per step.
  std::vector<double> trace;
  std::vector<std::size_t> removed_bins;  // Kenansville, in removal order
};

// Projection onto the closed ball of radius eps. In-ball input is returned
// unchanged.
std::vector<double> project(std::span<const double> delta, double eps, NormKind kind);
void project_inplace(std::span<double> delta, double eps, NormKind kind);

// One ascent step delta <- project(delta + alpha * d, eps) where d is
// sign(g) for Linf and g / |g|_2 for L2 (no move when g is zero).
void ascent_step(std::span<double> delta, std::span<const double> g, double alpha, double eps,
                 NormKind kind);

// Shrinks delta so that x + delta stays inside [-1, 1].
void clip_to_range(std::span<const double> x, std::span<double> delta);

// Per-utterance random stream seed.
std::uint64_t utterance_seed(std::uint64_t seed, std::string_view utterance_id);

// Radius for a budget given either as eps or SNR.
double resolve_eps(std::span<const double> x, std::optional<double> eps,
                   std::optional<double> snr_db, NormKind kind);

AdversarialExample pgd(const model::TrainedModel& m, const corpus::Utterance& utt,
                       const PgdConfig& config);

// Throws InfeasibleTargetError when the utterance has too few frames for the
// target, DomainError when the target has characters outside the vocabulary.
AdversarialExample cw_attack(const model::TrainedModel& m, const corpus::Utterance& utt,
                             const std::string& target, const CwConfig& config);

AdversarialExample genetic_attack(const model::TrainedModel& m, const corpus::Utterance& utt,
                                  const GeneticConfig& config);

AdversarialExample kenansville_attack(const corpus::Utterance& utt,
                                      const KenansvilleConfig& config);

AdversarialExample ssl_attack(const model::TrainedModel& encoder, const corpus::Utterance& utt,
                              const SslConfig& config);

// Decodes `target_model` on x + delta and scores it against the label (and
// the attack target, if any).
metrics::AttackRecord transfer_apply(const AdversarialExample& adv,
                                     const corpus::Utterance& source_utt,
                                     const model::TrainedModel& target_model);

// |c(x + delta) - c(x)|_2^2 under `encoder`.
double representation_distance(const model::TrainedModel& encoder, const signal::Waveform& x,
                                std::span<const double> delta);

// CTC loss of the utterance's transcript on x + delta.
double label_loss(const model::TrainedModel& m, const corpus::Utterance& utt,
                  std::span<const double> delta);

}  // namespace advsr::attacks

#endif  // ADVSR_ATTACKS_H_
