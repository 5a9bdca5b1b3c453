#include "advsr/attacks.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "advsr/error.h"
#include "oracles.h"
#include "test_support.h"

namespace advsr::attacks {
namespace {

using signal::NormKind;
using testing::bitwise_equal;
using testing::naive_kenansville;
using testing::small_panel;

double linf(std::span<const double> v) { return signal::norm(v, NormKind::kLinf); }
double l2(std::span<const double> v) { return signal::norm(v, NormKind::kL2); }

std::vector<double> perturbed(const corpus::Utterance& u, const AdversarialExample& adv) {
  std::vector<double> y(u.waveform.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = u.waveform.samples()[i] + adv.delta.values()[i];
  return y;
}

// Norm bound, range, stored SNR and length.
void expect_well_formed(const corpus::Utterance& u, const AdversarialExample& adv,
                        NormKind kind, const std::string& what) {
  ASSERT_EQ(adv.delta.size(), u.waveform.size()) << what;
  EXPECT_EQ(adv.utterance_id, u.id);
  if (adv.eps > 0.0) {
    EXPECT_LE(signal::norm(adv.delta.values(), kind), adv.eps + 1e-12) << what;
  }
  for (double v : perturbed(u, adv)) {
    EXPECT_LE(std::abs(v), 1.0) << what;
  }
  const double snr = signal::snr_db(u.waveform.samples(), adv.delta.values());
  if (std::isinf(snr)) {
    EXPECT_TRUE(std::isinf(adv.snr_db)) << what;
  } else {
    EXPECT_NEAR(adv.snr_db, snr, 1e-6) << what;
  }
}

// ---------------------------------------------------------------------------
// Projections and steps

TEST(Project, Examples) {
  EXPECT_EQ(project(std::vector<double>{0.3, -0.2}, 0.1, NormKind::kLinf),
            (std::vector<double>{0.1, -0.1}));
  const auto p = project(std::vector<double>{1.2, -1.6}, 1.0, NormKind::kL2);
  EXPECT_NEAR(p[0], 0.6, 1e-15);
  EXPECT_NEAR(p[1], -0.8, 1e-15);
  const std::vector<double> in{0.01, -0.02};
  EXPECT_EQ(project(in, 1.0, NormKind::kL2), in);
  EXPECT_THROW(project(in, 0.0, NormKind::kL2), DomainError);
}

TEST(Project, RandomVectorsRespectBallAndKeepInBallBitwise) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::size_t> len(1, 300);
  std::uniform_real_distribution<double> eps_dist(1e-4, 3.0), scale(0.01, 4.0);
  for (int i = 0; i < 10000; ++i) {
    const NormKind kind = i % 2 ? NormKind::kL2 : NormKind::kLinf;
    auto v = testing::normal_vector(rng, len(rng), scale(rng));
    const double eps = eps_dist(rng);
    const auto p = project(v, eps, kind);
    EXPECT_LE(signal::norm(p, kind), eps + 1e-12);
    if (signal::norm(v, kind) <= eps) {
      EXPECT_TRUE(bitwise_equal(p, v));
    }
    auto q = v;
    project_inplace(q, eps, kind);
    EXPECT_TRUE(bitwise_equal(p, q));
  }
}

TEST(AscentStep, LinearSurrogateLinfStepIsEpsSignW) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 200; ++i) {
    auto w = testing::normal_vector(rng, 50, 1.0);
    w[i % 50] = 0.0;
    const double eps = 0.001 + 0.01 * i;
    std::vector<double> delta(w.size(), 0.0);
    // d(w . x)/dx = w; any alpha >= eps reaches the corner.
    ascent_step(delta, w, eps * (1.0 + (i % 3)), eps, NormKind::kLinf);
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double expect = w[k] > 0 ? eps : (w[k] < 0 ? -eps : 0.0);
      EXPECT_EQ(delta[k], expect);
    }
  }
}

TEST(AscentStep, L2StepFollowsNormalisedGradient) {
  std::mt19937_64 rng(3);
  const auto w = testing::normal_vector(rng, 40, 1.0);
  std::vector<double> delta(w.size(), 0.0);
  ascent_step(delta, w, 5.0, 0.5, NormKind::kL2);
  const double n = l2(w);
  for (std::size_t k = 0; k < w.size(); ++k) EXPECT_NEAR(delta[k], 0.5 * w[k] / n, 1e-15);
  std::vector<double> d2{0.1, 0.2};
  ascent_step(d2, std::vector<double>{0.0, 0.0}, 1.0, 1.0, NormKind::kL2);
  EXPECT_EQ(d2, (std::vector<double>{0.1, 0.2}));
}

TEST(ClipToRange, KeepsSumInUnitInterval) {
  const std::vector<double> x{0.9, -0.9, 0.5};
  std::vector<double> d{0.5, -0.5, 0.1};
  clip_to_range(x, d);
  EXPECT_NEAR(d[0], 0.1, 1e-15);
  EXPECT_NEAR(d[1], -0.1, 1e-15);
  EXPECT_EQ(d[2], 0.1);
}

TEST(ResolveEps, SnrAndExplicit) {
  const std::vector<double> x(100, 0.5);  // |x|_2 = 5
  EXPECT_NEAR(resolve_eps(x, std::nullopt, 20.0, NormKind::kL2), 0.5, 1e-15);
  EXPECT_NEAR(resolve_eps(x, std::nullopt, 20.0, NormKind::kLinf), 0.05, 1e-15);
  EXPECT_EQ(resolve_eps(x, 0.3, 20.0, NormKind::kL2), 0.3);
}

TEST(Config, NamesDigestsAndValidation) {
  EXPECT_EQ(attack_name(PgdConfig{}), "pgd_l2");
  EXPECT_EQ(attack_name(PgdConfig{.norm = NormKind::kLinf}), "pgd_linf");
  EXPECT_EQ(attack_name(CwConfig{}), "cw");
  EXPECT_EQ(attack_name(GeneticConfig{}), "genetic");
  EXPECT_EQ(attack_name(KenansvilleConfig{}), "kenansville");
  EXPECT_EQ(attack_name(SslConfig{}), "ssl");
  EXPECT_EQ(config_digest(PgdConfig{}), config_digest(PgdConfig{}));
  EXPECT_NE(config_digest(PgdConfig{}), config_digest(PgdConfig{.steps = 99}));
  EXPECT_NE(config_digest(PgdConfig{}), config_digest(PgdConfig{.seed = 1}));
  EXPECT_EQ(config_digest(PgdConfig{}).size(), 16u);
  EXPECT_THROW(validate(PgdConfig{.snr_db = std::nullopt}), ConfigError);
  EXPECT_THROW(validate(PgdConfig{.eps = -1.0}), ConfigError);
  EXPECT_THROW(validate(PgdConfig{.steps = -1}), ConfigError);
  EXPECT_THROW(validate(CwConfig{.decay = 1.0}), ConfigError);
  EXPECT_THROW(validate(CwConfig{.lr = 0.0}), ConfigError);
  EXPECT_THROW(validate(GeneticConfig{.pop = 4, .elite = 5}), ConfigError);
  EXPECT_THROW(validate(KenansvilleConfig{.snr_db = INFINITY}), ConfigError);
  EXPECT_THROW(validate(SslConfig{.snr_db = std::nullopt}), ConfigError);
}

TEST(UtteranceSeed, DependsOnSeedAndId) {
  EXPECT_EQ(utterance_seed(1, "test-0001"), utterance_seed(1, "test-0001"));
  EXPECT_NE(utterance_seed(1, "test-0001"), utterance_seed(2, "test-0001"));
  EXPECT_NE(utterance_seed(1, "test-0001"), utterance_seed(1, "test-0002"));
}

// ---------------------------------------------------------------------------
// PGD

TEST(Pgd, ZeroStepsLeavesInputAlone) {
  const auto& p = small_panel();
  const auto& u = p.corpus.test[0];
  const auto adv = pgd(p.ff, u, {.steps = 0});
  EXPECT_EQ(linf(adv.delta.values()), 0.0);
  EXPECT_TRUE(std::isinf(adv.snr_db));
  EXPECT_EQ(transfer_apply(adv, u, p.ff).wer_vs_label,
            metrics::wer(model::transcribe(p.ff, u.waveform), u.transcript));
}

TEST(Pgd, FeasibleAscendingAndDeterministic) {
  const auto& p = small_panel();
  int ascended = 0, total = 0;
  for (const auto* m : {&p.ff, &p.rnn, &p.head}) {
    for (NormKind kind : {NormKind::kL2, NormKind::kLinf}) {
      const PgdConfig cfg{.norm = kind, .snr_db = 30.0, .steps = 30, .seed = 4};
      for (const auto& u : p.corpus.test) {
        const auto adv = pgd(*m, u, cfg);
        expect_well_formed(u, adv, kind, m->id);
        EXPECT_FALSE(adv.error.has_value());
        ASSERT_EQ(adv.trace.size(), 31u);
        EXPECT_DOUBLE_EQ(adv.trace.front(), label_loss(*m, u, std::vector<double>(u.waveform.size())));
        EXPECT_DOUBLE_EQ(adv.trace.back(), label_loss(*m, u, adv.delta.values()));
        ascended += adv.trace.back() >= adv.trace.front();
        ++total;
        if (kind == NormKind::kL2) {
          EXPECT_GE(adv.snr_db, 30.0 - 1e-9);
        }
      }
      const auto again = pgd(*m, p.corpus.test[3], cfg);
      EXPECT_TRUE(bitwise_equal(again.delta.values(), pgd(*m, p.corpus.test[3], cfg).delta.values()));
    }
  }
  EXPECT_GE(ascended, 0.95 * total);
}

TEST(Pgd, RandomInitUsesPerUtteranceStream) {
  const auto& p = small_panel();
  const auto& u = p.corpus.test[1];
  const PgdConfig cfg{.norm = NormKind::kLinf, .snr_db = 30.0, .steps = 0, .rand_init = true, .seed = 1};
  const auto a = pgd(p.ff, u, cfg);
  EXPECT_GT(linf(a.delta.values()), 0.0);
  EXPECT_TRUE(bitwise_equal(a.delta.values(), pgd(p.ff, u, cfg).delta.values()));
  auto other = cfg;
  other.seed = 2;
  EXPECT_FALSE(bitwise_equal(a.delta.values(), pgd(p.ff, u, other).delta.values()));
}

TEST(Pgd, RaisesWerAt30Db) {
  const auto& p = small_panel();
  int raised = 0;
  for (const auto& u : p.corpus.test) {
    const double clean = metrics::wer(model::transcribe(p.ff, u.waveform), u.transcript);
    const auto adv = pgd(p.ff, u, {.snr_db = 30.0});
    raised += transfer_apply(adv, u, p.ff).wer_vs_label > clean;
  }
  EXPECT_GE(raised, 0.9 * p.corpus.test.size());
}

// ---------------------------------------------------------------------------
// CW

TEST(Cw, TargetAlreadyDecodedSucceedsAtStepZero) {
  const auto& p = small_panel();
  for (const auto& u : p.corpus.test) {
    const auto decoded = model::transcribe(p.rnn, u.waveform);
    if (metrics::normalize_words(decoded).empty()) continue;
    const auto adv = cw_attack(p.rnn, u, decoded, {.steps = 100});
    ASSERT_TRUE(adv.succeeded.has_value());
    EXPECT_TRUE(*adv.succeeded);
    EXPECT_EQ(linf(adv.delta.values()), 0.0);
    EXPECT_TRUE(std::isinf(adv.snr_db));
  }
}

TEST(Cw, ZeroStepsSucceedsOnlyIfAlreadyDecoding) {
  const auto& p = small_panel();
  const auto& u = p.corpus.test[2];
  const auto decoded = model::transcribe(p.ff, u.waveform);
  const std::string other = decoded == "a b" ? "c d" : "a b";
  const auto adv = cw_attack(p.ff, u, other, {.steps = 0});
  EXPECT_FALSE(*adv.succeeded);
  EXPECT_EQ(linf(adv.delta.values()), 0.0);
}

TEST(Cw, Errors) {
  const auto& p = small_panel();
  const auto& u = p.corpus.test[0];
  // 256-sample symbols give 4 frames each; this target needs far more.
  EXPECT_THROW(cw_attack(p.ff, u, std::string(200, 'a'), {}), InfeasibleTargetError);
  EXPECT_THROW(cw_attack(p.ff, u, "xyz", {}), DomainError);
}

TEST(Cw, SuccessFlagMatchesExactDecode) {
  const auto& p = small_panel();
  const std::vector<std::string> targets{"a b c", "d e f", "g h"};
  int successes = 0;
  for (std::size_t i = 0; i < 6; ++i) {
    const auto& u = p.corpus.test[i];
    const auto adv = cw_attack(p.ff, u, targets[i % 3], {.lr = 0.005, .steps = 400});
    expect_well_formed(u, adv, NormKind::kLinf, "cw");
    ASSERT_TRUE(adv.target.has_value());
    const auto rec = transfer_apply(adv, u, p.ff);
    const auto decoded = model::transcribe(p.ff, signal::Waveform(perturbed(u, adv), 8000));
    EXPECT_EQ(*adv.succeeded, decoded == targets[i % 3]);
    EXPECT_EQ(*rec.success, *adv.succeeded);
    successes += *adv.succeeded;
  }
  EXPECT_GT(successes, 0);
}

// ---------------------------------------------------------------------------
// Genetic

TEST(Genetic, ZeroItersReturnsBestInitialMember) {
  const auto& p = small_panel();
  const auto& u = p.corpus.test[0];
  const auto adv = genetic_attack(p.ff, u, {.pop = 8, .iters = 0, .elite = 2, .seed = 3});
  ASSERT_EQ(adv.trace.size(), 1u);
  EXPECT_DOUBLE_EQ(adv.trace[0], label_loss(p.ff, u, adv.delta.values()));
  expect_well_formed(u, adv, NormKind::kLinf, "genetic");
}

TEST(Genetic, ElitismMakesBestFitnessMonotone) {
  const auto& p = small_panel();
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& u = p.corpus.test[i];
    const GeneticConfig cfg{.pop = 10, .iters = 25, .elite = 1 + i % 3, .seed = 5};
    const auto adv = genetic_attack(p.rnn, u, cfg);
    ASSERT_EQ(adv.trace.size(), 26u);
    for (std::size_t g = 1; g < adv.trace.size(); ++g) EXPECT_GE(adv.trace[g], adv.trace[g - 1]);
    EXPECT_DOUBLE_EQ(adv.trace.back(), label_loss(p.rnn, u, adv.delta.values()));
    expect_well_formed(u, adv, NormKind::kLinf, "genetic");
    EXPECT_TRUE(bitwise_equal(adv.delta.values(), genetic_attack(p.rnn, u, cfg).delta.values()));
  }
}

TEST(Genetic, RadiusTracksRequestedSnr) {
  const auto& p = small_panel();
  const auto& u = p.corpus.test[0];
  const auto adv = genetic_attack(p.ff, u, {.pop = 4, .iters = 0, .elite = 1});
  const double n = static_cast<double>(u.waveform.size());
  EXPECT_NEAR(adv.eps, std::sqrt(3.0) * signal::eps_from_snr(u.waveform, 20.0) / std::sqrt(n),
              1e-15);
  // Uniform noise in that box lands close to the requested SNR.
  EXPECT_NEAR(adv.snr_db, 20.0, 0.5);
}

// ---------------------------------------------------------------------------
// Kenansville

corpus::Utterance make_utt(std::vector<double> x, std::string id = "u") {
  return corpus::Utterance{std::move(id), signal::Waveform(std::move(x), 8000), "a"};
}

TEST(Kenansville, MatchesExhaustivePrefixSearch) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::size_t> len(2, 48);
  std::uniform_real_distribution<double> target(0.0, 40.0);
  for (int inst = 0; inst < 300; ++inst) {
    const auto x = testing::uniform_vector(rng, len(rng), -0.6, 0.6);
    const double t = target(rng);
    const auto adv = kenansville_attack(make_utt(x), {.snr_db = t});
    const auto oracle = naive_kenansville(x, t, 0.5);
    EXPECT_EQ(adv.removed_bins, oracle.removed) << "n=" << x.size() << " target=" << t;
    EXPECT_EQ(adv.saturated, oracle.saturated);
    if (!oracle.removed.empty()) {
      EXPECT_NEAR(adv.snr_db, oracle.snr, 1e-9);
    }
    EXPECT_GE(adv.snr_db, t - 1e-9);
  }
}

TEST(Kenansville, StrongAndWeakTone) {
  const std::size_t n = 64;
  std::vector<double> x(n), strong(n);
  for (std::size_t t = 0; t < n; ++t) {
    strong[t] = 0.9 * std::cos(2.0 * std::numbers::pi * 5.0 * t / n);
    x[t] = strong[t] + 0.009 * std::cos(2.0 * std::numbers::pi * 20.0 * t / n);
  }
  // Removing the weak tone costs about 40 dB; a 30 dB target removes it and every
  // empty bin, and cannot go further.
  const auto mild = kenansville_attack(make_utt(x), {.snr_db = 30.0});
  EXPECT_NE(std::find(mild.removed_bins.begin(), mild.removed_bins.end(), 20u),
            mild.removed_bins.end());
  EXPECT_EQ(std::find(mild.removed_bins.begin(), mild.removed_bins.end(), 5u),
            mild.removed_bins.end());
  EXPECT_EQ(mild.removed_bins.back(), 20u);
  EXPECT_TRUE(mild.saturated);
  const double full = 0.9 * 0.9 + 0.009 * 0.009;
  EXPECT_NEAR(mild.snr_db, 10.0 * std::log10(full / (0.009 * 0.009)), 1e-6);
  const auto out = perturbed(make_utt(x), mild);
  for (std::size_t t = 0; t < n; ++t) EXPECT_NEAR(out[t], strong[t], 1e-12);

  const auto strict = kenansville_attack(make_utt(x), {.snr_db = 45.0});
  EXPECT_EQ(std::find(strict.removed_bins.begin(), strict.removed_bins.end(), 20u),
            strict.removed_bins.end());
  EXPECT_FALSE(strict.saturated);
}

TEST(Kenansville, EmptyPrefixLeavesInputUnchanged) {
  std::mt19937_64 rng(8);
  const auto x = testing::uniform_vector(rng, 100, -0.5, 0.5);
  const auto adv = kenansville_attack(make_utt(x), {.snr_db = 300.0});
  EXPECT_TRUE(adv.removed_bins.empty());
  EXPECT_EQ(linf(adv.delta.values()), 0.0);
  EXPECT_TRUE(std::isinf(adv.snr_db));
}

TEST(Kenansville, CorpusUtterancesLandWithinTolerance) {
  const auto& p = small_panel();
  for (double target : {10.0, 20.0, 30.0, 40.0}) {
    for (const auto& u : p.corpus.test) {
      const auto adv = kenansville_attack(u, {.snr_db = target});
      expect_well_formed(u, adv, NormKind::kL2, "kenansville");
      EXPECT_FALSE(adv.saturated);
      EXPECT_GE(adv.snr_db, target);
      EXPECT_LE(adv.snr_db, target + 0.5);
    }
  }
}

// ---------------------------------------------------------------------------
// SSL

TEST(Ssl, ZeroStepsAndContract) {
  const auto& p = small_panel();
  const auto& u = p.corpus.test[0];
  const auto adv = ssl_attack(p.enc, u, {.steps = 0});
  EXPECT_EQ(linf(adv.delta.values()), 0.0);
  EXPECT_EQ(representation_distance(p.enc, u.waveform, adv.delta.values()), 0.0);
  EXPECT_THROW(ssl_attack(p.ff, u, {}), ContractError);
  EXPECT_THROW(representation_distance(p.rnn, u.waveform, adv.delta.values()), ContractError);
}

TEST(Ssl, BeatsRandomNoiseOfEqualLinfNorm) {
  const auto& p = small_panel();
  std::mt19937_64 rng(9);
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& u = p.corpus.test[i];
    const auto adv = ssl_attack(p.enc, u, {.snr_db = 20.0, .steps = 100, .seed = 1});
    expect_well_formed(u, adv, NormKind::kLinf, "ssl");
    const double got = representation_distance(p.enc, u.waveform, adv.delta.values());
    const double r = linf(adv.delta.values());
    for (int draw = 0; draw < 20; ++draw) {
      auto noise = testing::uniform_vector(rng, u.waveform.size(), -r, r);
      clip_to_range(u.waveform.samples(), noise);
      EXPECT_GT(got, representation_distance(p.enc, u.waveform, noise));
    }
  }
}

TEST(Ssl, Deterministic) {
  const auto& p = small_panel();
  const auto& u = p.corpus.test[5];
  const SslConfig cfg{.steps = 20, .seed = 3};
  EXPECT_TRUE(bitwise_equal(ssl_attack(p.head, u, cfg).delta.values(),
                            ssl_attack(p.head, u, cfg).delta.values()));
}

// ---------------------------------------------------------------------------
// Transfer

TEST(Transfer, SameModelIsWhiteBoxAndZeroDeltaIsClean) {
  const auto& p = small_panel();
  for (const auto& u : p.corpus.test) {
    const auto adv = pgd(p.rnn, u, {.snr_db = 30.0, .steps = 10});
    const auto rec = transfer_apply(adv, u, p.rnn);
    const auto direct = model::transcribe(p.rnn, signal::apply(u.waveform, adv.delta));
    EXPECT_EQ(rec.decoded, direct);
    EXPECT_EQ(rec.wer_vs_label, metrics::wer(direct, u.transcript));
    EXPECT_EQ(rec.snr_db, adv.snr_db);
    EXPECT_FALSE(rec.success.has_value());

    AdversarialExample zero = adv;
    zero.delta = signal::Perturbation::zeros(u.waveform.size());
    EXPECT_EQ(transfer_apply(zero, u, p.head).wer_vs_label,
              metrics::wer(model::transcribe(p.head, u.waveform), u.transcript));
  }
}

TEST(Transfer, LengthMismatchIsContractError) {
  const auto& p = small_panel();
  AdversarialExample adv;
  adv.delta = signal::Perturbation::zeros(3);
  EXPECT_THROW(transfer_apply(adv, p.corpus.test[0], p.ff), ContractError);
}

}  // namespace
}  // namespace advsr::attacks
