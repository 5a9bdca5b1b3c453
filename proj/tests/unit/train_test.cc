#include "advsr/train.h"

#include <gtest/gtest.h>

#include "advsr/error.h"
#include "test_support.h"

namespace advsr::model {
namespace {

const corpus::Corpus& tiny_corpus() {
  static const corpus::Corpus c = [] {
    corpus::CorpusConfig cfg;
    cfg.n_train = 24;
    cfg.n_test = 8;
    cfg.seed = 3;
    return corpus::generate_corpus(cfg);
  }();
  return c;
}

bool is_statistic(const std::string& name) {
  return name.rfind("feat.", 0) == 0 || name == "enc.target";
}

void expect_learnable_equal(const ParamMap& a, const ParamMap& b) {
  ASSERT_EQ(a.size(), b.size());
  for (const auto& [name, m] : a) {
    if (!is_statistic(name)) {
      EXPECT_EQ(m, b.at(name)) << name;
    }
  }
}

TEST(TrainSupervised, ZeroLearningRateKeepsInitialisation) {
  const auto& c = tiny_corpus();
  for (Arch a : {Arch::kFfCtc, Arch::kRnnCtc}) {
    const auto m = train_supervised(a, c.train, {}, {.lr = 0.0, .steps = 10, .seed = 4});
    expect_learnable_equal(m.params, init_params(a, 32, 10, 4));
    EXPECT_EQ(m.provenance.kind, Provenance::Kind::kScratch);
    EXPECT_EQ(m.provenance.seed, 4u);
  }
}

TEST(TrainSupervised, DeterministicGivenSeed) {
  const auto& c = tiny_corpus();
  const TrainConfig cfg{.steps = 15, .seed = 9};
  const auto a = train_supervised(Arch::kRnnCtc, c.train, {}, cfg);
  const auto b = train_supervised(Arch::kRnnCtc, c.train, {}, cfg);
  EXPECT_EQ(a, b);
  const auto d = train_supervised(Arch::kRnnCtc, c.train, {}, {.steps = 15, .seed = 10});
  EXPECT_NE(param_digest(a.params), param_digest(d.params));
}

TEST(TrainSupervised, OverfitsOneUtterance) {
  const auto& c = tiny_corpus();
  const std::span<const corpus::Utterance> one(c.train.data(), 1);
  const auto m =
      train_supervised(Arch::kFfCtc, one, {}, {.lr = 1e-2, .steps = 200, .seed = 1, .batch = 1});
  EXPECT_LT(mean_ctc_loss(m, one), 0.1);
}

TEST(TrainSupervised, Errors) {
  const auto& c = tiny_corpus();
  EXPECT_THROW(train_supervised(Arch::kFfCtc, c.train, {}, {.lr = -1.0}), ConfigError);
  EXPECT_THROW(train_supervised(Arch::kFfCtc, c.train, {}, {.batch = 0}), ConfigError);
  EXPECT_THROW(train_supervised(Arch::kFfCtc, {}, {}, {}), ConfigError);
  EXPECT_THROW(train_supervised(Arch::kEncHead, c.train, {}, {}), ConfigError);
  const corpus::Utterance bad{"bad", signal::Waveform(std::vector<double>(256, 0.1), 8000),
                              "abcdef"};
  EXPECT_THROW(train_supervised(Arch::kFfCtc, std::span(&bad, 1), {}, {}), InfeasibleLabelError);
  const auto m = train_supervised(Arch::kFfCtc, c.train, {}, {.steps = 0});
  EXPECT_THROW(mean_ctc_loss(m, {}), DomainError);
  EXPECT_THROW(corpus_wer(m, {}), DomainError);
}

TEST(Pretrain, ZeroStepsKeepsInitialisation) {
  const auto& c = tiny_corpus();
  const auto enc = pretrain_contrastive(c.train, {}, {.steps = 0, .seed = 5});
  EXPECT_EQ(enc.arch, Arch::kEncoder);
  EXPECT_EQ(enc.provenance.kind, Provenance::Kind::kPretrained);
  expect_learnable_equal(enc.params, init_params(Arch::kEncoder, 32, 10, 5));
}

TEST(Pretrain, Deterministic) {
  const auto& c = tiny_corpus();
  const PretrainConfig cfg{.steps = 10, .seed = 6};
  EXPECT_EQ(pretrain_contrastive(c.train, {}, cfg), pretrain_contrastive(c.train, {}, cfg));
}

TEST(Pretrain, FrameMatchingWellAboveChance) {
  const auto& p = testing::small_panel();
  const double before = frame_matching_accuracy(
      pretrain_contrastive(p.corpus.train, {}, {.steps = 0}), p.corpus.test, 8, 1);
  const double after = frame_matching_accuracy(p.enc, p.corpus.test, 8, 1);
  EXPECT_GT(after, 0.5) << "chance is 0.125";
  EXPECT_GT(after, before);
  EXPECT_THROW(frame_matching_accuracy(p.head, p.corpus.test, 8, 1), ContractError);
  EXPECT_THROW(frame_matching_accuracy(p.enc, p.corpus.test, 1, 1), ConfigError);
}

TEST(Finetune, FrozenEncoderIsUnchanged) {
  const auto& p = testing::small_panel();
  const auto head = finetune_head(p.enc, tiny_corpus().train, {.steps = 20, .seed = 2}, true);
  EXPECT_EQ(head.arch, Arch::kEncHead);
  for (const auto& [name, m] : p.enc.params) {
    if (name.rfind("enc.l", 0) == 0) {
      EXPECT_EQ(head.params.at(name), m) << name;
    }
  }
  EXPECT_NE(head.params.at("out.w"), init_params(Arch::kEncHead, 32, 10, 2).at("out.w"));
}

TEST(Finetune, HeadsShareEncoderAtStartAndDifferBySeed) {
  const auto& p = testing::small_panel();
  const auto& data = tiny_corpus().train;
  const auto a0 = finetune_head(p.enc, data, {.lr = 0.0, .seed = 2}, false);
  const auto b0 = finetune_head(p.enc, data, {.lr = 0.0, .seed = 3}, false);
  for (const auto& [name, m] : p.enc.params) {
    if (name.rfind("enc.l", 0) != 0) continue;
    EXPECT_EQ(a0.params.at(name), m) << name;
    EXPECT_EQ(b0.params.at(name), m) << name;
  }
  const auto a = finetune_head(p.enc, data, {.steps = 20, .seed = 2}, false);
  const auto b = finetune_head(p.enc, data, {.steps = 20, .seed = 3}, false);
  EXPECT_NE(a.params.at("out.w"), b.params.at("out.w"));
  EXPECT_EQ(a.provenance.kind, Provenance::Kind::kFinetuned);
  EXPECT_EQ(a.provenance.seed, 2u);
  EXPECT_EQ(a.provenance.pretrain_id.rfind(p.enc.id + "@", 0), 0u);
  EXPECT_THROW(finetune_head(p.ff, data, {}, false), ContractError);
}

TEST(SmallPanel, DecodersLearnTheCorpus) {
  const auto& p = testing::small_panel();
  for (const auto* m : {&p.ff, &p.rnn, &p.head}) {
    EXPECT_LT(corpus_wer(*m, p.corpus.test), 50.0) << m->id;
  }
}

}  // namespace
}  // namespace advsr::model
