#ifndef ADVSR_TRAIN_H_
#define ADVSR_TRAIN_H_

#include <cstdint>
#include <span>

#include "advsr/corpus.h"
#include "advsr/model.h"

namespace advsr::model {

struct TrainConfig {
  double lr = 3e-3;  // 0 leaves the initial parameters untouched
  long steps = 1500;
  std::uint64_t seed = 1;
  std::size_t batch = 8;
  double clip_norm = 5.0;  // global gradient-norm clip; <= 0 disables
};

// Adam on the mean CTC loss of random mini-batches. Deterministic in
// (arch, corpus, feat, config). Throws TrainingError on a non-finite loss.
TrainedModel train_supervised(Arch arch, std::span<const corpus::Utterance> corpus,
                              const FeatureConfig& feat, const TrainConfig& config);

struct PretrainConfig {
  double lr = 3e-3;
  long steps = 800;
  std::uint64_t seed = 11;
  std::size_t batch = 8;
  double temperature = 0.1;
  double clip_norm = 5.0;
};

// Label-free InfoNCE: each encoder frame, passed through a learned
// projection, must pick out the fixed random projection of its own input
// features among all frames of the same utterance. Returns an kEncoder model.
TrainedModel pretrain_contrastive(std::span<const corpus::Utterance> corpus,
                                  const FeatureConfig& feat, const PretrainConfig& config);

// Fraction of frames whose own target outscores `candidates - 1` distractor
// frames drawn from the same utterance. Chance is 1 / candidates.
double frame_matching_accuracy(const TrainedModel& encoder,
                               std::span<const corpus::Utterance> utts,
                               std::size_t candidates, std::uint64_t seed,
                               double temperature = 0.1);

// Linear CTC head on top of a pretrained encoder. With freeze set, encoder
// parameters are left exactly as pretrained.
TrainedModel finetune_head(const TrainedModel& encoder, std::span<const corpus::Utterance> corpus,
                           const TrainConfig& config, bool freeze);

// Mean CTC loss and greedy-decode WER (percent) over a set of utterances.
double mean_ctc_loss(const TrainedModel& m, std::span<const corpus::Utterance> utts);
double corpus_wer(const TrainedModel& m, std::span<const corpus::Utterance> utts);

}  // namespace advsr::model

#endif  // ADVSR_TRAIN_H_
