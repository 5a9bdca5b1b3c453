#include "advsr/train.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "advsr/ctc.h"
#include "advsr/error.h"
#include "advsr/metrics.h"

namespace advsr::model {

namespace {

struct Example {
  grad::Matrix feats;
  std::vector<int> label;
};

std::vector<Example> prepare(std::span<const corpus::Utterance> utts, const FeatureConfig& feat,
                             const Vocabulary& vocab, bool need_labels) {
  std::vector<Example> out;
  out.reserve(utts.size());
  for (const auto& u : utts) {
    Example ex{extract_features(u.waveform, feat), {}};
    if (need_labels) {
      ex.label = vocab.encode(u.transcript);
      if (!ctc_feasible(ex.feats.rows(), ex.label)) {
        throw InfeasibleLabelError("utterance '" + u.id + "': transcript needs " +
                                   std::to_string(ctc_min_frames(ex.label)) + " frames, has " +
                                   std::to_string(ex.feats.rows()));
      }
    }
    out.push_back(std::move(ex));
  }
  return out;
}

// Per-bin mean and inverse standard deviation over every training frame.
void set_feature_stats(ParamMap& params, const std::vector<Example>& data, std::size_t n_bins) {
  std::vector<double> sum(n_bins, 0.0), sq(n_bins, 0.0);
  double frames = 0.0;
  for (const auto& ex : data) {
    for (std::size_t t = 0; t < ex.feats.rows(); ++t) {
      for (std::size_t k = 0; k < n_bins; ++k) {
        const double v = ex.feats.at(t, k);
        sum[k] += v;
        sq[k] += v * v;
      }
      frames += 1.0;
    }
  }
  auto& mean = params.at("feat.mean").data;
  auto& inv_std = params.at("feat.inv_std").data;
  for (std::size_t k = 0; k < n_bins; ++k) {
    mean[k] = sum[k] / frames;
    const double var = std::max(sq[k] / frames - mean[k] * mean[k], 0.0);
    inv_std[k] = 1.0 / std::max(std::sqrt(var), 1e-3);
  }
}

bool is_statistic(const std::string& name) {
  return name.rfind("feat.", 0) == 0 || name == "enc.target";
}

struct LoopConfig {
  double lr;
  long steps;
  std::uint64_t seed;
  std::size_t batch;
  double clip_norm;
};

void validate(const LoopConfig& c, std::size_t corpus_size) {
  if (corpus_size == 0) throw ConfigError("training corpus is empty");
  if (c.lr < 0.0 || !std::isfinite(c.lr)) throw ConfigError("learning rate must be >= 0");
  if (c.steps < 0) throw ConfigError("step count must be >= 0");
  if (c.batch == 0) throw ConfigError("batch size must be positive");
}

// Mini-batch Adam. `batch_loss` builds the mean loss of the given examples on
// the binding's tape. Mutates `model.params` in place.
template <typename LossFn>
void optimize(TrainedModel& model, const std::function<bool(const std::string&)>& trainable,
              std::size_t corpus_size, const LoopConfig& config, LossFn batch_loss) {
  if (config.lr == 0.0 || config.steps == 0) return;
  std::seed_seq seq{config.seed, std::uint64_t{0x5eed}};
  std::mt19937_64 rng(seq);
  std::uniform_int_distribution<std::size_t> pick(0, corpus_size - 1);
  grad::AdamState state;
  const grad::AdamConfig adam{config.lr, 0.9, 0.999, 1e-8};
  std::vector<std::size_t> batch(config.batch);

  for (long step = 0; step < config.steps; ++step) {
    for (auto& b : batch) b = pick(rng);
    grad::Tape tape;
    const Binding p(tape, model, trainable);
    grad::Tensor loss;
    try {
      loss = batch_loss(p, std::span<const std::size_t>(batch));
      if (!std::isfinite(loss.item())) throw NumericError("non-finite loss");
      tape.backward(loss);
    } catch (const NumericError& e) {
      throw TrainingError(std::string("training diverged: ") + e.what(), step);
    }

    std::vector<std::span<double>> params;
    std::vector<std::vector<double>> grads;
    double sq = 0.0;
    for (const auto& [name, t] : p.trainable()) {
      params.emplace_back(model.params.at(name).data);
      const auto g = t.grad();
      grads.emplace_back(g.begin(), g.end());
      for (double v : g) sq += v * v;
    }
    if (!std::isfinite(sq)) throw TrainingError("non-finite gradient", step);
    const double gnorm = std::sqrt(sq);
    if (config.clip_norm > 0.0 && gnorm > config.clip_norm) {
      const double f = config.clip_norm / gnorm;
      for (auto& g : grads) {
        for (double& v : g) v *= f;
      }
    }
    std::vector<std::span<const double>> gviews(grads.begin(), grads.end());
    grad::adam_step(params, gviews, state, adam);
  }
}

// Row-normalised projection of normalised features onto the fixed target
// basis, transposed to P x T.
grad::Matrix contrastive_targets(const TrainedModel& enc, const grad::Matrix& feats) {
  grad::Tape tape;
  const Binding p(tape, enc);
  const grad::Tensor z =
      grad::matmul(normalize_features(p, tape.constant_view(feats.shape, feats.data)),
                   p["enc.target"]);
  const std::size_t T = z.rows(), P = z.cols();
  const auto zv = z.value();
  grad::Matrix zt = grad::Matrix::zeros(P, T);
  for (std::size_t t = 0; t < T; ++t) {
    double n = 0.0;
    for (std::size_t k = 0; k < P; ++k) n += zv[t * P + k] * zv[t * P + k];
    n = std::sqrt(std::max(n, 1e-12));
    for (std::size_t k = 0; k < P; ++k) zt.at(k, t) = zv[t * P + k] / n;
  }
  return zt;
}

// T x T similarity logits between projected contexts and all frame targets.
grad::Tensor contrastive_logits(const Binding& p, const grad::Matrix& feats,
                                const grad::Matrix& targets_t, double temperature) {
  auto& tape = p.tape();
  const grad::Tensor c = encode(p, normalize_features(p, tape.constant_view(feats.shape, feats.data)));
  const grad::Tensor q = grad::matmul(c, p["enc.proj"]);
  const grad::Tensor zt = tape.constant_view(targets_t.shape, targets_t.data);
  return grad::scale(grad::matmul(q, zt), 1.0 / temperature);
}

}  // namespace

TrainedModel train_supervised(Arch arch, std::span<const corpus::Utterance> corpus,
                              const FeatureConfig& feat, const TrainConfig& config) {
  if (arch != Arch::kFfCtc && arch != Arch::kRnnCtc) {
    throw ConfigError("train_supervised builds ff_ctc or rnn_ctc models, not " +
                      std::string(arch_name(arch)));
  }
  const LoopConfig loop{config.lr, config.steps, config.seed, config.batch, config.clip_norm};
  validate(loop, corpus.size());
  feat.validate();

  TrainedModel m;
  m.id = std::string(arch_name(arch));
  m.arch = arch;
  m.feat = feat;
  m.vocab = Vocabulary::standard();
  m.provenance = Provenance{Provenance::Kind::kScratch, config.seed, {}};
  m.params = init_params(arch, feat.n_bins, m.vocab.size(), config.seed);

  const auto data = prepare(corpus, feat, m.vocab, true);
  set_feature_stats(m.params, data, feat.n_bins);

  optimize(m, [](const std::string& n) { return !is_statistic(n); }, data.size(), loop,
           [&](const Binding& p, std::span<const std::size_t> batch) {
             std::vector<grad::Tensor> losses;
             for (std::size_t i : batch) {
               const auto& ex = data[i];
               const grad::Tensor lp =
                   forward(p, p.tape().constant_view(ex.feats.shape, ex.feats.data));
               losses.push_back(ctc_loss(lp, ex.label));
             }
             return grad::mean(grad::concat_rows(losses));
           });
  return m;
}

TrainedModel pretrain_contrastive(std::span<const corpus::Utterance> corpus,
                                  const FeatureConfig& feat, const PretrainConfig& config) {
  const LoopConfig loop{config.lr, config.steps, config.seed, config.batch, config.clip_norm};
  validate(loop, corpus.size());
  if (!(config.temperature > 0.0)) throw ConfigError("temperature must be positive");
  feat.validate();

  TrainedModel m;
  m.id = "encoder";
  m.arch = Arch::kEncoder;
  m.feat = feat;
  m.vocab = Vocabulary::standard();
  m.provenance = Provenance{Provenance::Kind::kPretrained, config.seed, {}};
  m.params = init_params(Arch::kEncoder, feat.n_bins, m.vocab.size(), config.seed);

  const auto data = prepare(corpus, feat, m.vocab, false);
  set_feature_stats(m.params, data, feat.n_bins);
  std::vector<grad::Matrix> targets;
  targets.reserve(data.size());
  for (const auto& ex : data) targets.push_back(contrastive_targets(m, ex.feats));

  optimize(m, [](const std::string& n) { return n.rfind("enc.", 0) == 0 && !is_statistic(n); },
           data.size(), loop, [&](const Binding& p, std::span<const std::size_t> batch) {
             std::vector<grad::Tensor> losses;
             for (std::size_t i : batch) {
               const grad::Tensor logits =
                   contrastive_logits(p, data[i].feats, targets[i], config.temperature);
               std::vector<std::size_t> diag(logits.rows());
               for (std::size_t t = 0; t < diag.size(); ++t) diag[t] = t;
               losses.push_back(grad::pick(grad::log_softmax(logits, 1), diag));
             }
             return grad::scale(grad::mean(grad::concat_rows(losses)), -1.0);
           });
  return m;
}

double frame_matching_accuracy(const TrainedModel& encoder,
                               std::span<const corpus::Utterance> utts, std::size_t candidates,
                               std::uint64_t seed, double temperature) {
  if (encoder.arch != Arch::kEncoder) throw ContractError("frame matching needs a bare encoder");
  if (candidates < 2) throw ConfigError("need at least two candidates");
  std::seed_seq seq{seed, std::uint64_t{0xacc}};
  std::mt19937_64 rng(seq);
  std::size_t correct = 0, total = 0;
  for (const auto& u : utts) {
    const grad::Matrix feats = extract_features(u.waveform, encoder.feat);
    const grad::Matrix targets_t = contrastive_targets(encoder, feats);
    grad::Tape tape;
    const Binding p(tape, encoder);
    const grad::Matrix logits = contrastive_logits(p, feats, targets_t, temperature).matrix();
    const std::size_t T = logits.rows();
    if (T < candidates) continue;
    std::vector<std::size_t> others;
    for (std::size_t t = 0; t < T; ++t) {
      others.clear();
      for (std::size_t s = 0; s < T; ++s) {
        if (s != t) others.push_back(s);
      }
      std::shuffle(others.begin(), others.end(), rng);
      bool wins = true;
      for (std::size_t j = 0; j + 1 < candidates; ++j) {
        if (logits.at(t, others[j]) >= logits.at(t, t)) wins = false;
      }
      correct += wins ? 1 : 0;
      ++total;
    }
  }
  if (total == 0) throw DomainError("frame matching: no utterance long enough");
  return static_cast<double>(correct) / static_cast<double>(total);
}

TrainedModel finetune_head(const TrainedModel& encoder, std::span<const corpus::Utterance> corpus,
                           const TrainConfig& config, bool freeze) {
  if (encoder.arch != Arch::kEncoder) {
    throw ContractError("finetune_head expects a pretrained encoder, got " +
                        std::string(arch_name(encoder.arch)));
  }
  const LoopConfig loop{config.lr, config.steps, config.seed, config.batch, config.clip_norm};
  validate(loop, corpus.size());

  TrainedModel m;
  m.id = "enc_head";
  m.arch = Arch::kEncHead;
  m.feat = encoder.feat;
  m.vocab = encoder.vocab;
  m.provenance = Provenance{Provenance::Kind::kFinetuned, config.seed,
                            encoder.id + "@" + param_digest(encoder.params)};
  m.params = init_params(Arch::kEncHead, m.feat.n_bins, m.vocab.size(), config.seed);
  for (auto& [name, value] : m.params) {
    if (name.rfind("out.", 0) != 0) value = encoder.param(name);
  }

  const auto data = prepare(corpus, m.feat, m.vocab, true);
  optimize(m,
           [freeze](const std::string& n) {
             if (is_statistic(n)) return false;
             return n.rfind("out.", 0) == 0 || !freeze;
           },
           data.size(), loop, [&](const Binding& p, std::span<const std::size_t> batch) {
             std::vector<grad::Tensor> losses;
             for (std::size_t i : batch) {
               const auto& ex = data[i];
               const grad::Tensor lp =
                   forward(p, p.tape().constant_view(ex.feats.shape, ex.feats.data));
               losses.push_back(ctc_loss(lp, ex.label));
             }
             return grad::mean(grad::concat_rows(losses));
           });
  return m;
}

double mean_ctc_loss(const TrainedModel& m, std::span<const corpus::Utterance> utts) {
  if (utts.empty()) throw DomainError("mean_ctc_loss: no utterances");
  double total = 0.0;
  for (const auto& u : utts) {
    const grad::Matrix lp = forward(m, extract_features(u.waveform, m.feat));
    total += ctc_loss(lp, m.vocab.encode(u.transcript));
  }
  return total / static_cast<double>(utts.size());
}

double corpus_wer(const TrainedModel& m, std::span<const corpus::Utterance> utts) {
  if (utts.empty()) throw DomainError("corpus_wer: no utterances");
  double total = 0.0;
  for (const auto& u : utts) total += metrics::wer(transcribe(m, u.waveform), u.transcript);
  return total / static_cast<double>(utts.size());
}

}  // namespace advsr::model
