#ifndef ADVSR_MODEL_H_
#define ADVSR_MODEL_H_

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "advsr/features.h"
#include "advsr/grad.h"
#include "advsr/signal.h"

namespace advsr::model {

// Output symbols. Id 0 is the CTC blank; ids 1.. map to `characters()`.
class Vocabulary {
 public:
  explicit Vocabulary(std::string characters);
  // Blank, space and the corpus letters.
  static Vocabulary standard();

  std::size_t size() const { return characters_.size() + 1; }
  static constexpr int blank_id() { return 0; }
  const std::string& characters() const { return characters_; }

  // Throws DomainError for characters outside the vocabulary.
  std::vector<int> encode(std::string_view text) const;
  std::string decode(std::span<const int> ids) const;

  bool operator==(const Vocabulary&) const = default;

 private:
  std::string characters_;
};

enum class Arch {
  kFfCtc,    // spliced-context feed-forward CTC model
  kRnnCtc,   // single tanh recurrence + linear CTC head
  kEncHead,  // pretrained recurrent encoder + linear CTC head
  kEncoder,  // contrastively pretrained encoder alone (no head)
};

std::string_view arch_name(Arch arch);
Arch parse_arch(std::string_view name);
bool has_encoder(Arch arch);
bool has_head(Arch arch);

struct Provenance {
  enum class Kind { kScratch, kPretrained, kFinetuned };
  Kind kind = Kind::kScratch;
  std::uint64_t seed = 0;
  std::string pretrain_id;  // finetuned only

  bool operator==(const Provenance&) const = default;
};

using ParamMap = std::map<std::string, grad::Matrix>;

struct TrainedModel {
  std::string id;
  Arch arch = Arch::kFfCtc;
  ParamMap params;
  Vocabulary vocab = Vocabulary::standard();
  FeatureConfig feat;
  Provenance provenance;

  const grad::Matrix& param(const std::string& name) const;
  bool operator==(const TrainedModel&) const = default;
};

// Layer sizes.
inline constexpr std::size_t kFfContext = 2;  // frames spliced on each side
inline constexpr std::size_t kFfHidden = 64;
inline constexpr std::size_t kRnnHidden = 32;
inline constexpr std::size_t kEncHidden = 48;
inline constexpr std::size_t kEncProjection = 16;

// Fresh parameters for `arch`, drawn from `seed`. Feature normalisation is
// the identity until training sets it.
ParamMap init_params(Arch arch, std::size_t n_bins, std::size_t vocab_size, std::uint64_t seed);

// Stable hex digest of parameter names, shapes and bytes.
std::string param_digest(const ParamMap& params);

// Puts a model's parameters onto a tape. Parameters selected by `trainable`
// become requires-grad leaves (copied); the rest are borrowed views.
class Binding {
 public:
  Binding(grad::Tape& tape, const TrainedModel& model,
          const std::function<bool(const std::string&)>& trainable = {});

  grad::Tensor operator[](const std::string& name) const;
  const std::map<std::string, grad::Tensor>& trainable() const { return trainable_; }
  grad::Tape& tape() const { return *tape_; }
  const TrainedModel& model() const { return *model_; }

 private:
  grad::Tape* tape_;
  const TrainedModel* model_;
  std::map<std::string, grad::Tensor> tensors_;
  std::map<std::string, grad::Tensor> trainable_;
};

// Standardises raw log-power features with the model's stored statistics.
grad::Tensor normalize_features(const Binding& p, grad::Tensor feats);

// Contextual representation c(x) from normalised features: T x kEncHidden.
grad::Tensor encode(const Binding& p, grad::Tensor normalized);

// T x V log-probabilities from raw features.
grad::Tensor forward(const Binding& p, grad::Tensor feats);
grad::Matrix forward(const TrainedModel& m, const grad::Matrix& feats);

// Waveform (1 x N) to log-probabilities, all on one tape.
grad::Tensor waveform_logprobs(const Binding& p, grad::Tensor waveform);

// c(x) for a waveform. Throws ContractError for models without an encoder.
grad::Tensor encoder_representation(const Binding& p, grad::Tensor waveform);
grad::Matrix encoder_representation(const TrainedModel& m, const signal::Waveform& w);

std::string transcribe(const TrainedModel& m, const signal::Waveform& w);

}  // namespace advsr::model

#endif  // ADVSR_MODEL_H_
