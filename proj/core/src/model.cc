#include "advsr/model.h"

#include <cmath>
#include <cstring>
#include <iomanip>
#include <map>
#include <mutex>
#include <tuple>
#include <random>
#include <sstream>

#include "advsr/corpus.h"
#include "advsr/ctc.h"
#include "advsr/error.h"

namespace advsr::model {

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary::Vocabulary(std::string characters) : characters_(std::move(characters)) {
  if (characters_.empty()) throw DomainError("vocabulary needs at least one character");
  for (std::size_t i = 0; i < characters_.size(); ++i) {
    if (characters_.find(characters_[i], i + 1) != std::string::npos) {
      throw DomainError(std::string("duplicate vocabulary symbol '") + characters_[i] + "'");
    }
  }
}

Vocabulary Vocabulary::standard() { return Vocabulary(" " + std::string(corpus::kLetters)); }

std::vector<int> Vocabulary::encode(std::string_view text) const {
  std::vector<int> ids;
  ids.reserve(text.size());
  for (char ch : text) {
    const auto pos = characters_.find(ch);
    if (pos == std::string::npos) {
      throw DomainError(std::string("character '") + ch + "' not in vocabulary");
    }
    ids.push_back(static_cast<int>(pos) + 1);
  }
  return ids;
}

std::string Vocabulary::decode(std::span<const int> ids) const {
  std::string out;
  for (int id : ids) {
    if (id <= 0 || static_cast<std::size_t>(id) > characters_.size()) {
      throw DomainError("decode: id " + std::to_string(id) + " is not a character");
    }
    out.push_back(characters_[static_cast<std::size_t>(id) - 1]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Architecture tags

std::string_view arch_name(Arch arch) {
  switch (arch) {
    case Arch::kFfCtc: return "ff_ctc";
    case Arch::kRnnCtc: return "rnn_ctc";
    case Arch::kEncHead: return "enc_head";
    case Arch::kEncoder: return "encoder";
  }
  return "?";
}

Arch parse_arch(std::string_view name) {
  for (Arch a : {Arch::kFfCtc, Arch::kRnnCtc, Arch::kEncHead, Arch::kEncoder}) {
    if (arch_name(a) == name) return a;
  }
  throw ConfigError("unknown architecture '" + std::string(name) + "'");
}

bool has_encoder(Arch arch) { return arch == Arch::kEncHead || arch == Arch::kEncoder; }
bool has_head(Arch arch) { return arch != Arch::kEncoder; }

const grad::Matrix& TrainedModel::param(const std::string& name) const {
  const auto it = params.find(name);
  if (it == params.end()) {
    throw ContractError("model '" + id + "' (" + std::string(arch_name(arch)) +
                        ") has no parameter '" + name + "'");
  }
  return it->second;
}

// ---------------------------------------------------------------------------
// Parameters

namespace {

grad::Matrix glorot(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-limit, limit);
  grad::Matrix m = grad::Matrix::zeros(rows, cols);
  for (double& v : m.data) v = dist(rng);
  return m;
}

grad::Matrix filled(std::size_t cols, double value) {
  return grad::Matrix(grad::Shape{1, cols}, std::vector<double>(cols, value));
}

void add_recurrent(ParamMap& p, const std::string& prefix, std::size_t in, std::size_t hidden,
                   std::mt19937_64& rng) {
  p[prefix + ".wx"] = glorot(in, hidden, rng);
  // Scaled-down recurrent weights keep the initial dynamics contractive.
  grad::Matrix wh = glorot(hidden, hidden, rng);
  for (double& v : wh.data) v *= 0.5;
  p[prefix + ".wh"] = wh;
  p[prefix + ".b"] = grad::Matrix::zeros(1, hidden);
}

}  // namespace

ParamMap init_params(Arch arch, std::size_t n_bins, std::size_t vocab_size, std::uint64_t seed) {
  std::seed_seq seq{seed, static_cast<std::uint64_t>(arch) + 101};
  std::mt19937_64 rng(seq);
  ParamMap p;
  p["feat.mean"] = filled(n_bins, 0.0);
  p["feat.inv_std"] = filled(n_bins, 1.0);
  switch (arch) {
    case Arch::kFfCtc: {
      const std::size_t in = (2 * kFfContext + 1) * n_bins;
      p["ff.w1"] = glorot(in, kFfHidden, rng);
      p["ff.b1"] = grad::Matrix::zeros(1, kFfHidden);
      p["ff.w2"] = glorot(kFfHidden, kFfHidden, rng);
      p["ff.b2"] = grad::Matrix::zeros(1, kFfHidden);
      p["out.w"] = glorot(kFfHidden, vocab_size, rng);
      p["out.b"] = grad::Matrix::zeros(1, vocab_size);
      break;
    }
    case Arch::kRnnCtc:
      add_recurrent(p, "rnn", n_bins, kRnnHidden, rng);
      p["out.w"] = glorot(kRnnHidden, vocab_size, rng);
      p["out.b"] = grad::Matrix::zeros(1, vocab_size);
      break;
    case Arch::kEncoder:
    case Arch::kEncHead:
      add_recurrent(p, "enc.l1", n_bins, kEncHidden, rng);
      add_recurrent(p, "enc.l2", kEncHidden, kEncHidden, rng);
      if (arch == Arch::kEncoder) {
        p["enc.proj"] = glorot(kEncHidden, kEncProjection, rng);
        // Fixed random target projection; never trained.
        std::normal_distribution<double> nd(0.0, 1.0 / std::sqrt(static_cast<double>(n_bins)));
        grad::Matrix target = grad::Matrix::zeros(n_bins, kEncProjection);
        for (double& v : target.data) v = nd(rng);
        p["enc.target"] = target;
      } else {
        p["out.w"] = glorot(kEncHidden, vocab_size, rng);
        p["out.b"] = grad::Matrix::zeros(1, vocab_size);
      }
      break;
  }
  return p;
}

std::string param_digest(const ParamMap& params) {
  // FNV-1a, 64 bit.
  std::uint64_t h = 1469598103934665603ULL;
  const auto mix = [&h](const void* data, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  };
  for (const auto& [name, m] : params) {
    mix(name.data(), name.size());
    const std::uint64_t dims[2] = {m.rows(), m.cols()};
    mix(dims, sizeof dims);
    mix(m.data.data(), m.data.size() * sizeof(double));
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

// ---------------------------------------------------------------------------
// Binding

namespace {

// Names and shapes a model of this layout must carry, cached per layout.
const std::map<std::string, grad::Shape>& expected_layout(Arch arch, std::size_t n_bins,
                                                          std::size_t vocab_size) {
  static std::mutex mu;
  static std::map<std::tuple<Arch, std::size_t, std::size_t>, std::map<std::string, grad::Shape>>
      cache;
  const std::lock_guard lock(mu);
  auto [it, fresh] = cache.try_emplace({arch, n_bins, vocab_size});
  if (fresh) {
    for (const auto& [name, m] : init_params(arch, n_bins, vocab_size, 0)) {
      it->second.emplace(name, m.shape);
    }
  }
  return it->second;
}

}  // namespace

Binding::Binding(grad::Tape& tape, const TrainedModel& model,
                 const std::function<bool(const std::string&)>& trainable)
    : tape_(&tape), model_(&model) {
  const auto& layout = expected_layout(model.arch, model.feat.n_bins, model.vocab.size());
  if (layout.size() != model.params.size()) {
    throw ContractError("model '" + model.id + "' has " + std::to_string(model.params.size()) +
                        " parameters, its architecture needs " + std::to_string(layout.size()));
  }
  for (const auto& [name, shape] : layout) {
    const auto it = model.params.find(name);
    if (it == model.params.end()) {
      throw ContractError("model '" + model.id + "' is missing parameter '" + name + "'");
    }
    if (!(it->second.shape == shape)) {
      throw ContractError("model '" + model.id + "' parameter '" + name + "' has the wrong shape");
    }
  }
  for (const auto& [name, m] : model.params) {
    if (trainable && trainable(name)) {
      const grad::Tensor t = tape.leaf(m, true);
      tensors_.emplace(name, t);
      trainable_.emplace(name, t);
    } else {
      tensors_.emplace(name, tape.constant_view(m.shape, m.data));
    }
  }
}

grad::Tensor Binding::operator[](const std::string& name) const {
  const auto it = tensors_.find(name);
  if (it == tensors_.end()) {
    throw ContractError("model '" + model_->id + "' has no parameter '" + name + "'");
  }
  return it->second;
}

// ---------------------------------------------------------------------------
// Forward passes

namespace {

// Each row t becomes [x[t-c], ..., x[t], ..., x[t+c]], clamping at the edges.
grad::Tensor splice(grad::Tensor x, std::size_t context) {
  const std::size_t T = x.rows();
  std::vector<grad::Tensor> columns;
  const grad::Tensor first = grad::slice_rows(x, 0, 1);
  const grad::Tensor last = grad::slice_rows(x, T - 1, T);
  for (long d = -static_cast<long>(context); d <= static_cast<long>(context); ++d) {
    if (d == 0) {
      columns.push_back(x);
      continue;
    }
    const std::size_t shift = static_cast<std::size_t>(std::labs(d));
    const std::size_t kept = shift < T ? T - shift : 0;
    std::vector<grad::Tensor> rows;
    if (d < 0) {
      for (std::size_t i = 0; i < T - kept; ++i) rows.push_back(first);
      if (kept > 0) rows.push_back(grad::slice_rows(x, 0, kept));
    } else {
      if (kept > 0) rows.push_back(grad::slice_rows(x, shift, T));
      for (std::size_t i = 0; i < T - kept; ++i) rows.push_back(last);
    }
    columns.push_back(grad::concat_rows(rows));
  }
  return grad::concat_cols(columns);
}

// h_t = tanh(x_t Wx + h_{t-1} Wh + b), h_{-1} = 0.
grad::Tensor recurrent(const Binding& p, const std::string& prefix, grad::Tensor x) {
  const grad::Tensor wh = p[prefix + ".wh"];
  const grad::Tensor pre = grad::add_rowvec(grad::matmul(x, p[prefix + ".wx"]), p[prefix + ".b"]);
  std::vector<grad::Tensor> states;
  states.reserve(x.rows());
  grad::Tensor h = grad::tanh(grad::slice_rows(pre, 0, 1));
  states.push_back(h);
  for (std::size_t t = 1; t < x.rows(); ++t) {
    h = grad::tanh(grad::add(grad::slice_rows(pre, t, t + 1), grad::matmul(h, wh)));
    states.push_back(h);
  }
  return grad::concat_rows(states);
}

grad::Tensor linear(const Binding& p, const std::string& prefix, grad::Tensor x) {
  return grad::add_rowvec(grad::matmul(x, p[prefix + ".w"]), p[prefix + ".b"]);
}

}  // namespace

grad::Tensor normalize_features(const Binding& p, grad::Tensor feats) {
  const auto& m = p.model();
  if (feats.cols() != m.feat.n_bins) {
    throw ContractError("model '" + m.id + "' expects " + std::to_string(m.feat.n_bins) +
                        " feature bins, got " + std::to_string(feats.cols()));
  }
  if (feats.rows() == 0) throw ContractError("no feature frames");
  const grad::Tensor neg_mean = grad::scale(p["feat.mean"], -1.0);
  return grad::mul_rowvec(grad::add_rowvec(feats, neg_mean), p["feat.inv_std"]);
}

grad::Tensor encode(const Binding& p, grad::Tensor normalized) {
  if (!has_encoder(p.model().arch)) {
    throw ContractError("model '" + p.model().id + "' (" + std::string(arch_name(p.model().arch)) +
                        ") has no encoder");
  }
  return recurrent(p, "enc.l2", recurrent(p, "enc.l1", normalized));
}

grad::Tensor forward(const Binding& p, grad::Tensor feats) {
  const auto& m = p.model();
  const grad::Tensor x = normalize_features(p, feats);
  grad::Tensor logits;
  switch (m.arch) {
    case Arch::kFfCtc: {
      const grad::Tensor s = splice(x, kFfContext);
      const grad::Tensor a1 = grad::tanh(grad::add_rowvec(grad::matmul(s, p["ff.w1"]), p["ff.b1"]));
      const grad::Tensor a2 = grad::tanh(grad::add_rowvec(grad::matmul(a1, p["ff.w2"]), p["ff.b2"]));
      logits = linear(p, "out", a2);
      break;
    }
    case Arch::kRnnCtc:
      logits = linear(p, "out", recurrent(p, "rnn", x));
      break;
    case Arch::kEncHead:
      logits = linear(p, "out", encode(p, x));
      break;
    case Arch::kEncoder:
      throw ContractError("model '" + m.id + "' is a bare encoder without an output head");
  }
  if (logits.cols() != m.vocab.size()) {
    throw ContractError("model '" + m.id + "' head width does not match its vocabulary");
  }
  return grad::log_softmax(logits, 1);
}

grad::Matrix forward(const TrainedModel& m, const grad::Matrix& feats) {
  grad::Tape tape;
  const Binding p(tape, m);
  return forward(p, tape.constant_view(feats.shape, feats.data)).matrix();
}

grad::Tensor waveform_logprobs(const Binding& p, grad::Tensor waveform) {
  return forward(p, extract_features(waveform, p.model().feat));
}

grad::Tensor encoder_representation(const Binding& p, grad::Tensor waveform) {
  if (!has_encoder(p.model().arch)) {
    throw ContractError("model '" + p.model().id + "' (" + std::string(arch_name(p.model().arch)) +
                        ") has no encoder");
  }
  return encode(p, normalize_features(p, extract_features(waveform, p.model().feat)));
}

grad::Matrix encoder_representation(const TrainedModel& m, const signal::Waveform& w) {
  grad::Tape tape;
  const Binding p(tape, m);
  const auto s = w.samples();
  return encoder_representation(p, tape.constant_view(grad::Shape{1, s.size()}, s)).matrix();
}

std::string transcribe(const TrainedModel& m, const signal::Waveform& w) {
  grad::Tape tape;
  const Binding p(tape, m);
  const auto s = w.samples();
  const grad::Tensor lp = waveform_logprobs(p, tape.constant_view(grad::Shape{1, s.size()}, s));
  return greedy_decode(lp.matrix(), m.vocab);
}

}  // namespace advsr::model
