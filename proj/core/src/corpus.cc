#include "advsr/corpus.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <set>
#include <sstream>

#include "json.hpp"

#include "advsr/error.h"

namespace advsr::corpus {

namespace {

// Frame-bin indices (of a 128-point frame) for each letter. All sixteen are
// distinct and stay below bin 32.
constexpr int kToneBins[8][2] = {
    {3, 20}, {5, 22}, {7, 24}, {9, 26}, {11, 28}, {13, 30}, {15, 19}, {17, 25},
};
constexpr double kToneAmplitude = 0.3;
constexpr double kSpaceProbability = 0.25;

std::string random_transcript(std::mt19937_64& rng, const CorpusConfig& cfg) {
  std::uniform_int_distribution<std::size_t> len_dist(cfg.min_chars, cfg.max_chars);
  std::uniform_int_distribution<std::size_t> letter(0, kLetters.size() - 1);
  std::bernoulli_distribution space(kSpaceProbability);
  const std::size_t len = len_dist(rng);
  std::string out;
  while (out.size() < len) {
    const bool can_space = !out.empty() && out.back() != ' ' && out.size() + 1 < len;
    if (can_space && space(rng)) {
      out.push_back(' ');
      continue;
    }
    char c = kLetters[letter(rng)];
    while (!out.empty() && out.back() == c) c = kLetters[letter(rng)];
    out.push_back(c);
  }
  return out;
}

Utterance render(const std::string& id, const std::string& text, const CorpusConfig& cfg,
                 std::mt19937_64& rng) {
  std::vector<double> samples;
  samples.reserve(text.size() * cfg.symbol_dur);
  for (char ch : text) {
    const auto seg = render_symbol(ch, cfg, rng);
    samples.insert(samples.end(), seg.begin(), seg.end());
  }
  return Utterance{id, signal::Waveform(std::move(samples), cfg.sample_rate), text};
}

std::string make_id(const char* split, std::size_t i) {
  std::ostringstream os;
  os << split << '-' << std::setw(4) << std::setfill('0') << i;
  return os.str();
}

}  // namespace

Signature signature(char ch) {
  const auto pos = kLetters.find(ch);
  if (pos == std::string_view::npos) {
    throw DomainError(std::string("no tone signature for character '") + ch + "'");
  }
  return {kToneBins[pos][0] / 128.0, kToneBins[pos][1] / 128.0};
}

std::vector<double> render_symbol(char ch, const CorpusConfig& cfg, std::mt19937_64& rng) {
  if (ch != ' ' && kLetters.find(ch) == std::string_view::npos) {
    throw DomainError(std::string("cannot render character '") + ch + "'");
  }
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::vector<double> out(cfg.symbol_dur, 0.0);
  if (ch != ' ') {
    const Signature sig = signature(ch);
    const double p1 = phase(rng), p2 = phase(rng);
    for (std::size_t n = 0; n < out.size(); ++n) {
      const double t = static_cast<double>(n);
      out[n] = kToneAmplitude * std::sin(2.0 * std::numbers::pi * sig.f1 * t + p1) +
               kToneAmplitude * std::sin(2.0 * std::numbers::pi * sig.f2 * t + p2);
    }
  }
  if (cfg.noise_std > 0.0) {
    std::normal_distribution<double> noise(0.0, cfg.noise_std);
    for (double& s : out) s += noise(rng);
  }
  return out;
}

std::size_t frame_count(std::size_t samples, std::size_t frame_len, std::size_t hop) {
  if (hop == 0 || frame_len == 0 || samples < frame_len) return 0;
  return (samples - frame_len) / hop + 1;
}

void validate(const CorpusConfig& cfg) {
  if (cfg.n_train == 0 || cfg.n_test == 0) throw ConfigError("corpus: counts must be positive");
  if (cfg.min_chars == 0 || cfg.min_chars > cfg.max_chars) {
    throw ConfigError("corpus: need 0 < min_chars <= max_chars");
  }
  if (cfg.sample_rate <= 0) throw ConfigError("corpus: sample_rate must be positive");
  if (cfg.noise_std < 0.0) throw ConfigError("corpus: noise_std must be non-negative");
  if (cfg.hop == 0 || cfg.hop > cfg.frame_len) throw ConfigError("corpus: need 0 < hop <= frame_len");
  if (cfg.symbol_dur < cfg.frame_len) {
    throw ConfigError("corpus: symbol_dur " + std::to_string(cfg.symbol_dur) +
                      " shorter than frame_len " + std::to_string(cfg.frame_len));
  }
  // Worst case for CTC: shortest utterance, every symbol needs its own frame
  // plus one blank between repeats (transcripts never repeat letters, so the
  // label length bounds it).
  const std::size_t frames = frame_count(cfg.min_chars * cfg.symbol_dur, cfg.frame_len, cfg.hop);
  if (frames < cfg.min_chars) {
    throw ConfigError("corpus: " + std::to_string(cfg.min_chars) + " symbols yield only " +
                      std::to_string(frames) + " frames");
  }
}

Corpus generate_corpus(const CorpusConfig& cfg) {
  validate(cfg);
  Corpus c;
  std::seed_seq train_seq{cfg.seed, std::uint64_t{0}};
  std::seed_seq test_seq{cfg.seed, std::uint64_t{1}};
  std::mt19937_64 train_rng(train_seq);
  std::mt19937_64 test_rng(test_seq);

  std::set<std::string> seen;
  c.train.reserve(cfg.n_train);
  for (std::size_t i = 0; i < cfg.n_train; ++i) {
    const std::string text = random_transcript(train_rng, cfg);
    seen.insert(text);
    c.train.push_back(render(make_id("train", i), text, cfg, train_rng));
  }
  c.test.reserve(cfg.n_test);
  for (std::size_t i = 0; i < cfg.n_test; ++i) {
    std::string text = random_transcript(test_rng, cfg);
    for (int tries = 0; seen.count(text); ++tries) {
      if (tries > 10000) throw ConfigError("corpus: cannot find unseen test transcripts");
      text = random_transcript(test_rng, cfg);
    }
    c.test.push_back(render(make_id("test", i), text, cfg, test_rng));
  }
  return c;
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "train");
  fs::create_directories(dir / "test");
  std::ofstream manifest(dir / "manifest.jsonl", std::ios::trunc);
  if (!manifest) throw IoError("cannot write " + (dir / "manifest.jsonl").string());
  const auto emit = [&](const std::vector<Utterance>& utts, const char* split) {
    for (const auto& u : utts) {
      const fs::path rel = fs::path(split) / (u.id + ".wav");
      signal::save_wav(u.waveform, dir / rel);
      nlohmann::json rec = {
          {"id", u.id}, {"split", split}, {"wav", rel.generic_string()}, {"transcript", u.transcript}};
      manifest << rec.dump() << '\n';
    }
  };
  emit(corpus.train, "train");
  emit(corpus.test, "test");
}

Corpus load_corpus(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.jsonl");
  if (!in) throw IoError("cannot open " + (dir / "manifest.jsonl").string());
  Corpus c;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("manifest: ") + e.what(), lineno);
    }
    if (!rec.contains("id") || !rec.contains("split") || !rec.contains("wav") ||
        !rec.contains("transcript")) {
      throw ParseError("manifest: record missing a field", lineno);
    }
    Utterance u{rec["id"].get<std::string>(),
                signal::load_wav(dir / rec["wav"].get<std::string>()),
                rec["transcript"].get<std::string>()};
    const auto split = rec["split"].get<std::string>();
    if (split == "train") {
      c.train.push_back(std::move(u));
    } else if (split == "test") {
      c.test.push_back(std::move(u));
    } else {
      throw ParseError("manifest: unknown split '" + split + "'", lineno);
    }
  }
  return c;
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::string cur;
  for (char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!cur.empty()) words.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

std::string select_target(const std::string& label, std::span<const std::string> targets) {
  if (targets.empty()) throw DomainError("select_target: empty target list");
  const auto n = static_cast<long>(split_words(label).size());
  std::size_t best = 0;
  long best_gap = -1;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const long gap = std::labs(static_cast<long>(split_words(targets[i]).size()) - n);
    if (best_gap < 0 || gap < best_gap) {
      best = i;
      best_gap = gap;
    }
  }
  return targets[best];
}

}  // namespace advsr::corpus
