#ifndef ADVSR_CORPUS_H_
#define ADVSR_CORPUS_H_

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "advsr/signal.h"

namespace advsr::corpus {

// Letters the synthetic language is written in; ' ' separates words.
inline constexpr std::string_view kLetters = "abcdefgh";

struct Utterance {
  std::string id;
  signal::Waveform waveform;
  std::string transcript;
};

struct CorpusConfig {
  std::size_t n_train = 240;
  std::size_t n_test = 100;
  std::uint64_t seed = 7;
  std::size_t min_chars = 3;  // characters per transcript, spaces included
  std::size_t max_chars = 7;
  int sample_rate = 8000;
  std::size_t symbol_dur = 256;  // samples per rendered character
  double noise_std = 0.01;
  // Framing of the feature extractor the corpus must be CTC-feasible for.
  std::size_t frame_len = 128;
  std::size_t hop = 64;
};

struct Corpus {
  std::vector<Utterance> train;
  std::vector<Utterance> test;
};

// Tone pair of a letter, in cycles per sample.
struct Signature {
  double f1;
  double f2;
};
Signature signature(char ch);

// Two 0.3-amplitude sinusoids at the letter's signature with random phases,
// plus white Gaussian noise. A space renders noise only.
std::vector<double> render_symbol(char ch, const CorpusConfig& cfg, std::mt19937_64& rng);

void validate(const CorpusConfig& cfg);

// Pure function of cfg. Test transcripts never repeat a train transcript.
Corpus generate_corpus(const CorpusConfig& cfg);

// Writes train/ and test/ WAV directories plus manifest.jsonl, one JSON
// object per line: {"id", "split", "wav", "transcript"}.
void write_corpus(const Corpus& corpus, const std::filesystem::path& dir);
Corpus load_corpus(const std::filesystem::path& dir);

// Frames produced for `samples` samples under the given framing.
std::size_t frame_count(std::size_t samples, std::size_t frame_len, std::size_t hop);

// Target with word count closest to the label's; ties go to the earliest.
std::string select_target(const std::string& label, std::span<const std::string> targets);

std::vector<std::string> split_words(std::string_view text);

}  // namespace advsr::corpus

#endif  // ADVSR_CORPUS_H_
