#ifndef ADVSR_TESTS_TEST_SUPPORT_H_
#define ADVSR_TESTS_TEST_SUPPORT_H_

#include <complex>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "advsr/corpus.h"
#include "advsr/model.h"

namespace advsr::testing {

// O(N^2) textbook DFT, all N bins.
std::vector<std::complex<double>> naive_dft(std::span<const double> x);

std::vector<double> uniform_vector(std::mt19937_64& rng, std::size_t n, double lo, double hi);
std::vector<double> normal_vector(std::mt19937_64& rng, std::size_t n, double stddev);

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Hand-assembled RIFF/WAVE file. `extra_chunk` inserts an unknown chunk
// between fmt and data.
struct RawWav {
  std::uint16_t format = 1;
  std::uint16_t channels = 1;
  std::uint32_t sample_rate = 8000;
  std::uint16_t bits = 16;
  std::vector<std::int16_t> samples;
  bool extra_chunk = false;
};
void write_raw_wav(const std::filesystem::path& path, const RawWav& wav);
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& text);

// Untrained model with random feature statistics, so the normalisation
// path carries a non-trivial gradient.
model::TrainedModel random_model(model::Arch arch, std::uint64_t seed);

// Small corpus and quickly trained models shared by the attack and harness
// tests. Built once per process.
struct SmallPanel {
  corpus::CorpusConfig corpus_config;
  corpus::Corpus corpus;
  model::TrainedModel ff;
  model::TrainedModel rnn;
  model::TrainedModel enc;
  model::TrainedModel head;
};
const SmallPanel& small_panel();

// Directory of the source tree's plans/.
std::filesystem::path plans_dir();

}  // namespace advsr::testing

#endif  // ADVSR_TESTS_TEST_SUPPORT_H_
