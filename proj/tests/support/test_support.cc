#include "test_support.h"

#include <atomic>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "advsr/train.h"

namespace advsr::testing {

namespace fs = std::filesystem;

std::vector<std::complex<double>> naive_dft(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      // Reduce k*t mod n first so the angle stays small and exact.
      const double ang = -2.0 * std::numbers::pi * static_cast<double>((k * t) % n) /
                         static_cast<double>(n);
      acc += x[t] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    out[k] = acc;
  }
  return out;
}

std::vector<double> uniform_vector(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& e : v) e = u(rng);
  return v;
}

std::vector<double> normal_vector(std::mt19937_64& rng, std::size_t n, double stddev) {
  std::normal_distribution<double> d(0.0, stddev);
  std::vector<double> v(n);
  for (auto& e : v) e = d(rng);
  return v;
}

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  std::random_device rd;
  path_ = fs::temp_directory_path() /
          ("advsr_" + tag + "_" + std::to_string(rd()) + "_" + std::to_string(counter++));
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

namespace {

void put_u16(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

}  // namespace

void write_raw_wav(const fs::path& path, const RawWav& wav) {
  std::string data;
  for (auto v : wav.samples) put_u16(data, static_cast<std::uint16_t>(v));
  std::string body = "WAVE";
  body += "fmt ";
  put_u32(body, 16);
  put_u16(body, wav.format);
  put_u16(body, wav.channels);
  put_u32(body, wav.sample_rate);
  put_u32(body, wav.sample_rate * wav.channels * wav.bits / 8);
  put_u16(body, static_cast<std::uint16_t>(wav.channels * wav.bits / 8));
  put_u16(body, wav.bits);
  if (wav.extra_chunk) {
    body += "LIST";
    put_u32(body, 6);
    body += "abcdef";
  }
  body += "data";
  put_u32(body, static_cast<std::uint32_t>(data.size()));
  body += data;
  std::string file = "RIFF";
  put_u32(file, static_cast<std::uint32_t>(body.size()));
  file += body;
  write_file(path, file);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

model::TrainedModel random_model(model::Arch arch, std::uint64_t seed) {
  model::TrainedModel m;
  m.id = std::string(model::arch_name(arch));
  m.arch = arch;
  m.params = model::init_params(arch, m.feat.n_bins, m.vocab.size(), seed);
  std::mt19937_64 rng(seed + 100);
  std::uniform_real_distribution<double> shift(-1.0, 1.0), scale(0.2, 0.6);
  for (auto& v : m.params.at("feat.mean").data) v = -10.0 + shift(rng);
  for (auto& v : m.params.at("feat.inv_std").data) v = scale(rng);
  return m;
}

const SmallPanel& small_panel() {
  static const SmallPanel panel = [] {
    SmallPanel p;
    p.corpus_config.n_train = 60;
    p.corpus_config.n_test = 12;
    p.corpus_config.seed = 5;
    p.corpus = corpus::generate_corpus(p.corpus_config);
    model::FeatureConfig feat;
    model::TrainConfig tc;
    tc.steps = 200;
    tc.seed = 1;
    p.ff = model::train_supervised(model::Arch::kFfCtc, p.corpus.train, feat, tc);
    p.ff.id = "ff";
    p.rnn = model::train_supervised(model::Arch::kRnnCtc, p.corpus.train, feat, tc);
    p.rnn.id = "rnn";
    model::PretrainConfig pc;
    pc.steps = 100;
    p.enc = model::pretrain_contrastive(p.corpus.train, feat, pc);
    p.enc.id = "enc";
    tc.seed = 2;
    p.head = model::finetune_head(p.enc, p.corpus.train, tc, false);
    p.head.id = "head";
    return p;
  }();
  return panel;
}

fs::path plans_dir() { return fs::path(ADVSR_SOURCE_DIR) / "plans"; }

}  // namespace advsr::testing
