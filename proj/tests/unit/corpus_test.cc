#include "advsr/corpus.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "advsr/ctc.h"
#include "advsr/error.h"
#include "advsr/model.h"
#include "test_support.h"

namespace advsr::corpus {
namespace {

CorpusConfig small_config() {
  CorpusConfig c;
  c.n_train = 40;
  c.n_test = 15;
  c.seed = 12;
  return c;
}

std::size_t dominant_bin(std::span<const double> x) {
  const auto spec = testing::naive_dft(x);
  std::size_t best = 1;
  for (std::size_t k = 1; k <= x.size() / 2; ++k) {
    if (std::abs(spec[k]) > std::abs(spec[best])) best = k;
  }
  return best;
}

TEST(RenderSymbol, SpaceIsNoiseOnly) {
  CorpusConfig cfg;
  std::mt19937_64 rng(1);
  const auto s = render_symbol(' ', cfg, rng);
  ASSERT_EQ(s.size(), cfg.symbol_dur);
  double ms = 0.0;
  for (double v : s) ms += v * v;
  ms /= s.size();
  EXPECT_NEAR(std::sqrt(ms), cfg.noise_std, 0.3 * cfg.noise_std);
}

TEST(RenderSymbol, DeterministicGivenStream) {
  CorpusConfig cfg;
  std::mt19937_64 a(5), b(5);
  EXPECT_EQ(render_symbol('a', cfg, a), render_symbol('a', cfg, b));
  std::mt19937_64 c(5);
  EXPECT_THROW(render_symbol('z', cfg, c), DomainError);
}

TEST(RenderSymbol, DistinctCharactersHaveDistinctDominantBins) {
  CorpusConfig cfg;
  cfg.noise_std = 0.0;
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (char ch : kLetters) {
    std::mt19937_64 rng(2);
    const auto s = render_symbol(ch, cfg, rng);
    const auto sig = signature(ch);
    // Both tones show up as the two strongest bins of the symbol.
    const auto spec = testing::naive_dft(s);
    std::vector<std::size_t> order(s.size() / 2);
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k + 1;
    std::sort(order.begin(), order.end(),
              [&](auto x, auto y) { return std::abs(spec[x]) > std::abs(spec[y]); });
    const auto b1 = static_cast<std::size_t>(std::lround(sig.f1 * s.size()));
    const auto b2 = static_cast<std::size_t>(std::lround(sig.f2 * s.size()));
    EXPECT_EQ(std::min(order[0], order[1]), std::min(b1, b2)) << ch;
    EXPECT_EQ(std::max(order[0], order[1]), std::max(b1, b2)) << ch;
    EXPECT_TRUE(seen.insert({std::min(b1, b2), std::max(b1, b2)}).second) << ch;
    EXPECT_EQ(dominant_bin(s), order[0]);
    // Inside the feature extractor's bins for a 128-sample frame.
    EXPECT_LT(sig.f2 * 128, 32.0);
    EXPECT_GT(sig.f1 * 128, 1.0);
  }
}

TEST(GenerateCorpus, PureFunctionOfConfig) {
  const auto a = generate_corpus(small_config());
  const auto b = generate_corpus(small_config());
  ASSERT_EQ(a.train.size(), 40u);
  ASSERT_EQ(a.test.size(), 15u);
  for (std::size_t i = 0; i < a.train.size(); ++i) {
    EXPECT_EQ(a.train[i].id, b.train[i].id);
    EXPECT_EQ(a.train[i].transcript, b.train[i].transcript);
    EXPECT_TRUE(std::ranges::equal(a.train[i].waveform.samples(), b.train[i].waveform.samples()));
  }
  auto other = small_config();
  other.seed = 13;
  EXPECT_NE(generate_corpus(other).train[0].transcript + generate_corpus(other).train[1].transcript,
            a.train[0].transcript + a.train[1].transcript);
}

TEST(GenerateCorpus, Invariants) {
  const auto cfg = small_config();
  const auto c = generate_corpus(cfg);
  const auto vocab = model::Vocabulary::standard();
  std::set<std::string> train_text;
  for (const auto& u : c.train) train_text.insert(u.transcript);
  std::set<std::string> ids;
  for (const auto* split : {&c.train, &c.test}) {
    for (const auto& u : *split) {
      EXPECT_TRUE(ids.insert(u.id).second);
      EXPECT_GE(u.transcript.size(), cfg.min_chars);
      EXPECT_LE(u.transcript.size(), cfg.max_chars);
      EXPECT_EQ(u.waveform.size(), u.transcript.size() * cfg.symbol_dur);
      EXPECT_EQ(u.waveform.sample_rate(), cfg.sample_rate);
      const auto label = vocab.encode(u.transcript);
      EXPECT_TRUE(model::ctc_feasible(frame_count(u.waveform.size(), cfg.frame_len, cfg.hop), label));
      for (double s : u.waveform.samples()) EXPECT_LE(std::abs(s), 1.0);
    }
  }
  for (const auto& u : c.test) EXPECT_EQ(train_text.count(u.transcript), 0u) << u.transcript;
}

TEST(GenerateCorpus, ConfigErrors) {
  auto c = small_config();
  c.n_train = 0;
  EXPECT_THROW(generate_corpus(c), ConfigError);
  c = small_config();
  c.symbol_dur = 64;
  EXPECT_THROW(generate_corpus(c), ConfigError);
  c = small_config();
  c.min_chars = 0;
  EXPECT_THROW(generate_corpus(c), ConfigError);
}

TEST(CorpusIo, WriteLoadRoundTrip) {
  testing::TempDir dir("corpus");
  const auto c = generate_corpus(small_config());
  write_corpus(c, dir.path());
  EXPECT_TRUE(std::filesystem::exists(dir / "manifest.jsonl"));
  const auto back = load_corpus(dir.path());
  ASSERT_EQ(back.train.size(), c.train.size());
  ASSERT_EQ(back.test.size(), c.test.size());
  for (std::size_t i = 0; i < c.test.size(); ++i) {
    EXPECT_EQ(back.test[i].id, c.test[i].id);
    EXPECT_EQ(back.test[i].transcript, c.test[i].transcript);
    const auto x = c.test[i].waveform.samples(), y = back.test[i].waveform.samples();
    ASSERT_EQ(x.size(), y.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
      EXPECT_LE(std::abs(x[k] - y[k]), (0.5 + std::abs(x[k])) / 32768.0 + 1e-15);
    }
  }
}

TEST(CorpusIo, ManifestErrorsCarryLineNumbers) {
  testing::TempDir dir("corpus");
  write_corpus(generate_corpus(small_config()), dir.path());
  auto text = testing::read_file(dir / "manifest.jsonl");
  // Corrupt the third record.
  std::size_t pos = 0;
  for (int i = 0; i < 2; ++i) pos = text.find('\n', pos) + 1;
  text.insert(pos, "{not json\n");
  testing::write_file(dir / "manifest.jsonl", text);
  try {
    load_corpus(dir.path());
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3);
  }
  EXPECT_THROW(load_corpus(dir / "nowhere"), IoError);
}

TEST(SelectTarget, Examples) {
  const std::vector<std::string> t{"a b c", "a b c d e", "a b c d e f g h a"};
  EXPECT_EQ(select_target("h g f e d", t), "a b c d e");
  EXPECT_EQ(select_target("a", std::vector<std::string>{"b c d"}), "b c d");
  const std::vector<std::string> tie{"a b c d", "a b c d e f"};
  EXPECT_EQ(select_target("a b c d e", tie), "a b c d");
  EXPECT_THROW(select_target("a", std::vector<std::string>{}), DomainError);
}

}  // namespace
}  // namespace advsr::corpus
