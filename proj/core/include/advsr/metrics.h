#ifndef ADVSR_METRICS_H_
#define ADVSR_METRICS_H_

#include <algorithm>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace advsr::metrics {

// Levenshtein distance with unit costs.
template <typename T>
std::size_t edit_distance(std::span<const T> a, std::span<const T> b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

// Lower-cased whitespace tokens.
std::vector<std::string> normalize_words(std::string_view text);

// 100 * word edit distance / reference length. Not capped at 100.
// Throws DomainError for an empty reference.
double wer(std::string_view hyp, std::string_view ref);

bool attack_success(std::string_view decoded, std::string_view target);

struct AttackRecord {
  std::string utterance_id;
  std::string decoded;
  double wer_vs_label = 0.0;
  std::optional<double> wer_vs_target;
  std::optional<bool> success;  // present iff a target is
  double snr_db = 0.0;
};

struct SummaryRow {
  std::string model_id;
  std::string attack_id;
  double mean_wer = 0.0;
  double mean_snr = 0.0;
  std::optional<double> mean_wer_vs_target;
  std::optional<double> accuracy;  // percent
  std::size_t n = 0;
};

// Arithmetic means over the records; accuracy counts records that carry a
// target. Throws DomainError on an empty list.
SummaryRow summarize(std::span<const AttackRecord> records, std::string model_id = {},
                     std::string attack_id = {});

}  // namespace advsr::metrics

#endif  // ADVSR_METRICS_H_
