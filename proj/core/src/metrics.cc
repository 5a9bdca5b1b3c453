#include "advsr/metrics.h"

#include <cctype>

#include "advsr/error.h"

namespace advsr::metrics {

std::vector<std::string> normalize_words(std::string_view text) {
  std::vector<std::string> words;
  std::string cur;
  for (char ch : text) {
    const auto u = static_cast<unsigned char>(ch);
    if (std::isspace(u)) {
      if (!cur.empty()) words.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(u)));
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

double wer(std::string_view hyp, std::string_view ref) {
  const auto r = normalize_words(ref);
  if (r.empty()) throw DomainError("wer: empty reference");
  const auto h = normalize_words(hyp);
  const std::size_t d = edit_distance<std::string>(h, r);
  return 100.0 * static_cast<double>(d) / static_cast<double>(r.size());
}

bool attack_success(std::string_view decoded, std::string_view target) {
  return normalize_words(decoded) == normalize_words(target);
}

SummaryRow summarize(std::span<const AttackRecord> records, std::string model_id,
                     std::string attack_id) {
  if (records.empty()) throw DomainError("summarize: no records");
  SummaryRow row;
  row.model_id = std::move(model_id);
  row.attack_id = std::move(attack_id);
  row.n = records.size();
  double wer_sum = 0.0, snr_sum = 0.0, target_sum = 0.0;
  std::size_t targeted = 0, successes = 0;
  for (const auto& r : records) {
    wer_sum += r.wer_vs_label;
    snr_sum += r.snr_db;
    if (r.wer_vs_target) {
      ++targeted;
      target_sum += *r.wer_vs_target;
      if (r.success.value_or(false)) ++successes;
    }
  }
  const double n = static_cast<double>(records.size());
  row.mean_wer = wer_sum / n;
  row.mean_snr = snr_sum / n;
  if (targeted > 0) {
    row.mean_wer_vs_target = target_sum / static_cast<double>(targeted);
    row.accuracy = 100.0 * static_cast<double>(successes) / static_cast<double>(targeted);
  }
  return row;
}

}  // namespace advsr::metrics
