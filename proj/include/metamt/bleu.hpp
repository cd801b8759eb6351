#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <string>
#include <unordered_map>
#include <vector>

#include "bpe.hpp"
#include "errors.hpp"

namespace metamt {

// Corpus-level BLEU-4, single reference, case-insensitive, unsmoothed.
struct BleuReport {
  double score{0.0};                      // 0..100
  std::array<double, 4> precisions{};    // modified n-gram precisions, n=1..4
  double brevity_penalty{0.0};
  std::size_t hyp_tokens{0};
  std::size_t ref_tokens{0};
  std::array<std::size_t, 4> matches{};
  std::array<std::size_t, 4> totals{};

  std::string summary() const {
    char buf[192];
    std::snprintf(buf, sizeof(buf),
                  "BLEU = %.2f, %.1f/%.1f/%.1f/%.1f (BP=%.3f, hyp_len=%zu, ref_len=%zu)",
                  score, 100.0 * precisions[0], 100.0 * precisions[1],
                  100.0 * precisions[2], 100.0 * precisions[3], brevity_penalty,
                  hyp_tokens, ref_tokens);
    return std::string(buf);
  }
};

namespace detail {

inline std::vector<std::string> bleu_tokenize(const std::string& line) {
  std::string lowered = line;
  for (char& c : lowered) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return split_ws(lowered);
}

inline void count_ngrams(const std::vector<std::string>& tokens, std::size_t n,
                         std::unordered_map<std::string, std::size_t>& counts) {
  if (tokens.size() < n) return;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string key;
    for (std::size_t j = 0; j < n; ++j) {
      if (j) key += '\x1f';
      key += tokens[i + j];
    }
    ++counts[key];
  }
}

}  // namespace detail

inline BleuReport bleu4(const std::vector<std::string>& hypotheses,
                        const std::vector<std::string>& references) {
  if (hypotheses.empty()) throw DataError("bleu4: empty corpus");
  if (hypotheses.size() != references.size())
    throw DataError("bleu4: " + std::to_string(hypotheses.size()) + " hypotheses vs " +
                    std::to_string(references.size()) + " references");

  BleuReport report;
  for (std::size_t s = 0; s < hypotheses.size(); ++s) {
    const auto hyp = detail::bleu_tokenize(hypotheses[s]);
    const auto ref = detail::bleu_tokenize(references[s]);
    report.hyp_tokens += hyp.size();
    report.ref_tokens += ref.size();
    for (std::size_t n = 1; n <= 4; ++n) {
      if (hyp.size() < n) continue;
      std::unordered_map<std::string, std::size_t> hyp_counts, ref_counts;
      detail::count_ngrams(hyp, n, hyp_counts);
      detail::count_ngrams(ref, n, ref_counts);
      report.totals[n - 1] += hyp.size() - n + 1;
      for (const auto& [gram, c] : hyp_counts) {
        auto it = ref_counts.find(gram);
        if (it != ref_counts.end()) report.matches[n - 1] += std::min(c, it->second);
      }
    }
  }

  // An order with no hypothesis n-grams at all is vacuous and scores 1;
  // zero matches over a nonzero total is a genuine zero (unsmoothed).
  for (std::size_t n = 0; n < 4; ++n)
    report.precisions[n] =
        report.totals[n] == 0
            ? 1.0
            : static_cast<double>(report.matches[n]) / static_cast<double>(report.totals[n]);

  const double c = static_cast<double>(report.hyp_tokens);
  const double r = static_cast<double>(report.ref_tokens);
  report.brevity_penalty = c == 0.0 ? 0.0 : (c > r ? 1.0 : std::exp(1.0 - r / c));

  bool any_zero = c == 0.0;
  double log_sum = 0.0;
  for (double p : report.precisions) {
    if (p <= 0.0) {
      any_zero = true;
      break;
    }
    log_sum += 0.25 * std::log(p);
  }
  report.score = any_zero ? 0.0 : 100.0 * report.brevity_penalty * std::exp(log_sum);
  return report;
}

}  // namespace metamt
