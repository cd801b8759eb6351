#pragma once

// Independent direct-counting BLEU-4 reference, kept deliberately naive and
// separate from the library implementation: per-sentence n-gram multisets via
// std::map over token vectors, formula applied literally. Only the test suite
// uses it.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace bleu_oracle {

inline std::vector<std::string> tokenize_lower(const std::string& line) {
  std::string lowered;
  for (char c : line) lowered += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  std::istringstream in(lowered);
  std::vector<std::string> toks;
  std::string t;
  while (in >> t) toks.push_back(t);
  return toks;
}

inline std::map<std::vector<std::string>, long long> gram_counts(
    const std::vector<std::string>& toks, std::size_t n) {
  std::map<std::vector<std::string>, long long> counts;
  if (toks.size() < n) return counts;
  for (std::size_t i = 0; i + n <= toks.size(); ++i)
    ++counts[std::vector<std::string>(toks.begin() + static_cast<long>(i),
                                      toks.begin() + static_cast<long>(i + n))];
  return counts;
}

inline double corpus_bleu(const std::vector<std::string>& hyps,
                          const std::vector<std::string>& refs) {
  long long hyp_len = 0, ref_len = 0;
  long long match[4] = {0, 0, 0, 0};
  long long total[4] = {0, 0, 0, 0};
  for (std::size_t s = 0; s < hyps.size(); ++s) {
    const auto h = tokenize_lower(hyps[s]);
    const auto r = tokenize_lower(refs[s]);
    hyp_len += static_cast<long long>(h.size());
    ref_len += static_cast<long long>(r.size());
    for (std::size_t n = 1; n <= 4; ++n) {
      const auto hc = gram_counts(h, n);
      const auto rc = gram_counts(r, n);
      for (const auto& [gram, count] : hc) {
        auto it = rc.find(gram);
        const long long clipped = it == rc.end() ? 0 : std::min(count, it->second);
        match[n - 1] += clipped;
        total[n - 1] += count;
      }
    }
  }
  // an order with no hypothesis n-grams is vacuous (precision 1); a zero
  // match count over a nonzero total is a hard zero (no smoothing)
  double p[4];
  for (int n = 0; n < 4; ++n) {
    p[n] = total[n] == 0
               ? 1.0
               : static_cast<double>(match[n]) / static_cast<double>(total[n]);
    if (p[n] == 0.0) return 0.0;
  }
  if (hyp_len == 0) return 0.0;
  const double bp = hyp_len > ref_len
                        ? 1.0
                        : std::exp(1.0 - static_cast<double>(ref_len) /
                                             static_cast<double>(hyp_len));
  const double geo = std::exp(0.25 * (std::log(p[0]) + std::log(p[1]) + std::log(p[2]) +
                                      std::log(p[3])));
  return 100.0 * bp * geo;
}

}  // namespace bleu_oracle
