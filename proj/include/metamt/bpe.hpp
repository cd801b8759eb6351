#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace metamt {

// Byte-pair-encoding subword model. Merges are applied in learned order; the
// continuation marker is appended to every subword of a word except the last.
struct BpeModel {
  std::vector<std::pair<std::string, std::string>> merges;
  std::string marker{"@@"};
};

inline std::vector<std::string> split_ws(const std::string& text) {
  std::vector<std::string> words;
  std::istringstream in(text);
  std::string w;
  while (in >> w) words.push_back(w);
  return words;
}

namespace detail {

inline std::vector<std::string> char_symbols(const std::string& word) {
  std::vector<std::string> sym;
  sym.reserve(word.size());
  for (char c : word) sym.emplace_back(1, c);
  return sym;
}

inline void apply_merge(std::vector<std::string>& sym,
                        const std::pair<std::string, std::string>& merge) {
  std::size_t w = 0;
  for (std::size_t r = 0; r < sym.size();) {
    if (r + 1 < sym.size() && sym[r] == merge.first && sym[r + 1] == merge.second) {
      sym[w] = merge.first + merge.second;
      ++w;
      r += 2;
    } else {
      if (w != r) sym[w] = std::move(sym[r]);
      ++w;
      r += 1;
    }
  }
  sym.resize(w);
}

}  // namespace detail

// Greedy highest-frequency pair merging over whitespace-split words. Ties are
// broken by lexicographic order of the pair so learning is deterministic.
inline BpeModel bpe_learn(const std::vector<std::string>& lines, std::size_t num_ops) {
  std::map<std::string, long long> word_count;
  for (const auto& line : lines)
    for (auto& w : split_ws(line)) ++word_count[w];
  if (word_count.empty()) throw DataError("bpe_learn: empty corpus");

  std::vector<std::pair<std::vector<std::string>, long long>> words;
  words.reserve(word_count.size());
  for (const auto& [w, c] : word_count) words.push_back({detail::char_symbols(w), c});

  BpeModel model;
  for (std::size_t op = 0; op < num_ops; ++op) {
    std::map<std::pair<std::string, std::string>, long long> pair_count;
    for (const auto& [sym, c] : words)
      for (std::size_t i = 0; i + 1 < sym.size(); ++i)
        pair_count[{sym[i], sym[i + 1]}] += c;
    if (pair_count.empty()) break;
    // std::map iteration is lexicographic, so the first maximum is the tie winner.
    auto best = pair_count.begin();
    for (auto it = pair_count.begin(); it != pair_count.end(); ++it)
      if (it->second > best->second) best = it;
    model.merges.push_back(best->first);
    for (auto& [sym, c] : words) detail::apply_merge(sym, best->first);
  }
  return model;
}

inline std::vector<std::string> bpe_encode_word(const BpeModel& model, const std::string& word) {
  auto sym = detail::char_symbols(word);
  for (const auto& merge : model.merges) detail::apply_merge(sym, merge);
  for (std::size_t i = 0; i + 1 < sym.size(); ++i) sym[i] += model.marker;
  return sym;
}

inline std::vector<std::string> bpe_encode(const BpeModel& model, const std::string& text) {
  std::vector<std::string> out;
  for (const auto& w : split_ws(text)) {
    auto sub = bpe_encode_word(model, w);
    out.insert(out.end(), sub.begin(), sub.end());
  }
  return out;
}

inline std::string bpe_decode(const std::vector<std::string>& tokens,
                              const std::string& marker = "@@") {
  std::string out;
  bool continue_word = false;
  for (const auto& tok : tokens) {
    if (!continue_word && !out.empty()) out += ' ';
    const bool marked =
        tok.size() >= marker.size() && tok.compare(tok.size() - marker.size(), marker.size(), marker) == 0;
    out += marked ? tok.substr(0, tok.size() - marker.size()) : tok;
    continue_word = marked;
  }
  return out;
}

inline void save_bpe(const BpeModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write BPE model: " + path);
  out << "bpe-v1 " << model.marker << "\n";
  for (const auto& [l, r] : model.merges) out << l << " " << r << "\n";
}

inline BpeModel load_bpe(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read BPE model: " + path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("BPE model: missing header: " + path);
  std::istringstream head(line);
  std::string tag, marker;
  head >> tag >> marker;
  if (tag != "bpe-v1" || marker.empty())
    throw FormatError("BPE model: bad header line \"" + line + "\"");
  BpeModel model;
  model.marker = marker;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string l, r, extra;
    if (!(ls >> l >> r) || (ls >> extra))
      throw FormatError("BPE model: malformed merge at line " + std::to_string(lineno));
    model.merges.push_back({l, r});
  }
  return model;
}

// ---------------------------------------------------------------------------
// vocabulary
// ---------------------------------------------------------------------------

struct Vocab {
  static constexpr int pad_id = 0;
  static constexpr int bos_id = 1;
  static constexpr int eos_id = 2;
  static constexpr int unk_id = 3;

  std::vector<std::string> id_to_token{"<pad>", "<bos>", "<eos>", "<unk>"};
  std::unordered_map<std::string, int> token_to_id{
      {"<pad>", 0}, {"<bos>", 1}, {"<eos>", 2}, {"<unk>", 3}};

  int id(const std::string& token) const {
    auto it = token_to_id.find(token);
    return it == token_to_id.end() ? unk_id : it->second;
  }

  const std::string& token(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= id_to_token.size())
      throw IndexError("vocab: id out of range: " + std::to_string(id));
    return id_to_token[static_cast<std::size_t>(id)];
  }

  int add(const std::string& token) {
    auto it = token_to_id.find(token);
    if (it != token_to_id.end()) return it->second;
    const int id = static_cast<int>(id_to_token.size());
    id_to_token.push_back(token);
    token_to_id.emplace(token, id);
    return id;
  }

  std::size_t size() const { return id_to_token.size(); }
};

// Subwords with frequency >= min_freq, ordered by (frequency desc, token asc),
// ids assigned after the four reserved specials.
inline Vocab build_vocab(const std::vector<std::vector<std::string>>& encoded_corpus,
                         std::size_t min_freq = 1) {
  if (min_freq < 1) throw ContractError("build_vocab: min_freq must be >= 1");
  std::map<std::string, long long> count;
  for (const auto& sent : encoded_corpus)
    for (const auto& tok : sent) ++count[tok];
  std::vector<std::pair<std::string, long long>> items(count.begin(), count.end());
  std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocab vocab;
  for (const auto& [tok, c] : items)
    if (c >= static_cast<long long>(min_freq)) vocab.add(tok);
  return vocab;
}

inline void save_vocab(const Vocab& vocab, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write vocab: " + path);
  for (std::size_t i = 0; i < vocab.id_to_token.size(); ++i)
    out << vocab.id_to_token[i] << "\t" << i << "\n";
}

inline Vocab load_vocab(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read vocab: " + path);
  Vocab vocab;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw FormatError("vocab: missing tab at line " + std::to_string(lineno));
    const std::string tok = line.substr(0, tab);
    const int id = std::stoi(line.substr(tab + 1));
    if (id < 4) {
      if (static_cast<std::size_t>(id) >= vocab.id_to_token.size() ||
          vocab.id_to_token[static_cast<std::size_t>(id)] != tok)
        throw FormatError("vocab: special id " + std::to_string(id) +
                          " must map to its reserved token");
      continue;
    }
    const int got = vocab.add(tok);
    if (got != id)
      throw FormatError("vocab: non-contiguous id " + std::to_string(id) + " at line " +
                        std::to_string(lineno));
  }
  return vocab;
}

inline std::vector<int> encode_ids(const Vocab& vocab, const std::vector<std::string>& tokens) {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(vocab.id(t));
  return ids;
}

inline std::vector<std::string> decode_tokens(const Vocab& vocab, const std::vector<int>& ids) {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (int id : ids) out.push_back(vocab.token(id));
  return out;
}

}  // namespace metamt
