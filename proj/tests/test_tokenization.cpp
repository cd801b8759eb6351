#include <cstdio>
#include <string>
#include <vector>

#include "doctest.h"
#include "metamt/bpe.hpp"
#include "metamt/rng.hpp"

using namespace metamt;

namespace {

std::vector<std::string> low_corpus() {
  std::vector<std::string> lines;
  for (int i = 0; i < 5; ++i) lines.push_back("low");
  for (int i = 0; i < 2; ++i) lines.push_back("lowest");
  return lines;
}

std::string random_word(Rng& rng) {
  static const char alphabet[] = "abcdefghijklmnopqrstuvwxyz0123456789";
  std::string w;
  const std::size_t len = 1 + rng.below(8);
  for (std::size_t i = 0; i < len; ++i) w += alphabet[rng.below(36)];
  return w;
}

std::string random_text(Rng& rng) {
  std::string text;
  const std::size_t words = 1 + rng.below(10);
  for (std::size_t i = 0; i < words; ++i) {
    if (i) text += ' ';
    text += random_word(rng);
  }
  return text;
}

}  // namespace

TEST_CASE("bpe_learn reproduces the hand-executed merge trace") {
  // words: l o w (x5), l o w e s t (x2)
  // pair counts: (l,o)=7, (o,w)=7, (w,e)=2, (e,s)=2, (s,t)=2
  // 7-tie breaks to the lexicographically smaller pair (l,o), and so on.
  auto model = bpe_learn(low_corpus(), 5);
  REQUIRE(model.merges.size() == 5);
  CHECK(model.merges[0] == std::pair<std::string, std::string>{"l", "o"});
  CHECK(model.merges[1] == std::pair<std::string, std::string>{"lo", "w"});
  CHECK(model.merges[2] == std::pair<std::string, std::string>{"e", "s"});
  CHECK(model.merges[3] == std::pair<std::string, std::string>{"es", "t"});
  CHECK(model.merges[4] == std::pair<std::string, std::string>{"low", "est"});

  // "low" becomes a single marker-free token
  auto toks = bpe_encode_word(model, "low");
  REQUIRE(toks.size() == 1);
  CHECK(toks[0] == "low");

  CHECK(bpe_learn(low_corpus(), 0).merges.empty());
  CHECK_THROWS_AS(bpe_learn({}, 3), DataError);
  CHECK_THROWS_AS(bpe_learn({"", "  "}, 3), DataError);
}

TEST_CASE("bpe tie between equal-frequency pairs is lexicographic") {
  // (a,b) and (c,d) both occur 3 times; (a,b) merges first.
  std::vector<std::string> corpus{"ab ab ab cd cd cd"};
  auto model = bpe_learn(corpus, 2);
  REQUIRE(model.merges.size() == 2);
  CHECK(model.merges[0] == std::pair<std::string, std::string>{"a", "b"});
  CHECK(model.merges[1] == std::pair<std::string, std::string>{"c", "d"});
}

TEST_CASE("bpe_encode character fallback and marker convention") {
  BpeModel empty;
  auto toks = bpe_encode(empty, "ab");
  REQUIRE(toks.size() == 2);
  CHECK(toks[0] == "a@@");
  CHECK(toks[1] == "b");

  CHECK(bpe_decode({"un@@", "known"}) == "unknown");
  CHECK(bpe_decode({"plain", "words"}) == "plain words");
}

TEST_CASE("bpe roundtrip over 1000 random strings") {
  auto model = bpe_learn(low_corpus(), 4);
  Rng rng(31337);
  for (int i = 0; i < 1000; ++i) {
    const auto text = random_text(rng);
    CHECK(bpe_decode(bpe_encode(model, text), model.marker) == text);
  }
  BpeModel empty;
  for (int i = 0; i < 200; ++i) {
    const auto text = random_text(rng);
    CHECK(bpe_decode(bpe_encode(empty, text), empty.marker) == text);
  }
}

TEST_CASE("more merge ops never increase a training word's token count") {
  std::vector<std::string> corpus{"banana bandana ban", "an and banana bend",
                                  "sandbank bananas an"};
  std::vector<std::string> words;
  for (const auto& line : corpus)
    for (const auto& w : split_ws(line)) words.push_back(w);

  std::vector<std::size_t> prev(words.size(), SIZE_MAX);
  for (std::size_t ops = 0; ops <= 12; ++ops) {
    auto model = bpe_learn(corpus, ops);
    for (std::size_t w = 0; w < words.size(); ++w) {
      const auto count = bpe_encode_word(model, words[w]).size();
      CHECK(count <= prev[w]);
      prev[w] = count;
    }
  }
}

TEST_CASE("bpe learning is deterministic") {
  std::vector<std::string> corpus{"the cat sat on the mat", "the bat and the rat"};
  auto a = bpe_learn(corpus, 8);
  auto b = bpe_learn(corpus, 8);
  CHECK(a.merges == b.merges);
}

TEST_CASE("bpe model file roundtrip") {
  auto model = bpe_learn(low_corpus(), 5);
  const std::string path = "bpe_test_model.txt";
  save_bpe(model, path);
  auto loaded = load_bpe(path);
  CHECK(loaded.merges == model.merges);
  CHECK(loaded.marker == model.marker);
  std::remove(path.c_str());
}

TEST_CASE("build_vocab ordering, specials and unk fallback") {
  std::vector<std::vector<std::string>> corpus{{"b", "a", "b"}, {"b", "a", "c"}};
  auto vocab = build_vocab(corpus, 1);
  CHECK(vocab.token(Vocab::pad_id) == "<pad>");
  CHECK(vocab.token(Vocab::bos_id) == "<bos>");
  CHECK(vocab.token(Vocab::eos_id) == "<eos>");
  CHECK(vocab.token(Vocab::unk_id) == "<unk>");
  // counts: b=3, a=2, c=1 -> ids 4, 5, 6
  CHECK(vocab.id("b") == 4);
  CHECK(vocab.id("a") == 5);
  CHECK(vocab.id("c") == 6);
  CHECK(vocab.id("zzz") == Vocab::unk_id);

  auto filtered = build_vocab(corpus, 2);
  CHECK(filtered.size() == 6);  // specials + b + a
  CHECK(filtered.id("c") == Vocab::unk_id);

  // frequency tie between tokens breaks by token text
  std::vector<std::vector<std::string>> tied{{"z", "y"}};
  auto tv = build_vocab(tied, 1);
  CHECK(tv.id("y") == 4);
  CHECK(tv.id("z") == 5);
}

TEST_CASE("vocab file roundtrip") {
  std::vector<std::vector<std::string>> corpus{{"hello", "world", "hello"}};
  auto vocab = build_vocab(corpus, 1);
  const std::string path = "vocab_test.txt";
  save_vocab(vocab, path);
  auto loaded = load_vocab(path);
  CHECK(loaded.id_to_token == vocab.id_to_token);
  std::remove(path.c_str());
}
