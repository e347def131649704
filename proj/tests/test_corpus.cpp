#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "unigram/corpus.hpp"
#include "unigram/errors.hpp"
#include "unigram/utf8.hpp"

using namespace unigram;
using oracle::wf;

namespace {

std::vector<std::string> utf8_all(const std::vector<std::u32string>& xs) {
  std::vector<std::string> out;
  for (const auto& x : xs) out.push_back(utf8::encode(x));
  return out;
}

// Same tokenization rule, written independently over bytes for ASCII input.
std::vector<std::string> reference_tokenize(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  std::string tok;
  while (in >> tok) {
    std::size_t b = 0, e = tok.size();
    while (b < e && std::ispunct(static_cast<unsigned char>(tok[b]))) ++b;
    while (e > b && std::ispunct(static_cast<unsigned char>(tok[e - 1]))) --e;
    std::string t = tok.substr(b, e - b);
    for (auto& c : t) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

}  // namespace

TEST_CASE("utf8 round trip and rejection") {
  const std::string s = "Ærø ßπж";
  CHECK(utf8::encode(utf8::decode(s)) == s);
  CHECK_THROWS_AS(utf8::decode("\xC3"), DataError);
  CHECK_THROWS_AS(utf8::decode("\xC0\xAF"), DataError);  // overlong '/'
  CHECK_THROWS_AS(utf8::decode("\xED\xA0\x80"), DataError);  // surrogate
  CHECK(utf8::to_lower(U'Ж') == U'ж');
  CHECK(utf8::to_lower(U'Σ') == U'σ');
}

TEST_CASE("tokenize") {
  CHECK(utf8_all(tokenize("the cat sat.")) == std::vector<std::string>{"the", "cat", "sat"});
  CHECK(tokenize("").empty());
  CHECK(tokenize("   \t ").empty());
  CHECK(utf8_all(tokenize("A loooong summer")) == std::vector<std::string>{"a", "loooong", "summer"});
  CHECK(utf8_all(tokenize("“Oh,” she said…")) == std::vector<std::string>{"oh", "she", "said"});
  CHECK(utf8_all(tokenize("don't stop")) == std::vector<std::string>{"don't", "stop"});

  TokenizerOptions keep;
  keep.lowercase = false;
  keep.strip_punctuation = false;
  CHECK(utf8_all(tokenize("Hi, There", keep)) == std::vector<std::string>{"Hi,", "There"});

  for (const std::string line : {"Hello, World!", "  (a)  b.c  ", "'tis -- nought?", "x ... y", "A;B;C"}) {
    CAPTURE(line);
    CHECK(utf8_all(tokenize(line)) == reference_tokenize(line));
  }
}

TEST_CASE("filter_sentence") {
  const auto az = oracle::alphabet_of("abcdefghijklmnopqrstuvwxyz");
  CHECK(filter_sentence(tokenize("cat"), az));
  CHECK_FALSE(filter_sentence(tokenize("ca7"), az));
  CHECK(filter_sentence(tokenize("aardvark aardwolf"), az));
  // Enlarging the alphabet never flips true to false.
  const auto az7 = oracle::alphabet_of("abcdefghijklmnopqrstuvwxyz7");
  for (const char* s : {"cat", "ca7", "dog 7", "zz"}) {
    if (filter_sentence(tokenize(s), az)) CHECK(filter_sentence(tokenize(s), az7));
  }
  CHECK(filter_sentence(tokenize("ca7"), az7));
}

TEST_CASE("alphabet") {
  const auto ab = oracle::alphabet_of("xy");
  CHECK(ab.size() == 2);
  CHECK(ab.end_of_word() == 2);
  CHECK(ab.begin_of_word() == 3);
  CHECK(ab.encode(wf("yx")) == std::vector<int>{1, 0});
  CHECK(ab.decode(std::vector<int>{0, 1}) == wf("xy"));
  CHECK_THROWS_WITH_AS(ab.encode(wf("xz")), doctest::Contains("unknown grapheme"), DataError);
  CHECK_THROWS_AS(oracle::alphabet_of(""), DataError);
  CHECK_THROWS_AS(oracle::alphabet_of("xx"), DataError);
  std::istringstream lines("a\nb\n\nc\n");
  CHECK(Alphabet::from_utf8_lines(lines).size() == 3);
}

TEST_CASE("word forms are non-empty") {
  CHECK_THROWS_AS(WordForm(std::u32string{}), std::invalid_argument);
  CHECK(wf("ab") < wf("b"));
}

TEST_CASE("token dataset order, totals and TSV") {
  const auto d = TokenDataset::from_tokens(std::vector<WordForm>{wf("b"), wf("a"), wf("c"), wf("a"), wf("b"), wf("a")});
  REQUIRE(d.type_count() == 3);
  CHECK(d.total_tokens() == 6);
  CHECK(d.entries()[0].form == wf("a"));
  CHECK(d.entries()[1].form == wf("b"));
  CHECK(d.entries()[2].form == wf("c"));
  std::int64_t sum = 0;
  for (const auto& e : d.entries()) sum += e.count;
  CHECK(sum == d.total_tokens());

  std::ostringstream out;
  d.write_tsv(out);
  CHECK(out.str() == "a\t3\nb\t2\nc\t1\n");
  std::istringstream in(out.str());
  const auto back = TokenDataset::read_tsv(in);
  CHECK(back.count_of(wf("a")) == 3);
  CHECK(back.count_of(wf("zz")) == 0);

  for (const char* bad : {"a\n", "a\t0\n", "a\t1\na\t2\n", "a\tx\n", "\t3\n", "a\t2x\n"}) {
    CAPTURE(bad);
    std::istringstream s(bad);
    CHECK_THROWS_AS(TokenDataset::read_tsv(s), DataError);
  }
}

TEST_CASE("type dataset") {
  const auto d = TokenDataset::from_counts({{wf("a"), 3}, {wf("b"), 1}});
  const auto t = build_type_dataset(d);
  CHECK(t.forms() == std::vector<WordForm>{wf("a"), wf("b")});
  CHECK(build_type_dataset(TokenDataset::from_counts({{wf("a"), 1}})).forms() == std::vector<WordForm>{wf("a")});
  CHECK(t.size() <= static_cast<std::size_t>(d.total_tokens()));
  CHECK(t.as_token_dataset().total_tokens() == 2);
  std::ostringstream out;
  t.write(out);
  std::istringstream in(out.str());
  CHECK(TypeDataset::read(in).forms() == t.forms());
  std::istringstream dup("a\na\n");
  CHECK_THROWS_AS(TypeDataset::read(dup), DataError);
}

TEST_CASE("build_token_dataset under and over the cap") {
  const auto src = TokenDataset::from_counts({{wf("a"), 3}, {wf("b"), 1}});
  const auto exact = build_token_dataset(src, 10, 1);
  CHECK(exact.count_of(wf("a")) == 3);
  CHECK(exact.count_of(wf("b")) == 1);
  CHECK(exact.total_tokens() == 4);
  CHECK_THROWS_AS(build_token_dataset(src, 0, 1), std::invalid_argument);
  CHECK_THROWS_WITH_AS(build_token_dataset(TokenDataset{}, 5, 1), "empty corpus", DataError);

  const auto skewed = TokenDataset::from_counts({{wf("a"), 999999}, {wf("b"), 1}});
  for (std::uint64_t seed = 0; seed < 20; ++seed) CHECK(build_token_dataset(skewed, 10, seed).total_tokens() == 10);
}

TEST_CASE("resampling preserves expected frequencies") {
  // 1000 seeds, cap 50 from {a:600, b:300, c:100}: per-form mean count within 3
  // standard errors of the binomial mean.
  const auto src = TokenDataset::from_counts({{wf("a"), 600}, {wf("b"), 300}, {wf("c"), 100}});
  const int seeds = 1000;
  const double cap = 50;
  for (const auto& [form, p] : std::vector<std::pair<WordForm, double>>{{wf("a"), 0.6}, {wf("b"), 0.3}, {wf("c"), 0.1}}) {
    double sum = 0;
    for (int s = 0; s < seeds; ++s) {
      sum += static_cast<double>(build_token_dataset(src, 50, static_cast<std::uint64_t>(s)).count_of(form));
    }
    const double mean = sum / seeds;
    const double se = std::sqrt(cap * p * (1 - p) / seeds);
    CAPTURE(form.utf8());
    CHECK(std::abs(mean - cap * p) < 3 * se);
  }
}

TEST_CASE("split") {
  std::vector<Sentence> sentences;
  for (int i = 0; i < 10; ++i) sentences.push_back({wf(std::string(static_cast<std::size_t>(i + 1), 'a'))});
  const auto s = split(sentences, {0.8, 0.1, 0.1}, 7);
  CHECK(s.train.size() == 8);
  CHECK(s.dev.size() == 1);
  CHECK(s.test.size() == 1);
  const auto again = split(sentences, {0.8, 0.1, 0.1}, 7);
  CHECK(again.train == s.train);
  CHECK(again.dev == s.dev);
  std::vector<Sentence> all = s.train;
  all.insert(all.end(), s.dev.begin(), s.dev.end());
  all.insert(all.end(), s.test.begin(), s.test.end());
  std::sort(all.begin(), all.end());
  std::sort(sentences.begin(), sentences.end());
  CHECK(all == sentences);
  CHECK_THROWS_AS(split({sentences[0], sentences[1]}, {0.8, 0.1, 0.1}, 1), DataError);
  CHECK_THROWS_AS(split(sentences, {0.5, 0.1, 0.1}, 1), std::invalid_argument);
}

TEST_CASE("read_sentences drops out-of-alphabet sentences") {
  const auto az = oracle::alphabet_of("abcdefghijklmnopqrstuvwxyz'");
  std::istringstream in("The cat.\n\nIt's 4 o'clock\nNo, no!\n");
  IngestStats stats;
  const auto s = read_sentences(in, az, {}, &stats);
  REQUIRE(s.size() == 2);
  CHECK(s[0] == Sentence{wf("the"), wf("cat")});
  CHECK(s[1] == Sentence{wf("no"), wf("no")});
  CHECK(stats.lines == 4);
  CHECK(stats.empty_lines == 1);
  CHECK(stats.rejected_sentences == 1);
  CHECK(flatten(s).size() == 4);
}
