#ifndef UNIGRAM_CORPUS_HPP_
#define UNIGRAM_CORPUS_HPP_

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace unigram {

using Grapheme = char32_t;

// A non-empty sequence of graphemes. The end-of-word marker is implied and
// never stored.
class WordForm {
 public:
  WordForm() = default;
  explicit WordForm(std::u32string chars);

  static WordForm from_utf8(std::string_view text);

  const std::u32string& chars() const { return chars_; }
  std::size_t size() const { return chars_.size(); }
  bool empty() const { return chars_.empty(); }
  std::string utf8() const;

  // Code point order, which coincides with UTF-8 byte order.
  auto operator<=>(const WordForm&) const = default;

 private:
  std::u32string chars_;
};

struct WordFormHash {
  std::size_t operator()(const WordForm& w) const noexcept {
    return std::hash<std::u32string>{}(w.chars());
  }
};

using Sentence = std::vector<WordForm>;

// Ordered set of content graphemes. Index i < size() is the i-th grapheme;
// end_of_word() == size() and begin_of_word() == size() + 1 are reserved
// symbols that never appear in text.
class Alphabet {
 public:
  static constexpr Grapheme kEndOfWordMarker = 0xE000;
  static constexpr Grapheme kBeginOfWordMarker = 0xE001;

  Alphabet() = default;
  explicit Alphabet(std::vector<Grapheme> graphemes);

  static Alphabet from_utf8_lines(std::istream& in);
  static Alphabet load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  int size() const { return static_cast<int>(graphemes_.size()); }
  int end_of_word() const { return size(); }
  int begin_of_word() const { return size() + 1; }
  // Symbols a generator predicts: content graphemes plus end-of-word.
  int output_size() const { return size() + 1; }
  // Symbols a generator conditions on: content, end-of-word, begin-of-word.
  int input_size() const { return size() + 2; }

  bool contains(Grapheme g) const { return index_.count(g) != 0; }
  std::optional<int> index_of(Grapheme g) const;
  Grapheme grapheme(int index) const { return graphemes_.at(static_cast<std::size_t>(index)); }
  const std::vector<Grapheme>& graphemes() const { return graphemes_; }

  bool covers(const WordForm& w) const;
  // Maps a form to symbol indices; throws DataError("unknown grapheme ...").
  std::vector<int> encode(const WordForm& w) const;
  WordForm decode(std::span<const int> symbols) const;

  bool operator==(const Alphabet& other) const { return graphemes_ == other.graphemes_; }

 private:
  std::vector<Grapheme> graphemes_;
  std::unordered_map<Grapheme, int> index_;
};

// Multiset of forms. Entries are kept sorted by descending count, then by
// form, which is also the on-disk order and the token visitation order.
class TokenDataset {
 public:
  struct Entry {
    WordForm form;
    std::int64_t count = 0;
  };

  TokenDataset() = default;
  static TokenDataset from_counts(const std::unordered_map<WordForm, std::int64_t, WordFormHash>& counts);
  static TokenDataset from_tokens(std::span<const WordForm> tokens);

  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t type_count() const { return entries_.size(); }
  std::int64_t total_tokens() const { return total_; }
  bool empty() const { return entries_.empty(); }
  std::int64_t count_of(const WordForm& w) const;

  // Every token in entry order, each entry repeated count times.
  std::vector<WordForm> expand() const;

  void write_tsv(std::ostream& out) const;
  static TokenDataset read_tsv(std::istream& in);
  void save(const std::filesystem::path& path) const;
  static TokenDataset load(const std::filesystem::path& path);

 private:
  std::vector<Entry> entries_;
  std::unordered_map<WordForm, std::int64_t, WordFormHash> lookup_;
  std::int64_t total_ = 0;
};

class TypeDataset {
 public:
  TypeDataset() = default;
  explicit TypeDataset(std::vector<WordForm> forms);

  const std::vector<WordForm>& forms() const { return forms_; }
  std::size_t size() const { return forms_.size(); }
  // Each form with count 1.
  TokenDataset as_token_dataset() const;

  void write(std::ostream& out) const;
  static TypeDataset read(std::istream& in);
  void save(const std::filesystem::path& path) const;
  static TypeDataset load(const std::filesystem::path& path);

 private:
  std::vector<WordForm> forms_;
};

struct TokenizerOptions {
  bool lowercase = true;
  bool strip_punctuation = true;
};

// Characters removed from both ends of each whitespace-delimited token:
// ASCII punctuation plus common typographic quotes, dashes and ellipsis.
bool is_strippable_punctuation(Grapheme g);

std::vector<std::u32string> tokenize(std::string_view line, const TokenizerOptions& options = {});

bool filter_sentence(std::span<const std::u32string> tokens, const Alphabet& alphabet);

// Exact counts when the stream holds at most `cap` tokens, otherwise `cap`
// i.i.d. draws from the empirical frequencies.
TokenDataset build_token_dataset(std::span<const WordForm> tokens, std::int64_t cap, std::uint64_t seed);
TokenDataset build_token_dataset(const TokenDataset& source, std::int64_t cap, std::uint64_t seed);

TypeDataset build_type_dataset(const TokenDataset& tokens);

struct CorpusSplit {
  std::vector<Sentence> train;
  std::vector<Sentence> dev;
  std::vector<Sentence> test;
};

CorpusSplit split(std::vector<Sentence> sentences, std::array<double, 3> ratios, std::uint64_t seed);

struct IngestStats {
  std::int64_t lines = 0;
  std::int64_t empty_lines = 0;
  std::int64_t rejected_sentences = 0;
};

// Reads one sentence per line, tokenizes, and drops every sentence with a
// grapheme outside the alphabet.
std::vector<Sentence> read_sentences(std::istream& in, const Alphabet& alphabet,
                                     const TokenizerOptions& options, IngestStats* stats = nullptr);

std::vector<WordForm> flatten(std::span<const Sentence> sentences);

}  // namespace unigram

#endif  // UNIGRAM_CORPUS_HPP_
