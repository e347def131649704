#include "unigram/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "unigram/errors.hpp"
#include "unigram/utf8.hpp"

namespace unigram {

namespace {

bool is_space(Grapheme g) {
  return g == U' ' || g == U'\t' || g == U'\n' || g == U'\r' || g == U'\v' || g == U'\f' ||
         g == 0xA0 || g == 0x2009 || g == 0x200A || g == 0x202F || g == 0x3000;
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

void sort_entries(std::vector<TokenDataset::Entry>& entries) {
  std::sort(entries.begin(), entries.end(), [](const auto& x, const auto& y) {
    if (x.count != y.count) return x.count > y.count;
    return x.form < y.form;
  });
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  return in;
}

}  // namespace

WordForm::WordForm(std::u32string chars) : chars_(std::move(chars)) {
  if (chars_.empty()) throw std::invalid_argument("word form must be non-empty");
}

WordForm WordForm::from_utf8(std::string_view text) { return WordForm(utf8::decode(text)); }

std::string WordForm::utf8() const { return utf8::encode(chars_); }

Alphabet::Alphabet(std::vector<Grapheme> graphemes) : graphemes_(std::move(graphemes)) {
  if (graphemes_.empty()) throw DataError("alphabet is empty");
  for (std::size_t i = 0; i < graphemes_.size(); ++i) {
    const Grapheme g = graphemes_[i];
    if (g == kEndOfWordMarker || g == kBeginOfWordMarker) {
      throw DataError("alphabet contains a reserved marker");
    }
    if (is_space(g)) throw DataError("alphabet contains whitespace");
    if (!index_.emplace(g, static_cast<int>(i)).second) {
      throw DataError("duplicate grapheme in alphabet: " + utf8::encode(g));
    }
  }
}

Alphabet Alphabet::from_utf8_lines(std::istream& in) {
  std::vector<Grapheme> graphemes;
  std::string line;
  while (std::getline(in, line)) {
    line = strip_cr(line);
    if (line.empty()) continue;
    const std::u32string chars = utf8::decode(line);
    if (chars.size() != 1) throw DataError("alphabet line is not a single grapheme: " + line);
    graphemes.push_back(chars.front());
  }
  return Alphabet(std::move(graphemes));
}

Alphabet Alphabet::load(const std::filesystem::path& path) {
  auto in = open_in(path);
  return from_utf8_lines(in);
}

void Alphabet::save(const std::filesystem::path& path) const {
  auto out = open_out(path);
  for (Grapheme g : graphemes_) out << utf8::encode(g) << '\n';
}

std::optional<int> Alphabet::index_of(Grapheme g) const {
  auto it = index_.find(g);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

bool Alphabet::covers(const WordForm& w) const {
  return std::all_of(w.chars().begin(), w.chars().end(), [this](Grapheme g) { return contains(g); });
}

std::vector<int> Alphabet::encode(const WordForm& w) const {
  std::vector<int> symbols;
  symbols.reserve(w.size());
  for (Grapheme g : w.chars()) {
    auto it = index_.find(g);
    if (it == index_.end()) throw DataError("unknown grapheme '" + utf8::encode(g) + "'");
    symbols.push_back(it->second);
  }
  return symbols;
}

WordForm Alphabet::decode(std::span<const int> symbols) const {
  std::u32string chars;
  chars.reserve(symbols.size());
  for (int s : symbols) chars.push_back(grapheme(s));
  return WordForm(std::move(chars));
}

TokenDataset TokenDataset::from_counts(
    const std::unordered_map<WordForm, std::int64_t, WordFormHash>& counts) {
  TokenDataset td;
  td.entries_.reserve(counts.size());
  for (const auto& [form, count] : counts) {
    if (count < 0) throw DataError("negative token count");
    if (count == 0) continue;
    if (form.empty()) throw DataError("empty word form");
    td.entries_.push_back({form, count});
    td.total_ += count;
  }
  sort_entries(td.entries_);
  td.lookup_.reserve(td.entries_.size());
  for (const auto& e : td.entries_) td.lookup_.emplace(e.form, e.count);
  return td;
}

TokenDataset TokenDataset::from_tokens(std::span<const WordForm> tokens) {
  std::unordered_map<WordForm, std::int64_t, WordFormHash> counts;
  for (const auto& t : tokens) ++counts[t];
  return from_counts(counts);
}

std::int64_t TokenDataset::count_of(const WordForm& w) const {
  auto it = lookup_.find(w);
  return it == lookup_.end() ? 0 : it->second;
}

std::vector<WordForm> TokenDataset::expand() const {
  std::vector<WordForm> tokens;
  tokens.reserve(static_cast<std::size_t>(total_));
  for (const auto& e : entries_) {
    for (std::int64_t i = 0; i < e.count; ++i) tokens.push_back(e.form);
  }
  return tokens;
}

void TokenDataset::write_tsv(std::ostream& out) const {
  for (const auto& e : entries_) out << e.form.utf8() << '\t' << e.count << '\n';
}

TokenDataset TokenDataset::read_tsv(std::istream& in) {
  std::unordered_map<WordForm, std::int64_t, WordFormHash> counts;
  std::string line;
  std::int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos || tab == 0) {
      throw DataError("malformed token dataset line " + std::to_string(line_no));
    }
    std::int64_t count = 0;
    try {
      std::size_t used = 0;
      count = std::stoll(line.substr(tab + 1), &used);
      if (used != line.size() - tab - 1) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw DataError("bad count on token dataset line " + std::to_string(line_no));
    }
    if (count < 1) throw DataError("non-positive count on line " + std::to_string(line_no));
    auto [it, inserted] = counts.emplace(WordForm::from_utf8(line.substr(0, tab)), count);
    if (!inserted) throw DataError("duplicate form on line " + std::to_string(line_no));
  }
  return from_counts(counts);
}

void TokenDataset::save(const std::filesystem::path& path) const {
  auto out = open_out(path);
  write_tsv(out);
}

TokenDataset TokenDataset::load(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_tsv(in);
}

TypeDataset::TypeDataset(std::vector<WordForm> forms) : forms_(std::move(forms)) {
  std::sort(forms_.begin(), forms_.end());
  if (std::adjacent_find(forms_.begin(), forms_.end()) != forms_.end()) {
    throw DataError("duplicate form in type dataset");
  }
}

TokenDataset TypeDataset::as_token_dataset() const {
  std::unordered_map<WordForm, std::int64_t, WordFormHash> counts;
  counts.reserve(forms_.size());
  for (const auto& f : forms_) counts.emplace(f, 1);
  return TokenDataset::from_counts(counts);
}

void TypeDataset::write(std::ostream& out) const {
  for (const auto& f : forms_) out << f.utf8() << '\n';
}

TypeDataset TypeDataset::read(std::istream& in) {
  std::vector<WordForm> forms;
  std::string line;
  while (std::getline(in, line)) {
    line = strip_cr(line);
    if (!line.empty()) forms.push_back(WordForm::from_utf8(line));
  }
  return TypeDataset(std::move(forms));
}

void TypeDataset::save(const std::filesystem::path& path) const {
  auto out = open_out(path);
  write(out);
}

TypeDataset TypeDataset::load(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read(in);
}

bool is_strippable_punctuation(Grapheme g) {
  if (g < 0x80) {
    return (g >= U'!' && g <= U'/') || (g >= U':' && g <= U'@') || (g >= U'[' && g <= U'`') ||
           (g >= U'{' && g <= U'~');
  }
  switch (g) {
    case 0xA1:    // inverted exclamation
    case 0xAB:    // left guillemet
    case 0xBB:    // right guillemet
    case 0xBF:    // inverted question mark
    case 0x2013:  // en dash
    case 0x2014:  // em dash
    case 0x2018:
    case 0x2019:
    case 0x201C:
    case 0x201D:
    case 0x2026:  // ellipsis
      return true;
    default:
      return false;
  }
}

std::vector<std::u32string> tokenize(std::string_view line, const TokenizerOptions& options) {
  const std::u32string chars = utf8::decode(line);
  std::vector<std::u32string> tokens;
  std::size_t i = 0;
  while (i < chars.size()) {
    while (i < chars.size() && is_space(chars[i])) ++i;
    std::size_t j = i;
    while (j < chars.size() && !is_space(chars[j])) ++j;
    std::size_t begin = i;
    std::size_t end = j;
    if (options.strip_punctuation) {
      while (begin < end && is_strippable_punctuation(chars[begin])) ++begin;
      while (end > begin && is_strippable_punctuation(chars[end - 1])) --end;
    }
    if (begin < end) {
      std::u32string token = chars.substr(begin, end - begin);
      if (options.lowercase) {
        for (auto& c : token) c = utf8::to_lower(c);
      }
      tokens.push_back(std::move(token));
    }
    i = j;
  }
  return tokens;
}

bool filter_sentence(std::span<const std::u32string> tokens, const Alphabet& alphabet) {
  for (const auto& t : tokens) {
    for (Grapheme g : t) {
      if (!alphabet.contains(g)) return false;
    }
  }
  return true;
}

TokenDataset build_token_dataset(std::span<const WordForm> tokens, std::int64_t cap, std::uint64_t seed) {
  return build_token_dataset(TokenDataset::from_tokens(tokens), cap, seed);
}

TokenDataset build_token_dataset(const TokenDataset& source, std::int64_t cap, std::uint64_t seed) {
  if (cap < 1) throw std::invalid_argument("token cap must be at least 1");
  if (source.empty()) throw DataError("empty corpus");
  if (source.total_tokens() <= cap) return source;

  std::vector<double> weights;
  weights.reserve(source.type_count());
  for (const auto& e : source.entries()) weights.push_back(static_cast<double>(e.count));
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  std::mt19937_64 rng(seed);
  std::vector<std::int64_t> drawn(source.type_count(), 0);
  for (std::int64_t i = 0; i < cap; ++i) ++drawn[pick(rng)];

  std::unordered_map<WordForm, std::int64_t, WordFormHash> counts;
  for (std::size_t k = 0; k < drawn.size(); ++k) {
    if (drawn[k] > 0) counts.emplace(source.entries()[k].form, drawn[k]);
  }
  return TokenDataset::from_counts(counts);
}

TypeDataset build_type_dataset(const TokenDataset& tokens) {
  std::vector<WordForm> forms;
  forms.reserve(tokens.type_count());
  for (const auto& e : tokens.entries()) forms.push_back(e.form);
  return TypeDataset(std::move(forms));
}

CorpusSplit split(std::vector<Sentence> sentences, std::array<double, 3> ratios, std::uint64_t seed) {
  const double sum = ratios[0] + ratios[1] + ratios[2];
  if (std::any_of(ratios.begin(), ratios.end(), [](double r) { return !(r > 0.0); }) ||
      std::abs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument("split ratios must be positive and sum to 1");
  }
  const auto n = static_cast<std::int64_t>(sentences.size());
  const auto n_train = static_cast<std::int64_t>(std::llround(ratios[0] * static_cast<double>(n)));
  const auto n_dev = static_cast<std::int64_t>(std::llround(ratios[1] * static_cast<double>(n)));
  const std::int64_t n_test = n - n_train - n_dev;
  if (n_train < 1 || n_dev < 1 || n_test < 1) {
    throw DataError("too few sentences (" + std::to_string(n) + ") for a non-empty split");
  }

  std::vector<std::size_t> order(sentences.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  CorpusSplit out;
  out.train.reserve(static_cast<std::size_t>(n_train));
  out.dev.reserve(static_cast<std::size_t>(n_dev));
  out.test.reserve(static_cast<std::size_t>(n_test));
  for (std::int64_t i = 0; i < n; ++i) {
    auto& dest = i < n_train ? out.train : (i < n_train + n_dev ? out.dev : out.test);
    dest.push_back(std::move(sentences[order[static_cast<std::size_t>(i)]]));
  }
  return out;
}

std::vector<Sentence> read_sentences(std::istream& in, const Alphabet& alphabet,
                                     const TokenizerOptions& options, IngestStats* stats) {
  IngestStats local;
  std::vector<Sentence> sentences;
  std::string line;
  while (std::getline(in, line)) {
    ++local.lines;
    const auto tokens = tokenize(line, options);
    if (tokens.empty()) {
      ++local.empty_lines;
      continue;
    }
    if (!filter_sentence(tokens, alphabet)) {
      ++local.rejected_sentences;
      continue;
    }
    Sentence s;
    s.reserve(tokens.size());
    for (const auto& t : tokens) s.emplace_back(t);
    sentences.push_back(std::move(s));
  }
  if (stats != nullptr) *stats = local;
  return sentences;
}

std::vector<WordForm> flatten(std::span<const Sentence> sentences) {
  std::vector<WordForm> tokens;
  for (const auto& s : sentences) tokens.insert(tokens.end(), s.begin(), s.end());
  return tokens;
}

}  // namespace unigram
