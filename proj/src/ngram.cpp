#include "unigram/ngram.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "unigram/errors.hpp"
#include "unigram/kernels.hpp"

namespace unigram {

namespace {

const char* smoothing_name(Smoothing s) {
  switch (s) {
    case Smoothing::kWittenBell:
      return "witten_bell";
    case Smoothing::kAddK:
      return "add_k";
    case Smoothing::kJelinekMercer:
      return "jelinek_mercer";
  }
  return "witten_bell";
}

Smoothing smoothing_from_name(const std::string& name) {
  if (name == "witten_bell") return Smoothing::kWittenBell;
  if (name == "add_k") return Smoothing::kAddK;
  if (name == "jelinek_mercer") return Smoothing::kJelinekMercer;
  throw DataError("unknown n-gram smoothing '" + name + "'");
}

}  // namespace

NGramGenerator::NGramGenerator(Alphabet alphabet, NGramOptions options)
    : Generator(std::move(alphabet)), options_(options) {
  if (options_.order < 1) throw std::invalid_argument("n-gram order must be at least 1");
  if (options_.smoothing == Smoothing::kAddK && !(options_.add_k > 0.0)) {
    throw std::invalid_argument("add-k constant must be positive");
  }
  if (options_.smoothing == Smoothing::kJelinekMercer && !(options_.lambda > 0.0 && options_.lambda <= 1.0)) {
    throw std::invalid_argument("interpolation weight must be in (0, 1]");
  }
  const double base = static_cast<double>(this->alphabet().input_size()) + 1.0;
  if (std::pow(base, options_.order - 1) >= 1.8e19) {
    throw std::invalid_argument("n-gram order too large for this alphabet");
  }
  levels_.resize(static_cast<std::size_t>(options_.order));
}

std::uint64_t NGramGenerator::context_key(std::span<const int> prefix, int length) const {
  // Symbols are shifted by one so that a key built from a shorter history
  // never collides with a longer one; positions before the word start are
  // begin-of-word.
  const auto base = static_cast<std::uint64_t>(alphabet().input_size()) + 1;
  const auto bow = static_cast<std::uint64_t>(alphabet().begin_of_word()) + 1;
  std::uint64_t key = 0;
  const auto n = static_cast<int>(prefix.size());
  for (int i = n - length; i < n; ++i) {
    const std::uint64_t sym = i < 0 ? bow : static_cast<std::uint64_t>(prefix[static_cast<std::size_t>(i)]) + 1;
    key = key * base + sym;
  }
  return key;
}

double NGramGenerator::conditional(std::span<const int> prefix, int next) const {
  // Forms are non-empty: end-of-word is impossible as the first symbol and
  // the remaining first-position mass is renormalized.
  if (prefix.empty()) {
    const int eow = alphabet().end_of_word();
    if (next == eow) return 0.0;
    return raw_conditional(prefix, next) / (1.0 - raw_conditional(prefix, eow));
  }
  return raw_conditional(prefix, next);
}

double NGramGenerator::raw_conditional(std::span<const int> prefix, int next) const {
  const double vocab = static_cast<double>(alphabet().output_size());
  const auto top = static_cast<int>(levels_.size()) - 1;
  if (options_.smoothing == Smoothing::kAddK) {
    const auto& level = levels_[static_cast<std::size_t>(top)];
    auto it = level.find(context_key(prefix, top));
    const double c = it == level.end() ? 0.0 : it->second.counts[static_cast<std::size_t>(next)];
    const double total = it == level.end() ? 0.0 : it->second.total;
    return (c + options_.add_k) / (total + options_.add_k * vocab);
  }
  double p = 1.0 / vocab;
  for (int k = 0; k <= top; ++k) {
    const auto& level = levels_[static_cast<std::size_t>(k)];
    auto it = level.find(context_key(prefix, k));
    if (it == level.end() || it->second.total <= 0.0) continue;
    const ContextStats& s = it->second;
    const double c = s.counts[static_cast<std::size_t>(next)];
    if (options_.smoothing == Smoothing::kWittenBell) {
      p = (c + s.distinct * p) / (s.total + s.distinct);
    } else {
      p = (1.0 - options_.lambda) * c / s.total + options_.lambda * p;
    }
  }
  return p;
}

void NGramGenerator::distribution_into(std::span<const int> prefix, std::vector<double>& out) const {
  const auto vocab = static_cast<std::size_t>(alphabet().output_size());
  out.assign(vocab, 1.0 / static_cast<double>(vocab));
  const auto top = static_cast<int>(levels_.size()) - 1;
  if (options_.smoothing == Smoothing::kAddK) {
    const auto& level = levels_[static_cast<std::size_t>(top)];
    auto it = level.find(context_key(prefix, top));
    if (it != level.end()) {
      const double denom = it->second.total + options_.add_k * static_cast<double>(vocab);
      for (std::size_t x = 0; x < vocab; ++x) out[x] = (it->second.counts[x] + options_.add_k) / denom;
    }
  } else {
    for (int k = 0; k <= top; ++k) {
      const auto& level = levels_[static_cast<std::size_t>(k)];
      auto it = level.find(context_key(prefix, k));
      if (it == level.end() || it->second.total <= 0.0) continue;
      const ContextStats& s = it->second;
      for (std::size_t x = 0; x < vocab; ++x) {
        if (options_.smoothing == Smoothing::kWittenBell) {
          out[x] = (s.counts[x] + s.distinct * out[x]) / (s.total + s.distinct);
        } else {
          out[x] = (1.0 - options_.lambda) * s.counts[x] / s.total + options_.lambda * out[x];
        }
      }
    }
  }
  if (prefix.empty()) {
    const auto eow = static_cast<std::size_t>(alphabet().end_of_word());
    const double keep = 1.0 - out[eow];
    out[eow] = 0.0;
    for (auto& p : out) p /= keep;
  }
}

std::vector<double> NGramGenerator::next_distribution(std::span<const int> prefix) const {
  std::vector<double> out;
  distribution_into(prefix, out);
  return out;
}

double NGramGenerator::log_prob(const WordForm& w) const {
  const std::vector<int> symbols = alphabet().encode(w);
  double lp = 0.0;
  const std::span<const int> all(symbols);
  for (std::size_t i = 0; i <= symbols.size(); ++i) {
    const int next = i < symbols.size() ? symbols[i] : alphabet().end_of_word();
    lp += std::log(conditional(all.first(i), next));
  }
  return lp;
}

WordForm NGramGenerator::sample(Rng& rng) const {
  std::vector<int> symbols;
  std::vector<double> dist;
  while (static_cast<int>(symbols.size()) < kMaxSampleLength) {
    distribution_into(symbols, dist);
    const int next = sample_index(dist, rng);
    if (next == alphabet().end_of_word()) break;
    symbols.push_back(next);
  }
  return alphabet().decode(symbols);
}

void NGramGenerator::add_word(const std::vector<int>& symbols, double weight) {
  const auto vocab = static_cast<std::size_t>(alphabet().output_size());
  const std::span<const int> all(symbols);
  for (std::size_t i = 0; i <= symbols.size(); ++i) {
    const auto next = static_cast<std::size_t>(i < symbols.size() ? symbols[i] : alphabet().end_of_word());
    for (int k = 0; k < static_cast<int>(levels_.size()); ++k) {
      ContextStats& s = levels_[static_cast<std::size_t>(k)][context_key(all.first(i), k)];
      if (s.counts.empty()) s.counts.assign(vocab, 0.0);
      if (s.counts[next] == 0.0) s.distinct += 1.0;
      s.counts[next] += weight;
      s.total += weight;
    }
  }
}

FitReport NGramGenerator::fit(const TokenDataset& train, const TokenDataset& dev, const TrainingSchedule&) {
  if (train.empty()) throw DataError("empty training dataset");
  if (dev.empty()) throw DataError("empty dev dataset");
  FitReport report;
  report.initial_dev_cross_entropy = kernels::mean_surprisal(*this, dev);

  std::vector<Level> fresh(levels_.size());
  levels_.swap(fresh);
  try {
    for (const auto& e : train.entries()) add_word(alphabet().encode(e.form), static_cast<double>(e.count));
  } catch (...) {
    levels_.swap(fresh);
    throw;
  }
  bump_version();
  report.final_dev_cross_entropy = kernels::mean_surprisal(*this, dev);
  report.steps = 1;
  return report;
}

std::unique_ptr<Generator> NGramGenerator::clone() const { return std::make_unique<NGramGenerator>(*this); }

std::vector<std::size_t> NGramGenerator::context_counts() const {
  std::vector<std::size_t> out;
  for (const auto& level : levels_) out.push_back(level.size());
  return out;
}

nlohmann::json NGramGenerator::checkpoint_body() const {
  nlohmann::json config = {{"order", options_.order},
                           {"smoothing", smoothing_name(options_.smoothing)},
                           {"add_k", options_.add_k},
                           {"lambda", options_.lambda}};
  nlohmann::json levels = nlohmann::json::array();
  for (const auto& level : levels_) {
    std::vector<std::uint64_t> keys;
    keys.reserve(level.size());
    for (const auto& kv : level) keys.push_back(kv.first);
    std::sort(keys.begin(), keys.end());
    std::vector<double> counts;
    counts.reserve(keys.size() * static_cast<std::size_t>(alphabet().output_size()));
    for (auto key : keys) {
      const auto& c = level.at(key).counts;
      counts.insert(counts.end(), c.begin(), c.end());
    }
    levels.push_back({{"keys", keys}, {"counts", counts}});
  }
  return {{"config", config}, {"parameters", {{"levels", levels}}}, {"training", nlohmann::json::object()}};
}

std::unique_ptr<NGramGenerator> NGramGenerator::from_checkpoint(const Alphabet& alphabet, const nlohmann::json& body,
                                                                std::uint64_t version) {
  try {
    const auto& config = body.at("config");
    NGramOptions options;
    options.order = config.at("order").get<int>();
    options.smoothing = smoothing_from_name(config.at("smoothing").get<std::string>());
    options.add_k = config.at("add_k").get<double>();
    options.lambda = config.at("lambda").get<double>();
    auto g = std::make_unique<NGramGenerator>(alphabet, options);
    const auto& levels = body.at("parameters").at("levels");
    if (levels.size() != g->levels_.size()) throw DataError("corrupt file: n-gram level count mismatch");
    const auto vocab = static_cast<std::size_t>(alphabet.output_size());
    for (std::size_t k = 0; k < levels.size(); ++k) {
      const auto keys = levels[k].at("keys").get<std::vector<std::uint64_t>>();
      const auto counts = levels[k].at("counts").get<std::vector<double>>();
      if (counts.size() != keys.size() * vocab) throw DataError("corrupt file: n-gram count table size");
      for (std::size_t i = 0; i < keys.size(); ++i) {
        ContextStats s;
        s.counts.assign(counts.begin() + static_cast<std::ptrdiff_t>(i * vocab),
                        counts.begin() + static_cast<std::ptrdiff_t>((i + 1) * vocab));
        for (double c : s.counts) {
          if (c < 0.0) throw DataError("corrupt file: negative n-gram count");
          s.total += c;
          if (c > 0.0) s.distinct += 1.0;
        }
        g->levels_[k].emplace(keys[i], std::move(s));
      }
    }
    g->set_version(version);
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("corrupt file: ") + e.what());
  }
}

}  // namespace unigram
