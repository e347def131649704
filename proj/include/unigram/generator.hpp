#ifndef UNIGRAM_GENERATOR_HPP_
#define UNIGRAM_GENERATOR_HPP_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <string>

#include "json.hpp"
#include "unigram/corpus.hpp"

namespace unigram {

using Rng = std::mt19937_64;

// Anything that assigns a log-probability (nats) to a word form. log_prob
// must be safe to call concurrently.
class LogProbModel {
 public:
  virtual ~LogProbModel() = default;
  virtual double log_prob(const WordForm& w) const = 0;
};

// Settings for gradient-trained generators. The n-gram generator ignores
// everything except `seed`.
struct TrainingSchedule {
  int batch_size = 32;
  double learning_rate = 1e-2;
  // Learning rate is multiplied by this factor after each evaluation that
  // fails to improve the best dev loss.
  double lr_decay = 0.5;
  double clip_norm = 5.0;
  int eval_every = 200;
  // Stop after this many consecutive evaluations with increasing dev loss.
  int patience = 5;
  // Step budget (T). Training stops here even if early stopping has not fired.
  std::int64_t max_steps = 20000;
  bool parallel = true;
  std::uint64_t seed = 1;

  void validate() const;
};

struct FitReport {
  double initial_dev_cross_entropy = 0.0;
  double final_dev_cross_entropy = 0.0;
  std::int64_t steps = 0;
  bool early_stopped = false;
};

// A distribution over all finite strings of an alphabet, terminated by the
// end-of-word symbol.
class Generator : public LogProbModel {
 public:
  // Samples are truncated at this length: a draw that has produced this many
  // graphemes without emitting end-of-word is returned as is. The residual
  // mass moved onto truncated strings is below 1e-12 for any trained model
  // whose end-of-word probability stays above 0.35 per position.
  static constexpr int kMaxSampleLength = 64;

  explicit Generator(Alphabet alphabet) : alphabet_(std::move(alphabet)) {}

  virtual std::string kind() const = 0;
  virtual WordForm sample(Rng& rng) const = 0;
  virtual FitReport fit(const TokenDataset& train, const TokenDataset& dev,
                        const TrainingSchedule& schedule) = 0;
  virtual std::unique_ptr<Generator> clone() const = 0;
  // Checkpoint body: an object with "config", "parameters" and
  // "training" members. See generator_to_json for the envelope.
  virtual nlohmann::json checkpoint_body() const = 0;

  const Alphabet& alphabet() const { return alphabet_; }
  // Incremented by every successful fit.
  std::uint64_t version() const { return version_; }

 protected:
  void bump_version() { ++version_; }
  void set_version(std::uint64_t v) { version_ = v; }

 private:
  Alphabet alphabet_;
  std::uint64_t version_ = 0;
};

// Draws a symbol index from an unnormalized weight vector.
int sample_index(std::span<const double> weights, Rng& rng);

// Generator checkpoint:
//   {"format": "unigram-generator", "format_version": 1,
//    "generator_kind": "ngram" | "neural", "alphabet": [utf8 strings...],
//    "version": <fit counter>, "config": {...}, "parameters": {...},
//    "training": {...}}
inline constexpr int kGeneratorFormatVersion = 1;

nlohmann::json generator_to_json(const Generator& g);
std::unique_ptr<Generator> generator_from_json(const nlohmann::json& j);
void save_generator(const Generator& g, const std::filesystem::path& path);
std::unique_ptr<Generator> load_generator(const std::filesystem::path& path);

nlohmann::json alphabet_to_json(const Alphabet& a);
Alphabet alphabet_from_json(const nlohmann::json& j);

}  // namespace unigram

#endif  // UNIGRAM_GENERATOR_HPP_
