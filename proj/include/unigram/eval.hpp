#ifndef UNIGRAM_EVAL_HPP_
#define UNIGRAM_EVAL_HPP_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "unigram/corpus.hpp"
#include "unigram/generator.hpp"

namespace unigram {

// Count-weighted mean surprisal in nats per token. Throws NumericError
// ("infinite cross-entropy") when a test token has probability zero.
double cross_entropy(const LogProbModel& model, const TokenDataset& test, bool parallel = true);

struct SurprisalRecord {
  WordForm form;
  std::int64_t train_frequency = 0;
  double surprisal = 0.0;
  double rolling_mean = 0.0;  // trailing window over the sorted records
};

// 1% of the number of types, at least 1.
std::size_t default_window(std::size_t types);

// One record per test type, sorted by training frequency then form.
std::vector<SurprisalRecord> surprisal_by_frequency(const LogProbModel& model, const TokenDataset& test,
                                                    const TokenDataset& train, std::size_t window);

// CSV: form,train_frequency,surprisal,rolling_mean
void write_surprisal_csv(std::ostream& out, const std::vector<SurprisalRecord>& records);

// Averages over types, not tokens. A bucket with no types has no average.
struct TypeBreakdown {
  std::optional<double> singleton_average;
  std::optional<double> non_singleton_average;
  std::size_t singletons = 0;
  std::size_t non_singletons = 0;
  double singleton_ratio = 0.0;
};

TypeBreakdown type_breakdown(const LogProbModel& model, const TokenDataset& test);

struct EvalReport {
  std::string model;
  double token_cross_entropy = 0.0;
  std::optional<double> singleton_average;
  std::optional<double> non_singleton_average;
  double singleton_ratio = 0.0;

  nlohmann::json to_json() const;
};

struct NamedModel {
  std::string name;
  const LogProbModel* model = nullptr;
};

// One report per model, in input order.
std::vector<EvalReport> compare_models(const std::vector<NamedModel>& models, const TokenDataset& test);

void print_reports(std::ostream& out, const std::vector<EvalReport>& reports);

}  // namespace unigram

#endif  // UNIGRAM_EVAL_HPP_
