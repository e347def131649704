#ifndef UNIGRAM_TRAINER_HPP_
#define UNIGRAM_TRAINER_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "unigram/adaptor.hpp"
#include "unigram/generator.hpp"
#include "unigram/gibbs.hpp"

namespace unigram {

// A trained distribution over word forms, as stored in a model file.
class UnigramModel : public LogProbModel {
 public:
  virtual std::string kind() const = 0;
  virtual const Generator& generator() const = 0;
  virtual nlohmann::json to_json() const = 0;
  virtual std::unique_ptr<UnigramModel> clone_model() const = 0;
};

// A generator used on its own (the token- and type-trained baselines).
class GeneratorModel final : public UnigramModel {
 public:
  GeneratorModel(std::unique_ptr<Generator> generator, std::string training);

  std::string kind() const override { return "generator"; }
  double log_prob(const WordForm& w) const override { return generator_->log_prob(w); }
  const Generator& generator() const override { return *generator_; }
  nlohmann::json to_json() const override;
  std::unique_ptr<UnigramModel> clone_model() const override;
  // "token" or "type"; free text for anything else.
  const std::string& training() const { return training_; }

 private:
  std::unique_ptr<Generator> generator_;
  std::string training_;
};

class TwoStageModel final : public UnigramModel {
 public:
  TwoStageModel(AdaptorState adaptor, std::unique_ptr<Generator> generator, PYPParams params);
  TwoStageModel(const TwoStageModel& other);
  TwoStageModel& operator=(const TwoStageModel& other);
  TwoStageModel(TwoStageModel&&) noexcept = default;
  TwoStageModel& operator=(TwoStageModel&&) noexcept = default;

  std::string kind() const override { return "two_stage"; }
  double log_prob(const WordForm& w) const override;
  const Generator& generator() const override { return *generator_; }
  Generator& mutable_generator() { return *generator_; }
  const AdaptorState& adaptor() const { return adaptor_; }
  AdaptorState& mutable_adaptor() { return adaptor_; }
  const PYPParams& params() const { return params_; }
  nlohmann::json to_json() const override;
  std::unique_ptr<UnigramModel> clone_model() const override;

 private:
  AdaptorState adaptor_;
  std::unique_ptr<Generator> generator_;
  PYPParams params_;
};

// Model file:
//   {"format": "unigram-model", "format_version": 1,
//    "kind": "two_stage" | "generator",
//    "params": {"a", "b"}, "adaptor": {...},      two_stage only
//    "training": "token" | "type",               generator only
//    "generator": <generator checkpoint>}
inline constexpr int kModelFormatVersion = 1;

void save_model(const UnigramModel& model, const std::filesystem::path& path);
std::unique_ptr<UnigramModel> load_model(const std::filesystem::path& path);
std::unique_ptr<UnigramModel> model_from_json(const nlohmann::json& j);

// Draws tokens from the model's predictive process. For a two-stage model
// each draw either joins an existing cluster (weight size - a) or opens a
// new one labeled by a generator sample (weight a K + b), and the scratch
// seating state is updated before the next draw.
class SamplingSession {
 public:
  SamplingSession(const UnigramModel& model, std::uint64_t seed);

  WordForm next();
  // Seating state after the draws so far (empty for a generator model).
  const AdaptorState& state() const { return scratch_; }

 private:
  const UnigramModel& model_;
  const TwoStageModel* two_stage_ = nullptr;
  AdaptorState scratch_;
  // One entry per seated customer: rejection sampling over this list picks
  // a cluster with probability proportional to size - a.
  std::vector<ClusterId> customers_;
  Rng rng_;
};

// Each form with count n_w, the number of clusters labeled with it.
TokenDataset make_dampened_dataset(const AdaptorState& state);

// Splits the units of a dataset (one per token) into train and held-out
// parts. When either side would be empty both sides are the full dataset.
std::pair<TokenDataset, TokenDataset> holdout_split(const TokenDataset& data, double fraction, Rng& rng);

struct EMConfig {
  int iterations = 5;
  SamplerConfig sampler;
  TrainingSchedule schedule;
  PYPParams params;
  // Share of the dampened dataset held out as the generator's dev set.
  double generator_dev_fraction = 0.1;
  bool parallel = true;

  void validate() const;
};

struct EMTraceRow {
  int iteration = 0;
  std::string phase;  // hotstart, e_step, m_step
  double dev_cross_entropy = 0.0;
  std::int64_t clusters = 0;
  double wallclock_seconds = 0.0;
  std::uint64_t generator_version = 0;
};

struct EMResult {
  TwoStageModel model;
  std::vector<EMTraceRow> trace;
  // Sweep log across all iterations; epochs are numbered consecutively.
  std::vector<SweepLogRow> sweeps;
  // Generator version read by each E-step, and produced by each M-step.
  std::vector<std::uint64_t> e_step_versions;
  std::vector<std::uint64_t> m_step_versions;
};

using ProgressFn = std::function<void(const EMTraceRow&)>;

// Monte Carlo EM. The generator is hotstarted on the training types, the
// tokens are seated by a draw from the prior process, then every iteration
// runs the sampler, builds the dampened dataset from the selected state and
// fits the generator on it. The sampler is warm-started from the previous
// selection.
EMResult run_em(const TokenDataset& train, const TokenDataset& dev, const EMConfig& cfg,
                std::unique_ptr<Generator> generator, std::uint64_t seed, const ProgressFn& progress = {});

enum class Baseline { kToken, kType };

// Fits a generator directly on the training tokens, or on the training
// types (each form once); dev is treated the same way.
GeneratorModel train_baseline(std::unique_ptr<Generator> generator, const TokenDataset& train,
                              const TokenDataset& dev, Baseline baseline, const TrainingSchedule& schedule,
                              FitReport* report = nullptr);

// CSV: iteration,phase,dev_cross_entropy,K,wallclock_seconds
void write_training_log(std::ostream& out, std::span<const EMTraceRow> rows);

}  // namespace unigram

#endif  // UNIGRAM_TRAINER_HPP_
