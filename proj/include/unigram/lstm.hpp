#ifndef UNIGRAM_LSTM_HPP_
#define UNIGRAM_LSTM_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "unigram/generator.hpp"

namespace unigram {

struct NeuralOptions {
  int layers = 3;
  int embedding_size = 128;
  int hidden_size = 512;
  double dropout = 0.33;
  double init_scale = 0.1;
  std::uint64_t init_seed = 1;
};

// Character-level LSTM generator. Step 0 reads begin-of-word; step t reads
// the t-th grapheme and predicts the next one or end-of-word. Dropout is
// applied to every layer input and to the top layer output during training.
//
// All parameters live in one flat vector:
//   embedding  [input_size x embedding_size]     column-major
//   per layer  W [4H x (in + H)], b [4H]          gate order i, f, g, o
//   output     W [output_size x H], b [output_size]
class NeuralGenerator final : public Generator {
 public:
  using Sequence = std::vector<int>;

  NeuralGenerator(Alphabet alphabet, NeuralOptions options = {});

  std::string kind() const override { return "neural"; }
  double log_prob(const WordForm& w) const override;
  WordForm sample(Rng& rng) const override;
  FitReport fit(const TokenDataset& train, const TokenDataset& dev,
                const TrainingSchedule& schedule) override;
  std::unique_ptr<Generator> clone() const override;
  nlohmann::json checkpoint_body() const override;
  static std::unique_ptr<NeuralGenerator> from_checkpoint(const Alphabet& alphabet, const nlohmann::json& body,
                                                          std::uint64_t version);

  const NeuralOptions& options() const { return options_; }
  std::size_t parameter_count() const { return static_cast<std::size_t>(params_.size()); }
  static std::size_t parameter_count(const NeuralOptions& options, const Alphabet& alphabet);
  Eigen::VectorXd& parameters() { return params_; }
  const Eigen::VectorXd& parameters() const { return params_; }

  // Mean over the batch of per-sequence negative log-likelihood. With
  // `dropout_seed` set, dropout masks are drawn per sequence from
  // (seed, position in batch), so the parallel and serial paths see the
  // same masks. `grad` is overwritten when non-null.
  double loss_and_gradient(std::span<const Sequence> batch, Eigen::VectorXd* grad, bool parallel,
                           std::optional<std::uint64_t> dropout_seed = std::nullopt) const;

  // Log-probabilities of every output symbol after reading `prefix`.
  std::vector<double> next_log_distribution(std::span<const int> prefix) const;

 private:
  struct Layout;
  struct Workspace;
  struct RecurrentState;

  void initialize();
  double sequence_forward_backward(const Sequence& seq, Eigen::VectorXd* grad, Rng* dropout_rng,
                                   Workspace& ws) const;
  double sequence_log_prob(std::span<const int> symbols) const;
  void reset_state(RecurrentState& rs) const;
  // One inference step: reads `input`, writes next-symbol log-probabilities.
  void step(int input, bool first, RecurrentState& rs, Eigen::VectorXd& logp) const;

  NeuralOptions options_;
  Eigen::VectorXd params_;
  std::int64_t trained_steps_ = 0;
  double last_dev_cross_entropy_ = 0.0;
};

}  // namespace unigram

#endif  // UNIGRAM_LSTM_HPP_
