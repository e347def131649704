#ifndef UNIGRAM_TOOLS_COMMANDS_HPP_
#define UNIGRAM_TOOLS_COMMANDS_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "unigram/lstm.hpp"
#include "unigram/ngram.hpp"
#include "unigram/search.hpp"
#include "unigram/trainer.hpp"

namespace unigram::cli {

namespace fs = std::filesystem;

struct RunConfig {
  // prepare
  fs::path corpus;  // a text file, or a directory of *.txt files
  fs::path alphabet;
  std::int64_t token_cap = 1000000;
  std::array<double, 3> ratios{0.8, 0.1, 0.1};
  bool lowercase = true;

  // train / search / eval read what prepare wrote
  fs::path data_dir;
  fs::path out_root = "runs";
  std::optional<std::uint64_t> seed;

  std::string mode = "two-stage";  // two-stage, token, type
  std::string generator = "ngram";  // ngram, neural
  NGramOptions ngram;
  NeuralOptions neural;
  EMConfig em;

  SearchSpace space;
  bool parallel_trials = false;

  std::vector<std::string> models;  // name=path
  // name=path of a model file whose generator is evaluated on its own
  std::vector<std::string> generator_models;
  std::size_t window = 0;           // 0: 1% of test types

  void require_seed() const;
};

struct CommandResult {
  fs::path run_dir;
  nlohmann::json manifest;
};

// 16 hex digits of FNV-1a over the compact JSON dump.
std::string config_hash(const nlohmann::json& config);
nlohmann::json config_json(const RunConfig& cfg, const std::string& command);

std::unique_ptr<Generator> make_generator(const RunConfig& cfg, const Alphabet& alphabet);

struct PreparedData {
  Alphabet alphabet;
  TokenDataset train;
  TokenDataset dev;
  TokenDataset test;
};
PreparedData load_prepared(const fs::path& data_dir);

// "X% of test types and Y% of test tokens are out-of-vocabulary"
std::string oov_line(const TokenDataset& train, const TokenDataset& test);

CommandResult cmd_prepare(const RunConfig& cfg);
CommandResult cmd_train(const RunConfig& cfg);
CommandResult cmd_search(const RunConfig& cfg);
CommandResult cmd_eval(const RunConfig& cfg);
std::vector<WordForm> cmd_sample(const fs::path& model_file, std::int64_t n, std::uint64_t seed);

}  // namespace unigram::cli

#endif  // UNIGRAM_TOOLS_COMMANDS_HPP_
