#include "unigram/generator.hpp"

#include <fstream>

#include "unigram/errors.hpp"
#include "unigram/lstm.hpp"
#include "unigram/ngram.hpp"
#include "unigram/utf8.hpp"

namespace unigram {

void TrainingSchedule::validate() const {
  if (batch_size < 1) throw std::invalid_argument("batch size must be at least 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw std::invalid_argument("lr decay must be in (0, 1]");
  if (eval_every < 1) throw std::invalid_argument("eval_every must be at least 1");
  if (patience < 1) throw std::invalid_argument("patience must be at least 1");
  if (max_steps < 1) throw std::invalid_argument("step budget must be at least 1");
}

int sample_index(std::span<const double> weights, Rng& rng) {
  double total = 0.0;
  for (double w : weights) total += w;
  double u = std::uniform_real_distribution<double>(0.0, total)(rng);
  int last_positive = -1;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (weights[k] <= 0.0) continue;
    last_positive = static_cast<int>(k);
    if (u < weights[k]) return last_positive;
    u -= weights[k];
  }
  // Rounding left u just past the end.
  return last_positive;
}

nlohmann::json alphabet_to_json(const Alphabet& a) {
  nlohmann::json out = nlohmann::json::array();
  for (Grapheme g : a.graphemes()) out.push_back(utf8::encode(g));
  return out;
}

Alphabet alphabet_from_json(const nlohmann::json& j) {
  std::vector<Grapheme> graphemes;
  for (const auto& item : j) {
    const auto chars = utf8::decode(item.get<std::string>());
    if (chars.size() != 1) throw DataError("corrupt file: alphabet entry is not one grapheme");
    graphemes.push_back(chars.front());
  }
  return Alphabet(std::move(graphemes));
}

nlohmann::json generator_to_json(const Generator& g) {
  nlohmann::json body = g.checkpoint_body();
  return {{"format", "unigram-generator"},
          {"format_version", kGeneratorFormatVersion},
          {"generator_kind", g.kind()},
          {"alphabet", alphabet_to_json(g.alphabet())},
          {"version", g.version()},
          {"config", body.at("config")},
          {"parameters", body.at("parameters")},
          {"training", body.at("training")}};
}

std::unique_ptr<Generator> generator_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "unigram-generator") throw DataError("corrupt file: not a generator");
    const int fv = j.at("format_version").get<int>();
    if (fv != kGeneratorFormatVersion) {
      throw DataError("version mismatch: generator format " + std::to_string(fv));
    }
    const Alphabet alphabet = alphabet_from_json(j.at("alphabet"));
    const auto version = j.at("version").get<std::uint64_t>();
    const auto kind = j.at("generator_kind").get<std::string>();
    if (kind == "ngram") return NGramGenerator::from_checkpoint(alphabet, j, version);
    if (kind == "neural") return NeuralGenerator::from_checkpoint(alphabet, j, version);
    throw DataError("corrupt file: unknown generator kind '" + kind + "'");
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("corrupt file: ") + e.what());
  }
}

void save_generator(const Generator& g, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << generator_to_json(g).dump() << '\n';
}

std::unique_ptr<Generator> load_generator(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("corrupt file: ") + e.what());
  }
  return generator_from_json(j);
}

}  // namespace unigram
