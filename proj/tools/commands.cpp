#include "commands.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "unigram/errors.hpp"
#include "unigram/eval.hpp"

namespace unigram::cli {

namespace {

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

template <typename F>
void write_file(const fs::path& path, F&& body) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  body(out);
}

fs::path make_run_dir(const RunConfig& cfg, const std::string& command, nlohmann::json& manifest) {
  const auto config = config_json(cfg, command);
  const auto hash = config_hash(config);
  const fs::path dir = cfg.out_root / (command + "-" + hash);
  fs::create_directories(dir);
  manifest = {{"command", command}, {"config_hash", hash}, {"seed", *cfg.seed}, {"config", config}};
  return dir;
}

std::vector<fs::path> corpus_files(const fs::path& corpus) {
  if (fs::is_regular_file(corpus)) return {corpus};
  if (!fs::is_directory(corpus)) throw DataError("corpus not found: " + corpus.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(corpus)) {
    if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("no .txt files under " + corpus.string());
  return files;
}

nlohmann::json counts_json(const TokenDataset& d) {
  return {{"tokens", d.total_tokens()}, {"types", d.type_count()}};
}

std::string percent(double x) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(1) << 100.0 * x << '%';
  return s.str();
}

}  // namespace

void RunConfig::require_seed() const {
  if (!seed) throw std::invalid_argument("a seed is required");
}

std::string config_hash(const nlohmann::json& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : config.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

nlohmann::json config_json(const RunConfig& cfg, const std::string& command) {
  nlohmann::json j;
  j["seed"] = cfg.seed ? nlohmann::json(*cfg.seed) : nlohmann::json();
  if (command == "prepare") {
    j["corpus"] = cfg.corpus.string();
    j["alphabet"] = cfg.alphabet.string();
    j["token_cap"] = cfg.token_cap;
    j["ratios"] = cfg.ratios;
    j["lowercase"] = cfg.lowercase;
    return j;
  }
  j["data"] = cfg.data_dir.string();
  if (command == "eval") {
    j["models"] = cfg.models;
    j["generator_models"] = cfg.generator_models;
    j["window"] = cfg.window;
    return j;
  }
  j["mode"] = cfg.mode;
  j["generator"] = cfg.generator;
  if (cfg.generator == "ngram") {
    j["ngram"] = {{"order", cfg.ngram.order},
                  {"smoothing", static_cast<int>(cfg.ngram.smoothing)},
                  {"add_k", cfg.ngram.add_k},
                  {"lambda", cfg.ngram.lambda}};
  } else {
    j["neural"] = {{"layers", cfg.neural.layers},         {"embedding_size", cfg.neural.embedding_size},
                   {"hidden_size", cfg.neural.hidden_size}, {"dropout", cfg.neural.dropout},
                   {"init_scale", cfg.neural.init_scale}, {"init_seed", cfg.neural.init_seed}};
  }
  const auto& s = cfg.em.schedule;
  j["schedule"] = {{"batch_size", s.batch_size}, {"learning_rate", s.learning_rate}, {"lr_decay", s.lr_decay},
                   {"clip_norm", s.clip_norm},   {"eval_every", s.eval_every},       {"patience", s.patience},
                   {"max_steps", s.max_steps}};
  j["em"] = {{"iterations", cfg.em.iterations},
             {"epochs", cfg.em.sampler.epochs_per_iteration},
             {"shuffle", cfg.em.sampler.shuffle},
             {"generator_dev_fraction", cfg.em.generator_dev_fraction}};
  if (command == "train") j["params"] = {{"a", cfg.em.params.a}, {"b", cfg.em.params.b}};
  if (command == "search") {
    j["space"] = {{"a", {cfg.space.a_min, cfg.space.a_max}}, {"b", {cfg.space.b_min, cfg.space.b_max}},
                  {"trials", cfg.space.trials},              {"subset_size", cfg.space.subset_size},
                  {"log_uniform_b", cfg.space.log_uniform_b}};
  }
  return j;
}

std::unique_ptr<Generator> make_generator(const RunConfig& cfg, const Alphabet& alphabet) {
  if (cfg.generator == "ngram") return std::make_unique<NGramGenerator>(alphabet, cfg.ngram);
  if (cfg.generator == "neural") return std::make_unique<NeuralGenerator>(alphabet, cfg.neural);
  throw std::invalid_argument("unknown generator '" + cfg.generator + "'");
}

PreparedData load_prepared(const fs::path& data_dir) {
  return {Alphabet::load(data_dir / "alphabet.txt"), TokenDataset::load(data_dir / "train.tsv"),
          TokenDataset::load(data_dir / "dev.tsv"), TokenDataset::load(data_dir / "test.tsv")};
}

std::string oov_line(const TokenDataset& train, const TokenDataset& test) {
  std::int64_t oov_types = 0;
  std::int64_t oov_tokens = 0;
  for (const auto& e : test.entries()) {
    if (train.count_of(e.form) == 0) {
      ++oov_types;
      oov_tokens += e.count;
    }
  }
  const double types = static_cast<double>(std::max<std::size_t>(1, test.type_count()));
  const double tokens = static_cast<double>(std::max<std::int64_t>(1, test.total_tokens()));
  return percent(static_cast<double>(oov_types) / types) + " of test types and " +
         percent(static_cast<double>(oov_tokens) / tokens) + " of test tokens are out-of-vocabulary";
}

CommandResult cmd_prepare(const RunConfig& cfg) {
  cfg.require_seed();
  if (cfg.token_cap < 1) throw std::invalid_argument("token cap must be positive");
  const Alphabet alphabet = Alphabet::load(cfg.alphabet);
  TokenizerOptions opts;
  opts.lowercase = cfg.lowercase;
  std::vector<Sentence> sentences;
  IngestStats stats;
  for (const auto& file : corpus_files(cfg.corpus)) {
    std::ifstream in(file);
    if (!in) throw DataError("cannot open " + file.string());
    IngestStats part;
    auto s = read_sentences(in, alphabet, opts, &part);
    sentences.insert(sentences.end(), std::make_move_iterator(s.begin()), std::make_move_iterator(s.end()));
    stats.lines += part.lines;
    stats.empty_lines += part.empty_lines;
    stats.rejected_sentences += part.rejected_sentences;
  }
  if (sentences.empty()) throw DataError("empty corpus: no sentence survived the alphabet filter");
  Rng rng(*cfg.seed);
  const auto parts = split(std::move(sentences), cfg.ratios, rng());
  const auto train = build_token_dataset(flatten(parts.train), cfg.token_cap, rng());
  const auto dev = TokenDataset::from_tokens(flatten(parts.dev));
  const auto test = TokenDataset::from_tokens(flatten(parts.test));

  CommandResult r;
  r.run_dir = make_run_dir(cfg, "prepare", r.manifest);
  alphabet.save(r.run_dir / "alphabet.txt");
  train.save(r.run_dir / "train.tsv");
  dev.save(r.run_dir / "dev.tsv");
  test.save(r.run_dir / "test.tsv");
  build_type_dataset(train).save(r.run_dir / "train_types.txt");
  r.manifest["sentences"] = {
      {"train", parts.train.size()}, {"dev", parts.dev.size()}, {"test", parts.test.size()}};
  r.manifest["counts"] = {{"train", counts_json(train)}, {"dev", counts_json(dev)}, {"test", counts_json(test)}};
  r.manifest["ingest"] = {
      {"lines", stats.lines}, {"empty_lines", stats.empty_lines}, {"rejected_sentences", stats.rejected_sentences}};
  r.manifest["oov"] = oov_line(train, test);
  write_json(r.run_dir / "manifest.json", r.manifest);
  return r;
}

CommandResult cmd_train(const RunConfig& cfg) {
  cfg.require_seed();
  const auto data = load_prepared(cfg.data_dir);
  CommandResult r;
  r.run_dir = make_run_dir(cfg, "train", r.manifest);
  auto generator = make_generator(cfg, data.alphabet);
  EMConfig em = cfg.em;
  em.schedule.seed = *cfg.seed;
  if (cfg.mode == "two-stage") {
    auto result = run_em(data.train, data.dev, em, std::move(generator), *cfg.seed);
    save_model(result.model, r.run_dir / "model.json");
    write_file(r.run_dir / "training_log.csv", [&](std::ostream& out) { write_training_log(out, result.trace); });
    write_file(r.run_dir / "sweep_log.csv", [&](std::ostream& out) { write_sweep_log(out, result.sweeps); });
    r.manifest["final_dev_cross_entropy"] = result.trace.back().dev_cross_entropy;
    r.manifest["K"] = result.model.adaptor().cluster_count();
    r.manifest["N"] = result.model.adaptor().total_customers();
    r.manifest["params"] = {{"a", em.params.a}, {"b", em.params.b}};
  } else if (cfg.mode == "token" || cfg.mode == "type") {
    FitReport report;
    const auto baseline = cfg.mode == "token" ? Baseline::kToken : Baseline::kType;
    auto model = train_baseline(std::move(generator), data.train, data.dev, baseline, em.schedule, &report);
    save_model(model, r.run_dir / "model.json");
    const double dev_ce = cross_entropy(model, data.dev);
    EMTraceRow row{0, "fit", dev_ce, 0, 0.0, model.generator().version()};
    write_file(r.run_dir / "training_log.csv", [&](std::ostream& out) { write_training_log(out, {&row, 1}); });
    r.manifest["final_dev_cross_entropy"] = dev_ce;
    r.manifest["generator_steps"] = report.steps;
  } else {
    throw std::invalid_argument("unknown training mode '" + cfg.mode + "'");
  }
  r.manifest["mode"] = cfg.mode;
  write_json(r.run_dir / "manifest.json", r.manifest);
  return r;
}

CommandResult cmd_search(const RunConfig& cfg) {
  cfg.require_seed();
  const auto data = load_prepared(cfg.data_dir);
  CommandResult r;
  r.run_dir = make_run_dir(cfg, "search", r.manifest);
  auto prototype = make_generator(cfg, data.alphabet);
  EMConfig em = cfg.em;
  em.schedule.seed = *cfg.seed;
  auto result = random_search(data.train, data.dev, cfg.space, em, *prototype, *cfg.seed, cfg.parallel_trials);
  if (result.subset_truncated) {
    std::cerr << "warning: training set has " << data.train.total_tokens() << " tokens, fewer than the subset size "
              << cfg.space.subset_size << "; using all of them\n";
  }
  write_file(r.run_dir / "trials.csv", [&](std::ostream& out) { write_trials(out, result.trials); });
  save_model(*result.best_model, r.run_dir / "model.json");
  const Trial& best = result.trials[result.best];
  r.manifest["best"] = {{"trial", best.trial},
                        {"a", result.reported_a},
                        {"b", result.reported_b},
                        {"a_exact", best.a},
                        {"b_exact", best.b},
                        {"dev_cross_entropy", best.dev_cross_entropy}};
  r.manifest["subset_truncated"] = result.subset_truncated;
  write_json(r.run_dir / "manifest.json", r.manifest);
  return r;
}

CommandResult cmd_eval(const RunConfig& cfg) {
  cfg.require_seed();
  if (cfg.models.empty() && cfg.generator_models.empty()) {
    throw std::invalid_argument("eval needs at least one --model name=path");
  }
  const auto data = load_prepared(cfg.data_dir);
  CommandResult r;
  r.run_dir = make_run_dir(cfg, "eval", r.manifest);
  std::vector<std::unique_ptr<UnigramModel>> owned;
  std::vector<NamedModel> named;
  const auto add = [&](const std::string& spec, bool generator_only) {
    const auto eq = spec.find('=');
    const std::string name = eq == std::string::npos ? fs::path(spec).stem().string() : spec.substr(0, eq);
    const fs::path path = eq == std::string::npos ? fs::path(spec) : fs::path(spec.substr(eq + 1));
    auto model = load_model(path);
    if (generator_only) model = std::make_unique<GeneratorModel>(model->generator().clone(), "generator");
    if (!(model->generator().alphabet() == data.alphabet)) {
      throw DataError("model " + name + " uses a different alphabet than the data");
    }
    owned.push_back(std::move(model));
    named.push_back({name, owned.back().get()});
  };
  for (const auto& spec : cfg.models) add(spec, false);
  for (const auto& spec : cfg.generator_models) add(spec, true);
  const auto reports = compare_models(named, data.test);
  nlohmann::json out = nlohmann::json::array();
  for (const auto& rep : reports) out.push_back(rep.to_json());
  write_json(r.run_dir / "reports.json", out);
  const std::size_t window = cfg.window > 0 ? cfg.window : default_window(data.test.type_count());
  for (const auto& m : named) {
    const auto records = surprisal_by_frequency(*m.model, data.test, data.train, window);
    write_file(r.run_dir / ("surprisal_" + m.name + ".csv"),
               [&](std::ostream& o) { write_surprisal_csv(o, records); });
  }
  print_reports(std::cout, reports);
  r.manifest["reports"] = out;
  write_json(r.run_dir / "manifest.json", r.manifest);
  return r;
}

std::vector<WordForm> cmd_sample(const fs::path& model_file, std::int64_t n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample count must be at least 1");
  const auto model = load_model(model_file);
  SamplingSession session(*model, seed);
  std::vector<WordForm> out;
  out.reserve(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) out.push_back(session.next());
  return out;
}

}  // namespace unigram::cli
