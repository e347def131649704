#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "commands.hpp"
#include "unigram/errors.hpp"

namespace {

using unigram::cli::RunConfig;

void add_seed(CLI::App& cmd, RunConfig& cfg) {
  cmd.add_option("--seed", cfg.seed, "RNG seed")->required();
}

void add_out(CLI::App& cmd, RunConfig& cfg) {
  cmd.add_option("--out", cfg.out_root, "root directory for run outputs")->capture_default_str();
}

void add_model_flags(CLI::App& cmd, RunConfig& cfg) {
  cmd.add_option("--data", cfg.data_dir, "directory written by prepare")->required()->check(CLI::ExistingDirectory);
  cmd.add_option("--generator", cfg.generator, "ngram or neural")
      ->check(CLI::IsMember({"ngram", "neural"}))
      ->capture_default_str();
  cmd.add_option("--order", cfg.ngram.order, "n-gram order")->capture_default_str();
  cmd.add_option("--smoothing", cfg.ngram.smoothing, "n-gram smoothing")
      ->transform(CLI::CheckedTransformer(
          std::map<std::string, unigram::Smoothing>{{"witten-bell", unigram::Smoothing::kWittenBell},
                                                    {"add-k", unigram::Smoothing::kAddK},
                                                    {"jelinek-mercer", unigram::Smoothing::kJelinekMercer}},
          CLI::ignore_case));
  cmd.add_option("--add-k", cfg.ngram.add_k)->capture_default_str();
  cmd.add_option("--lambda", cfg.ngram.lambda, "interpolation weight for jelinek-mercer")->capture_default_str();
  cmd.add_option("--layers", cfg.neural.layers)->capture_default_str();
  cmd.add_option("--embedding", cfg.neural.embedding_size)->capture_default_str();
  cmd.add_option("--hidden", cfg.neural.hidden_size)->capture_default_str();
  cmd.add_option("--dropout", cfg.neural.dropout)->capture_default_str();
  cmd.add_option("--batch-size", cfg.em.schedule.batch_size)->capture_default_str();
  cmd.add_option("--lr", cfg.em.schedule.learning_rate)->capture_default_str();
  cmd.add_option("--eval-every", cfg.em.schedule.eval_every)->capture_default_str();
  cmd.add_option("--patience", cfg.em.schedule.patience)->capture_default_str();
  cmd.add_option("--max-steps", cfg.em.schedule.max_steps, "gradient step budget per fit")->capture_default_str();
  cmd.add_option("--iterations", cfg.em.iterations, "EM iterations")->capture_default_str();
  cmd.add_option("--epochs", cfg.em.sampler.epochs_per_iteration, "Gibbs sweeps per iteration")
      ->capture_default_str();
  cmd.add_flag("--shuffle-sweeps", cfg.em.sampler.shuffle, "visit tokens in random order");
  add_seed(cmd, cfg);
  add_out(cmd, cfg);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-stage unigram model: corpus preparation, training, search, evaluation, sampling"};
  app.set_config("--config", "", "TOML or INI file; flags on the command line win");
  app.require_subcommand(1);
  RunConfig cfg;

  auto* prepare = app.add_subcommand("prepare", "split a corpus and write token/type datasets");
  prepare->add_option("--corpus", cfg.corpus, "text file or directory of .txt files")
      ->required()
      ->check(CLI::ExistingPath);
  prepare->add_option("--alphabet", cfg.alphabet, "one grapheme per line")->required()->check(CLI::ExistingFile);
  prepare->add_option("--tokens", cfg.token_cap, "training token cap")->capture_default_str();
  prepare->add_option("--ratios", cfg.ratios, "train dev test fractions")->expected(3);
  prepare->add_flag("!--keep-case", cfg.lowercase, "do not lowercase");
  add_seed(*prepare, cfg);
  add_out(*prepare, cfg);

  auto* train = app.add_subcommand("train", "train a two-stage model or a baseline generator");
  add_model_flags(*train, cfg);
  bool two_stage = false;
  std::string baseline;
  auto* ts = train->add_flag("--two-stage", two_stage, "train the two-stage model (default)");
  train->add_option("--baseline", baseline, "fit the generator on tokens or types only")
      ->check(CLI::IsMember({"token", "type"}))
      ->excludes(ts);
  train->add_option("--a", cfg.em.params.a, "PYP discount")->capture_default_str();
  train->add_option("--b", cfg.em.params.b, "PYP concentration")->capture_default_str();

  auto* search = app.add_subcommand("search", "random search over a and b");
  add_model_flags(*search, cfg);
  search->add_option("--trials", cfg.space.trials)->capture_default_str();
  search->add_option("--subset", cfg.space.subset_size, "training tokens per trial")->capture_default_str();
  search->add_flag("!--uniform-b", cfg.space.log_uniform_b, "draw b uniformly instead of log-uniformly");
  search->add_flag("--parallel-trials", cfg.parallel_trials);

  auto* eval = app.add_subcommand("eval", "evaluate models on the test set");
  eval->add_option("--data", cfg.data_dir)->required()->check(CLI::ExistingDirectory);
  eval->add_option("--model", cfg.models, "name=path, repeatable");
  eval->add_option("--generator-of", cfg.generator_models,
                   "name=path, repeatable: evaluate the generator of a model file on its own");
  eval->add_option("--window", cfg.window, "rolling-mean window (default 1% of test types)");
  add_seed(*eval, cfg);
  add_out(*eval, cfg);

  auto* sample = app.add_subcommand("sample", "draw tokens from a model");
  std::string model_file;
  std::int64_t n = 1;
  std::string output;
  sample->add_option("--model", model_file)->required()->check(CLI::ExistingFile);
  sample->add_option("-n,--count", n)->capture_default_str();
  sample->add_option("--output", output, "write here instead of standard output");
  add_seed(*sample, cfg);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    unigram::cli::CommandResult result;
    if (prepare->parsed()) {
      result = unigram::cli::cmd_prepare(cfg);
      std::cout << "split      tokens     types\n";
      for (const char* part : {"train", "dev", "test"}) {
        const auto& c = result.manifest["counts"][part];
        std::cout << std::left << std::setw(6) << part << std::right << std::setw(12) << c["tokens"].get<long long>()
                  << std::setw(10) << c["types"].get<long long>() << '\n';
      }
      std::cout << result.manifest["oov"].get<std::string>() << '\n';
    } else if (train->parsed()) {
      if (!baseline.empty()) cfg.mode = baseline;
      result = unigram::cli::cmd_train(cfg);
      std::cout << "final dev cross-entropy " << result.manifest["final_dev_cross_entropy"].get<double>()
                << " nats/token\n";
    } else if (search->parsed()) {
      result = unigram::cli::cmd_search(cfg);
      const auto& best = result.manifest["best"];
      std::cout << "best a=" << best["a"].get<double>() << " b=" << best["b"].get<double>()
                << " dev cross-entropy " << best["dev_cross_entropy"].get<double>() << '\n';
    } else if (eval->parsed()) {
      result = unigram::cli::cmd_eval(cfg);
    } else if (sample->parsed()) {
      const auto forms = unigram::cli::cmd_sample(model_file, n, *cfg.seed);
      std::ofstream file;
      if (!output.empty()) {
        file.open(output);
        if (!file) throw unigram::DataError("cannot write " + output);
      }
      std::ostream& out = output.empty() ? std::cout : file;
      for (const auto& w : forms) out << w.utf8() << '\n';
      return 0;
    }
    std::cout << "run directory " << result.run_dir.string() << '\n';
  } catch (const unigram::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const unigram::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
