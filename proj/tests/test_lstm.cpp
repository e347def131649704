#include <Eigen/Dense>
#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "oracles.hpp"
#include "unigram/errors.hpp"
#include "unigram/kernels.hpp"
#include "unigram/lstm.hpp"

using namespace unigram;
using oracle::wf;

namespace {

NeuralOptions small(int layers = 2, double dropout = 0.0) {
  NeuralOptions o;
  o.layers = layers;
  o.embedding_size = 5;
  o.hidden_size = 6;
  o.dropout = dropout;
  o.init_seed = 3;
  return o;
}

// Bigram source over {a, b}: rows are BOW, a, b; columns a, b, EOW.
const double kSource[3][3] = {{0.6, 0.4, 0.0}, {0.2, 0.3, 0.5}, {0.4, 0.1, 0.5}};

WordForm draw_source(Rng& rng) {
  std::u32string s;
  int state = 0;
  for (;;) {
    const int next = sample_index(std::span<const double>(kSource[state], 3), rng);
    if (next == 2) return WordForm(s);
    s.push_back(next == 0 ? U'a' : U'b');
    state = next + 1;
  }
}

// Entropy of the source in nats per word: expected visits to each state
// times the entropy of its row.
double source_entropy() {
  Eigen::Matrix2d q;
  q << kSource[1][0], kSource[1][1], kSource[2][0], kSource[2][1];
  const Eigen::RowVector2d start(kSource[0][0], kSource[0][1]);
  const Eigen::RowVector2d visits = start * (Eigen::Matrix2d::Identity() - q).inverse();
  const auto row_entropy = [](const double* row) {
    double h = 0.0;
    for (int k = 0; k < 3; ++k) {
      if (row[k] > 0) h -= row[k] * std::log(row[k]);
    }
    return h;
  };
  return row_entropy(kSource[0]) + visits(0) * row_entropy(kSource[1]) + visits(1) * row_entropy(kSource[2]);
}

TokenDataset source_dataset(int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<WordForm> tokens;
  for (int i = 0; i < n; ++i) tokens.push_back(draw_source(rng));
  return TokenDataset::from_tokens(tokens);
}

}  // namespace

TEST_CASE("parameter count follows the sizes") {
  const auto alpha = oracle::alphabet_of("abcdefghijklmnopqrstuvwxyz");
  const std::size_t v_in = 28, v_out = 27, e = 128, h = 512;
  const std::size_t expected = v_in * e + (4 * h * (e + h) + 4 * h) + 2 * (4 * h * (2 * h) + 4 * h) + v_out * h + v_out;
  CHECK(NeuralGenerator::parameter_count(NeuralOptions{}, alpha) == expected);
  NeuralGenerator g(oracle::alphabet_of("ab"), small());
  CHECK(g.parameter_count() == NeuralGenerator::parameter_count(small(), g.alphabet()));
}

TEST_CASE("conditionals are normalized and end-of-word is barred at the start") {
  NeuralGenerator g(oracle::alphabet_of("abc"), small(3));
  for (const auto& prefix : std::vector<std::vector<int>>{{}, {0}, {2, 1}, {0, 0, 0, 1}}) {
    const auto lp = g.next_log_distribution(prefix);
    double sum = 0.0;
    for (double x : lp) sum += std::exp(x);
    CHECK(std::abs(sum - 1.0) < 1e-6);
    if (prefix.empty()) CHECK(std::isinf(lp[static_cast<std::size_t>(g.alphabet().end_of_word())]));
  }
  // log_prob is the sum of the conditionals along the word.
  const auto w = wf("cab");
  const auto sym = g.alphabet().encode(w);
  double total = 0.0;
  std::vector<int> prefix;
  for (int s : sym) {
    total += g.next_log_distribution(prefix)[static_cast<std::size_t>(s)];
    prefix.push_back(s);
  }
  total += g.next_log_distribution(prefix)[static_cast<std::size_t>(g.alphabet().end_of_word())];
  CHECK(g.log_prob(w) == doctest::Approx(total).epsilon(1e-12));

  double mass = 0.0;
  for (const auto& x : oracle::all_strings(g.alphabet(), 6)) mass += std::exp(g.log_prob(x));
  CHECK(mass < 1.0);
  CHECK(mass > 0.5);
}

TEST_CASE("analytic gradient matches central differences") {
  // Coordinates with |grad| below 1e-5 are skipped: there the round-off of a
  // central difference (~1e-11) is no longer small against the gradient.
  auto opts = small(3, 0.33);
  opts.init_scale = 0.5;
  NeuralGenerator g(oracle::alphabet_of("abc"), opts);
  const std::vector<NeuralGenerator::Sequence> batch{{0, 1, 2}, {2, 2}};
  Eigen::VectorXd grad;
  g.loss_and_gradient(batch, &grad, false, 17);
  Rng rng(1);
  std::uniform_int_distribution<std::size_t> pick(0, g.parameter_count() - 1);
  int checked = 0;
  while (checked < 10) {
    const std::size_t i = pick(rng);
    if (std::abs(grad(static_cast<Eigen::Index>(i))) < 1e-5) continue;
    const double h = 1e-5;
    auto& p = g.parameters();
    const double saved = p(static_cast<Eigen::Index>(i));
    p(static_cast<Eigen::Index>(i)) = saved + h;
    const double up = g.loss_and_gradient(batch, nullptr, false, 17);
    p(static_cast<Eigen::Index>(i)) = saved - h;
    const double down = g.loss_and_gradient(batch, nullptr, false, 17);
    p(static_cast<Eigen::Index>(i)) = saved;
    const double numeric = (up - down) / (2 * h);
    const double analytic = grad(static_cast<Eigen::Index>(i));
    CAPTURE(i);
    CHECK(std::abs(analytic - numeric) / std::max(std::abs(analytic), std::abs(numeric)) < 1e-4);
    ++checked;
  }
}

TEST_CASE("parallel and serial batch gradients agree") {
  NeuralGenerator g(oracle::alphabet_of("abc"), small(2, 0.2));
  std::vector<NeuralGenerator::Sequence> batch;
  Rng rng(4);
  for (int i = 0; i < 40; ++i) {
    NeuralGenerator::Sequence s(static_cast<std::size_t>(1 + i % 5));
    for (auto& x : s) x = static_cast<int>(rng() % 3);
    batch.push_back(s);
  }
  Eigen::VectorXd gp, gs;
  const double lp = g.loss_and_gradient(batch, &gp, true, 9);
  const double ls = g.loss_and_gradient(batch, &gs, false, 9);
  CHECK(std::abs(lp - ls) <= 1e-12 * std::abs(ls));
  CHECK((gp - gs).norm() <= 1e-12 * gs.norm());
}

TEST_CASE("samples are deterministic and within the cap") {
  NeuralGenerator g(oracle::alphabet_of("ab"), small());
  Rng r1(8), r2(8);
  for (int i = 0; i < 50; ++i) {
    const auto w = g.sample(r1);
    CHECK(w == g.sample(r2));
    CHECK(w.size() >= 1);
    CHECK(w.size() <= static_cast<std::size_t>(Generator::kMaxSampleLength));
  }
}

TEST_CASE("neural checkpoint round trip") {
  NeuralGenerator g(oracle::alphabet_of("ab"), small());
  const auto data = TokenDataset::from_counts({{wf("ab"), 3}, {wf("b"), 2}});
  TrainingSchedule s;
  s.max_steps = 5;
  s.batch_size = 2;
  g.fit(data, data, s);
  const auto path = std::filesystem::temp_directory_path() / "unigram_lstm_ckpt.json";
  save_generator(g, path);
  const auto back = load_generator(path);
  CHECK(back->kind() == "neural");
  CHECK(back->version() == 1);
  for (const auto& w : oracle::all_strings(g.alphabet(), 4)) CHECK(back->log_prob(w) == g.log_prob(w));
  std::filesystem::remove(path);
}

TEST_CASE("fit never ends worse than it started") {
  NeuralGenerator g(oracle::alphabet_of("ab"), small(1));
  const auto train = source_dataset(300, 1);
  const auto dev = source_dataset(300, 2);
  TrainingSchedule s;
  s.learning_rate = 0.5;
  s.max_steps = 400;
  s.eval_every = 50;
  const auto r = g.fit(train, dev, s);
  CHECK(r.final_dev_cross_entropy <= r.initial_dev_cross_entropy);
  CHECK(r.final_dev_cross_entropy == doctest::Approx(kernels::mean_surprisal(g, dev)).epsilon(1e-12));
  CHECK_THROWS_AS(g.fit(TokenDataset{}, dev, s), DataError);
}

TEST_CASE("neural fit recovers a bigram source") {
  const auto train = source_dataset(2000, 10);
  const auto dev = source_dataset(4000, 11);
  CHECK(train.type_count() >= 50);
  NeuralOptions o;
  o.layers = 1;
  o.embedding_size = 8;
  o.hidden_size = 16;
  o.dropout = 0.0;
  NeuralGenerator g(oracle::alphabet_of("ab"), o);
  TrainingSchedule s;
  s.learning_rate = 0.5;
  s.max_steps = 6000;
  const auto r = g.fit(train, dev, s);
  const double h = source_entropy();
  MESSAGE("source entropy " << h << ", dev cross-entropy " << r.final_dev_cross_entropy << " after " << r.steps
                            << " steps");
  CHECK(std::abs(r.final_dev_cross_entropy - h) < 0.1);
}
