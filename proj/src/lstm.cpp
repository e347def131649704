#include "unigram/lstm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <omp.h>

#include "unigram/errors.hpp"
#include "unigram/kernels.hpp"

namespace unigram {

using Eigen::Map;
using Eigen::MatrixXd;
using Eigen::VectorXd;

struct NeuralGenerator::Layout {
  int in_symbols = 0;
  int out_symbols = 0;
  int emb = 0;
  int hidden = 0;
  int layers = 0;
  std::size_t embedding = 0;
  std::vector<std::size_t> weight;
  std::vector<std::size_t> bias;
  std::vector<int> input_width;
  std::size_t out_weight = 0;
  std::size_t out_bias = 0;
  std::size_t total = 0;

  Layout(const NeuralOptions& o, const Alphabet& a)
      : in_symbols(a.input_size()),
        out_symbols(a.output_size()),
        emb(o.embedding_size),
        hidden(o.hidden_size),
        layers(o.layers) {
    std::size_t at = 0;
    embedding = at;
    at += static_cast<std::size_t>(in_symbols) * static_cast<std::size_t>(emb);
    for (int l = 0; l < layers; ++l) {
      const int in = l == 0 ? emb : hidden;
      input_width.push_back(in);
      weight.push_back(at);
      at += static_cast<std::size_t>(4 * hidden) * static_cast<std::size_t>(in + hidden);
      bias.push_back(at);
      at += static_cast<std::size_t>(4 * hidden);
    }
    out_weight = at;
    at += static_cast<std::size_t>(out_symbols) * static_cast<std::size_t>(hidden);
    out_bias = at;
    at += static_cast<std::size_t>(out_symbols);
    total = at;
  }
};

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// In place log-softmax; entries equal to -inf stay -inf.
void log_softmax(VectorXd& v) {
  const double m = v.maxCoeff();
  const double lse = m + std::log((v.array() - m).exp().sum());
  v.array() -= lse;
}

void fill_mask(VectorXd& mask, int n, double dropout, Rng* rng) {
  if (rng == nullptr || dropout <= 0.0) {
    mask.setOnes(n);
    return;
  }
  mask.resize(n);
  std::bernoulli_distribution keep(1.0 - dropout);
  const double scale = 1.0 / (1.0 - dropout);
  for (int i = 0; i < n; ++i) mask[i] = keep(*rng) ? scale : 0.0;
}

}  // namespace

struct NeuralGenerator::Workspace {
  struct LayerStep {
    VectorXd concat, i, f, g, o, c, tanh_c, h, mask;
  };
  std::vector<std::vector<LayerStep>> steps;  // [t][layer]
  std::vector<VectorXd> top;                  // dropped-out top layer output per step
  std::vector<VectorXd> top_mask;
  std::vector<VectorXd> logp;
  VectorXd dz, dconcat, da, dlogits;
  std::vector<VectorXd> dh_next, dc_next;
};

NeuralGenerator::NeuralGenerator(Alphabet alphabet, NeuralOptions options)
    : Generator(std::move(alphabet)), options_(options) {
  if (options_.layers < 1 || options_.embedding_size < 1 || options_.hidden_size < 1) {
    throw std::invalid_argument("neural generator sizes must be positive");
  }
  if (!(options_.dropout >= 0.0 && options_.dropout < 1.0)) {
    throw std::invalid_argument("dropout must be in [0, 1)");
  }
  initialize();
}

std::size_t NeuralGenerator::parameter_count(const NeuralOptions& options, const Alphabet& alphabet) {
  return Layout(options, alphabet).total;
}

void NeuralGenerator::initialize() {
  const Layout lay(options_, alphabet());
  params_.resize(static_cast<Eigen::Index>(lay.total));
  Rng rng(options_.init_seed);
  std::uniform_real_distribution<double> u(-options_.init_scale, options_.init_scale);
  for (Eigen::Index i = 0; i < params_.size(); ++i) params_[i] = u(rng);
  const int h = lay.hidden;
  for (int l = 0; l < lay.layers; ++l) {
    double* b = params_.data() + lay.bias[static_cast<std::size_t>(l)];
    for (int k = 0; k < 4 * h; ++k) b[k] = 0.0;
    for (int k = h; k < 2 * h; ++k) b[k] = 1.0;  // forget gate
  }
  for (int k = 0; k < lay.out_symbols; ++k) params_[static_cast<Eigen::Index>(lay.out_bias) + k] = 0.0;
}

double NeuralGenerator::sequence_forward_backward(const Sequence& seq, VectorXd* grad, Rng* dropout_rng,
                                                  Workspace& ws) const {
  const Layout lay(options_, alphabet());
  const int H = lay.hidden;
  const int L = lay.layers;
  const int T = static_cast<int>(seq.size()) + 1;
  const int eow = alphabet().end_of_word();
  const double p_drop = options_.dropout;
  const double* P = params_.data();

  const Map<const MatrixXd> emb(P + lay.embedding, lay.in_symbols, lay.emb);
  const Map<const MatrixXd> w_out(P + lay.out_weight, lay.out_symbols, H);
  const Map<const VectorXd> b_out(P + lay.out_bias, lay.out_symbols);

  if (static_cast<int>(ws.steps.size()) < T) {
    ws.steps.resize(static_cast<std::size_t>(T));
    ws.top.resize(static_cast<std::size_t>(T));
    ws.top_mask.resize(static_cast<std::size_t>(T));
    ws.logp.resize(static_cast<std::size_t>(T));
  }
  for (auto& s : ws.steps) s.resize(static_cast<std::size_t>(L));

  double loss = 0.0;
  for (int t = 0; t < T; ++t) {
    const int input = t == 0 ? alphabet().begin_of_word() : seq[static_cast<std::size_t>(t - 1)];
    const int target = t < static_cast<int>(seq.size()) ? seq[static_cast<std::size_t>(t)] : eow;
    VectorXd a = emb.row(input).transpose();
    for (int l = 0; l < L; ++l) {
      auto& st = ws.steps[static_cast<std::size_t>(t)][static_cast<std::size_t>(l)];
      const int in = lay.input_width[static_cast<std::size_t>(l)];
      const Map<const MatrixXd> W(P + lay.weight[static_cast<std::size_t>(l)], 4 * H, in + H);
      const Map<const VectorXd> b(P + lay.bias[static_cast<std::size_t>(l)], 4 * H);
      fill_mask(st.mask, in, p_drop, dropout_rng);
      st.concat.resize(in + H);
      st.concat.head(in) = a.cwiseProduct(st.mask);
      if (t == 0) {
        st.concat.tail(H).setZero();
      } else {
        st.concat.tail(H) = ws.steps[static_cast<std::size_t>(t - 1)][static_cast<std::size_t>(l)].h;
      }
      VectorXd z = W * st.concat + b;
      st.i = z.segment(0, H).unaryExpr([](double x) { return sigmoid(x); });
      st.f = z.segment(H, H).unaryExpr([](double x) { return sigmoid(x); });
      st.g = z.segment(2 * H, H).array().tanh();
      st.o = z.segment(3 * H, H).unaryExpr([](double x) { return sigmoid(x); });
      if (t == 0) {
        st.c = st.i.cwiseProduct(st.g);
      } else {
        st.c = st.f.cwiseProduct(ws.steps[static_cast<std::size_t>(t - 1)][static_cast<std::size_t>(l)].c) +
               st.i.cwiseProduct(st.g);
      }
      st.tanh_c = st.c.array().tanh();
      st.h = st.o.cwiseProduct(st.tanh_c);
      a = st.h;
    }
    auto& top_mask = ws.top_mask[static_cast<std::size_t>(t)];
    fill_mask(top_mask, H, p_drop, dropout_rng);
    ws.top[static_cast<std::size_t>(t)] = a.cwiseProduct(top_mask);
    VectorXd& logp = ws.logp[static_cast<std::size_t>(t)];
    logp = w_out * ws.top[static_cast<std::size_t>(t)] + b_out;
    if (t == 0) logp[eow] = -std::numeric_limits<double>::infinity();
    log_softmax(logp);
    loss -= logp[target];
  }

  if (grad == nullptr) return loss;

  double* G = grad->data();
  Map<MatrixXd> d_emb(G + lay.embedding, lay.in_symbols, lay.emb);
  Map<MatrixXd> dw_out(G + lay.out_weight, lay.out_symbols, H);
  Map<VectorXd> db_out(G + lay.out_bias, lay.out_symbols);
  ws.dh_next.resize(static_cast<std::size_t>(L));
  ws.dc_next.resize(static_cast<std::size_t>(L));
  for (int l = 0; l < L; ++l) {
    ws.dh_next[static_cast<std::size_t>(l)].setZero(H);
    ws.dc_next[static_cast<std::size_t>(l)].setZero(H);
  }

  for (int t = T - 1; t >= 0; --t) {
    const int input = t == 0 ? alphabet().begin_of_word() : seq[static_cast<std::size_t>(t - 1)];
    const int target = t < static_cast<int>(seq.size()) ? seq[static_cast<std::size_t>(t)] : eow;
    ws.dlogits = ws.logp[static_cast<std::size_t>(t)].array().exp();
    ws.dlogits[target] -= 1.0;
    dw_out.noalias() += ws.dlogits * ws.top[static_cast<std::size_t>(t)].transpose();
    db_out += ws.dlogits;
    ws.da = (w_out.transpose() * ws.dlogits).cwiseProduct(ws.top_mask[static_cast<std::size_t>(t)]);

    for (int l = L - 1; l >= 0; --l) {
      const auto& st = ws.steps[static_cast<std::size_t>(t)][static_cast<std::size_t>(l)];
      const int in = lay.input_width[static_cast<std::size_t>(l)];
      const Map<const MatrixXd> W(P + lay.weight[static_cast<std::size_t>(l)], 4 * H, in + H);
      Map<MatrixXd> dW(G + lay.weight[static_cast<std::size_t>(l)], 4 * H, in + H);
      Map<VectorXd> db(G + lay.bias[static_cast<std::size_t>(l)], 4 * H);
      VectorXd& dh_next = ws.dh_next[static_cast<std::size_t>(l)];
      VectorXd& dc_next = ws.dc_next[static_cast<std::size_t>(l)];

      const VectorXd dh = ws.da + dh_next;
      const VectorXd dc =
          dh.cwiseProduct(st.o).cwiseProduct((1.0 - st.tanh_c.array().square()).matrix()) + dc_next;
      ws.dz.resize(4 * H);
      ws.dz.segment(0, H) = dc.cwiseProduct(st.g).cwiseProduct((st.i.array() * (1.0 - st.i.array())).matrix());
      if (t > 0) {
        const VectorXd& c_prev = ws.steps[static_cast<std::size_t>(t - 1)][static_cast<std::size_t>(l)].c;
        ws.dz.segment(H, H) = dc.cwiseProduct(c_prev).cwiseProduct((st.f.array() * (1.0 - st.f.array())).matrix());
      } else {
        ws.dz.segment(H, H).setZero();
      }
      ws.dz.segment(2 * H, H) = dc.cwiseProduct(st.i).cwiseProduct((1.0 - st.g.array().square()).matrix());
      ws.dz.segment(3 * H, H) =
          dh.cwiseProduct(st.tanh_c).cwiseProduct((st.o.array() * (1.0 - st.o.array())).matrix());
      dc_next = dc.cwiseProduct(st.f);

      dW.noalias() += ws.dz * st.concat.transpose();
      db += ws.dz;
      ws.dconcat.noalias() = W.transpose() * ws.dz;
      dh_next = ws.dconcat.tail(H);
      ws.da = ws.dconcat.head(in).cwiseProduct(st.mask);
    }
    d_emb.row(input) += ws.da.transpose();
  }
  return loss;
}

double NeuralGenerator::loss_and_gradient(std::span<const Sequence> batch, VectorXd* grad, bool parallel,
                                          std::optional<std::uint64_t> dropout_seed) const {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  const auto n = static_cast<std::ptrdiff_t>(batch.size());
  const auto per_sequence_rng = [&](std::ptrdiff_t i) {
    return Rng(*dropout_seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(i) + 1);
  };
  double total = 0.0;
  if (grad != nullptr) grad->setZero(params_.size());

  if (!parallel) {
    Workspace ws;
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      std::optional<Rng> rng;
      if (dropout_seed) rng = per_sequence_rng(i);
      total += sequence_forward_backward(batch[static_cast<std::size_t>(i)], grad, rng ? &*rng : nullptr, ws);
    }
  } else {
    const int threads = omp_get_max_threads();
    std::vector<VectorXd> partial(grad != nullptr ? static_cast<std::size_t>(threads) : 0);
#pragma omp parallel reduction(+ : total)
    {
      Workspace ws;
      VectorXd* local = nullptr;
      if (grad != nullptr) {
        auto& mine = partial[static_cast<std::size_t>(omp_get_thread_num())];
        mine.setZero(params_.size());
        local = &mine;
      }
#pragma omp for schedule(dynamic, 1)
      for (std::ptrdiff_t i = 0; i < n; ++i) {
        std::optional<Rng> rng;
        if (dropout_seed) rng = per_sequence_rng(i);
        total += sequence_forward_backward(batch[static_cast<std::size_t>(i)], local, rng ? &*rng : nullptr, ws);
      }
    }
    if (grad != nullptr) {
      for (const auto& p : partial) {
        if (p.size() == grad->size()) *grad += p;
      }
    }
  }
  const double scale = 1.0 / static_cast<double>(n);
  if (grad != nullptr) *grad *= scale;
  return total * scale;
}

struct NeuralGenerator::RecurrentState {
  std::vector<VectorXd> h, c;
  VectorXd concat, z;
};

void NeuralGenerator::reset_state(RecurrentState& rs) const {
  rs.h.assign(static_cast<std::size_t>(options_.layers), VectorXd::Zero(options_.hidden_size));
  rs.c.assign(static_cast<std::size_t>(options_.layers), VectorXd::Zero(options_.hidden_size));
}

void NeuralGenerator::step(int input, bool first, RecurrentState& rs, VectorXd& logp) const {
  const Layout lay(options_, alphabet());
  const int H = lay.hidden;
  const double* P = params_.data();
  const Map<const MatrixXd> emb(P + lay.embedding, lay.in_symbols, lay.emb);
  const Map<const MatrixXd> w_out(P + lay.out_weight, lay.out_symbols, H);
  const Map<const VectorXd> b_out(P + lay.out_bias, lay.out_symbols);

  VectorXd a = emb.row(input).transpose();
  for (int l = 0; l < lay.layers; ++l) {
    const auto li = static_cast<std::size_t>(l);
    const int in = lay.input_width[li];
    const Map<const MatrixXd> W(P + lay.weight[li], 4 * H, in + H);
    const Map<const VectorXd> b(P + lay.bias[li], 4 * H);
    rs.concat.resize(in + H);
    rs.concat << a, rs.h[li];
    rs.z.noalias() = W * rs.concat;
    rs.z += b;
    for (int k = 0; k < H; ++k) {
      const double ig = sigmoid(rs.z[k]);
      const double fg = sigmoid(rs.z[H + k]);
      const double gg = std::tanh(rs.z[2 * H + k]);
      const double og = sigmoid(rs.z[3 * H + k]);
      rs.c[li][k] = fg * rs.c[li][k] + ig * gg;
      rs.h[li][k] = og * std::tanh(rs.c[li][k]);
    }
    a = rs.h[li];
  }
  logp.noalias() = w_out * a;
  logp += b_out;
  if (first) logp[alphabet().end_of_word()] = -std::numeric_limits<double>::infinity();
  log_softmax(logp);
}

double NeuralGenerator::sequence_log_prob(std::span<const int> symbols) const {
  RecurrentState rs;
  reset_state(rs);
  VectorXd logp;
  double lp = 0.0;
  int input = alphabet().begin_of_word();
  for (std::size_t t = 0; t <= symbols.size(); ++t) {
    step(input, t == 0, rs, logp);
    const int target = t < symbols.size() ? symbols[t] : alphabet().end_of_word();
    lp += logp[target];
    if (t < symbols.size()) input = symbols[t];
  }
  return lp;
}

double NeuralGenerator::log_prob(const WordForm& w) const { return sequence_log_prob(alphabet().encode(w)); }

std::vector<double> NeuralGenerator::next_log_distribution(std::span<const int> prefix) const {
  RecurrentState rs;
  reset_state(rs);
  VectorXd logp;
  step(alphabet().begin_of_word(), true, rs, logp);
  for (int s : prefix) step(s, false, rs, logp);
  return {logp.data(), logp.data() + logp.size()};
}

WordForm NeuralGenerator::sample(Rng& rng) const {
  RecurrentState rs;
  reset_state(rs);
  VectorXd logp;
  std::vector<int> symbols;
  std::vector<double> probs(static_cast<std::size_t>(alphabet().output_size()));
  int input = alphabet().begin_of_word();
  while (static_cast<int>(symbols.size()) < kMaxSampleLength) {
    step(input, symbols.empty(), rs, logp);
    for (std::size_t k = 0; k < probs.size(); ++k) probs[k] = std::exp(logp[static_cast<Eigen::Index>(k)]);
    const int next = sample_index(probs, rng);
    if (next == alphabet().end_of_word()) break;
    symbols.push_back(next);
    input = next;
  }
  return alphabet().decode(symbols);
}

FitReport NeuralGenerator::fit(const TokenDataset& train, const TokenDataset& dev, const TrainingSchedule& schedule) {
  schedule.validate();
  if (train.empty()) throw DataError("empty training dataset");
  if (dev.empty()) throw DataError("empty dev dataset");

  std::vector<Sequence> examples;
  examples.reserve(static_cast<std::size_t>(train.total_tokens()));
  for (const auto& e : train.entries()) {
    Sequence s = alphabet().encode(e.form);
    for (std::int64_t k = 0; k < e.count; ++k) examples.push_back(s);
  }
  for (const auto& e : dev.entries()) alphabet().encode(e.form);

  FitReport report;
  const auto dev_ce = [&] { return kernels::mean_surprisal(*this, dev, schedule.parallel); };
  double best = dev_ce();
  report.initial_dev_cross_entropy = best;
  VectorXd best_params = params_;
  double previous = best;
  int increases = 0;
  double lr = schedule.learning_rate;

  Rng rng(schedule.seed);
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Sequence> batch;
  VectorXd grad;
  std::size_t cursor = order.size();
  std::int64_t step = 0;
  bool stop = false;
  while (!stop && step < schedule.max_steps) {
    batch.clear();
    while (static_cast<int>(batch.size()) < schedule.batch_size) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      batch.push_back(examples[order[cursor++]]);
      if (static_cast<std::size_t>(batch.size()) == examples.size()) break;
    }
    const std::uint64_t dropout_seed = rng();
    loss_and_gradient(batch, &grad, schedule.parallel,
                      options_.dropout > 0.0 ? std::optional<std::uint64_t>(dropout_seed) : std::nullopt);
    const double norm = grad.norm();
    if (std::isfinite(norm)) {
      if (norm > schedule.clip_norm) grad *= schedule.clip_norm / norm;
      params_ -= lr * grad;
    }
    ++step;
    if (step % schedule.eval_every == 0 || step == schedule.max_steps) {
      const double ce = dev_ce();
      if (ce < best) {
        best = ce;
        best_params = params_;
      } else {
        lr *= schedule.lr_decay;
      }
      increases = ce > previous ? increases + 1 : 0;
      previous = ce;
      if (increases >= schedule.patience) {
        stop = true;
        report.early_stopped = true;
      }
    }
  }
  params_ = best_params;
  trained_steps_ += step;
  last_dev_cross_entropy_ = best;
  report.final_dev_cross_entropy = best;
  report.steps = step;
  bump_version();
  return report;
}

std::unique_ptr<Generator> NeuralGenerator::clone() const { return std::make_unique<NeuralGenerator>(*this); }

nlohmann::json NeuralGenerator::checkpoint_body() const {
  nlohmann::json config = {{"layers", options_.layers},
                           {"embedding_size", options_.embedding_size},
                           {"hidden_size", options_.hidden_size},
                           {"dropout", options_.dropout},
                           {"init_scale", options_.init_scale},
                           {"init_seed", options_.init_seed}};
  std::vector<double> flat(params_.data(), params_.data() + params_.size());
  nlohmann::json training = {{"steps", trained_steps_}, {"dev_cross_entropy", last_dev_cross_entropy_}};
  return {{"config", config}, {"parameters", {{"flat", flat}}}, {"training", training}};
}

std::unique_ptr<NeuralGenerator> NeuralGenerator::from_checkpoint(const Alphabet& alphabet,
                                                                  const nlohmann::json& body,
                                                                  std::uint64_t version) {
  try {
    const auto& config = body.at("config");
    NeuralOptions options;
    options.layers = config.at("layers").get<int>();
    options.embedding_size = config.at("embedding_size").get<int>();
    options.hidden_size = config.at("hidden_size").get<int>();
    options.dropout = config.at("dropout").get<double>();
    options.init_scale = config.at("init_scale").get<double>();
    options.init_seed = config.at("init_seed").get<std::uint64_t>();
    auto g = std::make_unique<NeuralGenerator>(alphabet, options);
    const auto flat = body.at("parameters").at("flat").get<std::vector<double>>();
    if (flat.size() != g->parameter_count()) throw DataError("corrupt file: neural parameter count mismatch");
    g->params_ = Map<const VectorXd>(flat.data(), static_cast<Eigen::Index>(flat.size()));
    const auto& training = body.at("training");
    g->trained_steps_ = training.value("steps", std::int64_t{0});
    g->last_dev_cross_entropy_ = training.value("dev_cross_entropy", 0.0);
    g->set_version(version);
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("corrupt file: ") + e.what());
  }
}

}  // namespace unigram
