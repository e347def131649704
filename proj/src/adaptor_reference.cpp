#include "unigram/adaptor_reference.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace unigram::reference {

std::size_t NaiveAdaptor::seat(TokenIndex t, const WordForm& w, std::optional<std::size_t> slot) {
  if (t < assignments_.size() && assignments_[t]) throw std::invalid_argument("token already seated");
  std::size_t s;
  if (slot) {
    s = *slot;
    if (s >= slots_.size() || slots_[s].size == 0 || slots_[s].label != w) {
      throw std::invalid_argument("bad slot");
    }
    ++slots_[s].size;
  } else {
    s = slots_.size();
    slots_.push_back({w, 1});
  }
  if (t >= assignments_.size()) assignments_.resize(t + 1);
  assignments_[t] = s;
  return s;
}

void NaiveAdaptor::unseat(TokenIndex t) {
  if (t >= assignments_.size() || !assignments_[t]) throw std::invalid_argument("token not seated");
  --slots_[*assignments_[t]].size;
  assignments_[t].reset();
}

std::int64_t NaiveAdaptor::total_customers() const {
  std::int64_t n = 0;
  for (const auto& s : slots_) n += s.size;
  return n;
}

std::int64_t NaiveAdaptor::cluster_count() const {
  return std::count_if(slots_.begin(), slots_.end(), [](const Slot& s) { return s.size > 0; });
}

std::int64_t NaiveAdaptor::form_customers(const WordForm& w) const {
  std::int64_t n = 0;
  for (const auto& s : slots_) {
    if (s.size > 0 && s.label == w) n += s.size;
  }
  return n;
}

std::int64_t NaiveAdaptor::form_clusters(const WordForm& w) const {
  return static_cast<std::int64_t>(clusters_of(w).size());
}

std::vector<std::size_t> NaiveAdaptor::clusters_of(const WordForm& w) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    if (slots_[i].size > 0 && slots_[i].label == w) out.push_back(i);
  }
  return out;
}

std::optional<std::size_t> NaiveAdaptor::assignment(TokenIndex t) const {
  return t < assignments_.size() ? assignments_[t] : std::nullopt;
}

CanonicalState NaiveAdaptor::canonical() const {
  CanonicalState out;
  for (const auto& s : slots_) {
    if (s.size > 0) out.clusters.emplace_back(s.label, s.size);
  }
  std::sort(out.clusters.begin(), out.clusters.end());
  std::map<std::size_t, std::vector<TokenIndex>> blocks;
  for (TokenIndex t = 0; t < assignments_.size(); ++t) {
    if (assignments_[t]) blocks[*assignments_[t]].push_back(t);
  }
  for (auto& kv : blocks) out.partition.push_back(std::move(kv.second));
  std::sort(out.partition.begin(), out.partition.end());
  return out;
}

ScanWeights seating_weights_scan(const NaiveAdaptor& state, const PYPParams& params, const WordForm& w,
                                 double gen_log_prob) {
  ScanWeights out;
  for (std::size_t s : state.clusters_of(w)) {
    out.old_clusters.emplace_back(s, static_cast<double>(state.slots()[s].size) - params.a);
  }
  out.new_weight = (params.a * static_cast<double>(state.cluster_count()) + params.b) * std::exp(gen_log_prob);
  return out;
}

SeatingWeights bucketed(const NaiveAdaptor& state, const ScanWeights& weights) {
  std::map<std::int64_t, SizeBucket> by_size;
  for (const auto& [slot, weight] : weights.old_clusters) {
    const std::int64_t size = state.slots()[slot].size;
    auto& bucket = by_size[size];
    bucket.size = size;
    bucket.clusters += 1;
    bucket.weight_per_cluster = weight;
  }
  SeatingWeights out;
  for (auto& kv : by_size) out.old_buckets.push_back(kv.second);
  out.new_weight = weights.new_weight;
  return out;
}

double predictive_log_prob_scan(const NaiveAdaptor& state, const PYPParams& params, const WordForm& w,
                                double gen_log_prob) {
  return predictive_log_prob_counts(state.form_customers(w), state.form_clusters(w), state.cluster_count(),
                                    state.total_customers(), params, gen_log_prob);
}

}  // namespace unigram::reference
