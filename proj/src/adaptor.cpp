#include "unigram/adaptor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "unigram/errors.hpp"

namespace unigram {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double x, double y) {
  if (x == kNegInf) return y;
  if (y == kNegInf) return x;
  const double m = std::max(x, y);
  return m + std::log1p(std::exp(std::min(x, y) - m));
}

double safe_log(double x) { return x > 0.0 ? std::log(x) : kNegInf; }

}  // namespace

void PYPParams::validate() const {
  if (!(a >= 0.0 && a < 1.0)) throw std::invalid_argument("PYP discount a must be in [0, 1)");
  if (!(b >= 0.0) || !std::isfinite(b)) throw std::invalid_argument("PYP concentration b must be >= 0");
}

double SeatingWeights::old_total() const {
  double t = 0.0;
  for (const auto& bucket : old_buckets) t += bucket.total();
  return t;
}

std::int64_t AdaptorState::form_customers(const WordForm& w) const {
  auto it = forms_.find(w);
  return it == forms_.end() ? 0 : it->second.customers;
}

std::int64_t AdaptorState::form_clusters(const WordForm& w) const {
  auto it = forms_.find(w);
  return it == forms_.end() ? 0 : it->second.clusters;
}

const Cluster& AdaptorState::cluster(ClusterId id) const {
  auto it = clusters_.find(id);
  if (it == clusters_.end()) throw std::invalid_argument("unknown cluster id");
  return it->second.cluster;
}

std::vector<ClusterId> AdaptorState::cluster_ids() const {
  std::vector<ClusterId> ids;
  ids.reserve(clusters_.size());
  for (const auto& kv : clusters_) ids.push_back(kv.first);
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::optional<ClusterId> AdaptorState::assignment(TokenIndex t) const {
  if (t >= assignments_.size() || assignments_[t] == kUnassigned) return std::nullopt;
  return assignments_[t];
}

std::vector<std::pair<std::int64_t, std::int64_t>> AdaptorState::size_histogram(const WordForm& w) const {
  std::vector<std::pair<std::int64_t, std::int64_t>> out;
  auto it = forms_.find(w);
  if (it == forms_.end()) return out;
  for (const auto& [size, ids] : it->second.by_size) {
    out.emplace_back(size, static_cast<std::int64_t>(ids.size()));
  }
  return out;
}

ClusterId AdaptorState::cluster_in_bucket(const WordForm& w, std::int64_t size, std::size_t i) const {
  return forms_.at(w).by_size.at(size).at(i);
}

void AdaptorState::bucket_insert(FormEntry& entry, ClusterId id, ClusterRecord& rec) {
  auto& ids = entry.by_size[rec.cluster.size];
  rec.slot = ids.size();
  ids.push_back(id);
}

void AdaptorState::bucket_remove(FormEntry& entry, ClusterRecord& rec) {
  auto it = entry.by_size.find(rec.cluster.size);
  auto& ids = it->second;
  const ClusterId moved = ids.back();
  ids[rec.slot] = moved;
  clusters_.at(moved).slot = rec.slot;
  ids.pop_back();
  if (ids.empty()) entry.by_size.erase(it);
}

ClusterId AdaptorState::place(const WordForm& w, SeatChoice choice) {
  if (w.empty()) throw std::invalid_argument("cannot seat an empty form");
  ClusterRecord* existing = nullptr;
  if (!choice.is_new()) {
    auto it = clusters_.find(choice.cluster);
    if (it == clusters_.end()) throw std::invalid_argument("seat: unknown cluster id");
    if (it->second.cluster.label != w) throw std::invalid_argument("seat: cluster label does not match the token form");
    existing = &it->second;
  }
  FormEntry& entry = forms_[w];
  ClusterId id = choice.cluster;
  if (existing == nullptr) {
    id = next_id_++;
    auto& rec = clusters_[id];
    rec.cluster = Cluster{w, 1};
    bucket_insert(entry, id, rec);
    ++entry.clusters;
  } else {
    bucket_remove(entry, *existing);
    ++existing->cluster.size;
    bucket_insert(entry, id, *existing);
  }
  ++entry.customers;
  ++customers_;
  return id;
}

ClusterId AdaptorState::seat(TokenIndex t, const WordForm& w, SeatChoice choice) {
  if (t < assignments_.size() && assignments_[t] != kUnassigned) {
    throw std::invalid_argument("seat: token is already seated");
  }
  const ClusterId id = place(w, choice);
  if (t >= assignments_.size()) assignments_.resize(t + 1, kUnassigned);
  assignments_[t] = id;
  ++assigned_;
  return id;
}

ClusterId AdaptorState::seat_anonymous(const WordForm& w, SeatChoice choice) { return place(w, choice); }

void AdaptorState::unseat(TokenIndex t) {
  if (t >= assignments_.size() || assignments_[t] == kUnassigned) {
    throw std::invalid_argument("unseat: token " + std::to_string(t) + " is not seated");
  }
  const ClusterId id = assignments_[t];
  assignments_[t] = kUnassigned;
  --assigned_;
  ClusterRecord& rec = clusters_.at(id);
  auto form_it = forms_.find(rec.cluster.label);
  FormEntry& entry = form_it->second;
  bucket_remove(entry, rec);
  --rec.cluster.size;
  --entry.customers;
  --customers_;
  if (rec.cluster.size == 0) {
    --entry.clusters;
    clusters_.erase(id);
    if (entry.clusters == 0) forms_.erase(form_it);
  } else {
    bucket_insert(entry, id, rec);
  }
}

CanonicalState AdaptorState::canonical() const {
  CanonicalState out;
  out.clusters.reserve(clusters_.size());
  for (const auto& [id, rec] : clusters_) out.clusters.emplace_back(rec.cluster.label, rec.cluster.size);
  std::sort(out.clusters.begin(), out.clusters.end());
  std::unordered_map<ClusterId, std::vector<TokenIndex>> blocks;
  for (TokenIndex t = 0; t < assignments_.size(); ++t) {
    if (assignments_[t] != kUnassigned) blocks[assignments_[t]].push_back(t);
  }
  for (auto& kv : blocks) out.partition.push_back(std::move(kv.second));
  std::sort(out.partition.begin(), out.partition.end());
  return out;
}

void AdaptorState::check_invariants() const {
  const auto fail = [](const std::string& what) { throw std::logic_error("adaptor invariant: " + what); };
  std::int64_t n = 0;
  std::unordered_map<WordForm, std::pair<std::int64_t, std::int64_t>, WordFormHash> recount;
  for (const auto& [id, rec] : clusters_) {
    if (rec.cluster.size < 1) fail("live cluster with size < 1");
    if (id >= next_id_) fail("cluster id from the future");
    n += rec.cluster.size;
    auto& rc = recount[rec.cluster.label];
    rc.first += rec.cluster.size;
    rc.second += 1;
    auto f = forms_.find(rec.cluster.label);
    if (f == forms_.end()) fail("cluster label missing from the form index");
    auto b = f->second.by_size.find(rec.cluster.size);
    if (b == f->second.by_size.end() || rec.slot >= b->second.size() || b->second[rec.slot] != id) {
      fail("cluster not found at its histogram slot");
    }
  }
  if (n != customers_) fail("sum of cluster sizes != N");
  if (recount.size() != forms_.size()) fail("form index has stale forms");
  for (const auto& [form, entry] : forms_) {
    auto it = recount.find(form);
    if (it == recount.end()) fail("form index has a form without clusters");
    if (entry.customers != it->second.first) fail("c_w mismatch");
    if (entry.clusters != it->second.second) fail("n_w mismatch");
    std::int64_t indexed = 0;
    for (const auto& [size, ids] : entry.by_size) {
      if (ids.empty()) fail("empty histogram bucket");
      indexed += static_cast<std::int64_t>(ids.size());
      for (ClusterId id : ids) {
        auto c = clusters_.find(id);
        if (c == clusters_.end() || c->second.cluster.size != size || c->second.cluster.label != form) {
          fail("histogram bucket entry disagrees with the cluster table");
        }
      }
    }
    if (indexed != entry.clusters) fail("histogram does not cover n_w clusters");
  }
  std::size_t assigned = 0;
  std::unordered_map<ClusterId, std::int64_t> per_cluster;
  for (ClusterId id : assignments_) {
    if (id == kUnassigned) continue;
    ++assigned;
    if (clusters_.count(id) == 0) fail("token assigned to a dead cluster");
    ++per_cluster[id];
  }
  if (assigned != assigned_) fail("assigned token count");
  for (const auto& [id, k] : per_cluster) {
    if (k > clusters_.at(id).cluster.size) fail("more tokens assigned than the cluster size");
  }
}

nlohmann::json AdaptorState::to_json() const {
  const auto ids = cluster_ids();
  std::unordered_map<ClusterId, std::int64_t> position;
  nlohmann::json labels = nlohmann::json::array();
  nlohmann::json sizes = nlohmann::json::array();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto& c = clusters_.at(ids[i]).cluster;
    labels.push_back(c.label.utf8());
    sizes.push_back(c.size);
    position[ids[i]] = static_cast<std::int64_t>(i);
  }
  std::vector<std::int64_t> assignment(assignments_.size(), -1);
  for (std::size_t t = 0; t < assignments_.size(); ++t) {
    if (assignments_[t] != kUnassigned) assignment[t] = position.at(assignments_[t]);
  }
  return {{"format", "unigram-adaptor"},
          {"format_version", kAdaptorFormatVersion},
          {"N", customers_},
          {"K", cluster_count()},
          {"labels", labels},
          {"sizes", sizes},
          {"assignments", assignment}};
}

AdaptorState AdaptorState::from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "unigram-adaptor") throw DataError("corrupt file: not an adaptor");
    const int fv = j.at("format_version").get<int>();
    if (fv != kAdaptorFormatVersion) throw DataError("version mismatch: adaptor format " + std::to_string(fv));
    const auto labels = j.at("labels").get<std::vector<std::string>>();
    const auto sizes = j.at("sizes").get<std::vector<std::int64_t>>();
    const auto assignment = j.at("assignments").get<std::vector<std::int64_t>>();
    if (labels.size() != sizes.size()) throw DataError("corrupt file: cluster table columns differ in length");
    std::vector<Cluster> table;
    table.reserve(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (sizes[i] < 1) throw DataError("corrupt file: cluster size < 1");
      table.push_back({WordForm::from_utf8(labels[i]), sizes[i]});
    }
    AdaptorState state = from_clusters(table);
    // from_clusters numbers clusters 0..K-1 in table order.
    std::vector<std::int64_t> used(table.size(), 0);
    state.assignments_.assign(assignment.size(), kUnassigned);
    for (std::size_t t = 0; t < assignment.size(); ++t) {
      const std::int64_t k = assignment[t];
      if (k < 0) continue;
      if (static_cast<std::size_t>(k) >= table.size()) throw DataError("corrupt file: assignment out of range");
      if (++used[static_cast<std::size_t>(k)] > table[static_cast<std::size_t>(k)].size) {
        throw DataError("corrupt file: cluster over-assigned");
      }
      state.assignments_[t] = static_cast<ClusterId>(k);
      ++state.assigned_;
    }
    if (j.at("N").get<std::int64_t>() != state.customers_ || j.at("K").get<std::int64_t>() != state.cluster_count()) {
      throw DataError("corrupt file: N/K do not match the cluster table");
    }
    return state;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("corrupt file: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("corrupt file: ") + e.what());
  }
}

AdaptorState AdaptorState::from_clusters(std::span<const Cluster> clusters) {
  AdaptorState state;
  for (const auto& c : clusters) {
    if (c.size < 1 || c.label.empty()) throw std::invalid_argument("cluster must be non-empty");
    const ClusterId id = state.next_id_++;
    FormEntry& entry = state.forms_[c.label];
    auto& rec = state.clusters_[id];
    rec.cluster = c;
    state.bucket_insert(entry, id, rec);
    entry.customers += c.size;
    entry.clusters += 1;
    state.customers_ += c.size;
  }
  return state;
}

SeatingWeights seating_weights(const AdaptorState& state, const PYPParams& params, const WordForm& w,
                               double gen_log_prob) {
  SeatingWeights out;
  for (const auto& [size, count] : state.size_histogram(w)) {
    out.old_buckets.push_back({size, count, static_cast<double>(size) - params.a});
  }
  const auto k = static_cast<double>(state.cluster_count());
  // With b = 0 the first customer still opens a cluster with certainty.
  const double mass = k == 0.0 && params.b == 0.0 ? params.a : params.a * k + params.b;
  out.new_weight = mass * std::exp(gen_log_prob);
  if (!(out.total() > 0.0)) throw NumericError("degenerate PYP: every seating option has zero weight");
  return out;
}

SeatChoice sample_seat(const AdaptorState& state, const SeatingWeights& weights, const WordForm& w, Rng& rng) {
  const double total = weights.total();
  double u = std::uniform_real_distribution<double>(0.0, total)(rng);
  if (u < weights.new_weight || weights.old_buckets.empty()) return SeatChoice::new_cluster();
  u -= weights.new_weight;
  const SizeBucket* chosen = nullptr;
  for (const auto& bucket : weights.old_buckets) {
    if (bucket.total() <= 0.0) continue;
    chosen = &bucket;
    if (u < bucket.total()) break;
    u -= bucket.total();
  }
  if (chosen == nullptr) return SeatChoice::new_cluster();
  // Within a bucket every cluster is equally likely.
  auto pick = static_cast<std::size_t>(std::min<double>(
      std::floor(std::max(0.0, u) / chosen->weight_per_cluster), static_cast<double>(chosen->clusters - 1)));
  return SeatChoice::existing(state.cluster_in_bucket(w, chosen->size, pick));
}

double predictive_log_prob_counts(std::int64_t c_w, std::int64_t n_w, std::int64_t k, std::int64_t n,
                                  const PYPParams& params, double gen_log_prob) {
  const double denom = static_cast<double>(n) + params.b;
  if (!(denom > 0.0)) throw NumericError("degenerate PYP: N + b = 0");
  const double log_denom = std::log(denom);
  const double smoothed =
      safe_log(static_cast<double>(c_w) - static_cast<double>(n_w) * params.a) - log_denom;
  const double interpolation =
      safe_log(params.a * static_cast<double>(k) + params.b) - log_denom + gen_log_prob;
  return log_add(smoothed, interpolation);
}

double predictive_log_prob(const AdaptorState& state, const PYPParams& params, const WordForm& w,
                           double gen_log_prob) {
  return predictive_log_prob_counts(state.form_customers(w), state.form_clusters(w), state.cluster_count(),
                                    state.total_customers(), params, gen_log_prob);
}

double predictive_log_prob_from_weights(const AdaptorState& state, const PYPParams& params, const WordForm& w,
                                        double gen_log_prob) {
  const double denom = static_cast<double>(state.total_customers()) + params.b;
  if (!(denom > 0.0)) throw NumericError("degenerate PYP: N + b = 0");
  double old_total = 0.0;
  for (const auto& [size, count] : state.size_histogram(w)) {
    old_total += static_cast<double>(count) * (static_cast<double>(size) - params.a);
  }
  const double new_log = safe_log(params.a * static_cast<double>(state.cluster_count()) + params.b) + gen_log_prob;
  return log_add(safe_log(old_total), new_log) - std::log(denom);
}

double joint_log_prob(std::span<const WordForm> tokens, std::span<const int> blocks, const PYPParams& params,
                      const LogProbModel& generator) {
  if (tokens.size() != blocks.size()) throw std::invalid_argument("joint_log_prob: size mismatch");
  struct Open {
    WordForm label;
    std::int64_t size = 0;
  };
  std::unordered_map<int, Open> open;
  double lp = 0.0;
  for (std::size_t n = 0; n < tokens.size(); ++n) {
    const double seated = static_cast<double>(n);
    auto it = open.find(blocks[n]);
    if (it == open.end()) {
      const double k = static_cast<double>(open.size());
      if (n > 0) lp += safe_log(params.a * k + params.b) - std::log(seated + params.b);
      lp += generator.log_prob(tokens[n]);
      open.emplace(blocks[n], Open{tokens[n], 1});
    } else {
      if (it->second.label != tokens[n]) return kNegInf;
      lp += safe_log(static_cast<double>(it->second.size) - params.a) - std::log(seated + params.b);
      ++it->second.size;
    }
  }
  return lp;
}

}  // namespace unigram
