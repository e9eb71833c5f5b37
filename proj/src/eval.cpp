#include "kge/eval.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "kge/train.hpp"

namespace kge {

RankResult filtered_rank(std::span<const double> scores, EntityId target,
                         const std::vector<EntityId>* known_tails) {
  if (target < 0 || static_cast<std::size_t>(target) >= scores.size())
    throw std::out_of_range("filtered_rank: target out of range");
  const double target_score = scores[static_cast<std::size_t>(target)];
  // known_tails is sorted; walk it in lockstep with the candidate scan.
  std::size_t rank = 1;
  std::size_t ties = 0;
  std::size_t ki = 0;
  const std::vector<EntityId> empty;
  const std::vector<EntityId>& known = known_tails ? *known_tails : empty;
  for (std::size_t k = 0; k < scores.size(); ++k) {
    while (ki < known.size() && static_cast<std::size_t>(known[ki]) < k) ++ki;
    const bool masked =
        ki < known.size() && static_cast<std::size_t>(known[ki]) == k && k != static_cast<std::size_t>(target);
    if (masked) continue;
    if (k == static_cast<std::size_t>(target)) continue;
    if (scores[k] > target_score) {
      ++rank;
    } else if (scores[k] == target_score) {
      ++ties;
    }
  }
  return {rank, ties};
}

Metrics metrics_from_ranks(const std::vector<std::size_t>& ranks) {
  Metrics m;
  m.n_queries = ranks.size();
  if (ranks.empty()) return m;
  double mrr = 0.0;
  std::size_t h1 = 0, h3 = 0, h10 = 0;
  for (std::size_t r : ranks) {
    mrr += 1.0 / static_cast<double>(r);
    if (r <= 1) ++h1;
    if (r <= 3) ++h3;
    if (r <= 10) ++h10;
  }
  const double n = static_cast<double>(ranks.size());
  m.mrr = mrr / n;
  m.hits1 = static_cast<double>(h1) / n;
  m.hits3 = static_cast<double>(h3) / n;
  m.hits10 = static_cast<double>(h10) / n;
  return m;
}

namespace {

// One ranking task: scores for the query key, rank of the target.
struct Query {
  EntityId query_head;   // key used for scoring (h for tail queries, t for head queries)
  RelationId query_rel;  // r, or its reciprocal for head queries
  EntityId target;
  Triple original;
  QueryDirection direction;
};

std::vector<Query> expand_queries(const std::vector<Triple>& test, const Vocabulary& vocab) {
  std::vector<Query> queries;
  queries.reserve(test.size() * 2);
  for (const Triple& t : test) {
    queries.push_back({t.head, t.rel, t.tail, t, QueryDirection::kTail});
    queries.push_back({t.tail, vocab.reciprocal_of(t.rel), t.head, t, QueryDirection::kHead});
  }
  return queries;
}

using ScoreFn = std::function<std::vector<double>(EntityId, RelationId)>;

EvalResult run_queries(const ScoreFn& score, const std::vector<Query>& queries,
                       std::size_t num_rejected, std::size_t num_entities, const KvsAllIndex& filter,
                       OovPolicy policy, int threads) {
  if (queries.empty() && num_rejected == 0) throw std::invalid_argument("evaluate: empty test set");

  std::vector<RankRecord> records(queries.size());
  auto worker = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const Query& q = queries[i];
      std::vector<double> scores = score(q.query_head, q.query_rel);
      RankResult rr = filtered_rank(scores, q.target, filter.tails(q.query_head, q.query_rel));
      records[i] = {q.original, q.direction, rr.rank, rr.tie_count};
    }
  };
  if (threads <= 1 || queries.size() < 2) {
    worker(0, queries.size());
  } else {
    const std::size_t n = static_cast<std::size_t>(threads);
    std::vector<std::thread> pool;
    const std::size_t chunk = (queries.size() + n - 1) / n;
    for (std::size_t t = 0; t < n && t * chunk < queries.size(); ++t)
      pool.emplace_back(worker, t * chunk, std::min(queries.size(), (t + 1) * chunk));
    for (auto& th : pool) th.join();
  }

  std::vector<std::size_t> ranks;
  ranks.reserve(records.size() + 2 * num_rejected);
  for (const auto& r : records) ranks.push_back(r.rank);
  if (policy == OovPolicy::kIncludeWorstRank) {
    for (std::size_t i = 0; i < 2 * num_rejected; ++i) ranks.push_back(num_entities);
  }
  EvalResult result;
  result.metrics = metrics_from_ranks(ranks);
  result.records = std::move(records);
  return result;
}

}  // namespace

EvalResult evaluate(const ModelParams& params, const std::vector<Triple>& test,
                    std::size_t num_rejected, const KvsAllIndex& filter, const Vocabulary& vocab,
                    OovPolicy policy, int threads) {
  auto score = [&params](EntityId h, RelationId r) { return score_all_tails(params, h, r, Mode::kEval); };
  return run_queries(score, expand_queries(test, vocab), num_rejected, params.num_entities(), filter,
                     policy, threads);
}

std::map<std::string, double> per_relation_mrr(const std::vector<RankRecord>& records,
                                               const Vocabulary& vocab) {
  std::map<std::string, std::pair<double, std::size_t>> acc;
  for (const auto& r : records) {
    const std::string& name = vocab.relation_name(vocab.base_of(r.triple.rel));
    auto& [sum, count] = acc[name];
    sum += 1.0 / static_cast<double>(r.rank);
    count += 1;
  }
  std::map<std::string, double> out;
  for (const auto& [name, sc] : acc) out[name] = sc.first / static_cast<double>(sc.second);
  return out;
}

EvalResult ensemble_evaluate(const std::vector<const ModelParams*>& models,
                             const std::vector<Triple>& test, std::size_t num_rejected,
                             const KvsAllIndex& filter, const Vocabulary& vocab, OovPolicy policy,
                             int threads) {
  if (models.size() < 2) throw std::invalid_argument("ensemble: need at least two models");
  for (const ModelParams* m : models) {
    if (m->num_entities() != models[0]->num_entities() ||
        m->num_relations() != models[0]->num_relations())
      throw std::invalid_argument("ensemble: models disagree on the vocabulary size");
  }
  auto score = [&models](EntityId h, RelationId r) {
    std::vector<double> avg;
    for (const ModelParams* m : models) {
      std::vector<double> s = score_all_tails(*m, h, r, Mode::kEval);
      if (avg.empty()) avg.assign(s.size(), 0.0);
      for (std::size_t k = 0; k < s.size(); ++k) avg[k] += sigmoid(s[k]);
    }
    const double inv = 1.0 / static_cast<double>(models.size());
    for (double& v : avg) v *= inv;
    return avg;
  };
  return run_queries(score, expand_queries(test, vocab), num_rejected, models[0]->num_entities(),
                     filter, policy, threads);
}

EvalResult ablate_evaluate(const ModelParams& params, const std::vector<Triple>& test,
                           std::size_t num_rejected, const KvsAllIndex& filter,
                           const Vocabulary& vocab, Ablation ablation, OovPolicy policy) {
  if (ablation == Ablation::kAsTrained)
    return evaluate(params, test, num_rejected, filter, vocab, policy);
  if (params.kind != ModelKind::kConEx)
    throw std::invalid_argument("ablate: no-conv requires the gated model");
  auto score = [&params](EntityId h, RelationId r) { return degenerate_scores(params, h, r); };
  return run_queries(score, expand_queries(test, vocab), num_rejected, params.num_entities(), filter,
                     policy, 1);
}

std::string format_metrics(const Metrics& m) {
  std::ostringstream out;
  out.precision(6);
  out << "mrr\t" << m.mrr << "\n"
      << "hits1\t" << m.hits1 << "\n"
      << "hits3\t" << m.hits3 << "\n"
      << "hits10\t" << m.hits10 << "\n"
      << "n_queries\t" << m.n_queries << "\n";
  return out.str();
}

}  // namespace kge
