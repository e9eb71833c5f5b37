#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "kge/data.hpp"
#include "kge/model.hpp"

namespace kge {

struct Metrics {
  double mrr = 0.0;
  double hits1 = 0.0;
  double hits3 = 0.0;
  double hits10 = 0.0;
  std::size_t n_queries = 0;
};

enum class QueryDirection { kTail, kHead };

struct RankRecord {
  Triple triple;  // the original test triple
  QueryDirection direction = QueryDirection::kTail;
  std::size_t rank = 0;       // 1-based; counts strictly-greater candidate scores
  std::size_t tie_count = 0;  // unmasked candidates sharing the target's score
};

struct RankResult {
  std::size_t rank = 0;
  std::size_t tie_count = 0;
};

enum class OovPolicy { kIncludeWorstRank, kSkip };

enum class Ablation { kAsTrained, kNoConv };

// Optimistic filtered rank of `target`: candidates are all entities except
// the known-true tails (the target itself is always exempted); rank = 1 +
// number of candidates scoring strictly above the target.
RankResult filtered_rank(std::span<const double> scores, EntityId target,
                         const std::vector<EntityId>* known_tails);

struct EvalResult {
  Metrics metrics;
  std::vector<RankRecord> records;  // in-vocabulary queries only
};

// Filtered link-prediction evaluation: per test triple one tail query
// (h, r, ?) and one head query routed through the reciprocal relation
// (t, r+base, ?). Out-of-vocabulary test triples (the rejected list) either
// contribute two worst-rank queries or are skipped, per policy.
EvalResult evaluate(const ModelParams& params, const std::vector<Triple>& test,
                    std::size_t num_rejected, const KvsAllIndex& filter, const Vocabulary& vocab,
                    OovPolicy policy = OovPolicy::kIncludeWorstRank, int threads = 1);

// Mean reciprocal rank grouped by base relation (head-direction records fold
// into the relation of their original triple).
std::map<std::string, double> per_relation_mrr(const std::vector<RankRecord>& records,
                                               const Vocabulary& vocab);

// Equal-weight average of the models' sigmoid score vectors per query, then
// ranked as usual. All models must share the entity/relation space.
EvalResult ensemble_evaluate(const std::vector<const ModelParams*>& models,
                             const std::vector<Triple>& test, std::size_t num_rejected,
                             const KvsAllIndex& filter, const Vocabulary& vocab,
                             OovPolicy policy = OovPolicy::kIncludeWorstRank, int threads = 1);

// Evaluation-time ablation: kNoConv forces the convolutional gate to 1+1i
// (gated model only); kAsTrained is a plain evaluate.
EvalResult ablate_evaluate(const ModelParams& params, const std::vector<Triple>& test,
                           std::size_t num_rejected, const KvsAllIndex& filter,
                           const Vocabulary& vocab, Ablation ablation,
                           OovPolicy policy = OovPolicy::kIncludeWorstRank);

Metrics metrics_from_ranks(const std::vector<std::size_t>& ranks);

std::string format_metrics(const Metrics& m);

}  // namespace kge
