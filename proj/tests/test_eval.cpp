#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "kge/eval.hpp"
#include "kge/rng.hpp"
#include "kge/train.hpp"

using namespace kge;

namespace {

// Exhaustive re-ranking oracle: build the candidate list explicitly, sort by
// score, count strictly-better candidates by scanning.
std::size_t oracle_rank(const std::vector<double>& scores, EntityId target,
                        const std::vector<EntityId>* known) {
  std::set<EntityId> masked;
  if (known) masked.insert(known->begin(), known->end());
  masked.erase(target);
  std::size_t better = 0;
  for (std::size_t k = 0; k < scores.size(); ++k) {
    if (masked.count(static_cast<EntityId>(k))) continue;
    if (scores[k] > scores[static_cast<std::size_t>(target)]) ++better;
  }
  return better + 1;
}

// Full evaluation oracle over a model and test split, independent of
// evaluate()'s query plumbing.
Metrics oracle_metrics(const ModelParams& params, const std::vector<Triple>& test,
                       const KvsAllIndex& filter, const Vocabulary& vocab) {
  std::vector<std::size_t> ranks;
  for (const auto& t : test) {
    auto tail_scores = score_all_tails(params, t.head, t.rel);
    ranks.push_back(oracle_rank(tail_scores, t.tail, filter.tails(t.head, t.rel)));
    RelationId rq = vocab.reciprocal_of(t.rel);
    auto head_scores = score_all_tails(params, t.tail, rq);
    ranks.push_back(oracle_rank(head_scores, t.head, filter.tails(t.tail, rq)));
  }
  return metrics_from_ranks(ranks);
}

Dataset random_dataset(std::uint64_t seed, std::size_t entities, std::size_t relations,
                       std::size_t n_train, std::size_t n_test) {
  Rng rng(seed);
  auto name = [](std::size_t i) { return "n" + std::to_string(i); };
  std::vector<RawTriple> train, test;
  // every entity shows up in train so the vocabulary covers the test split
  for (std::size_t i = 0; i < entities; ++i)
    train.push_back({name(i), "r0", name((i + 1) % entities), i + 1});
  for (std::size_t i = train.size(); i < n_train; ++i)
    train.push_back({name(rng.next_below(entities)), "r" + std::to_string(rng.next_below(relations)),
                     name(rng.next_below(entities)), i + 1});
  for (std::size_t i = 0; i < n_test; ++i)
    test.push_back({name(rng.next_below(entities)), "r" + std::to_string(rng.next_below(relations)),
                    name(rng.next_below(entities)), i + 1});
  return Dataset::from_raw(train, {}, test, false);
}

}  // namespace

TEST_CASE("filtered_rank counts strictly better unmasked candidates") {
  std::vector<double> scores{0.9, 0.5, 0.7};
  std::vector<EntityId> known{0};
  auto r = filtered_rank(scores, 1, &known);
  CHECK(r.rank == 2);
  CHECK(r.tie_count == 0);

  std::vector<double> peak{0.1, 0.9, 0.3};
  CHECK(filtered_rank(peak, 1, nullptr).rank == 1);

  std::vector<double> flat(6, 0.25);
  auto tied = filtered_rank(flat, 3, nullptr);
  CHECK(tied.rank == 1);
  CHECK(tied.tie_count == 5);

  CHECK_THROWS_AS(filtered_rank(scores, 7, nullptr), std::out_of_range);
}

TEST_CASE("the target itself is always exempt from the mask") {
  std::vector<double> scores{0.9, 0.5, 0.7};
  std::vector<EntityId> known{0, 1};  // includes the target
  CHECK(filtered_rank(scores, 1, &known).rank == 2);
}

TEST_CASE("a minus-infinity candidate never changes a rank") {
  Rng rng(3);
  for (int it = 0; it < 20; ++it) {
    std::vector<double> scores(8);
    for (double& s : scores) s = rng.uniform(-1, 1);
    EntityId target = static_cast<EntityId>(rng.next_below(8));
    auto base = filtered_rank(scores, target, nullptr);
    scores.push_back(-std::numeric_limits<double>::infinity());
    auto extended = filtered_rank(scores, target, nullptr);
    CHECK(base.rank == extended.rank);
  }
}

TEST_CASE("masking a better-scoring known tail improves the rank by exactly one") {
  std::vector<double> scores{0.9, 0.5, 0.7, 0.2};
  CHECK(filtered_rank(scores, 1, nullptr).rank == 3);
  std::vector<EntityId> known{0};
  CHECK(filtered_rank(scores, 1, &known).rank == 2);
  std::vector<EntityId> known2{0, 2};
  CHECK(filtered_rank(scores, 1, &known2).rank == 1);
}

TEST_CASE("metrics arithmetic") {
  Metrics m = metrics_from_ranks({1, 2, 4});
  CHECK(m.mrr == doctest::Approx((1.0 + 0.5 + 0.25) / 3).epsilon(1e-12));
  CHECK(m.hits1 == doctest::Approx(1.0 / 3).epsilon(1e-12));
  CHECK(m.hits3 == doctest::Approx(2.0 / 3).epsilon(1e-12));
  CHECK(m.hits10 == 1.0);
  CHECK(m.n_queries == 3);
  CHECK(m.hits1 <= m.hits3);
  CHECK(m.hits3 <= m.hits10);
  CHECK(m.mrr >= m.hits1);
}

TEST_CASE("a hand-built perfect model reaches MRR one") {
  // e0 = 1, e1 = i, relation = i, reciprocal = -i; the lone test triple
  // (e0, r, e1) ranks first in both directions.
  std::vector<RawTriple> train{{"e0", "r", "e1", 1}};
  auto ds = Dataset::from_raw(train, {}, train, false);
  ModelParams p;
  p.kind = ModelKind::kComplEx;
  p.dim = 1;
  p.entities = EmbeddingTable(2, 1);
  p.relations = EmbeddingTable(2, 1);
  p.entities.re() = {1.0, 0.0};
  p.entities.im() = {0.0, 1.0};
  p.relations.re() = {0.0, 0.0};
  p.relations.im() = {1.0, -1.0};

  auto filter = build_filter_index(add_reciprocals(ds.train, ds.vocab), {},
                                   add_reciprocals(ds.test, ds.vocab));
  auto result = evaluate(p, ds.test, 0, filter, ds.vocab);
  CHECK(result.metrics.mrr == 1.0);
  CHECK(result.metrics.n_queries == 2);
}

TEST_CASE("evaluate matches the exhaustive oracle on random toy graphs") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto ds = random_dataset(seed, 4 + seed % 6, 2, 25, 8);
    auto params = init_params(seed, ds.vocab.num_entities(), ds.vocab.num_relations(), 3, 2,
                              seed % 2 ? ModelKind::kConEx : ModelKind::kComplEx);
    auto filter = build_filter_index(add_reciprocals(ds.train, ds.vocab), {},
                                     add_reciprocals(ds.test, ds.vocab));
    auto got = evaluate(params, ds.test, 0, filter, ds.vocab);
    auto want = oracle_metrics(params, ds.test, filter, ds.vocab);
    CHECK(got.metrics.mrr == want.mrr);
    CHECK(got.metrics.hits1 == want.hits1);
    CHECK(got.metrics.hits3 == want.hits3);
    CHECK(got.metrics.hits10 == want.hits10);
    CHECK(got.metrics.n_queries == want.n_queries);
  }
}

TEST_CASE("evaluation is stable across thread counts") {
  auto ds = random_dataset(5, 8, 2, 30, 10);
  auto params = init_params(5, ds.vocab.num_entities(), ds.vocab.num_relations(), 3, 2, ModelKind::kConEx);
  auto filter = build_filter_index(add_reciprocals(ds.train, ds.vocab), {},
                                   add_reciprocals(ds.test, ds.vocab));
  auto one = evaluate(params, ds.test, 0, filter, ds.vocab, OovPolicy::kIncludeWorstRank, 1);
  auto four = evaluate(params, ds.test, 0, filter, ds.vocab, OovPolicy::kIncludeWorstRank, 4);
  CHECK(one.metrics.mrr == four.metrics.mrr);
  CHECK(one.records.size() == four.records.size());
  for (std::size_t i = 0; i < one.records.size(); ++i) CHECK(one.records[i].rank == four.records[i].rank);
}

TEST_CASE("empty test split is an error") {
  auto ds = random_dataset(2, 5, 2, 20, 5);
  auto params = init_params(2, ds.vocab.num_entities(), ds.vocab.num_relations(), 3, 0, ModelKind::kComplEx);
  KvsAllIndex filter;
  CHECK_THROWS_AS(evaluate(params, {}, 0, filter, ds.vocab), std::invalid_argument);
}

TEST_CASE("out-of-vocabulary policy changes the query count") {
  std::vector<RawTriple> train{{"a", "p", "b", 1}, {"b", "p", "c", 2}, {"c", "p", "a", 3}};
  std::vector<RawTriple> test{{"a", "p", "c", 1}, {"a", "p", "zzz", 2}};
  auto ds = Dataset::from_raw(train, {}, test, false);
  CHECK(ds.rejected_test.size() == 1);
  auto params = init_params(3, ds.vocab.num_entities(), ds.vocab.num_relations(), 2, 0, ModelKind::kComplEx);
  auto filter = build_filter_index(add_reciprocals(ds.train, ds.vocab), {},
                                   add_reciprocals(ds.test, ds.vocab));
  auto incl = evaluate(params, ds.test, ds.rejected_test.size(), filter, ds.vocab,
                       OovPolicy::kIncludeWorstRank);
  auto skip = evaluate(params, ds.test, ds.rejected_test.size(), filter, ds.vocab, OovPolicy::kSkip);
  CHECK(incl.metrics.n_queries == 4);
  CHECK(skip.metrics.n_queries == 2);
}

TEST_CASE("per-relation MRR folds reciprocal queries into the base relation") {
  auto vocab = build_vocabulary({{"a", "p", "b", 1}, {"a", "q", "b", 2}});
  vocab.augment_reciprocals();
  std::vector<RankRecord> records{
      {{0, 0, 1}, QueryDirection::kTail, 1, 0},
      {{0, 0, 1}, QueryDirection::kHead, 2, 0},
      {{0, 1, 1}, QueryDirection::kTail, 4, 0},
      {{0, 1, 1}, QueryDirection::kHead, 4, 0},
  };
  auto table = per_relation_mrr(records, vocab);
  CHECK(table.size() == 2);
  CHECK(table["p"] == doctest::Approx((1.0 + 0.5) / 2).epsilon(1e-12));
  CHECK(table["q"] == doctest::Approx(0.25).epsilon(1e-12));

  // a single relation reproduces the global MRR
  std::vector<RankRecord> only_p{records[0], records[1]};
  auto single = per_relation_mrr(only_p, vocab);
  CHECK(single["p"] == metrics_from_ranks({1, 2}).mrr);
}

TEST_CASE("ensembling a model with itself is the identity") {
  auto ds = random_dataset(7, 7, 2, 30, 6);
  auto params = init_params(7, ds.vocab.num_entities(), ds.vocab.num_relations(), 3, 2, ModelKind::kConEx);
  auto filter = build_filter_index(add_reciprocals(ds.train, ds.vocab), {},
                                   add_reciprocals(ds.test, ds.vocab));
  auto single = evaluate(params, ds.test, 0, filter, ds.vocab);
  auto twin = ensemble_evaluate({&params, &params}, ds.test, 0, filter, ds.vocab);
  CHECK(twin.metrics.mrr == single.metrics.mrr);
  CHECK(twin.metrics.hits10 == single.metrics.hits10);
  CHECK(twin.metrics.n_queries == single.metrics.n_queries);
}

TEST_CASE("an ensemble averages sigmoid scores, verified by hand at d = 1") {
  std::vector<RawTriple> train{{"x", "p", "y", 1}, {"y", "p", "z", 2}, {"z", "p", "x", 3}};
  auto ds = Dataset::from_raw(train, {}, {{"x", "p", "z", 1}}, false);
  auto a = init_params(1, 3, 2, 1, 0, ModelKind::kComplEx);
  auto b = init_params(2, 3, 2, 1, 0, ModelKind::kComplEx);
  auto filter = build_filter_index(add_reciprocals(ds.train, ds.vocab), {},
                                   add_reciprocals(ds.test, ds.vocab));
  auto result = ensemble_evaluate({&a, &b}, ds.test, 0, filter, ds.vocab);

  // hand-average the two probability vectors for the tail query
  auto sa = score_all_tails(a, 0, 0);
  auto sb = score_all_tails(b, 0, 0);
  std::vector<double> avg(3);
  for (int k = 0; k < 3; ++k) avg[k] = 0.5 * (sigmoid(sa[k]) + sigmoid(sb[k]));
  auto expected = filtered_rank(avg, *ds.vocab.entity_id("z"), filter.tails(0, 0));
  CHECK(result.records[0].rank == expected.rank);

  CHECK_THROWS_AS(ensemble_evaluate({&a}, ds.test, 0, filter, ds.vocab), std::invalid_argument);
  auto mismatched = init_params(3, 4, 2, 1, 0, ModelKind::kComplEx);
  CHECK_THROWS_AS(ensemble_evaluate({&a, &mismatched}, ds.test, 0, filter, ds.vocab),
                  std::invalid_argument);
}

TEST_CASE("no-conv ablation equals the ungated head on untrained tables") {
  auto ds = random_dataset(9, 6, 2, 25, 6);
  auto conex = init_params(9, ds.vocab.num_entities(), ds.vocab.num_relations(), 3, 2, ModelKind::kConEx);
  ModelParams plain = conex;
  plain.kind = ModelKind::kComplEx;
  plain.channels = 0;
  plain.conv = ConvParams{};
  auto filter = build_filter_index(add_reciprocals(ds.train, ds.vocab), {},
                                   add_reciprocals(ds.test, ds.vocab));
  auto ablated = ablate_evaluate(conex, ds.test, 0, filter, ds.vocab, Ablation::kNoConv);
  auto reference = evaluate(plain, ds.test, 0, filter, ds.vocab);
  CHECK(ablated.metrics.mrr == reference.metrics.mrr);
  CHECK(ablated.metrics.hits10 == reference.metrics.hits10);

  CHECK_THROWS_AS(ablate_evaluate(plain, ds.test, 0, filter, ds.vocab, Ablation::kNoConv),
                  std::invalid_argument);
}

TEST_CASE("uniform random scores make MRR approach H(n)/n") {
  const std::size_t n = 20;
  const std::size_t trials = 10000;
  Rng rng(123);
  double acc = 0.0;
  for (std::size_t i = 0; i < trials; ++i) {
    std::vector<double> scores(n);
    for (double& s : scores) s = rng.next_double();
    acc += 1.0 / static_cast<double>(filtered_rank(scores, 0, nullptr).rank);
  }
  const double sim = acc / static_cast<double>(trials);
  double harmonic = 0.0, second = 0.0;
  for (std::size_t k = 1; k <= n; ++k) {
    harmonic += 1.0 / static_cast<double>(k);
    second += 1.0 / static_cast<double>(k * k);
  }
  const double mean = harmonic / static_cast<double>(n);
  const double var = second / static_cast<double>(n) - mean * mean;
  const double sigma = std::sqrt(var / static_cast<double>(trials));
  CHECK(std::fabs(sim - mean) <= 3.0 * sigma);
}
