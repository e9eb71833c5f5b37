#include <doctest.h>

#include <array>
#include <map>
#include <set>
#include <sstream>

#include "kge/data.hpp"
#include "kge/rng.hpp"

using namespace kge;

namespace {

std::vector<RawTriple> raw(std::initializer_list<std::array<const char*, 3>> rows) {
  std::vector<RawTriple> out;
  std::size_t line = 0;
  for (const auto& r : rows) out.push_back({r[0], r[1], r[2], ++line});
  return out;
}

}  // namespace

TEST_CASE("parse_triples accepts well-formed lines") {
  std::istringstream in("a\tlikes\tb\n");
  auto triples = parse_triples(in);
  REQUIRE(triples.size() == 1);
  CHECK(triples[0].head == "a");
  CHECK(triples[0].rel == "likes");
  CHECK(triples[0].tail == "b");
  CHECK(triples[0].line == 1);
}

TEST_CASE("parse_triples reports malformed lines with their number") {
  std::istringstream two_fields("a\tlikes\n");
  CHECK_THROWS_WITH_AS(parse_triples(two_fields), "line 1: expected 3 tab-separated fields, got 2",
                       ParseError);
  std::istringstream four_fields("a\tb\tc\nx\ty\tz\tw\n");
  try {
    parse_triples(four_fields);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line == 2);
  }
}

TEST_CASE("parse_triples skips blank lines and tolerates CRLF") {
  std::istringstream in("a\tp\tb\r\n\nc\tp\td\n");
  auto triples = parse_triples(in);
  REQUIRE(triples.size() == 2);
  CHECK(triples[1].head == "c");
  CHECK(triples[1].line == 3);
}

TEST_CASE("build_vocabulary assigns dense first-appearance ids") {
  auto vocab = build_vocabulary(raw({{"a", "p", "b"}, {"b", "p", "a"}}));
  CHECK(vocab.num_entities() == 2);
  CHECK(vocab.num_relations() == 1);
  CHECK(*vocab.entity_id("a") == 0);
  CHECK(*vocab.entity_id("b") == 1);
  CHECK(*vocab.relation_id("p") == 0);
  CHECK_THROWS_AS(build_vocabulary({}), std::invalid_argument);
}

TEST_CASE("vocabulary round trip is the identity") {
  auto vocab = build_vocabulary(raw({{"x", "p", "y"}, {"z", "q", "x"}, {"y", "p", "z"}}));
  for (std::size_t i = 0; i < vocab.num_entities(); ++i)
    CHECK(*vocab.entity_id(vocab.entity_name(static_cast<EntityId>(i))) == static_cast<EntityId>(i));
  for (std::size_t i = 0; i < vocab.num_relations(); ++i)
    CHECK(*vocab.relation_id(vocab.relation_name(static_cast<RelationId>(i))) == static_cast<RelationId>(i));
}

TEST_CASE("add_reciprocals doubles the triple list") {
  auto rt = raw({{"a", "p", "b"}});
  auto vocab = build_vocabulary(rt);
  vocab.augment_reciprocals();
  CHECK(vocab.num_relations() == 2);
  CHECK(vocab.base_relation_count() == 1);
  CHECK(vocab.relation_name(1) == "p_reciprocal");

  auto triples = map_triples(rt, vocab, false).triples;
  auto aug = add_reciprocals(triples, vocab);
  REQUIRE(aug.size() == 2);
  CHECK(aug[0] == Triple{0, 0, 1});
  CHECK(aug[1] == Triple{1, 1, 0});

  // double augmentation is rejected, never silently applied
  CHECK_THROWS_AS(add_reciprocals(aug, vocab), std::invalid_argument);
}

TEST_CASE("add_reciprocals keeps the 2N structural identity") {
  Rng rng(3);
  std::vector<RawTriple> rows;
  for (int i = 0; i < 40; ++i)
    rows.push_back({"e" + std::to_string(rng.next_below(9)), "r" + std::to_string(rng.next_below(3)),
                    "e" + std::to_string(rng.next_below(9)), static_cast<std::size_t>(i + 1)});
  auto vocab = build_vocabulary(rows);
  vocab.augment_reciprocals();
  auto triples = map_triples(rows, vocab, false).triples;
  auto aug = add_reciprocals(triples, vocab);
  CHECK(aug.size() == 2 * triples.size());
  for (std::size_t i = 0; i < triples.size(); ++i) {
    CHECK(aug[triples.size() + i].head == triples[i].tail);
    CHECK(aug[triples.size() + i].tail == triples[i].head);
    CHECK(aug[triples.size() + i].rel ==
          static_cast<RelationId>(triples[i].rel + vocab.base_relation_count()));
  }
}

TEST_CASE("build_kvsall groups tails per key") {
  std::vector<Triple> triples{{0, 0, 1}, {0, 0, 2}};
  auto index = build_kvsall(triples);
  CHECK(index.num_keys() == 1);
  REQUIRE(index.tails(0, 0) != nullptr);
  CHECK(*index.tails(0, 0) == std::vector<EntityId>{1, 2});

  auto two = build_kvsall({{0, 0, 1}, {1, 1, 0}});
  CHECK(two.num_keys() == 2);
  CHECK(two.tails(0, 0)->size() == 1);
  CHECK(two.tails(1, 1)->size() == 1);
}

TEST_CASE("build_kvsall equals brute-force grouping on a random KG") {
  Rng rng(11);
  std::vector<Triple> triples;
  for (int i = 0; i < 50; ++i)
    triples.push_back({static_cast<EntityId>(rng.next_below(8)), static_cast<RelationId>(rng.next_below(4)),
                       static_cast<EntityId>(rng.next_below(8))});
  auto index = build_kvsall(triples);

  std::map<std::pair<EntityId, RelationId>, std::set<EntityId>> oracle;
  for (const auto& t : triples) oracle[{t.head, t.rel}].insert(t.tail);
  CHECK(index.num_keys() == oracle.size());
  for (const auto& [key, tails] : oracle) {
    const auto* got = index.tails(key.first, key.second);
    REQUIRE(got != nullptr);
    CHECK(std::vector<EntityId>(tails.begin(), tails.end()) == *got);
  }
  // flattening the index reproduces the distinct-triple multiset
  std::set<Triple> distinct(triples.begin(), triples.end());
  CHECK(index.total_tails() == distinct.size());
}

TEST_CASE("build_filter_index unions the splits with set semantics") {
  std::vector<Triple> train{{0, 0, 1}, {1, 0, 2}};
  std::vector<Triple> valid{{2, 0, 3}};
  std::vector<Triple> test{{3, 0, 4}};
  auto disjoint = build_filter_index(train, valid, test);
  CHECK(disjoint.total_tails() == 4);

  auto dup = build_filter_index(train, {}, {{0, 0, 1}});
  CHECK(dup.total_tails() == 2);  // the duplicate is stored once

  // brute-force union oracle
  std::set<Triple> all;
  for (const auto* split : {&train, &valid, &test})
    for (const auto& t : *split) all.insert(t);
  CHECK(disjoint.total_tails() == all.size());
}

TEST_CASE("dataset keeps out-of-vocabulary test triples in the rejected list") {
  auto train = raw({{"a", "p", "b"}, {"b", "p", "c"}, {"c", "q", "a"}});
  auto test = raw({{"a", "p", "c"}, {"a", "p", "unknown1"}, {"ghost", "q", "b"}, {"a", "mystery", "b"}});
  auto ds = Dataset::from_raw(train, {}, test, false);
  CHECK(ds.test.size() == 1);
  REQUIRE(ds.rejected_test.size() == 3);
  CHECK(ds.rejected_test[0].reason == "unknown entity 'unknown1'");
  CHECK(ds.rejected_test[1].reason == "unknown entity 'ghost'");
  CHECK(ds.rejected_test[2].reason == "unknown relation 'mystery'");
  CHECK(ds.rejected_test[1].triple.line == 3);
}

TEST_CASE("merge_train_valid folds valid into train and rebuilds the vocabulary") {
  std::vector<RawTriple> train;
  for (int i = 0; i < 10; ++i)
    train.push_back({"e" + std::to_string(i), "p", "e" + std::to_string((i + 1) % 10),
                     static_cast<std::size_t>(i + 1)});
  auto valid = raw({{"e0", "p", "fresh"}, {"fresh", "p", "e3"}});
  auto ds = Dataset::from_raw(train, valid, {{"e0", "p", "e5", 1}}, false);
  CHECK(ds.train.size() == 10);
  CHECK(ds.valid.size() == 0);  // "fresh" is unknown under the train-only vocabulary
  CHECK(ds.rejected_valid.size() == 2);

  auto merged = merge_train_valid(ds);
  CHECK(merged.train.size() == 12);
  CHECK(merged.valid.empty());
  CHECK(merged.vocab.num_entities() == 11);  // "fresh" now has an id
  // ids of previously-seen names are unchanged by the rebuild
  CHECK(*merged.vocab.entity_id("e0") == *ds.vocab.entity_id("e0"));

  auto twice = merge_train_valid(merged);
  CHECK(twice.train.size() == merged.train.size());
  CHECK(twice.vocab.content_hash() == merged.vocab.content_hash());
}

TEST_CASE("writing triples back to text and re-parsing is the identity") {
  Rng rng(17);
  std::vector<RawTriple> rows;
  for (int i = 0; i < 30; ++i)
    rows.push_back({"n" + std::to_string(rng.next_below(12)), "rel" + std::to_string(rng.next_below(5)),
                    "n" + std::to_string(rng.next_below(12)), static_cast<std::size_t>(i + 1)});
  auto vocab = build_vocabulary(rows);
  auto triples = map_triples(rows, vocab, false).triples;

  std::istringstream round(format_triples(triples, vocab));
  auto reparsed = map_triples(parse_triples(round), vocab, false);
  CHECK(reparsed.rejected.empty());
  CHECK(reparsed.triples == triples);
}

TEST_CASE("vocab tsv lists entities then relations") {
  auto vocab = build_vocabulary(raw({{"a", "p", "b"}}));
  vocab.augment_reciprocals();
  std::ostringstream out;
  vocab.write_tsv(out);
  CHECK(out.str() == "0\tentity\ta\n1\tentity\tb\n0\trelation\tp\n1\trelation\tp_reciprocal\n");
}
