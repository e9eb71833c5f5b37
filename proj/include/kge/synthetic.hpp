#pragma once

#include <cstdint>
#include <filesystem>

#include "kge/data.hpp"

namespace kge {

struct SyntheticSplits {
  std::vector<RawTriple> train, valid, test;
};

// Deterministic 60-entity knowledge graph exercising the three classic
// relation patterns over three disjoint 20-entity groups:
//   sym  - complete symmetric clique (both directions of every pair),
//   anti - strict order by index (one direction only, never the reverse),
//   comp - transitive ancestor closure of a binary tree.
// Triples are shuffled per relation with the seeded generator and split
// 80/5/15; a fix-up pass moves triples into train until every entity is
// seen there, so the vocabulary always covers all splits.
SyntheticSplits make_pattern_kg(std::uint64_t seed);

// Writes train.txt / valid.txt / test.txt under dir.
void write_dataset(const std::filesystem::path& dir, const SyntheticSplits& splits);

}  // namespace kge
