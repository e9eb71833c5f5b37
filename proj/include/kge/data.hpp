#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace kge {

using EntityId = std::int32_t;
using RelationId = std::int32_t;

struct Triple {
  EntityId head = 0;
  RelationId rel = 0;
  EntityId tail = 0;

  friend bool operator==(const Triple&, const Triple&) = default;
  friend auto operator<=>(const Triple&, const Triple&) = default;
};

// One tab-separated line, before id mapping.
struct RawTriple {
  std::string head;
  std::string rel;
  std::string tail;
  std::size_t line = 0;

  friend bool operator==(const RawTriple&, const RawTriple&) = default;
};

struct RejectedTriple {
  RawTriple triple;
  std::string reason;  // e.g. "unknown entity 'x'"
};

struct ParseError : std::runtime_error {
  std::size_t line;
  ParseError(std::size_t line_no, const std::string& msg)
      : std::runtime_error("line " + std::to_string(line_no) + ": " + msg), line(line_no) {}
};

// Dense, first-appearance-order name<->id bijections for entities and
// relations. Relation ids < base_relation_count() are originals; the
// reciprocal of relation i is i + base_relation_count().
class Vocabulary {
 public:
  EntityId add_entity(const std::string& name);
  RelationId add_relation(const std::string& name);

  std::optional<EntityId> entity_id(const std::string& name) const;
  std::optional<RelationId> relation_id(const std::string& name) const;
  const std::string& entity_name(EntityId id) const { return entity_names_.at(id); }
  const std::string& relation_name(RelationId id) const { return relation_names_.at(id); }

  std::size_t num_entities() const { return entity_names_.size(); }
  std::size_t num_relations() const { return relation_names_.size(); }
  std::size_t base_relation_count() const { return base_relations_ ? *base_relations_ : relation_names_.size(); }
  bool augmented() const { return base_relations_.has_value(); }

  // Freezes the base relation count and appends one "<name>_reciprocal"
  // relation per original, so the id space becomes 2*|R|.
  void augment_reciprocals();

  RelationId reciprocal_of(RelationId rel) const;
  // Maps a reciprocal id back to its base id; identity on base ids.
  RelationId base_of(RelationId rel) const;

  // Stable content hash over all names in id order; checkpoints store it so
  // a model is never evaluated against a differently-indexed vocabulary.
  std::uint64_t content_hash() const;

  void write_tsv(std::ostream& out) const;

 private:
  std::vector<std::string> entity_names_;
  std::vector<std::string> relation_names_;
  std::unordered_map<std::string, EntityId> entity_ids_;
  std::unordered_map<std::string, RelationId> relation_ids_;
  std::optional<std::size_t> base_relations_;
};

struct MappedTriples {
  std::vector<Triple> triples;
  std::vector<RejectedTriple> rejected;
};

// Parses `head<TAB>relation<TAB>tail` lines. Empty lines are skipped; a line
// with the wrong field count raises ParseError with its line number.
std::vector<RawTriple> parse_triples(std::istream& in);

// Maps names to ids. In extend mode unseen names are added to the
// vocabulary; otherwise triples naming unknown entities/relations land in
// the rejected list with a reason.
MappedTriples map_triples(const std::vector<RawTriple>& raw, Vocabulary& vocab, bool extend);

// First-appearance-order vocabulary over a triple list (head, tail, then
// relation per line). Errors on empty input.
Vocabulary build_vocabulary(const std::vector<RawTriple>& raw);

// Appends (t, r + base, h) for every (h, r, t). Errors if any input triple
// already uses a reciprocal relation id (double-augmentation guard).
std::vector<Triple> add_reciprocals(const std::vector<Triple>& triples, const Vocabulary& vocab);

// Exact multimap inversion of a (typically augmented) triple list:
// (head, rel) -> sorted, duplicate-free tail ids.
class KvsAllIndex {
 public:
  using Key = std::pair<EntityId, RelationId>;

  void insert(const Triple& t);
  const std::vector<EntityId>* tails(EntityId head, RelationId rel) const;
  const std::map<Key, std::vector<EntityId>>& entries() const { return map_; }
  std::size_t num_keys() const { return map_.size(); }
  std::size_t total_tails() const;

 private:
  std::map<Key, std::vector<EntityId>> map_;
};

KvsAllIndex build_kvsall(const std::vector<Triple>& triples);

// Union of all splits' (h,r)->tails; masks known-true candidates during
// filtered ranking. Inputs must already be augmented.
KvsAllIndex build_filter_index(const std::vector<Triple>& train, const std::vector<Triple>& valid,
                               const std::vector<Triple>& test);

// The three benchmark splits plus their vocabulary. Id-mapped triples hold
// original (non-reciprocal) relation ids; augmentation is applied on demand
// by the training/evaluation layers. Raw splits are retained so train+valid
// merging can rebuild the vocabulary.
struct Dataset {
  std::vector<RawTriple> raw_train, raw_valid, raw_test;
  std::vector<Triple> train, valid, test;
  std::vector<RejectedTriple> rejected_valid, rejected_test;
  Vocabulary vocab;

  // Reads train.txt/valid.txt/test.txt from a directory. The vocabulary is
  // built from train (plus valid when merge_train_valid is set, in which
  // case valid is folded into train). Test triples naming unknown entities
  // or relations are retained in rejected_test.
  static Dataset load(const std::filesystem::path& dir, bool merge_train_valid = false);

  // Builds a dataset from in-memory splits (same semantics as load).
  static Dataset from_raw(std::vector<RawTriple> train, std::vector<RawTriple> valid,
                          std::vector<RawTriple> test, bool merge_train_valid = false);
};

// train := train + valid, valid := empty, vocabulary rebuilt over the merged
// split. Idempotent once valid is empty.
Dataset merge_train_valid(const Dataset& ds);

std::string format_triples(const std::vector<Triple>& triples, const Vocabulary& vocab);

}  // namespace kge
