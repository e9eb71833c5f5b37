#include "kge/data.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace kge {

EntityId Vocabulary::add_entity(const std::string& name) {
  auto it = entity_ids_.find(name);
  if (it != entity_ids_.end()) return it->second;
  EntityId id = static_cast<EntityId>(entity_names_.size());
  entity_names_.push_back(name);
  entity_ids_.emplace(name, id);
  return id;
}

RelationId Vocabulary::add_relation(const std::string& name) {
  auto it = relation_ids_.find(name);
  if (it != relation_ids_.end()) return it->second;
  if (base_relations_) throw std::logic_error("vocabulary already augmented; cannot add relations");
  RelationId id = static_cast<RelationId>(relation_names_.size());
  relation_names_.push_back(name);
  relation_ids_.emplace(name, id);
  return id;
}

std::optional<EntityId> Vocabulary::entity_id(const std::string& name) const {
  auto it = entity_ids_.find(name);
  if (it == entity_ids_.end()) return std::nullopt;
  return it->second;
}

std::optional<RelationId> Vocabulary::relation_id(const std::string& name) const {
  auto it = relation_ids_.find(name);
  if (it == relation_ids_.end()) return std::nullopt;
  return it->second;
}

void Vocabulary::augment_reciprocals() {
  if (base_relations_) throw std::logic_error("vocabulary already augmented");
  std::size_t base = relation_names_.size();
  base_relations_ = base;
  for (std::size_t i = 0; i < base; ++i) {
    std::string name = relation_names_[i] + "_reciprocal";
    relation_names_.push_back(name);
    relation_ids_.emplace(std::move(name), static_cast<RelationId>(base + i));
  }
}

RelationId Vocabulary::reciprocal_of(RelationId rel) const {
  auto base = static_cast<RelationId>(base_relation_count());
  if (rel < 0 || rel >= base) throw std::out_of_range("reciprocal_of: not a base relation id");
  return rel + base;
}

RelationId Vocabulary::base_of(RelationId rel) const {
  auto base = static_cast<RelationId>(base_relation_count());
  if (rel < 0 || rel >= static_cast<RelationId>(num_relations()))
    throw std::out_of_range("base_of: relation id out of range");
  return rel < base ? rel : rel - base;
}

std::uint64_t Vocabulary::content_hash() const {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const std::string& s) {
    for (char ch : s) {
      h ^= static_cast<unsigned char>(ch);
      h *= 1099511628211ull;
    }
    h ^= 0x1f;  // separator
    h *= 1099511628211ull;
  };
  for (const auto& name : entity_names_) mix(name);
  h ^= 0x2f;
  h *= 1099511628211ull;
  for (const auto& name : relation_names_) mix(name);
  return h;
}

void Vocabulary::write_tsv(std::ostream& out) const {
  for (std::size_t i = 0; i < entity_names_.size(); ++i)
    out << i << "\tentity\t" << entity_names_[i] << "\n";
  for (std::size_t i = 0; i < relation_names_.size(); ++i)
    out << i << "\trelation\t" << relation_names_[i] << "\n";
}

std::vector<RawTriple> parse_triples(std::istream& in) {
  std::vector<RawTriple> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t first = line.find('\t');
    if (first == std::string::npos) throw ParseError(line_no, "expected 3 tab-separated fields, got 1");
    std::size_t second = line.find('\t', first + 1);
    if (second == std::string::npos) throw ParseError(line_no, "expected 3 tab-separated fields, got 2");
    if (line.find('\t', second + 1) != std::string::npos)
      throw ParseError(line_no, "expected 3 tab-separated fields, got more");
    RawTriple t;
    t.head = line.substr(0, first);
    t.rel = line.substr(first + 1, second - first - 1);
    t.tail = line.substr(second + 1);
    t.line = line_no;
    if (t.head.empty() || t.rel.empty() || t.tail.empty())
      throw ParseError(line_no, "empty field");
    out.push_back(std::move(t));
  }
  return out;
}

MappedTriples map_triples(const std::vector<RawTriple>& raw, Vocabulary& vocab, bool extend) {
  MappedTriples out;
  out.triples.reserve(raw.size());
  for (const auto& rt : raw) {
    if (extend) {
      Triple t;
      t.head = vocab.add_entity(rt.head);
      t.rel = vocab.add_relation(rt.rel);
      t.tail = vocab.add_entity(rt.tail);
      out.triples.push_back(t);
      continue;
    }
    auto h = vocab.entity_id(rt.head);
    auto r = vocab.relation_id(rt.rel);
    auto t = vocab.entity_id(rt.tail);
    if (!h || !r || !t) {
      std::string reason = !h   ? "unknown entity '" + rt.head + "'"
                           : !r ? "unknown relation '" + rt.rel + "'"
                                : "unknown entity '" + rt.tail + "'";
      out.rejected.push_back({rt, std::move(reason)});
      continue;
    }
    out.triples.push_back({*h, *r, *t});
  }
  return out;
}

Vocabulary build_vocabulary(const std::vector<RawTriple>& raw) {
  if (raw.empty()) throw std::invalid_argument("build_vocabulary: empty triple list");
  Vocabulary vocab;
  for (const auto& rt : raw) {
    vocab.add_entity(rt.head);
    vocab.add_relation(rt.rel);
    vocab.add_entity(rt.tail);
  }
  return vocab;
}

std::vector<Triple> add_reciprocals(const std::vector<Triple>& triples, const Vocabulary& vocab) {
  auto base = static_cast<RelationId>(vocab.base_relation_count());
  std::vector<Triple> out;
  out.reserve(triples.size() * 2);
  for (const auto& t : triples) {
    if (t.rel >= base)
      throw std::invalid_argument("add_reciprocals: triple already uses a reciprocal relation id");
    out.push_back(t);
  }
  for (const auto& t : triples) {
    out.push_back({t.tail, static_cast<RelationId>(t.rel + base), t.head});
  }
  return out;
}

void KvsAllIndex::insert(const Triple& t) {
  auto& tails = map_[{t.head, t.rel}];
  auto it = std::lower_bound(tails.begin(), tails.end(), t.tail);
  if (it == tails.end() || *it != t.tail) tails.insert(it, t.tail);
}

const std::vector<EntityId>* KvsAllIndex::tails(EntityId head, RelationId rel) const {
  auto it = map_.find({head, rel});
  return it == map_.end() ? nullptr : &it->second;
}

std::size_t KvsAllIndex::total_tails() const {
  std::size_t n = 0;
  for (const auto& [key, tails] : map_) n += tails.size();
  return n;
}

KvsAllIndex build_kvsall(const std::vector<Triple>& triples) {
  KvsAllIndex index;
  for (const auto& t : triples) index.insert(t);
  return index;
}

KvsAllIndex build_filter_index(const std::vector<Triple>& train, const std::vector<Triple>& valid,
                               const std::vector<Triple>& test) {
  KvsAllIndex index;
  for (const auto& t : train) index.insert(t);
  for (const auto& t : valid) index.insert(t);
  for (const auto& t : test) index.insert(t);
  return index;
}

Dataset Dataset::from_raw(std::vector<RawTriple> train, std::vector<RawTriple> valid,
                          std::vector<RawTriple> test, bool merge) {
  Dataset ds;
  if (merge) {
    train.insert(train.end(), valid.begin(), valid.end());
    valid.clear();
  }
  ds.raw_train = std::move(train);
  ds.raw_valid = std::move(valid);
  ds.raw_test = std::move(test);
  ds.vocab = build_vocabulary(ds.raw_train);
  ds.vocab.augment_reciprocals();
  ds.train = map_triples(ds.raw_train, ds.vocab, false).triples;
  auto mv = map_triples(ds.raw_valid, ds.vocab, false);
  ds.valid = std::move(mv.triples);
  ds.rejected_valid = std::move(mv.rejected);
  auto mt = map_triples(ds.raw_test, ds.vocab, false);
  ds.test = std::move(mt.triples);
  ds.rejected_test = std::move(mt.rejected);
  return ds;
}

Dataset Dataset::load(const std::filesystem::path& dir, bool merge) {
  auto read = [](const std::filesystem::path& p) {
    std::ifstream f(p);
    if (!f) throw std::runtime_error("cannot open " + p.string());
    return parse_triples(f);
  };
  return from_raw(read(dir / "train.txt"), read(dir / "valid.txt"), read(dir / "test.txt"), merge);
}

Dataset merge_train_valid(const Dataset& ds) {
  auto merged = ds.raw_train;
  merged.insert(merged.end(), ds.raw_valid.begin(), ds.raw_valid.end());
  return Dataset::from_raw(std::move(merged), {}, ds.raw_test, false);
}

std::string format_triples(const std::vector<Triple>& triples, const Vocabulary& vocab) {
  std::ostringstream out;
  for (const auto& t : triples) {
    out << vocab.entity_name(t.head) << '\t' << vocab.relation_name(t.rel) << '\t'
        << vocab.entity_name(t.tail) << '\n';
  }
  return out.str();
}

}  // namespace kge
