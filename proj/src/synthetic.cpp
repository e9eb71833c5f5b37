#include "kge/synthetic.hpp"

#include <fstream>
#include <set>
#include <string>

#include "kge/rng.hpp"

namespace kge {

namespace {

std::string entity_name(char group, int i) {
  std::string s(1, group);
  if (i < 10) s += '0';
  s += std::to_string(i);
  return s;
}

}  // namespace

SyntheticSplits make_pattern_kg(std::uint64_t seed) {
  const int group_size = 20;
  std::vector<std::vector<RawTriple>> by_relation(3);

  // Symmetric clique: both directions of every pair.
  for (int i = 0; i < group_size; ++i)
    for (int j = 0; j < group_size; ++j) {
      if (i == j) continue;
      by_relation[0].push_back({entity_name('s', i), "sym", entity_name('s', j), 0});
    }
  // Strict order: only the low-to-high direction ever holds.
  for (int i = 0; i < group_size; ++i)
    for (int j = i + 1; j < group_size; ++j)
      by_relation[1].push_back({entity_name('a', i), "anti", entity_name('a', j), 0});
  // Ancestor closure of the binary tree with children (2k+1, 2k+2).
  for (int node = 1; node < group_size; ++node) {
    for (int anc = (node - 1) / 2;; anc = (anc - 1) / 2) {
      by_relation[2].push_back({entity_name('c', anc), "comp", entity_name('c', node), 0});
      if (anc == 0) break;
    }
  }

  SyntheticSplits splits;
  Rng rng = Rng::substream(seed, "kg-split");
  for (auto& triples : by_relation) {
    rng.shuffle(triples);
    const std::size_t n = triples.size();
    const std::size_t n_train = (n * 80) / 100;
    const std::size_t n_valid = (n * 5) / 100;
    for (std::size_t i = 0; i < n; ++i) {
      if (i < n_train) {
        splits.train.push_back(triples[i]);
      } else if (i < n_train + n_valid) {
        splits.valid.push_back(triples[i]);
      } else {
        splits.test.push_back(triples[i]);
      }
    }
  }

  // Coverage fix-up: every entity must appear in train.
  std::set<std::string> covered;
  for (const auto& t : splits.train) {
    covered.insert(t.head);
    covered.insert(t.tail);
  }
  auto rescue = [&covered, &splits](std::vector<RawTriple>& from) {
    for (std::size_t i = 0; i < from.size();) {
      if (!covered.count(from[i].head) || !covered.count(from[i].tail)) {
        covered.insert(from[i].head);
        covered.insert(from[i].tail);
        splits.train.push_back(from[i]);
        from.erase(from.begin() + static_cast<std::ptrdiff_t>(i));
      } else {
        ++i;
      }
    }
  };
  rescue(splits.valid);
  rescue(splits.test);

  // Line numbers as they would appear in the written files.
  for (auto* split : {&splits.train, &splits.valid, &splits.test}) {
    std::size_t line = 0;
    for (auto& t : *split) t.line = ++line;
  }
  return splits;
}

void write_dataset(const std::filesystem::path& dir, const SyntheticSplits& splits) {
  std::filesystem::create_directories(dir);
  auto write = [&dir](const char* name, const std::vector<RawTriple>& triples) {
    std::ofstream out(dir / name);
    for (const auto& t : triples) out << t.head << '\t' << t.rel << '\t' << t.tail << '\n';
  };
  write("train.txt", splits.train);
  write("valid.txt", splits.valid);
  write("test.txt", splits.test);
}

}  // namespace kge
