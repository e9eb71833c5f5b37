#include <doctest.h>

#include <algorithm>

#include "kge/model.hpp"
#include "kge/rng.hpp"

using namespace kge;

namespace {

// Closed-form parameter count used as the oracle against the
// tensor-enumerating implementation.
std::size_t count_formula(std::size_t E, std::size_t R, std::size_t d, std::size_t c, ModelKind kind) {
  std::size_t n = E * 2 * d + R * 2 * d;
  if (kind == ModelKind::kConEx) {
    n += 9 * c;                  // kernels
    n += (c * 4 * d) * (2 * d);  // affine weight
    n += 2 * d;                  // affine bias
    n += 2 * (1 + c + 2 * d);    // batch-norm scale and shift
  }
  return n;
}

ModelParams randomized(std::uint64_t seed, std::size_t E, std::size_t R, int d, int c, ModelKind kind) {
  return init_params(seed, E, R, d, c, kind);
}

}  // namespace

TEST_CASE("init_params is deterministic in the seed") {
  auto a = randomized(7, 9, 4, 5, 2, ModelKind::kConEx);
  auto b = randomized(7, 9, 4, 5, 2, ModelKind::kConEx);
  CHECK(a.entities.re() == b.entities.re());
  CHECK(a.entities.im() == b.entities.im());
  CHECK(a.relations.re() == b.relations.re());
  CHECK(a.conv.kernels == b.conv.kernels);
  CHECK(a.conv.weight == b.conv.weight);

  auto c = randomized(8, 9, 4, 5, 2, ModelKind::kConEx);
  CHECK(a.entities.re() != c.entities.re());
}

TEST_CASE("init_params rejects degenerate shapes") {
  CHECK_THROWS_AS(init_params(1, 0, 2, 4, 2, ModelKind::kComplEx), std::invalid_argument);
  CHECK_THROWS_AS(init_params(1, 2, 0, 4, 2, ModelKind::kComplEx), std::invalid_argument);
  CHECK_THROWS_AS(init_params(1, 2, 2, 0, 2, ModelKind::kComplEx), std::invalid_argument);
  CHECK_THROWS_AS(init_params(1, 2, 2, 4, 0, ModelKind::kConEx), std::invalid_argument);
}

TEST_CASE("the real-only model keeps zero imaginary planes") {
  auto p = randomized(3, 6, 2, 4, 0, ModelKind::kDistMult);
  CHECK(p.entities.im() == std::vector<double>(6 * 4, 0.0));
  CHECK(p.relations.im() == std::vector<double>(2 * 4, 0.0));
}

TEST_CASE("count_parameters small hand case") {
  auto p = randomized(1, 10, 2, 3, 0, ModelKind::kComplEx);
  CHECK(count_parameters(p) == 72);  // (10 + 2) * 2 * 3
}

TEST_CASE("count_parameters matches the closed-form oracle") {
  Rng rng(19);
  for (int it = 0; it < 20; ++it) {
    std::size_t E = 2 + rng.next_below(40);
    std::size_t R = 2 + rng.next_below(10);
    int d = static_cast<int>(1 + rng.next_below(8));
    int c = static_cast<int>(1 + rng.next_below(5));
    ModelKind kind = it % 2 == 0 ? ModelKind::kConEx : ModelKind::kComplEx;
    auto p = randomized(static_cast<std::uint64_t>(it), E, R, d, c, kind);
    CHECK(count_parameters(p) ==
          count_formula(E, R, static_cast<std::size_t>(d), static_cast<std::size_t>(c), kind));
  }
}

TEST_CASE("single-triple scores index into the all-tails vector bitwise") {
  for (ModelKind kind : {ModelKind::kConEx, ModelKind::kComplEx, ModelKind::kDistMult}) {
    auto p = randomized(5, 5, 4, 2, 2, kind);
    for (EntityId h = 0; h < 5; ++h) {
      auto scores = score_all_tails(p, h, 1, Mode::kEval);
      for (EntityId t = 0; t < 5; ++t) CHECK(score_triple(p, h, 1, t, Mode::kEval) == scores[t]);
    }
  }
}

TEST_CASE("gate forced to 1+1i reproduces the ungated head bitwise") {
  for (int it = 0; it < 10; ++it) {
    auto conex = randomized(static_cast<std::uint64_t>(100 + it), 7, 4, 3, 2, ModelKind::kConEx);
    // same tables under the ungated model
    ModelParams complex_head = conex;
    complex_head.kind = ModelKind::kComplEx;
    complex_head.channels = 0;
    complex_head.conv = ConvParams{};

    for (EntityId h = 0; h < 7; ++h)
      for (RelationId r = 0; r < 4; ++r) {
        auto degen = degenerate_scores(conex, h, r);
        auto plain = score_all_tails(complex_head, h, r, Mode::kEval);
        CHECK(degen == plain);
      }
  }
  auto dm = randomized(2, 4, 2, 3, 0, ModelKind::kDistMult);
  CHECK_THROWS_AS(degenerate_scores(dm, 0, 0), std::invalid_argument);
}

TEST_CASE("a generic gate changes scores relative to the ungated head") {
  auto p = randomized(12, 6, 4, 4, 2, ModelKind::kConEx);
  auto full = score_all_tails(p, 0, 0, Mode::kEval);
  auto degen = degenerate_scores(p, 0, 0);
  bool any_diff = false;
  for (std::size_t k = 0; k < full.size(); ++k) any_diff = any_diff || full[k] != degen[k];
  CHECK(any_diff);
}

TEST_CASE("the real-only score is symmetric under head/tail swap") {
  auto p = randomized(9, 8, 3, 4, 0, ModelKind::kDistMult);
  for (EntityId h = 0; h < 8; ++h)
    for (EntityId t = 0; t < 8; ++t)
      CHECK(score_triple(p, h, 1, t) == doctest::Approx(score_triple(p, t, 1, h)).epsilon(1e-12));
}

TEST_CASE("zeroed imaginary planes collapse the Hermitian head onto the real one") {
  auto cx = randomized(4, 6, 3, 4, 0, ModelKind::kComplEx);
  std::fill(cx.entities.im().begin(), cx.entities.im().end(), 0.0);
  std::fill(cx.relations.im().begin(), cx.relations.im().end(), 0.0);
  ModelParams dm = cx;
  dm.kind = ModelKind::kDistMult;
  for (EntityId h = 0; h < 6; ++h)
    for (RelationId r = 0; r < 3; ++r) {
      auto a = score_all_tails(cx, h, r);
      auto b = score_all_tails(dm, h, r);
      for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k] == b[k]);
    }
}

TEST_CASE("unit real embeddings score one everywhere under the real-only head") {
  ModelParams p;
  p.kind = ModelKind::kDistMult;
  p.dim = 1;
  p.entities = EmbeddingTable(3, 1);
  p.relations = EmbeddingTable(2, 1);
  std::fill(p.entities.re().begin(), p.entities.re().end(), 1.0);
  std::fill(p.relations.re().begin(), p.relations.re().end(), 1.0);
  auto scores = score_all_tails(p, 0, 0);
  CHECK(scores == std::vector<double>{1.0, 1.0, 1.0});
}

TEST_CASE("ids are range-checked") {
  auto p = randomized(1, 4, 2, 3, 0, ModelKind::kComplEx);
  CHECK_THROWS_AS((void)score_all_tails(p, 4, 0), std::out_of_range);
  CHECK_THROWS_AS((void)score_all_tails(p, 0, 2), std::out_of_range);
  CHECK_THROWS_AS((void)score_triple(p, 0, 0, 4), std::out_of_range);
  CHECK_THROWS_AS((void)score_all_tails(p, -1, 0), std::out_of_range);
}

TEST_CASE("model kind names round trip") {
  for (ModelKind k : {ModelKind::kConEx, ModelKind::kComplEx, ModelKind::kDistMult})
    CHECK(model_kind_from_string(to_string(k)) == k);
  CHECK_THROWS_AS(model_kind_from_string("rescal"), std::invalid_argument);
}
