#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kge/complex.hpp"
#include "kge/conv.hpp"
#include "kge/data.hpp"
#include "kge/rng.hpp"

namespace kge {

enum class ModelKind { kConEx, kComplEx, kDistMult };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

// count x dim complex table, plane-major storage.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(std::size_t count, std::size_t dim)
      : count_(count), dim_(dim), re_(count * dim, 0.0), im_(count * dim, 0.0) {}

  std::size_t count() const { return count_; }
  std::size_t dim() const { return dim_; }

  ComplexView row(std::size_t i) const {
    return {std::span<const double>(re_.data() + i * dim_, dim_),
            std::span<const double>(im_.data() + i * dim_, dim_)};
  }
  std::span<double> row_re(std::size_t i) { return {re_.data() + i * dim_, dim_}; }
  std::span<double> row_im(std::size_t i) { return {im_.data() + i * dim_, dim_}; }

  std::vector<double>& re() { return re_; }
  std::vector<double>& im() { return im_; }
  const std::vector<double>& re() const { return re_; }
  const std::vector<double>& im() const { return im_; }

 private:
  std::size_t count_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> re_;
  std::vector<double> im_;
};

// Entity and relation tables (the latter sized for the augmented relation
// space, i.e. originals plus reciprocals) plus the convolutional gate
// parameters for the gated model.
struct ModelParams {
  ModelKind kind = ModelKind::kComplEx;
  int dim = 0;
  int channels = 0;  // convolution output channels; 0 unless kind == kConEx
  std::uint64_t seed = 0;
  EmbeddingTable entities;
  EmbeddingTable relations;
  ConvParams conv;  // valid only when kind == kConEx

  std::size_t num_entities() const { return entities.count(); }
  std::size_t num_relations() const { return relations.count(); }
};

// Deterministic Xavier-uniform initialization of every table; batch-norm
// scale 1 / shift 0; affine bias 0. The imaginary planes stay zero for the
// real-only model.
ModelParams init_params(std::uint64_t seed, std::size_t num_entities, std::size_t num_relations,
                        int dim, int channels, ModelKind kind);

// Exact count of trainable scalars (embeddings + kernels + affine +
// batch-norm scale/shift; running statistics excluded).
std::size_t count_parameters(const ModelParams& params);

// Scores of (h, r, x) for every entity x. The gated model runs the
// convolution once per (h, r) and modulates the Hermitian product with its
// output; mode selects batch-norm statistics (train mode here means a
// batch of one; the training loop drives the batched path itself).
std::vector<double> score_all_tails(const ModelParams& params, EntityId head, RelationId rel,
                                    Mode mode = Mode::kEval);

double score_triple(const ModelParams& params, EntityId head, RelationId rel, EntityId tail,
                    Mode mode = Mode::kEval);

// Scores with the convolutional gate forced to 1+1i componentwise, which
// collapses the gated model onto the plain Hermitian product. Errors for
// non-gated models.
std::vector<double> degenerate_scores(const ModelParams& params, EntityId head, RelationId rel);

// Scoring context shared by the per-entity loop: the gate output (if any)
// and the per-dimension coefficient vectors.
struct ScoreContext {
  QuadCoefficients coeffs;      // gated / Hermitian models
  std::vector<double> real_prod;  // real-only model: Re(h) o Re(r)
  bool real_only = false;
  ComplexVector gamma;  // retained for the backward pass
};

ScoreContext make_score_context(const ModelParams& params, ComplexView head, ComplexView rel,
                                const ComplexVector* gamma);
double score_with_context(const ScoreContext& ctx, ComplexView tail);

}  // namespace kge
