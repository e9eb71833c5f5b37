#include "kge/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace kge {

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kConEx: return "conex";
    case ModelKind::kComplEx: return "complex";
    case ModelKind::kDistMult: return "distmult";
  }
  throw std::logic_error("unknown model kind");
}

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "conex") return ModelKind::kConEx;
  if (name == "complex") return ModelKind::kComplEx;
  if (name == "distmult") return ModelKind::kDistMult;
  throw std::invalid_argument("unknown model kind '" + name + "'");
}

namespace {

void fill_xavier(std::vector<double>& t, std::size_t rows, std::size_t cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  for (double& v : t) v = rng.uniform(-bound, bound);
}

}  // namespace

ModelParams init_params(std::uint64_t seed, std::size_t num_entities, std::size_t num_relations,
                        int dim, int channels, ModelKind kind) {
  if (num_entities == 0 || num_relations == 0 || dim <= 0)
    throw std::invalid_argument("init_params: dimensions must be positive");
  if (kind == ModelKind::kConEx && channels <= 0)
    throw std::invalid_argument("init_params: the gated model needs a positive channel count");

  ModelParams p;
  p.kind = kind;
  p.dim = dim;
  p.channels = kind == ModelKind::kConEx ? channels : 0;
  p.seed = seed;
  p.entities = EmbeddingTable(num_entities, static_cast<std::size_t>(dim));
  p.relations = EmbeddingTable(num_relations, static_cast<std::size_t>(dim));

  Rng rng = Rng::substream(seed, "init");
  const std::size_t d = static_cast<std::size_t>(dim);
  fill_xavier(p.entities.re(), num_entities, d, rng);
  if (kind != ModelKind::kDistMult) fill_xavier(p.entities.im(), num_entities, d, rng);
  fill_xavier(p.relations.re(), num_relations, d, rng);
  if (kind != ModelKind::kDistMult) fill_xavier(p.relations.im(), num_relations, d, rng);

  if (kind == ModelKind::kConEx) {
    p.conv = ConvParams::zeros(dim, channels);
    fill_xavier(p.conv.kernels, 9, static_cast<std::size_t>(channels) * 9, rng);
    fill_xavier(p.conv.weight, p.conv.map_size(), p.conv.proj_size(), rng);
    // affine bias stays zero
  }
  return p;
}

std::size_t count_parameters(const ModelParams& params) {
  std::size_t n = params.entities.re().size() + params.entities.im().size() +
                  params.relations.re().size() + params.relations.im().size();
  if (params.kind == ModelKind::kConEx) {
    n += params.conv.kernels.size() + params.conv.weight.size() + params.conv.bias.size();
    n += params.conv.bn_input.scale.size() + params.conv.bn_input.shift.size();
    n += params.conv.bn_feature.scale.size() + params.conv.bn_feature.shift.size();
    n += params.conv.bn_proj.scale.size() + params.conv.bn_proj.shift.size();
  }
  return n;
}

ScoreContext make_score_context(const ModelParams& params, ComplexView head, ComplexView rel,
                                const ComplexVector* gamma) {
  ScoreContext ctx;
  switch (params.kind) {
    case ModelKind::kDistMult: {
      ctx.real_only = true;
      ctx.real_prod.resize(head.dim());
      for (std::size_t j = 0; j < head.dim(); ++j) ctx.real_prod[j] = head.re[j] * rel.re[j];
      return ctx;
    }
    case ModelKind::kComplEx: {
      ComplexVector ones(head.dim());
      std::fill(ones.re.begin(), ones.re.end(), 1.0);
      std::fill(ones.im.begin(), ones.im.end(), 1.0);
      ctx.gamma = std::move(ones);
      ctx.coeffs = quad_coefficients(ctx.gamma.view(), head, rel);
      return ctx;
    }
    case ModelKind::kConEx: {
      if (gamma == nullptr) throw std::invalid_argument("gated model scoring needs a gate output");
      ctx.gamma = *gamma;
      ctx.coeffs = quad_coefficients(ctx.gamma.view(), head, rel);
      return ctx;
    }
  }
  throw std::logic_error("unknown model kind");
}

double score_with_context(const ScoreContext& ctx, ComplexView tail) {
  if (ctx.real_only) {
    double s = 0.0;
    for (std::size_t j = 0; j < ctx.real_prod.size(); ++j) s += ctx.real_prod[j] * tail.re[j];
    return s;
  }
  return quad_score_with(ctx.coeffs, tail);
}

namespace {

void check_ids(const ModelParams& params, EntityId head, RelationId rel) {
  if (head < 0 || static_cast<std::size_t>(head) >= params.num_entities())
    throw std::out_of_range("entity id out of range");
  if (rel < 0 || static_cast<std::size_t>(rel) >= params.num_relations())
    throw std::out_of_range("relation id out of range");
}

ScoreContext context_for(const ModelParams& params, EntityId head, RelationId rel, Mode mode) {
  ComplexView h = params.entities.row(static_cast<std::size_t>(head));
  ComplexView r = params.relations.row(static_cast<std::size_t>(rel));
  if (params.kind == ModelKind::kConEx) {
    ConvOptions opt;
    opt.mode = mode;
    ConvTape tape;
    ComplexVector gamma = conv_forward(params.conv, h, r, opt, mode == Mode::kTrain ? &tape : nullptr);
    return make_score_context(params, h, r, &gamma);
  }
  return make_score_context(params, h, r, nullptr);
}

}  // namespace

std::vector<double> score_all_tails(const ModelParams& params, EntityId head, RelationId rel, Mode mode) {
  check_ids(params, head, rel);
  ScoreContext ctx = context_for(params, head, rel, mode);
  std::vector<double> scores(params.num_entities());
  for (std::size_t k = 0; k < scores.size(); ++k)
    scores[k] = score_with_context(ctx, params.entities.row(k));
  return scores;
}

double score_triple(const ModelParams& params, EntityId head, RelationId rel, EntityId tail, Mode mode) {
  check_ids(params, head, rel);
  if (tail < 0 || static_cast<std::size_t>(tail) >= params.num_entities())
    throw std::out_of_range("entity id out of range");
  ScoreContext ctx = context_for(params, head, rel, mode);
  return score_with_context(ctx, params.entities.row(static_cast<std::size_t>(tail)));
}

std::vector<double> degenerate_scores(const ModelParams& params, EntityId head, RelationId rel) {
  if (params.kind != ModelKind::kConEx)
    throw std::invalid_argument("degenerate_scores: only the gated model can drop its gate");
  check_ids(params, head, rel);
  ComplexView h = params.entities.row(static_cast<std::size_t>(head));
  ComplexView r = params.relations.row(static_cast<std::size_t>(rel));
  ComplexVector ones(h.dim());
  std::fill(ones.re.begin(), ones.re.end(), 1.0);
  std::fill(ones.im.begin(), ones.im.end(), 1.0);
  QuadCoefficients coeffs = quad_coefficients(ones.view(), h, r);
  std::vector<double> scores(params.num_entities());
  for (std::size_t k = 0; k < scores.size(); ++k)
    scores[k] = quad_score_with(coeffs, params.entities.row(k));
  return scores;
}

}  // namespace kge
