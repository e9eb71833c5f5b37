#include "kge/train.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace kge {

void TrainConfig::validate() const {
  if (dim <= 0) throw std::invalid_argument("config: dim must be positive");
  if (kind == ModelKind::kConEx && channels <= 0)
    throw std::invalid_argument("config: channels must be positive");
  if (lr <= 0.0) throw std::invalid_argument("config: lr must be positive");
  if (batch_size <= 0) throw std::invalid_argument("config: batch size must be positive");
  if (input_dropout < 0.0 || input_dropout >= 1.0)
    throw std::invalid_argument("config: input dropout must be in [0,1)");
  if (feature_dropout < 0.0 || feature_dropout >= 1.0)
    throw std::invalid_argument("config: feature dropout must be in [0,1)");
  if (label_smoothing < 0.0 || label_smoothing >= 1.0)
    throw std::invalid_argument("config: label smoothing must be in [0,1)");
  if (epochs < 0) throw std::invalid_argument("config: epochs must be non-negative");
}

GradientSet GradientSet::zeros(const ModelParams& params) {
  GradientSet g;
  g.ent_re.assign(params.entities.re().size(), 0.0);
  g.ent_im.assign(params.entities.im().size(), 0.0);
  g.rel_re.assign(params.relations.re().size(), 0.0);
  g.rel_im.assign(params.relations.im().size(), 0.0);
  if (params.kind == ModelKind::kConEx) g.conv = ConvGrads::zeros(params.conv);
  return g;
}

void GradientSet::reset() {
  auto zero = [](std::vector<double>& v) { std::fill(v.begin(), v.end(), 0.0); };
  zero(ent_re);
  zero(ent_im);
  zero(rel_re);
  zero(rel_im);
  zero(conv.kernels);
  zero(conv.weight);
  zero(conv.bias);
  zero(conv.bn_input_scale);
  zero(conv.bn_input_shift);
  zero(conv.bn_feature_scale);
  zero(conv.bn_feature_shift);
  zero(conv.bn_proj_scale);
  zero(conv.bn_proj_shift);
}

std::vector<double> label_smooth(const std::vector<double>& y, double ls, std::size_t num_entities) {
  if (ls < 0.0 || ls >= 1.0) throw std::invalid_argument("label smoothing must be in [0,1)");
  std::vector<double> out(y.size());
  const double uniform = ls / static_cast<double>(num_entities);
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = y[i] * (1.0 - ls) + uniform;
  return out;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double bce_loss(const std::vector<double>& probs, const std::vector<double>& labels) {
  if (probs.size() != labels.size()) throw std::invalid_argument("bce_loss: shape mismatch");
  if (probs.empty()) throw std::invalid_argument("bce_loss: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = std::clamp(probs[i], 1e-12, 1.0 - 1e-12);
    acc += labels[i] * std::log(p) + (1.0 - labels[i]) * std::log1p(-p);
  }
  return -acc / static_cast<double>(probs.size());
}

namespace {

// Enumerates matched (parameter, gradient, m, v) tensor quadruples.
template <typename Fn>
void for_each_trainable(ModelParams& params, const GradientSet& g, GradientSet& m, GradientSet& v,
                        Fn&& fn) {
  auto visit = [&fn](std::vector<double>& p, const std::vector<double>& gp, std::vector<double>& mp,
                     std::vector<double>& vp) { fn(p, gp, mp, vp); };
  visit(params.entities.re(), g.ent_re, m.ent_re, v.ent_re);
  visit(params.entities.im(), g.ent_im, m.ent_im, v.ent_im);
  visit(params.relations.re(), g.rel_re, m.rel_re, v.rel_re);
  visit(params.relations.im(), g.rel_im, m.rel_im, v.rel_im);
  if (params.kind != ModelKind::kConEx) return;
  visit(params.conv.kernels, g.conv.kernels, m.conv.kernels, v.conv.kernels);
  visit(params.conv.weight, g.conv.weight, m.conv.weight, v.conv.weight);
  visit(params.conv.bias, g.conv.bias, m.conv.bias, v.conv.bias);
  visit(params.conv.bn_input.scale, g.conv.bn_input_scale, m.conv.bn_input_scale, v.conv.bn_input_scale);
  visit(params.conv.bn_input.shift, g.conv.bn_input_shift, m.conv.bn_input_shift, v.conv.bn_input_shift);
  visit(params.conv.bn_feature.scale, g.conv.bn_feature_scale, m.conv.bn_feature_scale,
        v.conv.bn_feature_scale);
  visit(params.conv.bn_feature.shift, g.conv.bn_feature_shift, m.conv.bn_feature_shift,
        v.conv.bn_feature_shift);
  visit(params.conv.bn_proj.scale, g.conv.bn_proj_scale, m.conv.bn_proj_scale, v.conv.bn_proj_scale);
  visit(params.conv.bn_proj.shift, g.conv.bn_proj_shift, m.conv.bn_proj_shift, v.conv.bn_proj_shift);
}

}  // namespace

BatchForward forward_batch(const ModelParams& params, const Batch& batch, const TrainConfig& config,
                           Rng* dropout_rng) {
  if (batch.keys.empty()) throw std::invalid_argument("forward_batch: empty batch");
  if (batch.targets.size() != batch.keys.size())
    throw std::invalid_argument("forward_batch: key/target count mismatch");

  BatchForward fwd;
  const std::size_t B = batch.keys.size();
  const std::size_t E = params.num_entities();

  std::vector<ComplexVector> gammas;
  if (params.kind == ModelKind::kConEx) {
    std::vector<std::pair<ComplexView, ComplexView>> pairs;
    pairs.reserve(B);
    for (const auto& [h, r] : batch.keys)
      pairs.emplace_back(params.entities.row(static_cast<std::size_t>(h)),
                         params.relations.row(static_cast<std::size_t>(r)));
    ConvOptions opt;
    opt.mode = Mode::kTrain;
    opt.input_dropout = config.input_dropout;
    opt.feature_dropout = config.feature_dropout;
    opt.rng = dropout_rng;
    gammas = conv_forward_batch(params.conv, pairs, opt, &fwd.tape);
  }

  fwd.contexts.reserve(B);
  fwd.probs.resize(B);
  double loss_acc = 0.0;
  for (std::size_t p = 0; p < B; ++p) {
    const auto& [h, r] = batch.keys[p];
    ComplexView hv = params.entities.row(static_cast<std::size_t>(h));
    ComplexView rv = params.relations.row(static_cast<std::size_t>(r));
    fwd.contexts.push_back(make_score_context(params, hv, rv,
                                              params.kind == ModelKind::kConEx ? &gammas[p] : nullptr));
    auto& probs = fwd.probs[p];
    probs.resize(E);
    for (std::size_t k = 0; k < E; ++k)
      probs[k] = sigmoid(score_with_context(fwd.contexts[p], params.entities.row(k)));
    loss_acc += bce_loss(probs, batch.targets[p]);
  }
  fwd.loss = loss_acc / static_cast<double>(B);
  if (!std::isfinite(fwd.loss)) throw std::runtime_error("forward_batch: non-finite loss");
  return fwd;
}

GradientSet backward_batch(const ModelParams& params, const Batch& batch, const BatchForward& fwd) {
  if (fwd.probs.size() != batch.keys.size())
    throw std::invalid_argument("backward_batch: forward cache missing");
  const std::size_t B = batch.keys.size();
  const std::size_t E = params.num_entities();
  const std::size_t d = static_cast<std::size_t>(params.dim);
  const double denom = static_cast<double>(E) * static_cast<double>(B);

  GradientSet grads = GradientSet::zeros(params);
  std::vector<ComplexVector> grad_gamma;
  if (params.kind == ModelKind::kConEx) grad_gamma.assign(B, ComplexVector(d));

  std::vector<double> sum_re(d), sum_im(d);
  for (std::size_t p = 0; p < B; ++p) {
    const auto& [h, r] = batch.keys[p];
    const std::size_t hi = static_cast<std::size_t>(h);
    const std::size_t ri = static_cast<std::size_t>(r);
    const auto& ctx = fwd.contexts[p];
    const auto& probs = fwd.probs[p];
    const auto& y = batch.targets[p];

    // dL/dscore_k for the mean batch loss, and the score-weighted sums over
    // the entity table used by the head/relation/gate gradients.
    std::fill(sum_re.begin(), sum_re.end(), 0.0);
    std::fill(sum_im.begin(), sum_im.end(), 0.0);
    for (std::size_t k = 0; k < E; ++k) {
      const double g = (probs[k] - y[k]) / denom;
      if (g == 0.0) continue;
      ComplexView tail = params.entities.row(k);
      double* gtr = grads.ent_re.data() + k * d;
      double* gti = grads.ent_im.data() + k * d;
      if (ctx.real_only) {
        for (std::size_t j = 0; j < d; ++j) {
          gtr[j] += g * ctx.real_prod[j];
          sum_re[j] += g * tail.re[j];
        }
      } else {
        const auto& c = ctx.coeffs;
        for (std::size_t j = 0; j < d; ++j) {
          gtr[j] += g * (c.t1[j] - c.t4[j]);
          gti[j] += g * (c.t2[j] + c.t3[j]);
          sum_re[j] += g * tail.re[j];
          sum_im[j] += g * tail.im[j];
        }
      }
    }

    ComplexView hv = params.entities.row(hi);
    ComplexView rv = params.relations.row(ri);
    double* ghr = grads.ent_re.data() + hi * d;
    double* ghi = grads.ent_im.data() + hi * d;
    double* grr = grads.rel_re.data() + ri * d;
    double* gri = grads.rel_im.data() + ri * d;

    if (ctx.real_only) {
      for (std::size_t j = 0; j < d; ++j) {
        ghr[j] += rv.re[j] * sum_re[j];
        grr[j] += hv.re[j] * sum_re[j];
      }
      continue;
    }

    const ComplexView gv = ctx.gamma.view();
    for (std::size_t j = 0; j < d; ++j) {
      // score contribution per dimension:
      //   Rg*Rh*Rr*Rt + Rg*Rh*Ir*It + Ig*Ih*Rr*It - Ig*Ih*Ir*Rt
      ghr[j] += gv.re[j] * rv.re[j] * sum_re[j] + gv.re[j] * rv.im[j] * sum_im[j];
      ghi[j] += gv.im[j] * rv.re[j] * sum_im[j] - gv.im[j] * rv.im[j] * sum_re[j];
      grr[j] += gv.re[j] * hv.re[j] * sum_re[j] + gv.im[j] * hv.im[j] * sum_im[j];
      gri[j] += gv.re[j] * hv.re[j] * sum_im[j] - gv.im[j] * hv.im[j] * sum_re[j];
      if (params.kind == ModelKind::kConEx) {
        grad_gamma[p].re[j] = hv.re[j] * rv.re[j] * sum_re[j] + hv.re[j] * rv.im[j] * sum_im[j];
        grad_gamma[p].im[j] = hv.im[j] * rv.re[j] * sum_im[j] - hv.im[j] * rv.im[j] * sum_re[j];
      }
    }
  }

  if (params.kind == ModelKind::kConEx) {
    ConvInputGrads in_grads = conv_backward_batch(params.conv, fwd.tape, grad_gamma, grads.conv);
    for (std::size_t p = 0; p < B; ++p) {
      const auto& [h, r] = batch.keys[p];
      const std::size_t hi = static_cast<std::size_t>(h);
      const std::size_t ri = static_cast<std::size_t>(r);
      for (std::size_t j = 0; j < d; ++j) {
        grads.ent_re[hi * d + j] += in_grads.wrt_head[p].re[j];
        grads.ent_im[hi * d + j] += in_grads.wrt_head[p].im[j];
        grads.rel_re[ri * d + j] += in_grads.wrt_rel[p].re[j];
        grads.rel_im[ri * d + j] += in_grads.wrt_rel[p].im[j];
      }
    }
  }
  return grads;
}

void adam_step(ModelParams& params, const GradientSet& grads, AdamState& state, double lr) {
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(kAdamBeta1, t);
  const double bc2 = 1.0 - std::pow(kAdamBeta2, t);
  for_each_trainable(params, grads, state.m, state.v,
                     [&](std::vector<double>& p, const std::vector<double>& g, std::vector<double>& m,
                         std::vector<double>& v) {
                       for (std::size_t i = 0; i < p.size(); ++i) {
                         m[i] = kAdamBeta1 * m[i] + (1.0 - kAdamBeta1) * g[i];
                         v[i] = kAdamBeta2 * v[i] + (1.0 - kAdamBeta2) * g[i] * g[i];
                         const double mhat = m[i] / bc1;
                         const double vhat = v[i] / bc2;
                         p[i] -= lr * mhat / (std::sqrt(vhat) + kAdamEps);
                       }
                     });
}

void rmsprop_step(ModelParams& params, const GradientSet& grads, AdamState& state, double lr) {
  state.step += 1;
  for_each_trainable(params, grads, state.m, state.v,
                     [&](std::vector<double>& p, const std::vector<double>& g, std::vector<double>&,
                         std::vector<double>& v) {
                       for (std::size_t i = 0; i < p.size(); ++i) {
                         v[i] = kRmsPropDecay * v[i] + (1.0 - kRmsPropDecay) * g[i] * g[i];
                         p[i] -= lr * g[i] / (std::sqrt(v[i]) + kRmsPropEps);
                       }
                     });
}

double train_epoch(ModelParams& params, const KvsAllIndex& index, const TrainConfig& config,
                   AdamState& state, Rng& dropout_rng, int epoch) {
  if (index.num_keys() == 0) throw std::invalid_argument("train_epoch: empty index");
  const std::size_t E = params.num_entities();

  std::vector<KvsAllIndex::Key> keys;
  keys.reserve(index.num_keys());
  for (const auto& [key, tails] : index.entries()) keys.push_back(key);
  Rng shuffle_rng = Rng::substream(config.seed, "shuffle", static_cast<std::uint64_t>(epoch));
  shuffle_rng.shuffle(keys);

  double loss_acc = 0.0;
  std::size_t num_batches = 0;
  for (std::size_t start = 0; start < keys.size(); start += static_cast<std::size_t>(config.batch_size)) {
    const std::size_t end = std::min(keys.size(), start + static_cast<std::size_t>(config.batch_size));
    Batch batch;
    batch.keys.assign(keys.begin() + start, keys.begin() + end);
    batch.targets.reserve(batch.keys.size());
    for (const auto& [h, r] : batch.keys) {
      std::vector<double> y(E, 0.0);
      for (EntityId t : *index.tails(h, r)) y[static_cast<std::size_t>(t)] = 1.0;
      batch.targets.push_back(label_smooth(y, config.label_smoothing, E));
    }
    BatchForward fwd = forward_batch(params, batch, config, &dropout_rng);
    GradientSet grads = backward_batch(params, batch, fwd);
    if (config.optimizer == Optimizer::kAdam) {
      adam_step(params, grads, state, config.lr);
    } else {
      rmsprop_step(params, grads, state, config.lr);
    }
    if (params.kind == ModelKind::kConEx) apply_running_stats(params.conv, fwd.tape);
    loss_acc += fwd.loss;
    ++num_batches;
  }
  return loss_acc / static_cast<double>(num_batches);
}

FitResult fit(const Dataset& dataset, const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  const auto augmented = add_reciprocals(dataset.train, dataset.vocab);
  const KvsAllIndex index = build_kvsall(augmented);

  FitResult result;
  result.params = init_params(config.seed, dataset.vocab.num_entities(), dataset.vocab.num_relations(),
                              config.dim, config.channels, config.kind);
  AdamState state = AdamState::init(result.params);
  Rng dropout_rng = Rng::substream(config.seed, "dropout");
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    double loss = train_epoch(result.params, index, config, state, dropout_rng, epoch);
    result.loss_history.push_back(loss);
    if (on_epoch) on_epoch(epoch, loss, result.params);
  }
  return result;
}

}  // namespace kge
