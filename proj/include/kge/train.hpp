#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "kge/data.hpp"
#include "kge/model.hpp"

namespace kge {

enum class Optimizer { kAdam, kRmsProp };

struct TrainConfig {
  ModelKind kind = ModelKind::kConEx;
  int dim = 200;
  int channels = 32;
  double lr = 0.001;
  int batch_size = 1024;
  double input_dropout = 0.0;
  double feature_dropout = 0.0;
  double label_smoothing = 0.1;
  int epochs = 500;
  std::uint64_t seed = 1;
  Optimizer optimizer = Optimizer::kAdam;

  void validate() const;
};

// Gradient (or moment) storage for every trainable tensor.
struct GradientSet {
  std::vector<double> ent_re, ent_im, rel_re, rel_im;
  ConvGrads conv;

  static GradientSet zeros(const ModelParams& params);
  void reset();
};

struct AdamState {
  GradientSet m;
  GradientSet v;
  std::int64_t step = 0;

  static AdamState init(const ModelParams& params) { return {GradientSet::zeros(params), GradientSet::zeros(params), 0}; }
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;
inline constexpr double kRmsPropDecay = 0.99;
inline constexpr double kRmsPropEps = 1e-8;

// y' = y*(1-ls) + ls/|E|.
std::vector<double> label_smooth(const std::vector<double>& y, double ls, std::size_t num_entities);

double sigmoid(double x);

// Mean binary cross entropy over one probability vector; probabilities are
// clamped to [1e-12, 1-1e-12] before the logs.
double bce_loss(const std::vector<double>& probs, const std::vector<double>& labels);

// One KvsAll batch: the unique (h, r) keys plus their dense smoothed targets.
struct Batch {
  std::vector<KvsAllIndex::Key> keys;
  std::vector<std::vector<double>> targets;  // one |E|-vector per key
};

// Caches carried from the forward to the backward pass of one batch.
struct BatchForward {
  double loss = 0.0;
  std::vector<std::vector<double>> probs;     // sigmoid scores per key
  std::vector<ScoreContext> contexts;         // per-key scoring contexts
  ConvTape tape;                              // gated model only
};

// probs = sigmoid(score_all_tails(h, r)), loss = mean over keys of the BCE
// against the smoothed targets. Train mode; dropout masks are drawn from
// `dropout_rng` when the config has nonzero rates.
BatchForward forward_batch(const ModelParams& params, const Batch& batch, const TrainConfig& config,
                           Rng* dropout_rng);

// Exact gradients of the mean batch loss for every trainable tensor,
// propagated through both the gate path and the direct Hermitian path.
GradientSet backward_batch(const ModelParams& params, const Batch& batch, const BatchForward& fwd);

// Bias-corrected Adam update; increments the step counter.
void adam_step(ModelParams& params, const GradientSet& grads, AdamState& state, double lr);

// RMSprop alternative used by the optimizer ablation (decay 0.99).
void rmsprop_step(ModelParams& params, const GradientSet& grads, AdamState& state, double lr);

// One pass over all unique (h, r) keys of the index, shuffled, in batches;
// returns the mean batch loss. `epoch` selects the shuffle substream.
double train_epoch(ModelParams& params, const KvsAllIndex& index, const TrainConfig& config,
                   AdamState& state, Rng& dropout_rng, int epoch);

struct FitResult {
  ModelParams params;
  std::vector<double> loss_history;
};

// epoch-indexed callback for logging: (epoch, loss, params)
using EpochCallback = std::function<void(int, double, const ModelParams&)>;

// init_params + epochs x train_epoch over the augmented train split.
FitResult fit(const Dataset& dataset, const TrainConfig& config, const EpochCallback& on_epoch = {});

}  // namespace kge
