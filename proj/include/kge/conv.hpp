#pragma once

#include <cstddef>
#include <vector>

#include "kge/complex.hpp"
#include "kge/rng.hpp"

namespace kge {

enum class Mode { kTrain, kEval };

inline constexpr double kBnEps = 1e-5;
inline constexpr double kBnMomentum = 0.1;

// Scale/shift plus running statistics for one batch-norm layer.
struct BatchNormParams {
  std::vector<double> scale;
  std::vector<double> shift;
  std::vector<double> running_mean;
  std::vector<double> running_var;

  static BatchNormParams init(std::size_t features) {
    BatchNormParams bn;
    bn.scale.assign(features, 1.0);
    bn.shift.assign(features, 0.0);
    bn.running_mean.assign(features, 0.0);
    bn.running_var.assign(features, 1.0);
    return bn;
  }
  std::size_t features() const { return scale.size(); }
};

// Parameters of the convolutional gate: c single-input-channel 3x3 kernels
// over the 4 x d stacked-embedding image (stride 1, zero padding 1, so the
// spatial shape is preserved), followed by an affine projection of the
// flattened c*4*d feature map down to 2d, with batch norm on the input
// plane, the feature map, and the projected vector.
struct ConvParams {
  int dim = 0;       // d
  int channels = 0;  // c
  std::vector<double> kernels;  // c * 3 * 3, kernel-major
  std::vector<double> weight;   // (c*4*d) x (2d), row-major (input index major)
  std::vector<double> bias;     // 2d
  BatchNormParams bn_input;     // 1 feature
  BatchNormParams bn_feature;   // c features
  BatchNormParams bn_proj;      // 2d features

  std::size_t image_size() const { return 4 * static_cast<std::size_t>(dim); }
  std::size_t map_size() const { return static_cast<std::size_t>(channels) * image_size(); }
  std::size_t proj_size() const { return 2 * static_cast<std::size_t>(dim); }

  static ConvParams zeros(int dim, int channels);
};

// Per-layer batch statistics cached by a training-mode forward pass.
struct BnCache {
  std::vector<double> normalized;  // group-shaped x-hat values
  std::vector<double> inv_std;     // per feature
  std::vector<double> batch_mean;  // per feature (biased variance below)
  std::vector<double> batch_var;
  std::size_t group_size = 0;  // samples per feature
};

// Everything a training-mode forward pass must remember to run the exact
// backward pass: post-dropout activations, dropout masks, batch-norm
// statistics, and pre-ReLU values. Batch statistics are computed across the
// whole batch of (h, r) pairs, so one tape covers one batch.
struct ConvTape {
  std::size_t batch = 0;
  int dim = 0;
  int channels = 0;
  std::vector<double> conv_in;  // B * 4d, post BN0 + input dropout
  std::vector<double> in_mask;  // B * 4d inverted-dropout scales; empty if rate 0
  std::vector<double> y1;       // B * c*4d, pre-ReLU feature map (post BN1)
  std::vector<double> fm_mask;  // B * c*4d; empty if rate 0
  std::vector<double> flat;     // B * c*4d, affine input
  std::vector<double> y2;       // B * 2d, pre-ReLU projection (post BN2)
  BnCache bn0, bn1, bn2;
};

struct ConvOptions {
  Mode mode = Mode::kEval;
  double input_dropout = 0.0;
  double feature_dropout = 0.0;
  Rng* rng = nullptr;  // required in train mode when a dropout rate is nonzero
};

// Gradients for every trainable tensor in ConvParams.
struct ConvGrads {
  std::vector<double> kernels, weight, bias;
  std::vector<double> bn_input_scale, bn_input_shift;
  std::vector<double> bn_feature_scale, bn_feature_shift;
  std::vector<double> bn_proj_scale, bn_proj_shift;

  static ConvGrads zeros(const ConvParams& p);
};

struct ConvInputGrads {
  std::vector<ComplexVector> wrt_head;
  std::vector<ComplexVector> wrt_rel;
};

// Single-channel 4 x d image with rows [Re h; Im h; Re r; Im r].
std::vector<double> stack_input(ComplexView h, ComplexView r);

// Raw shape-preserving 3x3 convolution of one 4 x d image (stride 1, zero
// padding 1) into `channels` planes.
std::vector<double> conv2d_same(const std::vector<double>& image, std::size_t dim,
                                const std::vector<double>& kernels, int channels);

// Full gate pipeline for a batch of (h, r) pairs:
//   stack -> BN -> input dropout -> conv -> BN -> ReLU -> feature dropout
//   -> flatten -> affine -> BN -> ReLU -> split halves into (Re, Im).
// Train mode normalizes with batch statistics over the whole pair batch and
// fills the tape; eval mode uses running statistics and needs no tape.
std::vector<ComplexVector> conv_forward_batch(const ConvParams& params,
                                              const std::vector<std::pair<ComplexView, ComplexView>>& pairs,
                                              const ConvOptions& options, ConvTape* tape);

ComplexVector conv_forward(const ConvParams& params, ComplexView h, ComplexView r,
                           const ConvOptions& options, ConvTape* tape = nullptr);

// Exact reverse-mode pass for a training tape: accumulates parameter
// gradients (including the batch-statistics terms of every batch norm) and
// returns the gradients w.r.t. both input embeddings of every pair.
ConvInputGrads conv_backward_batch(const ConvParams& params, const ConvTape& tape,
                                   const std::vector<ComplexVector>& grad_gamma, ConvGrads& grads);

// Folds the batch statistics recorded on the tape into the running
// statistics (momentum update). Kept separate from the forward pass so
// scoring never mutates parameters.
void apply_running_stats(ConvParams& params, const ConvTape& tape);

}  // namespace kge
