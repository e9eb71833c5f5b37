#include "kge/conv.hpp"

#include <cmath>
#include <stdexcept>

namespace kge {

namespace {

// Batch norm over `group` samples per feature. `values` is sample-major:
// value index = sample * stride_features + feature (stride semantics differ
// per layer, so callers pass an indexer).
struct BnLayout {
  std::size_t samples = 0;   // per feature
  std::size_t features = 0;
  // index of (sample s, feature f) in the flat activation buffer
  std::size_t (*index)(std::size_t s, std::size_t f, std::size_t ctx) = nullptr;
  std::size_t ctx = 0;
};

void bn_forward_train(const BatchNormParams& bn, const BnLayout& lay, std::vector<double>& x,
                      BnCache& cache) {
  cache.normalized.resize(x.size());
  cache.inv_std.resize(lay.features);
  cache.batch_mean.resize(lay.features);
  cache.batch_var.resize(lay.features);
  cache.group_size = lay.samples;
  const double n = static_cast<double>(lay.samples);
  for (std::size_t f = 0; f < lay.features; ++f) {
    double mean = 0.0;
    for (std::size_t s = 0; s < lay.samples; ++s) mean += x[lay.index(s, f, lay.ctx)];
    mean /= n;
    double var = 0.0;
    for (std::size_t s = 0; s < lay.samples; ++s) {
      double dlt = x[lay.index(s, f, lay.ctx)] - mean;
      var += dlt * dlt;
    }
    var /= n;
    const double inv_std = 1.0 / std::sqrt(var + kBnEps);
    cache.batch_mean[f] = mean;
    cache.batch_var[f] = var;
    cache.inv_std[f] = inv_std;
    for (std::size_t s = 0; s < lay.samples; ++s) {
      std::size_t i = lay.index(s, f, lay.ctx);
      double xhat = (x[i] - mean) * inv_std;
      cache.normalized[i] = xhat;
      x[i] = bn.scale[f] * xhat + bn.shift[f];
    }
  }
}

void bn_forward_eval(const BatchNormParams& bn, const BnLayout& lay, std::vector<double>& x) {
  for (std::size_t f = 0; f < lay.features; ++f) {
    const double inv_std = 1.0 / std::sqrt(bn.running_var[f] + kBnEps);
    for (std::size_t s = 0; s < lay.samples; ++s) {
      std::size_t i = lay.index(s, f, lay.ctx);
      x[i] = bn.scale[f] * (x[i] - bn.running_mean[f]) * inv_std + bn.shift[f];
    }
  }
}

// dL/dx for train-mode batch norm, plus scale/shift gradient accumulation.
// grad holds dL/dy on entry and dL/dx on exit.
void bn_backward(const BatchNormParams& bn, const BnLayout& lay, const BnCache& cache,
                 std::vector<double>& grad, std::vector<double>& grad_scale,
                 std::vector<double>& grad_shift) {
  const double n = static_cast<double>(lay.samples);
  for (std::size_t f = 0; f < lay.features; ++f) {
    double sum_g = 0.0;
    double sum_gx = 0.0;
    for (std::size_t s = 0; s < lay.samples; ++s) {
      std::size_t i = lay.index(s, f, lay.ctx);
      sum_g += grad[i];
      sum_gx += grad[i] * cache.normalized[i];
    }
    grad_scale[f] += sum_gx;
    grad_shift[f] += sum_g;
    const double k = bn.scale[f] * cache.inv_std[f];
    const double mean_g = sum_g / n;
    const double mean_gx = sum_gx / n;
    for (std::size_t s = 0; s < lay.samples; ++s) {
      std::size_t i = lay.index(s, f, lay.ctx);
      grad[i] = k * (grad[i] - mean_g - cache.normalized[i] * mean_gx);
    }
  }
}

std::size_t index_single(std::size_t s, std::size_t, std::size_t) { return s; }

std::size_t index_feature(std::size_t s, std::size_t f, std::size_t num_features) {
  return s * num_features + f;
}

void relu_inplace(std::vector<double>& x) {
  for (double& v : x) v = v > 0.0 ? v : 0.0;
}

void dropout_inplace(std::vector<double>& x, double rate, Rng& rng, std::vector<double>& mask) {
  mask.resize(x.size());
  const double keep_scale = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < x.size(); ++i) {
    mask[i] = rng.next_double() < rate ? 0.0 : keep_scale;
    x[i] *= mask[i];
  }
}

}  // namespace

ConvParams ConvParams::zeros(int dim, int channels) {
  if (dim <= 0 || channels <= 0) throw std::invalid_argument("conv: dims must be positive");
  ConvParams p;
  p.dim = dim;
  p.channels = channels;
  p.kernels.assign(static_cast<std::size_t>(channels) * 9, 0.0);
  p.weight.assign(p.map_size() * p.proj_size(), 0.0);
  p.bias.assign(p.proj_size(), 0.0);
  p.bn_input = BatchNormParams::init(1);
  p.bn_feature = BatchNormParams::init(static_cast<std::size_t>(channels));
  p.bn_proj = BatchNormParams::init(p.proj_size());
  return p;
}

ConvGrads ConvGrads::zeros(const ConvParams& p) {
  ConvGrads g;
  g.kernels.assign(p.kernels.size(), 0.0);
  g.weight.assign(p.weight.size(), 0.0);
  g.bias.assign(p.bias.size(), 0.0);
  g.bn_input_scale.assign(1, 0.0);
  g.bn_input_shift.assign(1, 0.0);
  g.bn_feature_scale.assign(p.bn_feature.features(), 0.0);
  g.bn_feature_shift.assign(p.bn_feature.features(), 0.0);
  g.bn_proj_scale.assign(p.bn_proj.features(), 0.0);
  g.bn_proj_shift.assign(p.bn_proj.features(), 0.0);
  return g;
}

std::vector<double> stack_input(ComplexView h, ComplexView r) {
  if (h.dim() != r.dim()) throw std::invalid_argument("stack_input: dimension mismatch");
  const std::size_t d = h.dim();
  std::vector<double> img(4 * d);
  for (std::size_t j = 0; j < d; ++j) {
    img[0 * d + j] = h.re[j];
    img[1 * d + j] = h.im[j];
    img[2 * d + j] = r.re[j];
    img[3 * d + j] = r.im[j];
  }
  return img;
}

namespace {

// 3x3 same-shape convolution of one 4 x d image into `channels` planes.
void conv3x3_forward(const std::vector<double>& in, std::size_t d, const std::vector<double>& kernels,
                     int channels, std::vector<double>& out) {
  const int rows = 4;
  const int cols = static_cast<int>(d);
  for (int ch = 0; ch < channels; ++ch) {
    const double* k = kernels.data() + static_cast<std::size_t>(ch) * 9;
    double* o = out.data() + static_cast<std::size_t>(ch) * rows * cols;
    for (int y = 0; y < rows; ++y) {
      for (int x = 0; x < cols; ++x) {
        double acc = 0.0;
        for (int ky = 0; ky < 3; ++ky) {
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= rows) continue;
          for (int kx = 0; kx < 3; ++kx) {
            const int sx = x + kx - 1;
            if (sx < 0 || sx >= cols) continue;
            acc += in[static_cast<std::size_t>(sy) * cols + sx] * k[ky * 3 + kx];
          }
        }
        o[static_cast<std::size_t>(y) * cols + x] = acc;
      }
    }
  }
}

void conv3x3_backward(const std::vector<double>& grad_out, const std::vector<double>& in,
                      std::size_t d, const std::vector<double>& kernels, int channels,
                      std::vector<double>& grad_in, std::vector<double>& grad_kernels) {
  const int rows = 4;
  const int cols = static_cast<int>(d);
  for (int ch = 0; ch < channels; ++ch) {
    const double* k = kernels.data() + static_cast<std::size_t>(ch) * 9;
    double* gk = grad_kernels.data() + static_cast<std::size_t>(ch) * 9;
    const double* go = grad_out.data() + static_cast<std::size_t>(ch) * rows * cols;
    for (int y = 0; y < rows; ++y) {
      for (int x = 0; x < cols; ++x) {
        const double g = go[static_cast<std::size_t>(y) * cols + x];
        if (g == 0.0) continue;
        for (int ky = 0; ky < 3; ++ky) {
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= rows) continue;
          for (int kx = 0; kx < 3; ++kx) {
            const int sx = x + kx - 1;
            if (sx < 0 || sx >= cols) continue;
            const std::size_t si = static_cast<std::size_t>(sy) * cols + sx;
            grad_in[si] += g * k[ky * 3 + kx];
            gk[ky * 3 + kx] += g * in[si];
          }
        }
      }
    }
  }
}

}  // namespace

std::vector<double> conv2d_same(const std::vector<double>& image, std::size_t dim,
                                const std::vector<double>& kernels, int channels) {
  if (image.size() != 4 * dim) throw std::invalid_argument("conv2d_same: image must be 4 x dim");
  if (kernels.size() != static_cast<std::size_t>(channels) * 9)
    throw std::invalid_argument("conv2d_same: kernel count mismatch");
  std::vector<double> out(static_cast<std::size_t>(channels) * 4 * dim);
  conv3x3_forward(image, dim, kernels, channels, out);
  return out;
}

std::vector<ComplexVector> conv_forward_batch(const ConvParams& params,
                                              const std::vector<std::pair<ComplexView, ComplexView>>& pairs,
                                              const ConvOptions& options, ConvTape* tape) {
  if (pairs.empty()) throw std::invalid_argument("conv_forward: empty batch");
  const std::size_t d = static_cast<std::size_t>(params.dim);
  const std::size_t B = pairs.size();
  const std::size_t img = params.image_size();
  const std::size_t map = params.map_size();
  const std::size_t proj = params.proj_size();
  const bool train = options.mode == Mode::kTrain;
  if (train && tape == nullptr) throw std::invalid_argument("conv_forward: train mode requires a tape");
  const bool use_in_drop = train && options.input_dropout > 0.0;
  const bool use_fm_drop = train && options.feature_dropout > 0.0;
  if ((use_in_drop || use_fm_drop) && options.rng == nullptr)
    throw std::invalid_argument("conv_forward: dropout requires an rng");

  // Stacked input images.
  std::vector<double> images(B * img);
  for (std::size_t p = 0; p < B; ++p) {
    if (pairs[p].first.dim() != d || pairs[p].second.dim() != d)
      throw std::invalid_argument("conv_forward: embedding dimension mismatch");
    auto one = stack_input(pairs[p].first, pairs[p].second);
    std::copy(one.begin(), one.end(), images.begin() + p * img);
  }

  BnCache bn0_local, bn1_local, bn2_local;
  BnCache& bn0 = tape ? tape->bn0 : bn0_local;
  BnCache& bn1 = tape ? tape->bn1 : bn1_local;
  BnCache& bn2 = tape ? tape->bn2 : bn2_local;

  // BN over the input plane (single feature spanning every pixel of every pair).
  BnLayout lay0{B * img, 1, index_single, 0};
  if (train) {
    bn_forward_train(params.bn_input, lay0, images, bn0);
  } else {
    bn_forward_eval(params.bn_input, lay0, images);
  }

  std::vector<double> in_mask;
  if (use_in_drop) dropout_inplace(images, options.input_dropout, *options.rng, in_mask);

  // Convolution per pair.
  std::vector<double> feature(B * map);
  for (std::size_t p = 0; p < B; ++p) {
    std::vector<double> one(images.begin() + p * img, images.begin() + (p + 1) * img);
    std::vector<double> out(map);
    conv3x3_forward(one, d, params.kernels, params.channels, out);
    std::copy(out.begin(), out.end(), feature.begin() + p * map);
  }

  // BN over the feature map, statistics per channel across pairs and pixels.
  {
    const std::size_t channels = static_cast<std::size_t>(params.channels);
    BnCache& cache = bn1;
    if (train) {
      cache.normalized.resize(feature.size());
      cache.inv_std.resize(channels);
      cache.batch_mean.resize(channels);
      cache.batch_var.resize(channels);
      cache.group_size = B * img;
      const double n = static_cast<double>(B * img);
      for (std::size_t ch = 0; ch < channels; ++ch) {
        double mean = 0.0;
        for (std::size_t p = 0; p < B; ++p)
          for (std::size_t i = 0; i < img; ++i) mean += feature[p * map + ch * img + i];
        mean /= n;
        double var = 0.0;
        for (std::size_t p = 0; p < B; ++p)
          for (std::size_t i = 0; i < img; ++i) {
            double dlt = feature[p * map + ch * img + i] - mean;
            var += dlt * dlt;
          }
        var /= n;
        const double inv_std = 1.0 / std::sqrt(var + kBnEps);
        cache.batch_mean[ch] = mean;
        cache.batch_var[ch] = var;
        cache.inv_std[ch] = inv_std;
        for (std::size_t p = 0; p < B; ++p)
          for (std::size_t i = 0; i < img; ++i) {
            std::size_t idx = p * map + ch * img + i;
            double xhat = (feature[idx] - mean) * inv_std;
            cache.normalized[idx] = xhat;
            feature[idx] = params.bn_feature.scale[ch] * xhat + params.bn_feature.shift[ch];
          }
      }
    } else {
      for (std::size_t ch = 0; ch < channels; ++ch) {
        const double inv_std = 1.0 / std::sqrt(params.bn_feature.running_var[ch] + kBnEps);
        const double mean = params.bn_feature.running_mean[ch];
        for (std::size_t p = 0; p < B; ++p)
          for (std::size_t i = 0; i < img; ++i) {
            std::size_t idx = p * map + ch * img + i;
            feature[idx] =
                params.bn_feature.scale[ch] * (feature[idx] - mean) * inv_std + params.bn_feature.shift[ch];
          }
      }
    }
  }

  std::vector<double> y1;
  if (train) y1 = feature;  // pre-ReLU copy for the backward pass
  relu_inplace(feature);

  std::vector<double> fm_mask;
  if (use_fm_drop) dropout_inplace(feature, options.feature_dropout, *options.rng, fm_mask);

  // Affine projection of the flattened map.
  std::vector<double> projected(B * proj);
  for (std::size_t p = 0; p < B; ++p) {
    double* out = projected.data() + p * proj;
    for (std::size_t j = 0; j < proj; ++j) out[j] = params.bias[j];
    const double* flat = feature.data() + p * map;
    for (std::size_t i = 0; i < map; ++i) {
      const double v = flat[i];
      if (v == 0.0) continue;
      const double* wrow = params.weight.data() + i * proj;
      for (std::size_t j = 0; j < proj; ++j) out[j] += v * wrow[j];
    }
  }

  // BN over the projected vector, statistics per feature across pairs.
  BnLayout lay2{B, proj, index_feature, proj};
  if (train) {
    bn_forward_train(params.bn_proj, lay2, projected, bn2);
  } else {
    bn_forward_eval(params.bn_proj, lay2, projected);
  }

  std::vector<double> y2;
  if (train) y2 = projected;
  relu_inplace(projected);

  std::vector<ComplexVector> gamma(B);
  for (std::size_t p = 0; p < B; ++p) {
    gamma[p] = ComplexVector(d);
    for (std::size_t j = 0; j < d; ++j) {
      gamma[p].re[j] = projected[p * proj + j];
      gamma[p].im[j] = projected[p * proj + d + j];
      if (!std::isfinite(gamma[p].re[j]) || !std::isfinite(gamma[p].im[j]))
        throw std::runtime_error("conv_forward: non-finite activation");
    }
  }

  if (train) {
    tape->batch = B;
    tape->dim = params.dim;
    tape->channels = params.channels;
    tape->conv_in = std::move(images);
    tape->in_mask = std::move(in_mask);
    tape->y1 = std::move(y1);
    tape->fm_mask = std::move(fm_mask);
    tape->flat = std::move(feature);
    tape->y2 = std::move(y2);
  }
  return gamma;
}

ComplexVector conv_forward(const ConvParams& params, ComplexView h, ComplexView r,
                           const ConvOptions& options, ConvTape* tape) {
  std::vector<std::pair<ComplexView, ComplexView>> pairs{{h, r}};
  return conv_forward_batch(params, pairs, options, tape)[0];
}

ConvInputGrads conv_backward_batch(const ConvParams& params, const ConvTape& tape,
                                   const std::vector<ComplexVector>& grad_gamma, ConvGrads& grads) {
  if (tape.batch == 0) throw std::invalid_argument("conv_backward: missing tape");
  if (grad_gamma.size() != tape.batch)
    throw std::invalid_argument("conv_backward: gradient batch size mismatch");
  const std::size_t d = static_cast<std::size_t>(params.dim);
  const std::size_t B = tape.batch;
  const std::size_t img = params.image_size();
  const std::size_t map = params.map_size();
  const std::size_t proj = params.proj_size();

  // ReLU on the projection, then BN2.
  std::vector<double> gproj(B * proj);
  for (std::size_t p = 0; p < B; ++p) {
    for (std::size_t j = 0; j < d; ++j) {
      gproj[p * proj + j] = tape.y2[p * proj + j] > 0.0 ? grad_gamma[p].re[j] : 0.0;
      gproj[p * proj + d + j] = tape.y2[p * proj + d + j] > 0.0 ? grad_gamma[p].im[j] : 0.0;
    }
  }
  BnLayout lay2{B, proj, index_feature, proj};
  bn_backward(params.bn_proj, lay2, tape.bn2, gproj, grads.bn_proj_scale, grads.bn_proj_shift);

  // Affine.
  std::vector<double> gflat(B * map, 0.0);
  for (std::size_t p = 0; p < B; ++p) {
    const double* gp = gproj.data() + p * proj;
    const double* flat = tape.flat.data() + p * map;
    double* gf = gflat.data() + p * map;
    for (std::size_t j = 0; j < proj; ++j) grads.bias[j] += gp[j];
    for (std::size_t i = 0; i < map; ++i) {
      const double* wrow = params.weight.data() + i * proj;
      double* gw = grads.weight.data() + i * proj;
      double acc = 0.0;
      const double fv = flat[i];
      for (std::size_t j = 0; j < proj; ++j) {
        acc += gp[j] * wrow[j];
        gw[j] += fv * gp[j];
      }
      gf[i] = acc;
    }
  }

  // Feature dropout, then ReLU on the feature map, then BN1.
  if (!tape.fm_mask.empty()) {
    for (std::size_t i = 0; i < gflat.size(); ++i) gflat[i] *= tape.fm_mask[i];
  }
  for (std::size_t i = 0; i < gflat.size(); ++i) {
    if (tape.y1[i] <= 0.0) gflat[i] = 0.0;
  }
  {
    const std::size_t channels = static_cast<std::size_t>(params.channels);
    const double n = static_cast<double>(tape.bn1.group_size);
    for (std::size_t ch = 0; ch < channels; ++ch) {
      double sum_g = 0.0, sum_gx = 0.0;
      for (std::size_t p = 0; p < B; ++p)
        for (std::size_t i = 0; i < img; ++i) {
          std::size_t idx = p * map + ch * img + i;
          sum_g += gflat[idx];
          sum_gx += gflat[idx] * tape.bn1.normalized[idx];
        }
      grads.bn_feature_scale[ch] += sum_gx;
      grads.bn_feature_shift[ch] += sum_g;
      const double k = params.bn_feature.scale[ch] * tape.bn1.inv_std[ch];
      const double mean_g = sum_g / n;
      const double mean_gx = sum_gx / n;
      for (std::size_t p = 0; p < B; ++p)
        for (std::size_t i = 0; i < img; ++i) {
          std::size_t idx = p * map + ch * img + i;
          gflat[idx] = k * (gflat[idx] - mean_g - tape.bn1.normalized[idx] * mean_gx);
        }
    }
  }

  // Convolution.
  std::vector<double> gimages(B * img, 0.0);
  for (std::size_t p = 0; p < B; ++p) {
    std::vector<double> gout(gflat.begin() + p * map, gflat.begin() + (p + 1) * map);
    std::vector<double> in(tape.conv_in.begin() + p * img, tape.conv_in.begin() + (p + 1) * img);
    std::vector<double> gin(img, 0.0);
    conv3x3_backward(gout, in, d, params.kernels, params.channels, gin, grads.kernels);
    std::copy(gin.begin(), gin.end(), gimages.begin() + p * img);
  }

  // Input dropout, then BN0.
  if (!tape.in_mask.empty()) {
    for (std::size_t i = 0; i < gimages.size(); ++i) gimages[i] *= tape.in_mask[i];
  }
  BnLayout lay0{B * img, 1, index_single, 0};
  bn_backward(params.bn_input, lay0, tape.bn0, gimages, grads.bn_input_scale, grads.bn_input_shift);

  // Split image rows back into the two embeddings.
  ConvInputGrads out;
  out.wrt_head.resize(B);
  out.wrt_rel.resize(B);
  for (std::size_t p = 0; p < B; ++p) {
    out.wrt_head[p] = ComplexVector(d);
    out.wrt_rel[p] = ComplexVector(d);
    const double* g = gimages.data() + p * img;
    for (std::size_t j = 0; j < d; ++j) {
      out.wrt_head[p].re[j] = g[0 * d + j];
      out.wrt_head[p].im[j] = g[1 * d + j];
      out.wrt_rel[p].re[j] = g[2 * d + j];
      out.wrt_rel[p].im[j] = g[3 * d + j];
    }
  }
  return out;
}

void apply_running_stats(ConvParams& params, const ConvTape& tape) {
  auto update = [](BatchNormParams& bn, const BnCache& cache) {
    for (std::size_t f = 0; f < bn.features(); ++f) {
      const double n = static_cast<double>(cache.group_size);
      const double unbiased = cache.group_size > 1 ? cache.batch_var[f] * n / (n - 1.0) : cache.batch_var[f];
      bn.running_mean[f] = (1.0 - kBnMomentum) * bn.running_mean[f] + kBnMomentum * cache.batch_mean[f];
      bn.running_var[f] = (1.0 - kBnMomentum) * bn.running_var[f] + kBnMomentum * unbiased;
    }
  };
  update(params.bn_input, tape.bn0);
  update(params.bn_feature, tape.bn1);
  update(params.bn_proj, tape.bn2);
}

}  // namespace kge
