#include "kge/gradcheck.hpp"

#include <cmath>

namespace kge {

namespace {

double rel_err(double a, double f) {
  const double scale = std::max({std::fabs(a), std::fabs(f), 1e-6});
  return std::fabs(a - f) / scale;
}

}  // namespace

GradCheckReport run_gradcheck(ModelKind kind, int dim, int channels, std::size_t num_entities,
                              std::size_t num_relations, std::uint64_t seed, double epsilon) {
  TrainConfig config;
  config.kind = kind;
  config.dim = dim;
  config.channels = channels;
  config.label_smoothing = 0.1;
  if (kind == ModelKind::kConEx) {
    config.input_dropout = 0.2;
    config.feature_dropout = 0.2;
  }

  ModelParams params = init_params(seed, num_entities, num_relations, dim, channels, kind);

  // A small batch of distinct keys with random binary targets.
  Batch batch;
  Rng key_rng = Rng::substream(seed, "gradcheck-batch");
  const std::size_t batch_size = 3;
  for (std::size_t i = 0; i < batch_size; ++i) {
    batch.keys.push_back({static_cast<EntityId>(key_rng.next_below(num_entities)),
                          static_cast<RelationId>(key_rng.next_below(num_relations))});
    std::vector<double> y(num_entities, 0.0);
    for (std::size_t k = 0; k < num_entities; ++k) y[k] = key_rng.next_double() < 0.3 ? 1.0 : 0.0;
    batch.targets.push_back(label_smooth(y, config.label_smoothing, num_entities));
  }

  const std::uint64_t mask_seed = seed ^ 0xd0d0cafeull;
  auto loss_at = [&](const ModelParams& p) {
    Rng mask_rng(mask_seed);
    return forward_batch(p, batch, config, &mask_rng).loss;
  };

  Rng mask_rng(mask_seed);
  BatchForward fwd = forward_batch(params, batch, config, &mask_rng);
  GradientSet grads = backward_batch(params, batch, fwd);

  GradCheckReport report;
  auto check_tensor = [&](const std::string& cls, std::vector<double>& tensor,
                          const std::vector<double>& analytic) {
    double& worst = report.by_class[cls];
    for (std::size_t i = 0; i < tensor.size(); ++i) {
      const double saved = tensor[i];
      tensor[i] = saved + epsilon;
      const double up = loss_at(params);
      tensor[i] = saved - epsilon;
      const double dn = loss_at(params);
      tensor[i] = saved;
      const double fd = (up - dn) / (2.0 * epsilon);
      worst = std::max(worst, rel_err(analytic[i], fd));
      ++report.parameters_checked;
    }
    report.max_rel_err = std::max(report.max_rel_err, worst);
  };

  check_tensor("entity", params.entities.re(), grads.ent_re);
  check_tensor("entity", params.entities.im(), grads.ent_im);
  check_tensor("relation", params.relations.re(), grads.rel_re);
  check_tensor("relation", params.relations.im(), grads.rel_im);
  if (kind == ModelKind::kConEx) {
    check_tensor("kernels", params.conv.kernels, grads.conv.kernels);
    check_tensor("weight", params.conv.weight, grads.conv.weight);
    check_tensor("bias", params.conv.bias, grads.conv.bias);
    check_tensor("bn_scale", params.conv.bn_input.scale, grads.conv.bn_input_scale);
    check_tensor("bn_shift", params.conv.bn_input.shift, grads.conv.bn_input_shift);
    check_tensor("bn_scale", params.conv.bn_feature.scale, grads.conv.bn_feature_scale);
    check_tensor("bn_shift", params.conv.bn_feature.shift, grads.conv.bn_feature_shift);
    check_tensor("bn_scale", params.conv.bn_proj.scale, grads.conv.bn_proj_scale);
    check_tensor("bn_shift", params.conv.bn_proj.shift, grads.conv.bn_proj_shift);
  }
  return report;
}

}  // namespace kge
