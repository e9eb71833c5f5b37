#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "kge/train.hpp"

namespace kge {

struct GradCheckReport {
  // parameter class -> max relative error between analytic and central
  // finite-difference gradients
  std::map<std::string, double> by_class;
  double max_rel_err = 0.0;
  std::size_t parameters_checked = 0;
};

// Compares every analytic gradient of a small KvsAll batch loss against
// central finite differences (step `epsilon`). Relative error uses
// |a - f| / max(|a|, |f|, 1e-6). Dropout masks are replayed per evaluation
// so the loss stays a fixed differentiable function of the parameters.
GradCheckReport run_gradcheck(ModelKind kind, int dim, int channels, std::size_t num_entities,
                              std::size_t num_relations, std::uint64_t seed, double epsilon = 1e-5);

}  // namespace kge
