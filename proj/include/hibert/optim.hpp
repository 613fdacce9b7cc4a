#pragma once

#include <map>
#include <string>
#include <vector>

#include "hibert/tensor.hpp"

namespace hibert {

/// Linear warmup to base_lr, inverse-square-root decay afterwards.
struct Schedule {
  Scalar base_lr = 1e-4;
  long warmup_steps = 10000;
};

Scalar lr_at(const Schedule& schedule, long step);

struct AdamConfig {
  Scalar beta1 = 0.9;
  Scalar beta2 = 0.999;
  Scalar eps = 1e-8;
  Scalar weight_decay = 0.01;
};

struct AdamState {
  long step = 0;
  std::map<std::string, ArrayX> m;
  std::map<std::string, ArrayX> v;
};

/// Ordered collection of named parameter tensors (insertion order is the
/// canonical serialization order).
class ParamMap {
 public:
  void add(const std::string& name, Tensor t);
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const;
  size_t count() const { return items_.size(); }
  auto begin() { return items_.begin(); }
  auto end() { return items_.end(); }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

  void zero_grad();
  Index total_size() const;

 private:
  std::vector<std::pair<std::string, Tensor>> items_;
};

/// Weight decay is decoupled and skipped for biases and layer-norm parameters.
bool decays(const std::string& name);

/// One Adam step with bias correction over every parameter that has a
/// gradient. Throws on non-finite gradients.
void adam_step(ParamMap& params, AdamState& state, const Schedule& schedule,
               const AdamConfig& config);

}  // namespace hibert
