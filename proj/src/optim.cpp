#include "hibert/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace hibert {

Scalar lr_at(const Schedule& schedule, long step) {
  if (step < 1) throw std::invalid_argument("lr_at: step must be >= 1");
  Scalar w = static_cast<Scalar>(schedule.warmup_steps);
  Scalar s = static_cast<Scalar>(step);
  return schedule.base_lr * std::min(s / w, std::sqrt(w / s));
}

void ParamMap::add(const std::string& name, Tensor t) {
  if (contains(name)) throw std::invalid_argument("ParamMap: duplicate name " + name);
  items_.emplace_back(name, std::move(t));
}

Tensor& ParamMap::at(const std::string& name) {
  for (auto& [n, t] : items_)
    if (n == name) return t;
  throw std::out_of_range("ParamMap: no parameter named " + name);
}

const Tensor& ParamMap::at(const std::string& name) const {
  for (const auto& [n, t] : items_)
    if (n == name) return t;
  throw std::out_of_range("ParamMap: no parameter named " + name);
}

bool ParamMap::contains(const std::string& name) const {
  for (const auto& [n, t] : items_)
    if (n == name) return true;
  return false;
}

void ParamMap::zero_grad() {
  for (auto& [n, t] : items_) t.zero_grad();
}

Index ParamMap::total_size() const {
  Index s = 0;
  for (const auto& [n, t] : items_) s += t.size();
  return s;
}

bool decays(const std::string& name) {
  auto ends_with = [&](const std::string& suffix) {
    return name.size() >= suffix.size() &&
           name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  if (ends_with(".bias")) return false;
  if (name.find(".ln") != std::string::npos) return false;
  return true;
}

void adam_step(ParamMap& params, AdamState& state, const Schedule& schedule,
               const AdamConfig& config) {
  state.step += 1;
  Scalar lr = lr_at(schedule, state.step);
  Scalar bc1 = 1.0 - std::pow(config.beta1, static_cast<Scalar>(state.step));
  Scalar bc2 = 1.0 - std::pow(config.beta2, static_cast<Scalar>(state.step));

  for (auto& [name, p] : params) {
    if (!p.has_grad()) continue;
    const ArrayX& g = p.grad();
    if (!g.isFinite().all())
      throw std::runtime_error("adam_step: non-finite gradient in " + name);
    ArrayX& m = state.m[name];
    ArrayX& v = state.v[name];
    if (m.size() == 0) m = ArrayX::Zero(p.size());
    if (v.size() == 0) v = ArrayX::Zero(p.size());
    if (m.size() != p.size())
      throw std::runtime_error("adam_step: state size mismatch for " + name);

    m = config.beta1 * m + (1.0 - config.beta1) * g;
    v = config.beta2 * v + (1.0 - config.beta2) * g * g;
    ArrayX m_hat = m / bc1;
    ArrayX v_hat = v / bc2;
    p.data() -= lr * m_hat / (v_hat.sqrt() + config.eps);
    if (config.weight_decay != 0.0 && decays(name))
      p.data() -= lr * config.weight_decay * p.data();
  }
}

}  // namespace hibert
