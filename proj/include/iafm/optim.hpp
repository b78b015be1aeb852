#pragma once

#include <cmath>

#include "iafm/tensor.hpp"

namespace iafm {

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;

  void validate() const {
    check(beta1 >= 0 && beta1 < 1, "adamw: beta1 out of range");
    check(beta2 >= 0 && beta2 < 1, "adamw: beta2 out of range");
    check(eps > 0, "adamw: eps must be positive");
    check(weight_decay >= 0, "adamw: negative weight decay");
  }
};

// First/second moment accumulators, one pair per trainable parameter.
template <class T>
struct AdamState {
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
  int64_t step = 0;

  static AdamState init(const std::vector<Tensor<T>>& params) {
    AdamState st;
    st.m.reserve(params.size());
    st.v.reserve(params.size());
    for (const auto& p : params) {
      st.m.emplace_back(static_cast<size_t>(p.numel()), T(0));
      st.v.emplace_back(static_cast<size_t>(p.numel()), T(0));
    }
    return st;
  }
};

// Decoupled-weight-decay adaptive moment update with bias correction.
// Gradients are read from each parameter's grad buffer.
template <class T>
void adamw_step(std::vector<Tensor<T>>& params, AdamState<T>& state, const AdamHyper& h,
                double lr) {
  h.validate();
  check(lr >= 0, "adamw: negative lr");
  check(state.m.size() == params.size() && state.v.size() == params.size(),
        "adamw: state does not match parameter set");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.step));
  for (size_t pi = 0; pi < params.size(); ++pi) {
    auto& p = params[pi];
    check(p.grad && state.m[pi].size() == static_cast<size_t>(p.numel()),
          "adamw: shape mismatch for parameter " + std::to_string(pi));
    T* w = p.ptr();
    const T* g = p.grad_ptr();
    T* m = state.m[pi].data();
    T* v = state.v[pi].data();
    const int64_t n = p.numel();
    for (int64_t i = 0; i < n; ++i) {
      const double gi = static_cast<double>(g[i]);
      const double mi = h.beta1 * static_cast<double>(m[i]) + (1.0 - h.beta1) * gi;
      const double vi = h.beta2 * static_cast<double>(v[i]) + (1.0 - h.beta2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double mhat = mi / bc1;
      const double vhat = vi / bc2;
      double wi = static_cast<double>(w[i]);
      wi -= lr * (mhat / (std::sqrt(vhat) + h.eps) + h.weight_decay * wi);
      w[i] = static_cast<T>(wi);
    }
  }
}

// Scales all gradients so the global L2 norm is at most max_norm.
// Returns the pre-clip norm.
template <class T>
double clip_global_norm(std::vector<Tensor<T>>& params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params) {
    if (!p.grad) continue;
    for (T g : *p.grad) sq += static_cast<double>(g) * static_cast<double>(g);
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) {
    const T s = static_cast<T>(max_norm / norm);
    for (auto& p : params) {
      if (!p.grad) continue;
      for (T& g : *p.grad) g *= s;
    }
  }
  return norm;
}

struct LrSchedule {
  double peak_lr = 1e-4;
  int64_t warmup_steps = 0;
  int64_t total_steps = 1;
  double min_lr = 0.0;

  void validate() const {
    check(warmup_steps >= 0 && warmup_steps < total_steps, "schedule: warmup_steps < total_steps required");
    check(min_lr >= 0 && min_lr <= peak_lr, "schedule: min_lr <= peak_lr required");
  }
};

// Linear ramp 0 -> peak over warmup, then cosine decay peak -> min.
inline double lr_at(int64_t step, const LrSchedule& s) {
  s.validate();
  check(step >= 0 && step <= s.total_steps, "lr_at: step out of range");
  if (step <= s.warmup_steps) {
    if (s.warmup_steps == 0) return s.peak_lr;
    return s.peak_lr * static_cast<double>(step) / static_cast<double>(s.warmup_steps);
  }
  const double t = static_cast<double>(step - s.warmup_steps) /
                   static_cast<double>(s.total_steps - s.warmup_steps);
  return s.min_lr + 0.5 * (s.peak_lr - s.min_lr) * (1.0 + std::cos(3.141592653589793 * t));
}

}  // namespace iafm
