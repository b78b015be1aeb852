#pragma once

#include <functional>

#include "iafm/ops.hpp"

namespace iafm {

// Compares reverse-mode gradients against central finite differences
// (f(x+eps) - f(x-eps)) / (2 eps) for every coordinate of every parameter.
// f must rebuild its graph from the current parameter values on each call.
// Returns the max relative error with denominator max(|analytic|, |numeric|, 1e-8).
//
// fourth_order combines the central differences at eps and 2*eps
// (Richardson extrapolation), cancelling the eps^2 truncation term. That
// permits a large eps, which is what pushes the difference-quotient rounding
// noise below the 1e-8 denominator floor on near-zero-gradient coordinates.
template <class T>
double grad_check(const std::function<Tensor<T>()>& f, std::vector<Tensor<T>>& params,
                  double eps, bool fourth_order = false) {
  check(eps > 0, "grad_check: eps must be positive");
  for (auto& p : params) check(p.requires_grad && p.grad, "grad_check: parameter without grad");

  zero_grads(params);
  Tensor<T> loss = f();
  check(loss.numel() == 1, "grad_check: f must be scalar-valued");
  check(std::isfinite(static_cast<double>(loss.item())), "grad_check: non-finite loss");
  {
    Tensor<T> again = f();
    check(again.item() == loss.item(), "grad_check: f is not deterministic");
  }
  backward(loss);

  std::vector<std::vector<T>> analytic;
  analytic.reserve(params.size());
  for (const auto& p : params) analytic.push_back(*p.grad);

  double max_rel = 0.0;
  NoGradGuard ng;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    auto& p = params[pi];
    for (int64_t i = 0; i < p.numel(); ++i) {
      const T orig = (*p.data)[i];
      const auto central = [&](double e) {
        (*p.data)[i] = orig + static_cast<T>(e);
        const double fp = static_cast<double>(f().item());
        (*p.data)[i] = orig - static_cast<T>(e);
        const double fm = static_cast<double>(f().item());
        (*p.data)[i] = orig;
        check(std::isfinite(fp) && std::isfinite(fm), "grad_check: non-finite probe value");
        return (fp - fm) / (2.0 * e);
      };
      double numeric = central(eps);
      if (fourth_order) numeric = (4.0 * numeric - central(2.0 * eps)) / 3.0;
      const double a = static_cast<double>(analytic[pi][static_cast<size_t>(i)]);
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      max_rel = std::max(max_rel, std::abs(a - numeric) / denom);
    }
  }
  return max_rel;
}

}  // namespace iafm
