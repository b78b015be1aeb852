#pragma once

#include <string>
#include <vector>

#include "iafm/codec.hpp"
#include "iafm/rng.hpp"

namespace iafm::testutil {

// A random well-formed action span in canonical order: [STARTACTION],
// buttons in declared order, present axes in declared order, [ENDOFACTION].
inline std::vector<std::string> random_span(const DomainActionSpace& space, Rng& rng) {
  std::vector<std::string> out;
  out.push_back(kStartAction);
  for (const auto& b : space.buttons)
    if (rng.uniform() < 0.3) out.push_back("[" + b + "]");
  for (const auto& a : space.axes) {
    if (!a.required && rng.uniform() < 0.4) continue;
    const int zb = static_cast<int>(rng.uniform_int(a.bins.n_bins));
    out.push_back("[" + a.token_prefix + std::to_string(a.bins.label_of_bin(zb)) + "]");
  }
  out.push_back(kEndAction);
  return out;
}

// Small domain + vocabulary for model-level tests.
inline DomainActionSpace tiny_space() {
  DomainActionSpace s;
  s.name = "tiny";
  s.buttons = {"go", "grab"};
  s.axes = {{"dx", "tx", BinSpec{5, -1.0, 1.0, LabelStyle::signed_centered, 0}, true}};
  return s;
}

inline DomainAction random_action(const DomainActionSpace& space, Rng& rng) {
  DomainAction act;
  for (const auto& b : space.buttons)
    if (rng.uniform() < 0.3) act.buttons.push_back(b);
  for (const auto& a : space.axes) {
    if (!a.required && rng.uniform() < 0.4) continue;
    act.axes[a.name] = rng.uniform(a.bins.low, a.bins.high);
  }
  return act;
}

}  // namespace iafm::testutil
