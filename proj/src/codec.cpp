#include "iafm/codec.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "iafm/common.hpp"

namespace iafm {

void BinSpec::validate() const {
  check(n_bins >= 2, "binspec: n_bins must be >= 2");
  check(low < high, "binspec: low < high required");
}

int BinSpec::label_of_bin(int zero_based) const {
  if (style == LabelStyle::signed_centered) return zero_based - n_bins / 2;
  return zero_based + label_offset;
}

int BinSpec::bin_of_label(int label) const {
  const int zb = style == LabelStyle::signed_centered ? label + n_bins / 2 : label - label_offset;
  check(zb >= 0 && zb < n_bins, "binspec: label " + std::to_string(label) + " out of range");
  return zb;
}

int encode_value(double v, const BinSpec& spec) {
  spec.validate();
  check(!std::isnan(v), "encode_value: NaN input");
  int zb = static_cast<int>(std::floor((v - spec.low) / spec.width()));
  zb = std::clamp(zb, 0, spec.n_bins - 1);
  return spec.label_of_bin(zb);
}

double decode_index(int label, const BinSpec& spec) {
  spec.validate();
  const int zb = spec.bin_of_label(label);
  return spec.low + (zb + 0.5) * spec.width();
}

int DomainActionSpace::action_token_count() const {
  int n = static_cast<int>(buttons.size());
  for (const auto& a : axes) n += a.bins.n_bins;
  return n;
}

int DomainActionSpace::state_token_count() const {
  int n = static_cast<int>(state_buttons.size());
  for (const auto& a : state_axes) n += a.bins.n_bins;
  return n;
}

namespace {

std::string axis_token(const AxisSpec& axis, int label) {
  return "[" + axis.token_prefix + std::to_string(label) + "]";
}

std::string button_token(const std::string& name) { return "[" + name + "]"; }

void append_axis_tokens(const AxisSpec& axis, std::vector<std::string>& out) {
  for (int b = 0; b < axis.bins.n_bins; ++b) out.push_back(axis_token(axis, axis.bins.label_of_bin(b)));
}

}  // namespace

std::vector<std::string> DomainActionSpace::action_token_strings() const {
  std::vector<std::string> out;
  for (const auto& b : buttons) out.push_back(button_token(b));
  for (const auto& a : axes) append_axis_tokens(a, out);
  return out;
}

std::vector<std::string> DomainActionSpace::state_token_strings() const {
  std::vector<std::string> out;
  for (const auto& a : state_axes) append_axis_tokens(a, out);
  for (const auto& b : state_buttons) out.push_back(button_token(b));
  return out;
}

const AxisSpec* DomainActionSpace::find_axis(const std::string& axis_name) const {
  for (const auto& a : axes)
    if (a.name == axis_name) return &a;
  return nullptr;
}

std::vector<std::string> encode_action(const DomainActionSpace& space, const DomainAction& action) {
  for (const auto& b : action.buttons)
    check(std::find(space.buttons.begin(), space.buttons.end(), b) != space.buttons.end(),
          "encode_action: unknown button '" + b + "' in domain " + space.name);
  for (const auto& [name, _] : action.axes)
    check(space.find_axis(name) != nullptr,
          "encode_action: unknown axis '" + name + "' in domain " + space.name);

  std::vector<std::string> out;
  out.push_back(kStartAction);
  for (const auto& b : space.buttons)
    if (std::find(action.buttons.begin(), action.buttons.end(), b) != action.buttons.end())
      out.push_back(button_token(b));
  for (const auto& a : space.axes) {
    auto it = action.axes.find(a.name);
    if (it == action.axes.end()) {
      check(!a.required, "encode_action: axis '" + a.name + "' missing in domain " + space.name);
      continue;
    }
    out.push_back(axis_token(a, encode_value(it->second, a.bins)));
  }
  out.push_back(kEndAction);
  return out;
}

DomainAction decode_action(const DomainActionSpace& space, const std::vector<std::string>& tokens) {
  check(tokens.size() >= 2, "decode_action: span too short");
  check(tokens.front() == kStartAction && tokens.back() == kEndAction,
        "decode_action: span must be framed by " + std::string(kStartAction) + " and " +
            std::string(kEndAction));

  DomainAction action;
  std::set<std::string> seen_buttons;
  std::set<std::string> seen_axes;
  for (size_t i = 1; i + 1 < tokens.size(); ++i) {
    const std::string& tok = tokens[i];
    if (tok == kEndTrajectory) continue;
    check(tok != kStartAction && tok != kEndAction, "decode_action: nested control token");
    check(tok.size() >= 3 && tok.front() == '[' && tok.back() == ']',
          "decode_action: malformed token '" + tok + "'");
    const std::string body = tok.substr(1, tok.size() - 2);

    if (std::find(space.buttons.begin(), space.buttons.end(), body) != space.buttons.end()) {
      check(!seen_buttons.count(body), "decode_action: duplicate button '" + body + "'");
      seen_buttons.insert(body);
      action.buttons.push_back(body);
      continue;
    }

    bool matched = false;
    for (const auto& a : space.axes) {
      if (body.size() <= a.token_prefix.size() || body.compare(0, a.token_prefix.size(), a.token_prefix) != 0)
        continue;
      const std::string rest = body.substr(a.token_prefix.size());
      size_t pos = 0;
      int label = 0;
      try {
        label = std::stoi(rest, &pos);
      } catch (const std::exception&) {
        continue;
      }
      if (pos != rest.size()) continue;
      check(!seen_axes.count(a.name), "decode_action: duplicate axis token for '" + a.name + "'");
      seen_axes.insert(a.name);
      action.axes[a.name] = decode_index(label, a.bins);
      matched = true;
      break;
    }
    check(matched, "decode_action: token '" + tok + "' not in domain " + space.name);
  }
  // Keep declared order so decode(encode(a)) round-trips exactly.
  std::vector<std::string> ordered;
  for (const auto& b : space.buttons)
    if (seen_buttons.count(b)) ordered.push_back(b);
  action.buttons = std::move(ordered);
  return action;
}

std::vector<std::string> encode_state(const DomainActionSpace& space,
                                      const std::vector<double>& axis_values,
                                      const std::string& state_button) {
  check(space.has_states(), "encode_state: domain " + space.name + " declares no state tokens");
  check(axis_values.size() == space.state_axes.size(),
        "encode_state: expected " + std::to_string(space.state_axes.size()) + " values for domain " +
            space.name + ", got " + std::to_string(axis_values.size()));
  std::vector<std::string> out;
  for (size_t i = 0; i < space.state_axes.size(); ++i)
    out.push_back(axis_token(space.state_axes[i], encode_value(axis_values[i], space.state_axes[i].bins)));
  if (!space.state_buttons.empty()) {
    check(std::find(space.state_buttons.begin(), space.state_buttons.end(), state_button) !=
              space.state_buttons.end(),
          "encode_state: unknown state button '" + state_button + "' in domain " + space.name);
    out.push_back(button_token(state_button));
  } else {
    check(state_button.empty(), "encode_state: domain " + space.name + " has no state buttons");
  }
  return out;
}

namespace {

BinSpec signed_bins(int n, double low, double high) {
  return BinSpec{n, low, high, LabelStyle::signed_centered, 0};
}

}  // namespace

DomainActionSpace minecraft_space() {
  DomainActionSpace s;
  s.name = "minecraft";
  s.buttons = {"attack",   "use",       "forward",  "back",    "left",    "right",
               "jump",     "sneak",     "sprint",   "drop",    "inventory", "swaphands",
               "pickitem", "esc",       "hotbar1",  "hotbar2", "hotbar3", "hotbar4",
               "hotbar5",  "hotbar6",   "hotbar7",  "hotbar8", "hotbar9"};
  // Camera deltas in pixels per tick, 100 bins per axis, signed labels.
  s.axes = {
      {"camera_x", "CAMERAX", signed_bins(100, -50.0, 50.0), false},
      {"camera_y", "CAMERAY", signed_bins(100, -50.0, 50.0), false},
  };
  return s;
}

DomainActionSpace bleeding_edge_space() {
  DomainActionSpace s;
  s.name = "bleeding_edge";
  s.buttons = {"lockon",          "meleeattack",     "rangedattack", "evade",
               "dash",            "specialability1", "specialability2",
               "specialability3", "ultimateability", "mount",        "interact"};
  // Polar sticks: 256 rotation values, 4 magnitude values each.
  BinSpec rot{256, 0.0, 256.0, LabelStyle::zero_based, 0};
  BinSpec mag{4, 0.0, 1.0, LabelStyle::zero_based, 1};
  s.axes = {
      {"left_rotation", "lrot", rot, false},
      {"left_magnitude", "lmag", mag, false},
      {"right_rotation", "rrot", rot, false},
      {"right_magnitude", "rmag", mag, false},
  };
  return s;
}

DomainActionSpace language_table_space() {
  DomainActionSpace s;
  s.name = "language_table";
  // End-effector translation target, normalized displacement per axis.
  s.axes = {
      {"dx", "ltx", signed_bins(21, -1.0, 1.0), true},
      {"dy", "lty", signed_bins(21, -1.0, 1.0), true},
  };
  // Current translation plus previous action, both per axis.
  s.state_axes = {
      {"cur_x", "ltsx", signed_bins(21, -1.0, 1.0), false},
      {"cur_y", "ltsy", signed_bins(21, -1.0, 1.0), false},
      {"prev_x", "ltpx", signed_bins(21, -1.0, 1.0), false},
      {"prev_y", "ltpy", signed_bins(21, -1.0, 1.0), false},
  };
  return s;
}

DomainActionSpace calvin_space() {
  DomainActionSpace s;
  s.name = "calvin";
  s.buttons = {"gripperopen", "gripperclose"};
  s.axes = {
      {"dx", "cvx", signed_bins(21, -1.0, 1.0), true},
      {"dy", "cvy", signed_bins(21, -1.0, 1.0), true},
      {"dz", "cvz", signed_bins(21, -1.0, 1.0), true},
      {"droll", "cvroll", signed_bins(21, -1.0, 1.0), true},
      {"dpitch", "cvpitch", signed_bins(21, -1.0, 1.0), true},
      {"dyaw", "cvyaw", signed_bins(21, -1.0, 1.0), true},
  };
  s.state_axes = {
      {"px", "cvspx", signed_bins(21, -1.0, 1.0), false},
      {"py", "cvspy", signed_bins(21, -1.0, 1.0), false},
      {"pz", "cvspz", signed_bins(21, -1.0, 1.0), false},
      {"rx", "cvsrx", signed_bins(21, -1.0, 1.0), false},
      {"ry", "cvsry", signed_bins(21, -1.0, 1.0), false},
      {"rz", "cvsrz", signed_bins(21, -1.0, 1.0), false},
      {"width", "cvswidth", signed_bins(21, -1.0, 1.0), false},
      {"j1", "cvsj1", signed_bins(21, -1.0, 1.0), false},
      {"j2", "cvsj2", signed_bins(21, -1.0, 1.0), false},
      {"j3", "cvsj3", signed_bins(21, -1.0, 1.0), false},
      {"j4", "cvsj4", signed_bins(21, -1.0, 1.0), false},
      {"j5", "cvsj5", signed_bins(21, -1.0, 1.0), false},
      {"j6", "cvsj6", signed_bins(21, -1.0, 1.0), false},
      {"j7", "cvsj7", signed_bins(21, -1.0, 1.0), false},
  };
  s.state_buttons = {"cvsgripperopen", "cvsgripperclosed"};
  return s;
}

std::vector<DomainActionSpace> standard_spaces() {
  return {minecraft_space(), bleeding_edge_space(), language_table_space(), calvin_space()};
}

DomainActionSpace space_by_name(const std::string& name) {
  for (auto& s : standard_spaces())
    if (s.name == name) return s;
  throw std::runtime_error("unknown domain '" + name + "'");
}

}  // namespace iafm
