#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace iafm {

enum class LabelStyle { zero_based, signed_centered };

// Uniform binning of a scalar range. Labels are what appears inside the
// token text: zero-based 0..n-1 (plus an optional offset) or signed-centered
// -floor(n/2)..ceil(n/2)-1.
struct BinSpec {
  int n_bins = 2;
  double low = -1.0;
  double high = 1.0;
  LabelStyle style = LabelStyle::zero_based;
  int label_offset = 0;  // only for zero_based labels

  void validate() const;
  double width() const { return (high - low) / n_bins; }
  int label_of_bin(int zero_based) const;
  int bin_of_label(int label) const;  // throws if label out of range
};

// Out-of-range values clamp to the edge bins.
int encode_value(double v, const BinSpec& spec);
double decode_index(int label, const BinSpec& spec);

struct AxisSpec {
  std::string name;
  std::string token_prefix;
  BinSpec bins;
  bool required = false;
};

struct DomainActionSpace {
  std::string name;
  std::vector<std::string> buttons;
  std::vector<AxisSpec> axes;
  std::vector<AxisSpec> state_axes;
  std::vector<std::string> state_buttons;

  int action_token_count() const;
  int state_token_count() const;
  std::vector<std::string> action_token_strings() const;
  std::vector<std::string> state_token_strings() const;
  bool has_states() const { return !state_axes.empty() || !state_buttons.empty(); }
  const AxisSpec* find_axis(const std::string& name) const;
};

// One timestep's action before tokenization: pressed buttons plus axis
// values in domain-native units (continuous or pre-binned indices).
struct DomainAction {
  std::vector<std::string> buttons;
  std::map<std::string, double> axes;

  bool operator==(const DomainAction&) const = default;
};

inline const char* kStartAction = "[STARTACTION]";
inline const char* kEndAction = "[ENDOFACTION]";
inline const char* kEndTrajectory = "[ENDOFTRAJECTORY]";

// [STARTACTION], buttons in declared order, axis tokens in declared axis
// order, [ENDOFACTION]. Missing required axis or unknown button is an error.
std::vector<std::string> encode_action(const DomainActionSpace& space, const DomainAction& action);

// Inverse of encode_action up to bin quantization; axis tokens map to bin
// midpoints. Accepts an optional trailing [ENDOFTRAJECTORY] before the
// closing control token.
DomainAction decode_action(const DomainActionSpace& space, const std::vector<std::string>& tokens);

// Ordered proprioception tokens. axis_values aligns with state_axes; the
// state button (when the domain declares any) selects one of state_buttons.
std::vector<std::string> encode_state(const DomainActionSpace& space,
                                      const std::vector<double>& axis_values,
                                      const std::string& state_button = "");

// The four standard domains with their declared token counts.
DomainActionSpace minecraft_space();
DomainActionSpace bleeding_edge_space();
DomainActionSpace language_table_space();
DomainActionSpace calvin_space();
std::vector<DomainActionSpace> standard_spaces();
DomainActionSpace space_by_name(const std::string& name);

}  // namespace iafm
