#pragma once

#include <cstdint>
#include <vector>

#include "iafm/common.hpp"
#include "iafm/vocab.hpp"

namespace iafm {

enum class Modality { text, visual, action, state };
enum class LossFlag { lang, act, none };

struct WindowPolicy {
  int max_prior_pairs = 3;   // M
  int frames_per_sample = 4; // T

  bool operator==(const WindowPolicy&) const = default;
  void validate() const {
    check(max_prior_pairs >= 1, "window policy: M >= 1 required");
    check(frames_per_sample >= 1, "window policy: T >= 1 required");
  }
};

// One (V_t [, S_t], A_t) group. visible_count is how many latent rows this
// frame contributes to the stream; patches_full is |V_t| for the loss
// denominator (full patch count regardless of masking).
struct FrameEntry {
  int visible_count = 0;
  int patches_full = 0;
  std::vector<int> state_ids;
  std::vector<int> action_ids;
};

struct StreamPosition {
  Modality modality;
  LossFlag loss;
  int token_id;  // -1 for visual slots
  int frame;     // frame entry index
  int row;       // latent row within the frame, visual slots only
};

// One training sample: instruction first, then frame groups in order.
struct TokenStream {
  std::vector<int> instruction;
  std::vector<FrameEntry> frames;
  WindowPolicy policy;

  int64_t text_len() const { return static_cast<int64_t>(instruction.size()); }
  int64_t total_positions() const;
  // |W| + sum_t (|V_t| + |A_t|), the combined-loss denominator.
  int64_t denominator() const;
};

std::vector<StreamPosition> flatten(const TokenStream& stream);

// Builds and validates a stream. Every action span must be wrapped by
// [STARTACTION]/[ENDOFACTION]; states, when present, align per frame.
// allow_open_last_frame permits an empty action span on the final frame
// (the decode-time shape, before an action has been predicted).
TokenStream assemble_stream(const std::vector<int>& instruction,
                            const std::vector<FrameEntry>& frames, const Vocabulary& vocab,
                            const WindowPolicy& policy, bool allow_open_last_frame = false);

// Appends one (V, A) group, dropping the oldest pair(s) beyond M prior
// pairs. The instruction is always retained.
TokenStream slide_window(const TokenStream& stream, const FrameEntry& entry,
                         const WindowPolicy& policy, const Vocabulary& vocab);

struct RouteTarget {
  int64_t position;  // stream index of the target token
  int target_id;
  LossFlag cls;
};

// Next-token targets: TEXT positions under LANG, ACTION positions under ACT,
// nothing for VISUAL/STATE.
std::vector<RouteTarget> loss_routing(const TokenStream& stream);

}  // namespace iafm
