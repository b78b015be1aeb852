#include "iafm/stream.hpp"

namespace iafm {

int64_t TokenStream::total_positions() const {
  int64_t n = text_len();
  for (const auto& f : frames)
    n += f.visible_count + static_cast<int64_t>(f.state_ids.size()) +
         static_cast<int64_t>(f.action_ids.size());
  return n;
}

int64_t TokenStream::denominator() const {
  int64_t n = text_len();
  for (const auto& f : frames) n += f.patches_full + static_cast<int64_t>(f.action_ids.size());
  return n;
}

std::vector<StreamPosition> flatten(const TokenStream& stream) {
  std::vector<StreamPosition> out;
  out.reserve(static_cast<size_t>(stream.total_positions()));
  for (int id : stream.instruction)
    out.push_back({Modality::text, LossFlag::lang, id, -1, -1});
  for (size_t t = 0; t < stream.frames.size(); ++t) {
    const auto& f = stream.frames[t];
    for (int r = 0; r < f.visible_count; ++r)
      out.push_back({Modality::visual, LossFlag::none, -1, static_cast<int>(t), r});
    for (int id : f.state_ids)
      out.push_back({Modality::state, LossFlag::none, id, static_cast<int>(t), -1});
    for (int id : f.action_ids)
      out.push_back({Modality::action, LossFlag::act, id, static_cast<int>(t), -1});
  }
  return out;
}

namespace {

void validate_entry(const FrameEntry& f, const Vocabulary& vocab, bool allow_open) {
  check(f.visible_count >= 0 && f.patches_full >= 0, "stream: negative frame counts");
  for (int id : f.state_ids)
    check(vocab.is_agent(id), "stream: state token id " + std::to_string(id) + " is not an agent token");
  if (f.action_ids.empty()) {
    check(allow_open, "stream: action span missing control tokens");
    return;
  }
  check(f.action_ids.size() >= 2 && f.action_ids.front() == vocab.start_action &&
            f.action_ids.back() == vocab.end_action,
        "stream: action span missing control tokens");
  for (int id : f.action_ids)
    check(id >= 0 && id < vocab.size(), "stream: unknown token id " + std::to_string(id));
}

}  // namespace

TokenStream assemble_stream(const std::vector<int>& instruction,
                            const std::vector<FrameEntry>& frames, const Vocabulary& vocab,
                            const WindowPolicy& policy, bool allow_open_last_frame) {
  policy.validate();
  check(!frames.empty(), "assemble_stream: no frames");
  check(static_cast<int>(frames.size()) <= policy.max_prior_pairs + 1,
        "assemble_stream: " + std::to_string(frames.size()) + " frames exceed window of " +
            std::to_string(policy.max_prior_pairs) + " prior pairs plus current");
  for (int id : instruction)
    check(id >= 0 && id < vocab.text_count,
          "assemble_stream: instruction id " + std::to_string(id) + " outside text vocabulary");
  for (size_t t = 0; t < frames.size(); ++t)
    validate_entry(frames[t], vocab, allow_open_last_frame && t + 1 == frames.size());

  TokenStream s;
  s.instruction = instruction;
  s.frames = frames;
  s.policy = policy;
  return s;
}

TokenStream slide_window(const TokenStream& stream, const FrameEntry& entry,
                         const WindowPolicy& policy, const Vocabulary& vocab) {
  check(stream.policy == policy, "slide_window: policy mismatch");
  validate_entry(entry, vocab, true);
  TokenStream out = stream;
  out.frames.push_back(entry);
  // All but the newest frame count as prior pairs.
  while (static_cast<int>(out.frames.size()) - 1 > policy.max_prior_pairs)
    out.frames.erase(out.frames.begin());
  return out;
}

std::vector<RouteTarget> loss_routing(const TokenStream& stream) {
  const auto flat = flatten(stream);
  std::vector<RouteTarget> targets;
  for (size_t p = 0; p < flat.size(); ++p) {
    if (flat[p].loss == LossFlag::none) continue;
    targets.push_back({static_cast<int64_t>(p), flat[p].token_id, flat[p].loss});
  }
  return targets;
}

}  // namespace iafm
