#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "iafm/stream.hpp"
#include "iafm/vocab.hpp"
#include "test_util.hpp"

using namespace iafm;

namespace {

Vocabulary mc_vocab() { return build_vocabulary(byte_text_tokens(), {minecraft_space()}); }

FrameEntry frame_with_span(const Vocabulary& v, int visible, int full,
                           const std::vector<std::string>& payload = {"[attack]"}) {
  FrameEntry f;
  f.visible_count = visible;
  f.patches_full = full;
  f.action_ids.push_back(v.start_action);
  for (const auto& t : payload) f.action_ids.push_back(v.id_of(t));
  f.action_ids.push_back(v.end_action);
  return f;
}

}  // namespace

TEST_CASE("vocabulary sizes") {
  auto v = mc_vocab();
  CHECK(v.size() == 482);  // 256 text + 3 control + 223 minecraft
  CHECK(v.text_count == 256);
  CHECK(v.domain("minecraft").action_count == 223);

  auto vb = build_vocabulary(byte_text_tokens(), {bleeding_edge_space()});
  CHECK(vb.size() == 256 + 3 + 531);

  auto vall = build_vocabulary(byte_text_tokens(), standard_spaces());
  CHECK(vall.size() == 256 + 3 + 223 + 531 + (42 + 84) + (128 + 296));
  CHECK(vall.domain("language_table").state_count == 84);
  CHECK(vall.domain("calvin").state_count == 296);
}

TEST_CASE("vocabulary uniqueness and round trip") {
  CHECK_THROWS(build_vocabulary({}, {}));
  CHECK_THROWS(build_vocabulary(byte_text_tokens(), {minecraft_space(), minecraft_space()}));

  auto v = build_vocabulary(byte_text_tokens(), standard_spaces());
  for (int id = 0; id < v.size(); ++id) CHECK(v.id_of(v.token(id)) == id);
  CHECK(v.start_action == 256);
  CHECK(v.token(v.start_action) == "[STARTACTION]");
  CHECK(v.is_agent(v.start_action));
  CHECK_FALSE(v.is_agent(0));
  CHECK_THROWS(v.id_of("[nosuchtoken]"));
}

TEST_CASE("vocabulary serialization is id = line index") {
  auto v = mc_vocab();
  const std::string path = std::filesystem::temp_directory_path() / "iafm_vocab_test.txt";
  save_token_list(v, path);
  auto lines = load_token_list(path);
  REQUIRE(static_cast<int>(lines.size()) == v.size());
  for (int id = 0; id < v.size(); ++id) CHECK(lines[static_cast<size_t>(id)] == v.token(id));
  std::remove(path.c_str());
}

TEST_CASE("byte tokenizer round trip") {
  const std::string s = "move the red circle";
  auto ids = encode_text(s);
  CHECK(ids.size() == s.size());
  CHECK(decode_text(ids) == s);
}

TEST_CASE("assemble_stream counts and denominator") {
  auto v = mc_vocab();
  WindowPolicy policy{3, 4};
  std::vector<int> instr(10, 42);
  std::vector<FrameEntry> frames;
  for (int t = 0; t < 4; ++t) frames.push_back(frame_with_span(v, 196, 196));
  auto s = assemble_stream(instr, frames, v, policy);
  CHECK(s.total_positions() == 10 + 4 * (196 + 3));
  CHECK(s.denominator() == 806);

  WindowPolicy gaming{8, 9};
  std::vector<FrameEntry> nine(9, frame_with_span(v, 4, 36));
  auto g = assemble_stream(instr, nine, v, gaming);
  CHECK(g.frames.size() == 9);

  auto empty_instr = assemble_stream({}, frames, v, policy);
  CHECK(empty_instr.text_len() == 0);
  CHECK(loss_routing(empty_instr).size() == 4 * 3);
}

TEST_CASE("assemble_stream validation") {
  auto v = mc_vocab();
  WindowPolicy policy{3, 4};
  std::vector<FrameEntry> five(5, frame_with_span(v, 4, 36));
  CHECK_THROWS(assemble_stream({}, five, v, policy));

  FrameEntry open;
  open.visible_count = 4;
  open.patches_full = 36;
  CHECK_THROWS(assemble_stream({}, {open}, v, policy));
  CHECK_NOTHROW(assemble_stream({}, {open}, v, policy, true));

  FrameEntry unwrapped;
  unwrapped.visible_count = 4;
  unwrapped.patches_full = 36;
  unwrapped.action_ids = {v.id_of("[attack]")};
  CHECK_THROWS(assemble_stream({}, {unwrapped}, v, policy));

  CHECK_THROWS(assemble_stream({300}, {frame_with_span(v, 4, 36)}, v, policy));

  FrameEntry text_state = frame_with_span(v, 4, 36);
  text_state.state_ids = {12};  // text id where an agent token is required
  CHECK_THROWS(assemble_stream({}, {text_state}, v, policy));
}

TEST_CASE("slide_window keeps at most M prior pairs and the instruction") {
  auto v = mc_vocab();
  WindowPolicy policy{3, 4};
  std::vector<int> instr = encode_text("push it");
  std::vector<FrameEntry> frames(4, frame_with_span(v, 4, 36));
  auto s = assemble_stream(instr, frames, v, policy);

  auto pushed = slide_window(s, frame_with_span(v, 4, 36), policy, v);
  CHECK(pushed.frames.size() == 4);  // 3 prior + current

  WindowPolicy wide{8, 9};
  auto s2 = assemble_stream(instr, {frames[0], frames[1]}, v, wide);
  auto p2 = slide_window(s2, frame_with_span(v, 4, 36), wide, v);
  CHECK(p2.frames.size() == 3);

  CHECK_THROWS(slide_window(s, frame_with_span(v, 4, 36), wide, v));

  auto cur = s;
  for (int i = 0; i < 100; ++i) cur = slide_window(cur, frame_with_span(v, 4, 36), policy, v);
  CHECK(cur.instruction == instr);
  CHECK(static_cast<int>(cur.frames.size()) - 1 <= policy.max_prior_pairs);
}

TEST_CASE("loss routing structure") {
  auto v = mc_vocab();
  WindowPolicy policy{3, 4};

  std::vector<int> five_text = {1, 2, 3, 4, 5};
  FrameEntry f = frame_with_span(v, 196, 196);
  auto s = assemble_stream(five_text, {f}, v, policy);
  auto targets = loss_routing(s);
  REQUIRE(targets.size() == 5 + 3);
  for (int j = 0; j < 5; ++j) {
    CHECK(targets[static_cast<size_t>(j)].cls == LossFlag::lang);
    CHECK(targets[static_cast<size_t>(j)].position == j);
    CHECK(targets[static_cast<size_t>(j)].target_id == five_text[static_cast<size_t>(j)]);
  }
  // Action span starts right after 196 visual slots; [STARTACTION] itself is a target.
  CHECK(targets[5].cls == LossFlag::act);
  CHECK(targets[5].position == 5 + 196);
  CHECK(targets[5].target_id == v.start_action);
  CHECK(targets[7].target_id == v.end_action);
}

TEST_CASE("routing counts match stream counts on random streams") {
  auto v = build_vocabulary(byte_text_tokens(), standard_spaces());
  auto space = minecraft_space();
  Rng rng(77);
  WindowPolicy policy{8, 9};
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<int> instr;
    const int W = static_cast<int>(rng.uniform_int(12));
    for (int i = 0; i < W; ++i) instr.push_back(static_cast<int>(rng.uniform_int(256)));
    const int T = 1 + static_cast<int>(rng.uniform_int(9));
    std::vector<FrameEntry> frames;
    int64_t act_total = 0;
    for (int t = 0; t < T; ++t) {
      FrameEntry f;
      f.visible_count = static_cast<int>(rng.uniform_int(12));
      f.patches_full = 36;
      f.action_ids = v.ids_of(testutil::random_span(space, rng));
      act_total += static_cast<int64_t>(f.action_ids.size());
      frames.push_back(std::move(f));
    }
    auto s = assemble_stream(instr, frames, v, policy);
    auto targets = loss_routing(s);
    int64_t lang = 0, act = 0;
    for (const auto& t : targets) (t.cls == LossFlag::lang ? lang : act)++;
    CHECK(lang == W);
    CHECK(act == act_total);

    // Tag/flag consistency over the flattened stream.
    for (const auto& p : flatten(s)) {
      if (p.modality == Modality::text) CHECK(p.loss == LossFlag::lang);
      if (p.modality == Modality::action) CHECK(p.loss == LossFlag::act);
      if (p.modality == Modality::visual || p.modality == Modality::state)
        CHECK(p.loss == LossFlag::none);
    }
  }
}
