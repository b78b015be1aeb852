#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "iafm/codec.hpp"
#include "test_util.hpp"

using namespace iafm;

TEST_CASE("binning boundaries and symmetry") {
  BinSpec sym{21, -1.0, 1.0, LabelStyle::zero_based, 0};
  CHECK(encode_value(0.0, sym) == 10);
  CHECK(encode_value(-1.0, sym) == 0);
  CHECK(encode_value(1.0, sym) == 20);
  CHECK(encode_value(500.0, sym) == 20);
  CHECK(encode_value(-500.0, sym) == 0);
  CHECK_THROWS(encode_value(std::nan(""), sym));

  CHECK(std::abs(decode_index(10, sym)) < sym.width() / 2);
  CHECK(decode_index(0, sym) == doctest::Approx(-1.0 + 0.5 * 2.0 / 21).epsilon(1e-12));
  for (int i = 0; i < 21; ++i) CHECK(encode_value(decode_index(i, sym), sym) == i);

  BinSpec sc{100, -50.0, 50.0, LabelStyle::signed_centered, 0};
  CHECK(encode_value(-3.0, sc) == -3);
  CHECK(encode_value(0.0, sc) == 0);
  CHECK(encode_value(-60.0, sc) == -50);
  CHECK(encode_value(60.0, sc) == 49);
  for (int lbl = -50; lbl <= 49; ++lbl) CHECK(encode_value(decode_index(lbl, sc), sc) == lbl);
  CHECK_THROWS(decode_index(50, sc));
  CHECK_THROWS(decode_index(-51, sc));
}

TEST_CASE("encode_value monotone, decode strictly increasing") {
  BinSpec spec{21, -1.0, 1.0, LabelStyle::signed_centered, 0};
  Rng rng(3);
  double prev_v = -2.0;
  int prev_bin = -1000;
  for (int i = 0; i < 200; ++i) {
    const double v = -2.0 + 4.0 * i / 199.0;
    const int b = encode_value(v, spec);
    CHECK(v >= prev_v);
    CHECK(b >= prev_bin);
    prev_v = v;
    prev_bin = b;
  }
  for (int lbl = -10; lbl < 10; ++lbl)
    CHECK(decode_index(lbl + 1, spec) > decode_index(lbl, spec));
}

TEST_CASE("quantization error bounded by half width") {
  Rng rng(9);
  for (const auto& space : standard_spaces()) {
    for (const auto& axis : space.axes) {
      for (int i = 0; i < 200; ++i) {
        const double v = rng.uniform(axis.bins.low, axis.bins.high);
        const double rt = decode_index(encode_value(v, axis.bins), axis.bins);
        CHECK(std::abs(v - rt) <= axis.bins.width() / 2 + 1e-12);
      }
    }
  }
}

TEST_CASE("declared token counts") {
  CHECK(minecraft_space().action_token_count() == 223);
  CHECK(minecraft_space().buttons.size() == 23);
  CHECK(bleeding_edge_space().action_token_count() == 531);
  int joystick = 0;
  for (const auto& a : bleeding_edge_space().axes) joystick += a.bins.n_bins;
  CHECK(joystick == 520);
  CHECK(language_table_space().action_token_count() == 42);
  CHECK(language_table_space().state_token_count() == 84);
  CHECK(calvin_space().action_token_count() == 128);
  CHECK(calvin_space().state_token_count() == 296);
}

TEST_CASE("encode_action token sequences") {
  auto mc = minecraft_space();
  DomainAction a;
  a.buttons = {"attack"};
  a.axes = {{"camera_x", -3.0}, {"camera_y", 0.0}};
  auto toks = encode_action(mc, a);
  const std::vector<std::string> want = {"[STARTACTION]", "[attack]", "[CAMERAX-3]", "[CAMERAY0]",
                                         "[ENDOFACTION]"};
  CHECK(toks == want);

  auto be = bleeding_edge_space();
  DomainAction b;
  b.buttons = {"lockon", "meleeattack"};
  b.axes = {{"left_rotation", 162.0}, {"left_magnitude", 0.99}};
  auto btoks = encode_action(be, b);
  const std::vector<std::string> bwant = {"[STARTACTION]", "[lockon]", "[meleeattack]",
                                          "[lrot162]",     "[lmag4]",  "[ENDOFACTION]"};
  CHECK(btoks == bwant);

  DomainAction empty;
  CHECK(encode_action(mc, empty) ==
        std::vector<std::string>{"[STARTACTION]", "[ENDOFACTION]"});

  DomainAction bad;
  bad.buttons = {"fly"};
  CHECK_THROWS(encode_action(mc, bad));

  DomainAction missing_axis;
  missing_axis.axes = {{"dx", 0.5}};
  CHECK_THROWS(encode_action(language_table_space(), missing_axis));
}

TEST_CASE("decode_action inverse and errors") {
  auto mc = minecraft_space();
  auto act = decode_action(mc, {"[STARTACTION]", "[forward]", "[sprint]", "[ENDOFACTION]"});
  CHECK(act.buttons == std::vector<std::string>{"forward", "sprint"});
  CHECK(act.axes.empty());

  DomainAction a;
  a.buttons = {"attack"};
  a.axes = {{"camera_x", -3.2}, {"camera_y", 0.4}};
  auto rt = decode_action(mc, encode_action(mc, a));
  CHECK(rt.buttons == a.buttons);
  for (const auto& [name, v] : a.axes)
    CHECK(std::abs(rt.axes.at(name) - v) <= mc.find_axis(name)->bins.width() / 2 + 1e-12);

  CHECK_THROWS(decode_action(mc, {"[STARTACTION]", "[attack]"}));
  CHECK_THROWS(decode_action(mc, {"[attack]", "[ENDOFACTION]"}));
  CHECK_THROWS(decode_action(mc, {"[STARTACTION]", "[lrot12]", "[ENDOFACTION]"}));
  CHECK_THROWS(decode_action(
      mc, {"[STARTACTION]", "[CAMERAX-3]", "[CAMERAX2]", "[ENDOFACTION]"}));

  // End-of-trajectory marker inside the final span is tolerated.
  auto done = decode_action(mc, {"[STARTACTION]", "[attack]", "[ENDOFTRAJECTORY]", "[ENDOFACTION]"});
  CHECK(done.buttons == std::vector<std::string>{"attack"});
}

TEST_CASE("token round trip on random well-formed spans") {
  Rng rng(21);
  for (const auto& space : standard_spaces()) {
    for (int i = 0; i < 300; ++i) {
      auto span = testutil::random_span(space, rng);
      auto rt = encode_action(space, decode_action(space, span));
      CHECK(rt == span);
    }
  }
}

TEST_CASE("encode_state counts and errors") {
  auto cv = calvin_space();
  std::vector<double> vals(14, 0.1);
  auto toks = encode_state(cv, vals, "cvsgripperopen");
  CHECK(toks.size() == 15);
  CHECK(toks.back() == "[cvsgripperopen]");

  auto lt = language_table_space();
  auto lt_toks = encode_state(lt, {0.0, 0.1, -0.2, 0.3});
  CHECK(lt_toks.size() == 4);

  CHECK_THROWS(encode_state(minecraft_space(), {}));
  CHECK_THROWS(encode_state(cv, {0.1, 0.2}, "cvsgripperopen"));
  CHECK_THROWS(encode_state(cv, vals, "notastate"));
  CHECK_THROWS(encode_state(lt, {0.0, 0.1, 0.2, 0.3}, "cvsgripperopen"));
}
