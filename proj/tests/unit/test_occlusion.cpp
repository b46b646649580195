#include <array>
#include <map>
#include <random>

#include "doctest.h"
#include "json.hpp"
#include "mimicgait/occlusion.hpp"

using namespace mimicgait;

namespace {

SilhouetteSequence constant_sequence(int T, std::uint8_t value) {
  std::vector<std::uint8_t> px(static_cast<std::size_t>(T) * 4096, value);
  return {px, std::vector<bool>(T, value != 0), 64, 64, "s", "q"};
}

SilhouetteSequence random_sequence(int T, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::uint8_t> px(static_cast<std::size_t>(T) * 4096);
  for (auto& v : px) v = (rng() % 2) ? 1 : 0;
  return {px, std::vector<bool>(T, true), 64, 64, "s", "q"};
}

std::uint8_t px(const SilhouetteSequence& s, int t, int r, int c) { return s.frame(t)[static_cast<std::size_t>(r) * 64 + c]; }

OcclusionSpec dyn(OcclusionKind kind, double amount, double speed, PatchDirection dir, int start, int vertical = 0) {
  OcclusionSpec s;
  s.kind = kind;
  s.amount = amount;
  s.speed = speed;
  s.direction = dir;
  s.start_offset = start;
  s.vertical_offset = vertical;
  return s;
}

}  // namespace

TEST_CASE("sample_spec respects the allowed kind and its range") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    auto s = sample_spec({OcclusionKind::top}, seed);
    CHECK(s.kind == OcclusionKind::top);
    CHECK(s.amount >= 0.4);
    CHECK(s.amount <= 0.6);
    auto t = sample_spec({OcclusionKind::dynamic_tall}, seed);
    CHECK(t.amount >= 0.2);
    CHECK(t.amount <= 0.4);
    CHECK(t.speed >= 0.5);
    CHECK(t.speed <= 1.0);
  }
  auto n = sample_spec({OcclusionKind::none}, 5);
  CHECK(n.kind == OcclusionKind::none);
  CHECK(n.amount == 0.0);
  CHECK_THROWS_AS(sample_spec({}, 1), ValidationError);
}

TEST_CASE("sample_spec: kind frequencies and amount uniformity over 10,000 seeds") {
  int top = 0;
  std::array<int, 10> bins{};
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    auto s = sample_spec({OcclusionKind::top, OcclusionKind::bottom}, static_cast<std::uint64_t>(i) * 7919 + 1);
    top += s.kind == OcclusionKind::top;
    bins[std::min(9, static_cast<int>((s.amount - 0.4) / 0.02))]++;
  }
  CHECK(std::abs(top / static_cast<double>(draws) - 0.5) <= 0.02);
  double chi2 = 0;
  for (int b : bins) chi2 += (b - draws / 10.0) * (b - draws / 10.0) / (draws / 10.0);
  CHECK(chi2 < 21.666);  // chi-square, 9 dof, alpha 0.01
}

TEST_CASE("middle occlusion zeroes the centred band") {
  auto seq = constant_sequence(2, 1);
  OcclusionSpec s;
  s.kind = OcclusionKind::middle;
  s.amount = 0.5;
  auto out = apply_consistent(seq, s);
  int zeros = 0;
  for (int r = 0; r < 64; ++r)
    for (int c = 0; c < 64; ++c) {
      const bool in_band = r >= 16 && r <= 47;
      CHECK(px(out, 0, r, c) == (in_band ? 0 : 1));
      zeros += px(out, 0, r, c) == 0;
    }
  CHECK(zeros == 2048);
}

TEST_CASE("top crop of a constant frame stays constant") {
  OcclusionSpec s;
  s.kind = OcclusionKind::top;
  s.amount = 0.5;
  auto out = apply_consistent(constant_sequence(3, 1), s);
  for (auto v : out.pixels()) REQUIRE(v == 1);
}

TEST_CASE("top and bottom crops remove the expected rows before resizing") {
  // a frame whose top half is one and bottom half zero: cropping the top 50%
  // leaves only zeros, cropping the bottom 50% only ones
  std::vector<std::uint8_t> pixels(4096, 0);
  for (int i = 0; i < 32 * 64; ++i) pixels[i] = 1;
  SilhouetteSequence seq(pixels, {true}, 64, 64);
  OcclusionSpec s;
  s.kind = OcclusionKind::top;
  s.amount = 0.5;
  auto top = apply_consistent(seq, s);
  CHECK(std::count(top.pixels().begin(), top.pixels().end(), 1) == 0);
  s.kind = OcclusionKind::bottom;
  auto bottom = apply_consistent(seq, s);
  CHECK(std::count(bottom.pixels().begin(), bottom.pixels().end(), 1) == 4096);
}

TEST_CASE("zero amount is the identity") {
  auto seq = random_sequence(3, 1);
  for (auto kind : {OcclusionKind::top, OcclusionKind::bottom, OcclusionKind::middle}) {
    OcclusionSpec s;
    s.kind = kind;
    s.amount = 0.0;
    CHECK(apply_consistent(seq, s).same_content(seq));
  }
  OcclusionSpec none;
  CHECK(apply_consistent(seq, none).same_content(seq));
}

TEST_CASE("dynamic tall patch position at frame 10") {
  auto seq = constant_sequence(11, 1);
  auto out = apply_dynamic(seq, dyn(OcclusionKind::dynamic_tall, 0.25, 1.0, PatchDirection::left_to_right, 0));
  for (int r = 0; r < 64; ++r)
    for (int c = 0; c < 64; ++c) CHECK(px(out, 10, r, c) == ((c >= 10 && c <= 25) ? 0 : 1));
}

TEST_CASE("sub-pixel speed accumulates by flooring") {
  auto s = dyn(OcclusionKind::dynamic_tall, 0.25, 0.5, PatchDirection::left_to_right, 0);
  std::vector<int> lefts;
  for (int t = 0; t < 4; ++t) lefts.push_back(patch_left(s, t, 64));
  CHECK(lefts == std::vector<int>{0, 0, 1, 1});
}

TEST_CASE("dynamic patches match a per-pixel oracle, including wrap-around") {
  std::mt19937_64 rng(17);
  auto seq = random_sequence(40, 2);
  for (int trial = 0; trial < 50; ++trial) {
    const bool tall = trial % 2 == 0;
    const double amount = tall ? 0.2 + 0.2 * (rng() % 1000) / 1000.0 : 0.4 + 0.2 * (rng() % 1000) / 1000.0;
    const double speed = 0.5 + 0.5 * (rng() % 1000) / 1000.0;
    const auto dir = (rng() % 2) ? PatchDirection::left_to_right : PatchDirection::right_to_left;
    const int w = static_cast<int>(std::floor(amount * 64 + 1e-9));
    const int h = tall ? 64 : w;
    const int start = static_cast<int>(rng() % (64 - w + 1));
    const int top = tall ? 0 : static_cast<int>(rng() % (64 - h + 1));
    auto spec = dyn(tall ? OcclusionKind::dynamic_tall : OcclusionKind::dynamic_small, amount, speed, dir, start, top);
    auto out = apply_dynamic(seq, spec);
    for (int t = 0; t < 40; ++t) {
      const int shift = static_cast<int>(std::floor(speed * t + 1e-9));
      const int left = dir == PatchDirection::left_to_right ? start + shift : start - shift;
      for (int r = 0; r < 64; ++r)
        for (int c = 0; c < 64; ++c) {
          const int rel = (((c - left) % 64) + 64) % 64;
          const bool covered = rel < w && r >= top && r < top + h;
          REQUIRE(px(out, t, r, c) == (covered ? 0 : px(seq, t, r, c)));
        }
    }
  }
}

TEST_CASE("dynamic patch on an empty frame stays empty") {
  auto out = apply_dynamic(constant_sequence(5, 0), dyn(OcclusionKind::dynamic_small, 0.5, 1.0, PatchDirection::right_to_left, 3, 4));
  for (auto v : out.pixels()) REQUIRE(v == 0);
}

TEST_CASE("apply dispatches and labels") {
  auto seq = random_sequence(4, 3);
  auto none = apply(seq, OcclusionSpec{});
  CHECK(none.sequence.same_content(seq));
  CHECK(none.label.kind == OcclusionKind::none);
  CHECK(none.label.amount_target == 0.0);

  OcclusionSpec top;
  top.kind = OcclusionKind::top;
  top.amount = 0.55;
  auto occ = apply(seq, top);
  CHECK(occ.label.kind == OcclusionKind::top);
  CHECK(occ.label.amount_target == doctest::Approx(0.55));
  CHECK(occ.sequence.same_content(apply(seq, top).sequence));
  CHECK(occ.label.class_index({OcclusionKind::none, OcclusionKind::top, OcclusionKind::bottom}) == 1);
  CHECK(occ.label.class_index({OcclusionKind::none}) == -1);
}

TEST_CASE("wrong kinds are rejected by the specialised appliers") {
  auto seq = random_sequence(2, 4);
  OcclusionSpec s;
  s.kind = OcclusionKind::dynamic_small;
  s.amount = 0.5;
  CHECK_THROWS_AS(apply_consistent(seq, s), ValidationError);
  s.kind = OcclusionKind::top;
  CHECK_THROWS_AS(apply_dynamic(seq, s), ValidationError);
}

TEST_CASE("flip_mid_video splits at ceil(T/2)") {
  for (int T : {4, 5}) {
    auto seq = random_sequence(T, 5);
    OcclusionSpec a, b;
    a.kind = OcclusionKind::top;
    a.amount = 0.5;
    b.kind = OcclusionKind::bottom;
    b.amount = 0.5;
    auto flipped = flip_mid_video(seq, a, b);
    auto all_a = apply(seq, a).sequence;
    auto all_b = apply(seq, b).sequence;
    const int half = (T + 1) / 2;
    for (int t = 0; t < T; ++t) {
      const auto& ref = t < half ? all_a : all_b;
      CHECK(std::equal(flipped.frame(t).begin(), flipped.frame(t).end(), ref.frame(t).begin()));
    }
    CHECK(flip_mid_video(seq, a, a).same_content(all_a));
  }
  OcclusionSpec d;
  d.kind = OcclusionKind::dynamic_tall;
  d.amount = 0.3;
  CHECK_THROWS_AS(flip_mid_video(random_sequence(4, 6), d, d), ValidationError);
}

TEST_CASE("zeroing kinds never create foreground") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto seq = random_sequence(8, seed);
    auto spec = sample_spec({OcclusionKind::middle, OcclusionKind::dynamic_small, OcclusionKind::dynamic_tall}, seed);
    auto out = apply(seq, spec).sequence;
    for (std::size_t i = 0; i < out.pixels().size(); ++i) REQUIRE(out.pixels()[i] <= seq.pixels()[i]);
  }
}

TEST_CASE("spec JSON round-trip replays bit-identically") {
  auto seq = random_sequence(12, 9);
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    auto spec = sample_spec({OcclusionKind::none, OcclusionKind::top, OcclusionKind::bottom, OcclusionKind::middle,
                             OcclusionKind::dynamic_small, OcclusionKind::dynamic_tall},
                            seed);
    const auto text = nlohmann::json(spec).dump();
    const auto back = nlohmann::json::parse(text).get<OcclusionSpec>();
    CHECK(back == spec);
    CHECK(apply(seq, back).sequence.same_content(apply(seq, spec).sequence));
  }
}

TEST_CASE("validate_spec enforces the configured ranges") {
  OcclusionSpec s;
  s.kind = OcclusionKind::top;
  s.amount = 0.7;
  CHECK_THROWS_AS(validate_spec(s), ValidationError);
  s.amount = 0.5;
  CHECK_NOTHROW(validate_spec(s));
  OcclusionSpec none;
  none.amount = 0.1;
  CHECK_THROWS_AS(validate_spec(none), ValidationError);
}

TEST_CASE("kind names parse and reject unknown values") {
  CHECK(parse_kind_list("top,bottom") == std::vector<OcclusionKind>{OcclusionKind::top, OcclusionKind::bottom});
  CHECK(join_kinds({OcclusionKind::middle, OcclusionKind::none}) == "middle,none");
  CHECK_THROWS_AS(occlusion_kind_from_string("sideways"), ValidationError);
}
