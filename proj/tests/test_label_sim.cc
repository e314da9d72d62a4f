// tests/test_label_sim.cc

// Copyright 2026 The spikealign authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "spikealign/error.hpp"
#include "spikealign/label_sim.hpp"
#include "spikealign/rng.hpp"

using namespace spikealign;

namespace {

// Random disjoint ordered segments inside [0, T).
std::vector<SpikeSegment> random_segments(Rng* rng, int num_frames, int vocab) {
  std::vector<SpikeSegment> segs;
  int cursor = rng->next_int(0, 3);
  int prev_token = 0;
  while (cursor < num_frames) {
    const int len = rng->next_int(1, 2);
    if (cursor + len > num_frames) break;
    SpikeSegment seg;
    seg.token = rng->next_int(1, vocab - 1);
    // Keep CTC validity: equal neighbours need a blank in between.
    const bool adjacent = !segs.empty() && segs.back().end + 1 == cursor;
    if (adjacent && seg.token == prev_token)
      seg.token = prev_token % (vocab - 1) + 1;
    seg.begin = cursor;
    seg.end = cursor + len - 1;
    segs.push_back(seg);
    prev_token = seg.token;
    cursor = seg.end + 1 + rng->next_int(0, 6);
  }
  return segs;
}

std::vector<int> collapse(const std::vector<int>& seq) {
  std::vector<int> out;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (i > 0 && seq[i] == seq[i - 1]) continue;
    if (seq[i] != 0) out.push_back(seq[i]);
  }
  return out;
}

std::vector<int> segment_tokens(const std::vector<SpikeSegment>& segs) {
  std::vector<int> out;
  for (const auto& s : segs) out.push_back(s.token);
  return out;
}

}  // namespace

TEST_CASE("interior gap splits by the floor rule") {
  // Gap of 10 blank frames between two segments, ratios 0.2/0.6: the left
  // token gains floor(0.6*10)=6 right frames, the right token gains
  // floor(0.2*10)=2 left frames, 2 frames stay blank.
  const std::vector<SpikeSegment> segs = {{1, 0, 0}, {2, 11, 11}};
  const auto exp = allocate_gaps(segs, 12, ExpansionConfig{0.2, 0.6});
  REQUIRE(exp.size() == 2);
  CHECK(exp[0].right == 6);
  CHECK(exp[1].left == 2);
}

TEST_CASE("adjacent segments expand nowhere") {
  const std::vector<SpikeSegment> segs = {{1, 0, 1}, {2, 2, 3}};
  const auto exp = allocate_gaps(segs, 4, ExpansionConfig{0.5, 0.5});
  CHECK(exp[0].right == 0);
  CHECK(exp[1].left == 0);
}

TEST_CASE("leading gap uses the left ratio") {
  // 5 blank frames before the first token, r_left=0.2 -> floor(1.0)=1 frame.
  const std::vector<SpikeSegment> segs = {{3, 5, 5}};
  const auto exp = allocate_gaps(segs, 6, ExpansionConfig{0.2, 0.6});
  CHECK(exp[0].left == 1);
  CHECK(exp[0].right == 0);
}

TEST_CASE("ratio sum above one is rejected, not clipped") {
  const std::vector<SpikeSegment> segs = {{1, 2, 2}};
  CHECK_THROWS_AS(allocate_gaps(segs, 5, ExpansionConfig{0.7, 0.6}), DataError);
  CHECK_THROWS_AS(allocate_gaps(segs, 5, ExpansionConfig{-0.1, 0.5}), DataError);
  CHECK_NOTHROW(allocate_gaps(segs, 5, ExpansionConfig{0.4, 0.6}));
}

TEST_CASE("malformed segments are rejected") {
  CHECK_THROWS_AS(allocate_gaps({{1, 3, 2}}, 5, ExpansionConfig{}), DataError);
  CHECK_THROWS_AS(allocate_gaps({{0, 1, 1}}, 5, ExpansionConfig{}), DataError);
  CHECK_THROWS_AS(allocate_gaps({{1, 0, 2}, {2, 1, 3}}, 6, ExpansionConfig{}),
                  DataError);
  CHECK_THROWS_AS(allocate_gaps({{1, 0, 0}, {1, 1, 1}}, 4, ExpansionConfig{}),
                  DataError);
}

TEST_CASE("hard expansion, hand-enumerated single segment case") {
  // T=7, one segment (token 3) at 0-based frame 3. Left gap 3 -> floor(0.2*3)
  // = 0 extra frames; right gap 3 -> floor(0.6*3) = 1 extra frame.
  const std::vector<SpikeSegment> segs = {{3, 3, 3}};
  const auto labels = expand_hard(segs, 7, ExpansionConfig{0.2, 0.6});
  CHECK(labels == std::vector<int>{0, 0, 0, 3, 3, 0, 0});
}

TEST_CASE("zero ratios reproduce the raw alignment") {
  Rng rng(21);
  for (int iter = 0; iter < 20; ++iter) {
    const int T = rng.next_int(6, 30);
    const auto segs = random_segments(&rng, T, 5);
    if (segs.empty()) continue;
    const auto labels = expand_hard(segs, T, ExpansionConfig{0.0, 0.0});
    std::vector<int> expected(T, 0);
    for (const auto& s : segs)
      for (int t = s.begin; t <= s.end; ++t) expected[t] = s.token;
    CHECK(labels == expected);
  }
}

TEST_CASE("adjacent segments keep both tokens with no blank in between") {
  const std::vector<SpikeSegment> segs = {{1, 1, 2}, {2, 3, 4}};
  const auto labels = expand_hard(segs, 6, ExpansionConfig{0.3, 0.5});
  CHECK(collapse(labels) == std::vector<int>{1, 2});
  for (int t = 1; t <= 4; ++t) CHECK(labels[t] != 0);
}

TEST_CASE("soft weight formula spot checks") {
  CHECK(soft_weight(0, 4) == 1.0);
  CHECK(soft_weight(0, 0) == 1.0);
  CHECK(soft_weight(4, 4) == 0.0);
  CHECK(soft_weight(1, 4) == doctest::Approx(std::sqrt(0.75)).epsilon(1e-12));
  CHECK(soft_weight(2, 4) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
  CHECK(soft_weight(5, 4) == 0.0);
}

TEST_CASE("soft expansion values follow the taper") {
  // Segment at frame 0 (token 2), trailing gap of 5 blanks, r_right = 0.8:
  // width 4, so frames 1..4 taper as sqrt(1 - d/4) and frame 4 stays blank.
  const std::vector<SpikeSegment> segs = {{2, 0, 0}};
  const auto frames = expand_soft(segs, 6, ExpansionConfig{0.0, 0.8});
  CHECK(frames[0].token == 2);
  CHECK(frames[0].prob == 1.0);
  CHECK(frames[1].token == 2);
  CHECK(frames[1].prob == doctest::Approx(std::sqrt(0.75)).epsilon(1e-12));
  CHECK(frames[2].prob == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
  CHECK(frames[3].prob == doctest::Approx(std::sqrt(0.25)).epsilon(1e-12));
  CHECK(frames[4].token == 0);  // d == width gives weight 0, stays blank
  CHECK(frames[4].prob == 1.0);
  CHECK(frames[5].token == 0);
}

TEST_CASE("segment frames always carry probability one") {
  Rng rng(22);
  for (int iter = 0; iter < 20; ++iter) {
    const int T = rng.next_int(6, 40);
    const auto segs = random_segments(&rng, T, 5);
    if (segs.empty()) continue;
    const double rl = 0.4 * rng.next_double();
    const double rr = 0.5 * rng.next_double();
    const auto frames = expand_soft(segs, T, ExpansionConfig{rl, rr});
    for (const auto& s : segs)
      for (int t = s.begin; t <= s.end; ++t) {
        CHECK(frames[t].token == s.token);
        CHECK(frames[t].prob == 1.0);
      }
  }
}

TEST_CASE("hard and soft agree except at the zero-weight rim") {
  // The taper gives weight 0 at d == width, so the outermost hard frame of
  // each side may stay blank in the soft labels; everywhere else a hard
  // non-blank frame keeps a positive probability on the same token.
  Rng rng(23);
  int checked = 0;
  for (int iter = 0; iter < 200; ++iter) {
    const int T = rng.next_int(6, 40);
    const auto segs = random_segments(&rng, T, 5);
    if (segs.empty()) continue;
    const double rl = 0.5 * rng.next_double();
    const double rr = (1.0 - rl) * rng.next_double();
    const ExpansionConfig cfg{rl, rr};
    const auto hard = expand_hard(segs, T, cfg);
    const auto soft = expand_soft(segs, T, cfg);
    const auto exps = allocate_gaps(segs, T, cfg);

    for (std::size_t i = 0; i < segs.size(); ++i) {
      for (int t = segs[i].begin - exps[i].left; t <= segs[i].end + exps[i].right;
           ++t) {
        REQUIRE(hard[t] == segs[i].token);
        const int d = t < segs[i].begin ? segs[i].begin - t
                                        : std::max(0, t - segs[i].end);
        const int width = t < segs[i].begin ? exps[i].left : exps[i].right;
        if (d == 0 || d < width) {
          CHECK(soft[t].token == segs[i].token);
          CHECK(soft[t].prob > 0.0);
          ++checked;
        } else {
          // outermost expanded frame: weight exactly 0 -> blank
          CHECK(d == width);
          CHECK(soft[t].token == 0);
        }
      }
    }
    // Soft never places positive token mass outside the hard extent.
    for (int t = 0; t < T; ++t)
      if (soft[t].token != 0) CHECK(hard[t] == soft[t].token);
  }
  CHECK(checked > 100);
}

TEST_CASE("order is preserved for random segments and ratios") {
  Rng rng(24);
  for (int iter = 0; iter < 300; ++iter) {
    const int T = rng.next_int(5, 50);
    const auto segs = random_segments(&rng, T, 4);
    if (segs.empty()) continue;
    double rl = rng.next_double();
    double rr = rng.next_double();
    if (rl + rr > 1.0) {
      const double s = (rl + rr) * 1.0000001;
      rl /= s;
      rr /= s;
    }
    if (iter % 10 == 0) {  // exercise the exact r_l + r_r = 1 boundary too
      rl = 0.5;
      rr = 0.5;
    }
    const auto labels = expand_hard(segs, T, ExpansionConfig{rl, rr});
    CHECK(collapse(labels) == segment_tokens(segs));
  }
}

TEST_CASE("repeated tokens keep a separating blank even at full consumption") {
  // r_left + r_right == 1 with an even gap would fill it completely; the
  // allocator must hold one frame back when both sides carry the same token.
  const std::vector<SpikeSegment> segs = {{2, 0, 0}, {2, 5, 5}};
  const auto labels = expand_hard(segs, 6, ExpansionConfig{0.5, 0.5});
  CHECK(collapse(labels) == std::vector<int>{2, 2});

  // Different tokens may legitimately consume the whole gap.
  const std::vector<SpikeSegment> segs2 = {{1, 0, 0}, {2, 5, 5}};
  const auto labels2 = expand_hard(segs2, 6, ExpansionConfig{0.5, 0.5});
  CHECK(collapse(labels2) == std::vector<int>{1, 2});
}

TEST_CASE("a blank remains whenever the gap is long enough") {
  Rng rng(25);
  for (int iter = 0; iter < 300; ++iter) {
    double rl = 0.9 * rng.next_double();
    double rr = (1.0 - rl) * rng.next_double() * 0.999;
    const double slack = 1.0 - rl - rr;
    if (slack <= 1e-9) continue;
    const int min_gap = static_cast<int>(std::ceil(1.0 / slack));
    const int gap = min_gap + rng.next_int(0, 4);
    const int t_first = rng.next_int(0, 2);
    const std::vector<SpikeSegment> segs = {
        {1, t_first, t_first}, {2, t_first + 1 + gap, t_first + 1 + gap}};
    const int T = segs[1].end + 1 + rng.next_int(0, 3);
    const auto labels = expand_hard(segs, T, ExpansionConfig{rl, rr});
    int blanks_in_gap = 0;
    for (int t = segs[0].end + 1; t < segs[1].begin; ++t)
      if (labels[t] == 0) ++blanks_in_gap;
    CHECK(blanks_in_gap >= 1);
  }
}

TEST_CASE("soft taper is non-increasing in distance") {
  Rng rng(26);
  for (int iter = 0; iter < 50; ++iter) {
    const int width = rng.next_int(0, 12);
    double prev = 1.0;
    for (int d = 1; d <= width; ++d) {
      const double w = soft_weight(d, width);
      CHECK(w <= prev + 1e-15);
      prev = w;
    }
  }
}

TEST_CASE("record conversion round trips") {
  const std::vector<SoftFrame> frames = {{0, 1.0}, {3, 0.5}, {3, 1.0}};
  const LabelRecord rec = make_soft_record("u", frames);
  const auto back = soft_frames_from_record(rec);
  REQUIRE(back.size() == frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    CHECK(back[i].token == frames[i].token);
    CHECK(back[i].prob == frames[i].prob);
  }
  const LabelRecord hard = make_hard_record("u", {0, 1, 0});
  CHECK_FALSE(hard.soft);
  CHECK(hard.tokens == std::vector<int>{0, 1, 0});
}
