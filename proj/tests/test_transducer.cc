// tests/test_transducer.cc

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

#include "oracles.hpp"
#include "spikealign/error.hpp"
#include "spikealign/rng.hpp"
#include "spikealign/transducer.hpp"

using namespace spikealign;

namespace {

// A deterministic toy scorer backed by a hash of (frame, history); bounded
// and enumerable for the exhaustive-search check.
JointScorer toy_scorer(std::uint64_t seed, int vocab, double scale = 1.5) {
  return [seed, vocab, scale](int t, const std::vector<int>& history) {
    std::uint64_t h = splitmix64(seed ^ (0x9e37ULL * (t + 1)));
    for (int y : history) h = splitmix64(h ^ static_cast<std::uint64_t>(y));
    std::vector<double> out(vocab);
    for (int v = 0; v < vocab; ++v) {
      h = splitmix64(h);
      out[v] = scale * (2.0 * (static_cast<double>(h >> 11) * 0x1.0p-53) - 1.0);
    }
    return out;
  };
}

}  // namespace

TEST_CASE("single frame, single label: emit then final blank") {
  Tensor3 lattice(1, 2, 2, 0.0);
  const RnntResult res = rnnt_loss_grad(lattice, {1});
  CHECK(res.loss == doctest::Approx(-std::log(0.25)).epsilon(1e-12));
}

TEST_CASE("empty label sequence leaves only the all-blank path") {
  Rng rng(41);
  Tensor3 lattice = oracles::random_lattice(&rng, 2, 1, 3);
  const RnntResult res = rnnt_loss_grad(lattice, {});
  double expected = 0.0;
  for (int t = 0; t < 2; ++t) {
    double mx = lattice(t, 0, 0);
    for (int v = 1; v < 3; ++v) mx = std::max(mx, lattice(t, 0, v));
    double s = 0.0;
    for (int v = 0; v < 3; ++v) s += std::exp(lattice(t, 0, v) - mx);
    expected -= lattice(t, 0, 0) - mx - std::log(s);
  }
  CHECK(res.loss == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("two frames, one label: two paths") {
  Tensor3 lattice(2, 2, 2, 0.0);
  const RnntResult res = rnnt_loss_grad(lattice, {1});
  // Brute force: emit@frame0 + 2 blanks, or blank, emit@frame1, blank;
  // each (1/2)^3, so the total is 1/4.
  CHECK(res.loss == doctest::Approx(-std::log(0.25)).epsilon(1e-12));
}

TEST_CASE("dimension mismatches are rejected") {
  Tensor3 lattice(2, 2, 3, 0.0);
  CHECK_THROWS_AS(rnnt_loss_grad(lattice, {1, 2}), DataError);
  CHECK_THROWS_AS(rnnt_loss_grad(lattice, {0}), DataError);
  CHECK_THROWS_AS(rnnt_loss_grad(lattice, {3}), DataError);
}

TEST_CASE("loss matches brute-force lattice enumeration") {
  Rng rng(42);
  for (int iter = 0; iter < 60; ++iter) {
    const int T = rng.next_int(1, 5);
    const int U = rng.next_int(0, 3);
    const int V = rng.next_int(2, 4);
    const auto labels = oracles::random_labels(&rng, U, V);
    const Tensor3 lattice = oracles::random_lattice(&rng, T, U + 1, V);
    const double expected = oracles::rnnt_brute_loss(lattice, labels);
    const RnntResult res = rnnt_loss_grad(lattice, labels);
    CHECK(std::abs(res.loss - expected) <=
          1e-6 * std::max(1.0, std::abs(expected)));
  }
}

TEST_CASE("gradient matches central finite differences") {
  Rng rng(43);
  for (int iter = 0; iter < 8; ++iter) {
    const int T = rng.next_int(1, 4);
    const int U = rng.next_int(0, 3);
    const int V = rng.next_int(2, 4);
    const auto labels = oracles::random_labels(&rng, U, V);
    Tensor3 lattice = oracles::random_lattice(&rng, T, U + 1, V);

    const RnntResult res = rnnt_loss_grad(lattice, labels);
    std::vector<double*> params;
    for (auto& x : lattice.data()) params.push_back(&x);
    const double violation = oracles::max_grad_violation(
        [&] { return rnnt_loss_grad(lattice, labels).loss; }, params,
        res.grad.data());
    CHECK(violation == 0.0);
  }
}

TEST_CASE("every lattice node's gradient row sums to zero") {
  Rng rng(44);
  for (int iter = 0; iter < 20; ++iter) {
    const int T = rng.next_int(1, 5);
    const int U = rng.next_int(0, 3);
    const int V = rng.next_int(2, 5);
    const auto labels = oracles::random_labels(&rng, U, V);
    const Tensor3 lattice = oracles::random_lattice(&rng, T, U + 1, V);
    const RnntResult res = rnnt_loss_grad(lattice, labels);
    for (int t = 0; t < T; ++t) {
      for (int u = 0; u <= U; ++u) {
        double sum = 0.0;
        for (int v = 0; v < V; ++v) sum += res.grad(t, u, v);
        CHECK(std::abs(sum) <= 1e-9);
      }
    }
  }
}

TEST_CASE("blank-dominant scorer emits nothing") {
  const JointScorer scorer = [](int, const std::vector<int>&) {
    return std::vector<double>{5.0, 0.0, 0.0};
  };
  const DecodeResult res = greedy_decode(scorer, 4, 4);
  CHECK(res.tokens.empty());
  CHECK(res.emission_frames.empty());
}

TEST_CASE("constructed scorer emits token 2 at frame 1 then blanks") {
  const JointScorer scorer = [](int t, const std::vector<int>& history) {
    if (t == 1 && history.empty()) return std::vector<double>{0.0, 0.0, 5.0};
    return std::vector<double>{5.0, 0.0, 0.0};
  };
  const DecodeResult res = greedy_decode(scorer, 3, 4);
  CHECK(res.tokens == std::vector<int>{2});
  CHECK(res.emission_frames == std::vector<int>{1});
}

TEST_CASE("per-frame symbol cap is enforced") {
  // Scorer always prefers token 1, so only the cap stops each frame.
  const JointScorer scorer = [](int, const std::vector<int>&) {
    return std::vector<double>{0.0, 5.0};
  };
  const DecodeResult res = greedy_decode(scorer, 3, 2);
  CHECK(res.tokens.size() == 6);
  for (int t = 0; t < 3; ++t) {
    CHECK(res.emission_frames[2 * t] == t);
    CHECK(res.emission_frames[2 * t + 1] == t);
  }
}

TEST_CASE("emission frames are non-decreasing for both decoders") {
  Rng rng(45);
  for (int iter = 0; iter < 40; ++iter) {
    const int V = rng.next_int(2, 3);
    const int T = rng.next_int(1, 4);
    const JointScorer scorer = toy_scorer(rng.next_u64(), V);
    for (const DecodeResult& res :
         {greedy_decode(scorer, T, 3), beam_decode(scorer, T, 4, 3)}) {
      for (std::size_t i = 1; i < res.emission_frames.size(); ++i)
        CHECK(res.emission_frames[i] >= res.emission_frames[i - 1]);
      CHECK(res.emission_frames.size() == res.tokens.size());
    }
  }
}

TEST_CASE("beam of one reduces to greedy") {
  Rng rng(46);
  for (int iter = 0; iter < 100; ++iter) {
    const int V = rng.next_int(2, 4);
    const int T = rng.next_int(1, 6);
    const int cap = rng.next_int(1, 3);
    const JointScorer scorer = toy_scorer(rng.next_u64(), V);
    const DecodeResult greedy = greedy_decode(scorer, T, cap);
    const DecodeResult beam = beam_decode(scorer, T, 1, cap);
    CHECK(beam.tokens == greedy.tokens);
    CHECK(beam.emission_frames == greedy.emission_frames);
  }
}

TEST_CASE("large beam finds the exhaustive best hypothesis") {
  Rng rng(47);
  for (int iter = 0; iter < 25; ++iter) {
    const int V = rng.next_int(2, 3);
    const int T = rng.next_int(1, 3);
    const int cap = 2;
    const JointScorer scorer = toy_scorer(rng.next_u64(), V);
    const auto expected = oracles::exhaustive_best_hypothesis(scorer, T, cap);
    const DecodeResult beam = beam_decode(scorer, T, 256, cap);
    CHECK(beam.tokens == expected.tokens);
    CHECK(beam.score ==
          doctest::Approx(expected.score).epsilon(1e-6));
  }
}

TEST_CASE("beam decoding is deterministic across repeated runs") {
  const JointScorer scorer = toy_scorer(1234, 3);
  const DecodeResult a = beam_decode(scorer, 4, 5, 3);
  const DecodeResult b = beam_decode(scorer, 4, 5, 3);
  CHECK(a.tokens == b.tokens);
  CHECK(a.emission_frames == b.emission_frames);
  CHECK(a.score == b.score);
}

TEST_CASE("decoder argument validation") {
  const JointScorer scorer = toy_scorer(1, 2);
  CHECK_THROWS_AS(greedy_decode(scorer, 0, 1), DataError);
  CHECK_THROWS_AS(greedy_decode(scorer, 1, 0), DataError);
  CHECK_THROWS_AS(beam_decode(scorer, 1, 0), DataError);
}
