// src/transducer.cc

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

#include "spikealign/transducer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <utility>

#include "spikealign/error.hpp"

namespace spikealign {

namespace {

void check_lattice(const Tensor3& lattice, const std::vector<int>& labels) {
  const int T = lattice.dim0();
  const int U1 = lattice.dim1();
  const int V = lattice.dim2();
  if (T < 1 || V < 2) throw DataError("lattice must be T>=1 with V>=2");
  if (U1 != static_cast<int>(labels.size()) + 1)
    throw DataError("lattice has " + std::to_string(U1) +
                    " label steps, expected U+1=" +
                    std::to_string(labels.size() + 1));
  if (!all_finite(lattice.data()))
    throw DataError("lattice contains non-finite values");
  for (int y : labels) {
    if (y < 1 || y >= V)
      throw DataError("label " + std::to_string(y) + " outside [1," +
                      std::to_string(V - 1) + "]");
  }
}

std::vector<double> scored_row(const JointScorer& scorer, int t,
                               const std::vector<int>& history) {
  std::vector<double> logits = scorer(t, history);
  if (logits.size() < 2) throw DataError("scorer returned fewer than 2 logits");
  if (!all_finite(logits)) throw DataError("scorer returned non-finite logits");
  log_softmax(logits.data(), static_cast<int>(logits.size()), logits.data());
  return logits;
}

}  // namespace

RnntResult rnnt_loss_grad(const Tensor3& lattice, const std::vector<int>& labels) {
  check_lattice(lattice, labels);
  const int T = lattice.dim0();
  const int U = static_cast<int>(labels.size());
  const int V = lattice.dim2();

  Tensor3 lp(T, U + 1, V);
  for (int t = 0; t < T; ++t)
    for (int u = 0; u <= U; ++u)
      log_softmax(lattice.row(t, u), V, lp.row(t, u));

  // alpha(t,u): log-probability of reaching node (t,u); the node's own
  // emission is not included.
  Matrix alpha(T, U + 1, kLogZero);
  alpha(0, 0) = 0.0;
  for (int t = 0; t < T; ++t) {
    for (int u = 0; u <= U; ++u) {
      if (t == 0 && u == 0) continue;
      double acc = kLogZero;
      if (t > 0 && alpha(t - 1, u) != kLogZero)
        acc = alpha(t - 1, u) + lp(t - 1, u, 0);
      if (u > 0 && alpha(t, u - 1) != kLogZero)
        acc = log_add(acc, alpha(t, u - 1) + lp(t, u - 1, labels[u - 1]));
      alpha(t, u) = acc;
    }
  }

  // beta(t,u): log-probability of completing from node (t,u), including the
  // emission taken at (t,u).
  Matrix beta(T, U + 1, kLogZero);
  beta(T - 1, U) = lp(T - 1, U, 0);
  for (int t = T - 1; t >= 0; --t) {
    for (int u = U; u >= 0; --u) {
      if (t == T - 1 && u == U) continue;
      double acc = kLogZero;
      if (t + 1 < T && beta(t + 1, u) != kLogZero)
        acc = lp(t, u, 0) + beta(t + 1, u);
      if (u < U && beta(t, u + 1) != kLogZero)
        acc = log_add(acc, lp(t, u, labels[u]) + beta(t, u + 1));
      beta(t, u) = acc;
    }
  }

  const double log_z = alpha(T - 1, U) + lp(T - 1, U, 0);
  if (!std::isfinite(log_z))
    throw NumericError("rnnt total path probability underflowed to zero");

  RnntResult res;
  res.loss = -log_z;
  res.grad = Tensor3(T, U + 1, V);
  for (int t = 0; t < T; ++t) {
    for (int u = 0; u <= U; ++u) {
      if (alpha(t, u) == kLogZero || beta(t, u) == kLogZero) continue;
      // Posterior mass moving out of (t,u) along each arc.
      double w_blank = 0.0;
      if (t + 1 < T && beta(t + 1, u) != kLogZero)
        w_blank = std::exp(alpha(t, u) + lp(t, u, 0) + beta(t + 1, u) - log_z);
      else if (t == T - 1 && u == U)
        w_blank = std::exp(alpha(t, u) + lp(t, u, 0) - log_z);
      double w_emit = 0.0;
      if (u < U && beta(t, u + 1) != kLogZero)
        w_emit =
            std::exp(alpha(t, u) + lp(t, u, labels[u]) + beta(t, u + 1) - log_z);
      const double occupancy = w_blank + w_emit;
      if (occupancy == 0.0) continue;
      double* g = res.grad.row(t, u);
      const double* l = lp.row(t, u);
      for (int v = 0; v < V; ++v) g[v] = occupancy * std::exp(l[v]);
      g[0] -= w_blank;
      if (u < U) g[labels[u]] -= w_emit;
    }
  }
  return res;
}

DecodeResult greedy_decode(const JointScorer& scorer, int num_frames,
                           int max_symbols_per_frame) {
  if (num_frames < 1) throw DataError("num_frames must be >= 1");
  if (max_symbols_per_frame < 1)
    throw DataError("max_symbols_per_frame must be >= 1");

  DecodeResult res;
  for (int t = 0; t < num_frames; ++t) {
    int emitted = 0;
    while (true) {
      const std::vector<double> lp = scored_row(scorer, t, res.tokens);
      int best = 0;
      for (std::size_t v = 1; v < lp.size(); ++v)
        if (lp[v] > lp[best]) best = static_cast<int>(v);
      if (best == 0) {
        res.score += lp[0];
        break;
      }
      res.score += lp[best];
      res.tokens.push_back(best);
      res.emission_frames.push_back(t);
      if (++emitted >= max_symbols_per_frame) break;  // cap advances the frame
    }
  }
  return res;
}

namespace {

struct Hypothesis {
  std::vector<int> tokens;
  std::vector<int> emission_frames;
  double score = kLogZero;        // merged log-probability
  double best_single = kLogZero;  // best unmerged constituent, for frame pick
  bool consumed = false;          // has taken blank at the current frame
};

// Candidate pool keyed on (tokens, consumed); merges by log-sum-exp and keeps
// the emission frames of the strongest constituent.
class HypothesisPool {
 public:
  void add(Hypothesis h) {
    const Key key{h.tokens, h.consumed};
    auto it = index_.find(key);
    if (it == index_.end()) {
      index_.emplace(key, hyps_.size());
      hyps_.push_back(std::move(h));
      return;
    }
    Hypothesis& dst = hyps_[it->second];
    dst.score = log_add(dst.score, h.score);
    if (h.best_single > dst.best_single) {
      dst.best_single = h.best_single;
      dst.emission_frames = std::move(h.emission_frames);
    }
  }

  // Top `beam` hypotheses; deterministic order (score desc, consumed first,
  // then lexicographically smaller token sequence).
  std::vector<Hypothesis> take_best(int beam) {
    std::sort(hyps_.begin(), hyps_.end(),
              [](const Hypothesis& a, const Hypothesis& b) {
                if (a.score != b.score) return a.score > b.score;
                if (a.consumed != b.consumed) return a.consumed;
                return a.tokens < b.tokens;
              });
    if (static_cast<int>(hyps_.size()) > beam) hyps_.resize(beam);
    return std::move(hyps_);
  }

 private:
  using Key = std::pair<std::vector<int>, bool>;
  std::map<Key, std::size_t> index_;
  std::vector<Hypothesis> hyps_;
};

}  // namespace

DecodeResult beam_decode(const JointScorer& scorer, int num_frames,
                         int beam_size, int max_symbols_per_frame) {
  if (num_frames < 1) throw DataError("num_frames must be >= 1");
  if (beam_size < 1) throw DataError("beam_size must be >= 1");
  if (max_symbols_per_frame < 1)
    throw DataError("max_symbols_per_frame must be >= 1");

  std::vector<Hypothesis> beam(1);
  beam[0].score = 0.0;
  beam[0].best_single = 0.0;

  for (int t = 0; t < num_frames; ++t) {
    for (auto& h : beam) h.consumed = false;
    // Expansion rounds within the frame; round max_symbols_per_frame only
    // forces blank so every hypothesis consumes the frame.
    for (int round = 0; round <= max_symbols_per_frame; ++round) {
      bool any_active = false;
      for (const auto& h : beam) any_active |= !h.consumed;
      if (!any_active) break;

      HypothesisPool pool;
      for (auto& h : beam) {
        if (h.consumed) {
          pool.add(std::move(h));
          continue;
        }
        const std::vector<double> lp = scored_row(scorer, t, h.tokens);
        const int V = static_cast<int>(lp.size());

        Hypothesis blanked = h;
        blanked.score += lp[0];
        blanked.best_single += lp[0];
        blanked.consumed = true;
        pool.add(std::move(blanked));

        if (round < max_symbols_per_frame) {
          for (int v = 1; v < V; ++v) {
            Hypothesis ext = h;
            ext.score += lp[v];
            ext.best_single += lp[v];
            ext.tokens.push_back(v);
            ext.emission_frames.push_back(t);
            ext.consumed = false;
            pool.add(std::move(ext));
          }
        }
      }
      beam = pool.take_best(beam_size);
    }
  }

  const Hypothesis& best = beam.front();
  DecodeResult res;
  res.tokens = best.tokens;
  res.emission_frames = best.emission_frames;
  res.score = best.score;
  return res;
}

}  // namespace spikealign
