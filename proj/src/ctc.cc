// src/ctc.cc

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

#include "spikealign/ctc.hpp"

#include <cmath>
#include <string>

#include "spikealign/error.hpp"

namespace spikealign {

namespace {

// Symbol emitted by expanded state s.
inline int state_label(int s, const std::vector<int>& labels) {
  return (s % 2 == 0) ? 0 : labels[(s - 1) / 2];
}

// A skip transition s-2 -> s is legal only into a label state whose token
// differs from the previous label state's token.
inline bool skip_allowed(int s, const std::vector<int>& labels) {
  return s % 2 == 1 && s >= 3 && labels[(s - 1) / 2] != labels[(s - 3) / 2];
}

void check_inputs(const Matrix& logits, const std::vector<int>& labels) {
  const int T = logits.rows();
  const int V = logits.cols();
  if (T < 1 || V < 2) throw DataError("logits must be T>=1 by V>=2");
  if (!all_finite(logits.data()))
    throw DataError("logits contain non-finite values");
  if (labels.empty()) throw DataError("labels must be non-empty");
  for (int y : labels) {
    if (y == 0) throw DataError("blank (0) is not a valid label");
    if (y < 0 || y >= V)
      throw DataError("label " + std::to_string(y) + " outside [1," +
                      std::to_string(V - 1) + "]");
  }
  const int min_t = ctc_min_frames(labels);
  if (T < min_t)
    throw DataError("labels infeasible: need at least " +
                    std::to_string(min_t) + " frames, have " +
                    std::to_string(T));
}

Matrix row_log_softmax(const Matrix& logits) {
  Matrix lp(logits.rows(), logits.cols());
  for (int t = 0; t < logits.rows(); ++t)
    log_softmax(logits.row(t), logits.cols(), lp.row(t));
  return lp;
}

// Forward lattice. alpha(t,s) includes the emission at frame t.
Matrix forward_alpha(const Matrix& lp, const std::vector<int>& labels) {
  const int T = lp.rows();
  const int S = 2 * static_cast<int>(labels.size()) + 1;
  Matrix alpha(T, S, kLogZero);
  alpha(0, 0) = lp(0, 0);
  if (S > 1) alpha(0, 1) = lp(0, state_label(1, labels));
  for (int t = 1; t < T; ++t) {
    for (int s = 0; s < S; ++s) {
      double acc = alpha(t - 1, s);
      if (s >= 1) acc = log_add(acc, alpha(t - 1, s - 1));
      if (skip_allowed(s, labels)) acc = log_add(acc, alpha(t - 1, s - 2));
      if (acc != kLogZero) alpha(t, s) = acc + lp(t, state_label(s, labels));
    }
  }
  return alpha;
}

// Backward lattice. beta(t,s) also includes the emission at frame t, so the
// state posterior divides the doubly counted emission back out.
Matrix backward_beta(const Matrix& lp, const std::vector<int>& labels) {
  const int T = lp.rows();
  const int S = 2 * static_cast<int>(labels.size()) + 1;
  Matrix beta(T, S, kLogZero);
  beta(T - 1, S - 1) = lp(T - 1, 0);
  beta(T - 1, S - 2) = lp(T - 1, state_label(S - 2, labels));
  for (int t = T - 2; t >= 0; --t) {
    for (int s = 0; s < S; ++s) {
      double acc = beta(t + 1, s);
      if (s + 1 < S) acc = log_add(acc, beta(t + 1, s + 1));
      if (s + 2 < S && skip_allowed(s + 2, labels))
        acc = log_add(acc, beta(t + 1, s + 2));
      if (acc != kLogZero) beta(t, s) = acc + lp(t, state_label(s, labels));
    }
  }
  return beta;
}

}  // namespace

int ctc_min_frames(const std::vector<int>& labels) {
  int repeats = 0;
  for (std::size_t i = 1; i < labels.size(); ++i)
    if (labels[i] == labels[i - 1]) ++repeats;
  return static_cast<int>(labels.size()) + repeats;
}

std::vector<int> collapse_labels(const std::vector<int>& frame_labels) {
  std::vector<int> out;
  int prev = -1;
  for (int v : frame_labels) {
    if (v != prev && v != 0) out.push_back(v);
    prev = v;
  }
  return out;
}

CtcResult ctc_loss_grad(const Matrix& logits, const std::vector<int>& labels) {
  check_inputs(logits, labels);
  const int T = logits.rows();
  const int V = logits.cols();
  const int S = 2 * static_cast<int>(labels.size()) + 1;

  const Matrix lp = row_log_softmax(logits);
  const Matrix alpha = forward_alpha(lp, labels);
  const Matrix beta = backward_beta(lp, labels);

  double log_z = alpha(T - 1, S - 1);
  if (S > 1) log_z = log_add(log_z, alpha(T - 1, S - 2));
  if (!std::isfinite(log_z))
    throw NumericError("ctc total path probability underflowed to zero");

  CtcResult res;
  res.loss = -log_z;
  res.grad = Matrix(T, V);
  for (int t = 0; t < T; ++t) {
    // gamma summed per symbol: sum over states emitting v of
    // exp(alpha + beta - emission - log_z).
    std::vector<double> sym_occ(V, 0.0);
    for (int s = 0; s < S; ++s) {
      const double a = alpha(t, s);
      const double b = beta(t, s);
      if (a == kLogZero || b == kLogZero) continue;
      const int v = state_label(s, labels);
      sym_occ[v] += std::exp(a + b - lp(t, v) - log_z);
    }
    for (int v = 0; v < V; ++v)
      res.grad(t, v) = std::exp(lp(t, v)) - sym_occ[v];
  }
  return res;
}

Matrix ctc_occupation(const Matrix& logits, const std::vector<int>& labels) {
  check_inputs(logits, labels);
  const int T = logits.rows();
  const int S = 2 * static_cast<int>(labels.size()) + 1;

  const Matrix lp = row_log_softmax(logits);
  const Matrix alpha = forward_alpha(lp, labels);
  const Matrix beta = backward_beta(lp, labels);

  double log_z = alpha(T - 1, S - 1);
  if (S > 1) log_z = log_add(log_z, alpha(T - 1, S - 2));
  if (!std::isfinite(log_z))
    throw NumericError("ctc total path probability underflowed to zero");

  Matrix gamma(T, S, 0.0);
  for (int t = 0; t < T; ++t) {
    for (int s = 0; s < S; ++s) {
      const double a = alpha(t, s);
      const double b = beta(t, s);
      if (a == kLogZero || b == kLogZero) continue;
      gamma(t, s) = std::exp(a + b - lp(t, state_label(s, labels)) - log_z);
    }
  }
  return gamma;
}

AlignmentPath ctc_best_path(const Matrix& logits, const std::vector<int>& labels) {
  check_inputs(logits, labels);
  const int T = logits.rows();
  const int S = 2 * static_cast<int>(labels.size()) + 1;
  const Matrix lp = row_log_softmax(logits);

  Matrix score(T, S, kLogZero);
  // Predecessor offset per (t, s): 0 stay, 1 advance, 2 skip.
  std::vector<std::vector<int>> back(T, std::vector<int>(S, 0));

  score(0, 0) = lp(0, 0);
  if (S > 1) score(0, 1) = lp(0, state_label(1, labels));
  for (int t = 1; t < T; ++t) {
    for (int s = 0; s < S; ++s) {
      // Scan predecessors from the lowest state index upward and replace
      // only on strict improvement, so ties keep the lower index.
      double best = kLogZero;
      int off = -1;
      if (skip_allowed(s, labels) && score(t - 1, s - 2) > best) {
        best = score(t - 1, s - 2);
        off = 2;
      }
      if (s >= 1 && score(t - 1, s - 1) > best) {
        best = score(t - 1, s - 1);
        off = 1;
      }
      if (score(t - 1, s) > best) {
        best = score(t - 1, s);
        off = 0;
      }
      if (off >= 0) {
        score(t, s) = best + lp(t, state_label(s, labels));
        back[t][s] = off;
      }
    }
  }

  int final_state = S > 1 ? S - 2 : S - 1;
  if (S > 1 && score(T - 1, S - 1) > score(T - 1, S - 2)) final_state = S - 1;
  if (score(T - 1, final_state) == kLogZero)
    throw NumericError("no feasible alignment path");

  AlignmentPath path;
  path.log_prob = score(T - 1, final_state);
  path.state_per_frame.assign(T, 0);
  int s = final_state;
  for (int t = T - 1; t >= 0; --t) {
    path.state_per_frame[t] = s;
    if (t > 0) s -= back[t][s];
  }

  AlignmentPath validated = alignment_from_states(path.state_per_frame, labels);
  validated.log_prob = path.log_prob;
  return validated;
}

AlignmentPath ctc_occupation_argmax(const Matrix& logits,
                                    const std::vector<int>& labels) {
  const Matrix gamma = ctc_occupation(logits, labels);
  std::vector<int> states(gamma.rows(), 0);
  for (int t = 0; t < gamma.rows(); ++t) {
    int best = 0;
    for (int s = 1; s < gamma.cols(); ++s)
      if (gamma(t, s) > gamma(t, best)) best = s;
    states[t] = best;
  }
  return alignment_from_states(states, labels);
}

AlignmentPath alignment_from_states(const std::vector<int>& states,
                                    const std::vector<int>& labels) {
  const int T = static_cast<int>(states.size());
  const int S = 2 * static_cast<int>(labels.size()) + 1;
  if (T < 1) throw DataError("empty state sequence");
  if (states[0] != 0 && states[0] != 1)
    throw DataError("alignment must start in state 0 or 1");
  for (int t = 1; t < T; ++t) {
    const int step = states[t] - states[t - 1];
    if (step < 0 || step > 2 ||
        (step == 2 && !skip_allowed(states[t], labels)))
      throw DataError("illegal state transition at frame " + std::to_string(t));
  }
  for (int t = 0; t < T; ++t)
    if (states[t] < 0 || states[t] >= S)
      throw DataError("state index out of range");
  if (states[T - 1] != S - 1 && states[T - 1] != S - 2)
    throw DataError("alignment does not consume all labels");

  AlignmentPath path;
  path.state_per_frame = states;
  for (int t = 0; t < T; ++t) {
    if (states[t] % 2 == 0) continue;
    const int u = (states[t] - 1) / 2;  // label occurrence index
    if (static_cast<int>(path.segments.size()) == u + 1) {
      path.segments.back().end = t;  // monotone path, so the run is contiguous
    } else if (static_cast<int>(path.segments.size()) == u) {
      SpikeSegment seg;
      seg.token = state_label(states[t], labels);
      seg.begin = t;
      seg.end = t;
      path.segments.push_back(seg);
    } else {
      throw DataError("alignment revisits a consumed label state");
    }
  }
  if (path.segments.size() != labels.size())
    throw DataError("alignment visits " + std::to_string(path.segments.size()) +
                    " label states, expected " + std::to_string(labels.size()));
  return path;
}

}  // namespace spikealign
