// src/framewise_loss.cc

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

#include "spikealign/framewise_loss.hpp"

#include <cmath>
#include <string>

#include "spikealign/error.hpp"

namespace spikealign {

namespace {

// log of the 1e-30 probability floor.
const double kLogFloor = std::log(1e-30);

inline double floored(double log_p) { return log_p > kLogFloor ? log_p : kLogFloor; }

void check_logits(const Matrix& logits, std::size_t num_targets) {
  if (logits.rows() < 1 || logits.cols() < 2)
    throw DataError("predictions must be T>=1 by V>=2");
  if (!all_finite(logits.data()))
    throw DataError("predictions contain non-finite values");
  if (static_cast<std::size_t>(logits.rows()) != num_targets)
    throw DataError("label length " + std::to_string(num_targets) +
                    " does not match T=" + std::to_string(logits.rows()));
}

}  // namespace

FramewiseLoss hard_ce_loss_grad(const Matrix& logits,
                                const std::vector<int>& labels) {
  check_logits(logits, labels.size());
  const int T = logits.rows();
  const int V = logits.cols();

  FramewiseLoss out;
  out.grad = Matrix(T, V);
  std::vector<double> lp(V);
  for (int t = 0; t < T; ++t) {
    const int y = labels[t];
    if (y < 0 || y >= V)
      throw DataError("label " + std::to_string(y) + " outside [0," +
                      std::to_string(V - 1) + "]");
    log_softmax(logits.row(t), V, lp.data());
    out.loss -= floored(lp[y]);
    for (int v = 0; v < V; ++v) out.grad(t, v) = std::exp(lp[v]) / T;
    out.grad(t, y) -= 1.0 / T;
  }
  out.loss /= T;
  return out;
}

FramewiseLoss soft_ce_loss_grad(const Matrix& logits,
                                const std::vector<SoftFrame>& targets) {
  check_logits(logits, targets.size());
  const int T = logits.rows();
  const int V = logits.cols();

  FramewiseLoss out;
  out.grad = Matrix(T, V);
  std::vector<double> lp(V);
  for (int t = 0; t < T; ++t) {
    const int y = targets[t].token;
    const double p = targets[t].prob;
    if (y < 0 || y >= V)
      throw DataError("target token " + std::to_string(y) + " outside [0," +
                      std::to_string(V - 1) + "]");
    if (p < 0.0 || p > 1.0)
      throw DataError("target probability outside [0,1]");
    log_softmax(logits.row(t), V, lp.data());

    // A blank frame (y == 0) puts the whole mass on blank either way.
    const double p_tok = y == 0 ? 1.0 : p;
    if (y == 0) {
      out.loss -= floored(lp[0]);
    } else {
      out.loss -= p * floored(lp[y]) + (1.0 - p) * floored(lp[0]);
    }
    for (int v = 0; v < V; ++v) out.grad(t, v) = std::exp(lp[v]) / T;
    out.grad(t, y) -= p_tok / T;
    if (y != 0) out.grad(t, 0) -= (1.0 - p) / T;
  }
  out.loss /= T;
  return out;
}

}  // namespace spikealign
