// include/spikealign/framewise_loss.hpp

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

#ifndef SPIKEALIGN_FRAMEWISE_LOSS_HPP_
#define SPIKEALIGN_FRAMEWISE_LOSS_HPP_

#include <vector>

#include "spikealign/label_sim.hpp"
#include "spikealign/numeric.hpp"

namespace spikealign {

struct FramewiseLoss {
  double loss = 0.0;
  Matrix grad;  // d loss / d logits, T x V
};

// Mean per-frame negative log-probability of the labeled symbol:
//   loss = -(1/T) sum_t log softmax(logits_t)[labels_t]
// grad = (softmax - one_hot) / T per frame. Log arguments are floored at
// 1e-30, so saturated wrong predictions give a large finite loss; the
// gradient stays the exact unclamped expression.
FramewiseLoss hard_ce_loss_grad(const Matrix& logits,
                                const std::vector<int>& labels);

// Cross entropy against a two-point target that puts `prob` on the frame's
// token and 1 - prob on blank:
//   loss = -(1/T) sum_t (P_t log p_hat[y_t] + (1 - P_t) log p_hat[0])
// A blank frame degenerates to a one-hot blank target. The gradient equals
// the KL-divergence gradient: the target entropy term carries no gradient.
FramewiseLoss soft_ce_loss_grad(const Matrix& logits,
                                const std::vector<SoftFrame>& targets);

}  // namespace spikealign

#endif  // SPIKEALIGN_FRAMEWISE_LOSS_HPP_
