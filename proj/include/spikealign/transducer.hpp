// include/spikealign/transducer.hpp

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

#ifndef SPIKEALIGN_TRANSDUCER_HPP_
#define SPIKEALIGN_TRANSDUCER_HPP_

#include <functional>
#include <vector>

#include "spikealign/numeric.hpp"

namespace spikealign {

// Transducer lattice: scores(t, u, v) are the joint-network logits at frame
// t after the first u labels have been consumed (u = 0..U). A path starts at
// (0, 0); emitting label y_{u+1} moves (t, u) -> (t, u+1), emitting blank
// moves (t, u) -> (t+1, u). A complete path consumes all U labels and ends
// with blank at (T-1, U). The loss is -log of the summed probability of all
// complete paths with per-step softmax probabilities.
struct RnntResult {
  double loss = 0.0;
  Tensor3 grad;  // d loss / d scores, T x (U+1) x V
};

RnntResult rnnt_loss_grad(const Tensor3& lattice, const std::vector<int>& labels);

// Streaming joint scorer: V logits for frame t given the non-blank history
// emitted so far. Must be deterministic and must not depend on future frames.
using JointScorer =
    std::function<std::vector<double>(int frame, const std::vector<int>& history)>;

struct DecodeResult {
  std::vector<int> tokens;           // emitted non-blank symbols
  std::vector<int> emission_frames;  // frame at which each token was emitted
  double score = 0.0;                // log-probability (merged for beam)
};

// Frame-synchronous greedy loop: take the argmax symbol (ties prefer the
// lower index); a non-blank is emitted and appended to the history, blank or
// the per-frame symbol cap advances to the next frame.
DecodeResult greedy_decode(const JointScorer& scorer, int num_frames,
                           int max_symbols_per_frame);

// Breadth-first per-frame beam search. Hypotheses with identical token
// sequences are merged by log-sum-exp; each hypothesis consumes a frame by
// taking blank (forced once the symbol cap is reached). beam_size = 1 emits
// exactly the greedy token sequence.
DecodeResult beam_decode(const JointScorer& scorer, int num_frames,
                         int beam_size, int max_symbols_per_frame = 4);

}  // namespace spikealign

#endif  // SPIKEALIGN_TRANSDUCER_HPP_
