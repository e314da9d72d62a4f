// include/spikealign/ctc.hpp

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

#ifndef SPIKEALIGN_CTC_HPP_
#define SPIKEALIGN_CTC_HPP_

#include <vector>

#include "spikealign/numeric.hpp"

namespace spikealign {

// The expanded CTC state sequence for labels y_1..y_U interleaves blanks:
//   state 2u   -> blank          (u = 0..U)
//   state 2u+1 -> label y_{u+1}  (u = 0..U-1)
// so S = 2U + 1 states. All operations below take a T x V matrix of
// unnormalized scores (V >= 2, blank at index 0) and non-empty labels with
// every entry in [1, V-1]. They throw DataError when T is shorter than the
// minimum alignable length (U plus one frame per adjacent repeated label).

struct CtcResult {
  double loss = 0.0;  // -log P(labels | softmax(logits))
  Matrix grad;        // d loss / d logits, T x V
};

CtcResult ctc_loss_grad(const Matrix& logits, const std::vector<int>& labels);

// A maximal run of frames assigned to one label occurrence. Frames are
// 0-based and inclusive.
struct SpikeSegment {
  int token = 0;
  int begin = 0;
  int end = 0;
};

struct AlignmentPath {
  std::vector<int> state_per_frame;     // expanded state index per frame
  std::vector<SpikeSegment> segments;   // one per label occurrence, in order
  double log_prob = 0.0;                // log probability of the path
};

// Constrained Viterbi alignment: the most probable expanded state sequence
// consistent with the labels. Ties prefer the lower expanded-state index so
// results are reproducible across platforms.
AlignmentPath ctc_best_path(const Matrix& logits, const std::vector<int>& labels);

// Per-frame state posteriors gamma (T x S). Each row sums to 1.
Matrix ctc_occupation(const Matrix& logits, const std::vector<int>& labels);

// Alignment from the per-frame argmax of ctc_occupation. Unlike the Viterbi
// path, the argmax sequence is not guaranteed to be a valid path; invalid
// sequences raise DataError and callers are expected to skip the utterance.
AlignmentPath ctc_occupation_argmax(const Matrix& logits,
                                    const std::vector<int>& labels);

// Builds an AlignmentPath from an explicit state sequence, validating start
// state, transitions, and full label consumption.
AlignmentPath alignment_from_states(const std::vector<int>& states,
                                    const std::vector<int>& labels);

// CTC collapse: merge adjacent duplicates, then drop blanks.
std::vector<int> collapse_labels(const std::vector<int>& frame_labels);

// Smallest T that can align the labels: U plus one separating blank per
// adjacent repeated label.
int ctc_min_frames(const std::vector<int>& labels);

}  // namespace spikealign

#endif  // SPIKEALIGN_CTC_HPP_
