// include/spikealign/label_sim.hpp

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

#ifndef SPIKEALIGN_LABEL_SIM_HPP_
#define SPIKEALIGN_LABEL_SIM_HPP_

#include <string>
#include <vector>

#include "spikealign/ctc.hpp"
#include "spikealign/tensor_io.hpp"

namespace spikealign {

// Left/right expansion ratios. A blank gap of length G between two spike
// segments is shared: the left segment's right expansion takes
// floor(r_right * G) frames from the gap's left end, the right segment's
// left expansion takes floor(r_left * G) frames from the gap's right end.
// r_left + r_right <= 1 keeps the two claims disjoint; configs violating the
// bound are rejected, not clipped.
struct ExpansionConfig {
  double r_left = 0.2;
  double r_right = 0.6;
};

struct Expansion {
  int left = 0;   // frames claimed before the segment
  int right = 0;  // frames claimed after the segment
};

std::vector<Expansion> allocate_gaps(const std::vector<SpikeSegment>& segments,
                                     int num_frames,
                                     const ExpansionConfig& config);

// Per-frame hard labels: each token covers its spike segment plus the
// allocated expansions, everything else stays blank (0).
std::vector<int> expand_hard(const std::vector<SpikeSegment>& segments,
                             int num_frames, const ExpansionConfig& config);

// Per-frame soft target: probability mass `prob` on `token`, 1 - prob on
// blank. Blank frames are encoded as (0, 1.0).
struct SoftFrame {
  int token = 0;
  double prob = 1.0;
};

std::vector<SoftFrame> expand_soft(const std::vector<SpikeSegment>& segments,
                                   int num_frames,
                                   const ExpansionConfig& config);

// Soft probability of a frame at distance d from its segment (d = 0 inside
// the segment, d = 1 for the first expanded frame) given the side's
// expansion width: sqrt(max(1 - d/width, 0)).
double soft_weight(int distance, int width);

void validate_expansion_config(const ExpansionConfig& config);

// Record conversion for the label-record text format.
LabelRecord make_hard_record(const std::string& id, const std::vector<int>& labels);
LabelRecord make_soft_record(const std::string& id, const std::vector<SoftFrame>& frames);
std::vector<SoftFrame> soft_frames_from_record(const LabelRecord& record);

}  // namespace spikealign

#endif  // SPIKEALIGN_LABEL_SIM_HPP_
