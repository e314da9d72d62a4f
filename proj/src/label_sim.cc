// src/label_sim.cc

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

#include "spikealign/label_sim.hpp"

#include <cmath>
#include <string>

#include "spikealign/error.hpp"

namespace spikealign {

namespace {

void validate_segments(const std::vector<SpikeSegment>& segments,
                       int num_frames) {
  if (num_frames < 1) throw DataError("num_frames must be >= 1");
  int prev_end = -1;
  int prev_token = 0;
  for (const auto& seg : segments) {
    if (seg.token < 1) throw DataError("segment token must be >= 1");
    if (seg.begin < 0 || seg.end < seg.begin || seg.end >= num_frames)
      throw DataError("segment frames out of range");
    if (seg.begin <= prev_end) throw DataError("segments overlap or unordered");
    if (seg.token == prev_token && seg.begin == prev_end + 1)
      throw DataError(
          "adjacent segments with equal token need a separating blank frame");
    prev_end = seg.end;
    prev_token = seg.token;
  }
}

}  // namespace

void validate_expansion_config(const ExpansionConfig& config) {
  if (config.r_left < 0.0 || config.r_left > 1.0 || config.r_right < 0.0 ||
      config.r_right > 1.0)
    throw DataError("expansion ratios must lie in [0,1]");
  if (config.r_left + config.r_right > 1.0)
    throw DataError("r_left + r_right must not exceed 1.0");
}

double soft_weight(int distance, int width) {
  if (distance == 0) return 1.0;
  if (width <= 0) return 0.0;
  const double x = 1.0 - static_cast<double>(distance) / width;
  return std::sqrt(x > 0.0 ? x : 0.0);
}

std::vector<Expansion> allocate_gaps(const std::vector<SpikeSegment>& segments,
                                     int num_frames,
                                     const ExpansionConfig& config) {
  validate_expansion_config(config);
  validate_segments(segments, num_frames);

  const int n = static_cast<int>(segments.size());
  std::vector<Expansion> out(n);
  for (int i = 0; i < n; ++i) {
    const int left_gap =
        i == 0 ? segments[0].begin : segments[i].begin - segments[i - 1].end - 1;
    const int right_gap = i + 1 < n
                              ? segments[i + 1].begin - segments[i].end - 1
                              : num_frames - 1 - segments[i].end;
    out[i].left = static_cast<int>(std::floor(config.r_left * left_gap));
    out[i].right = static_cast<int>(std::floor(config.r_right * right_gap));
  }
  // Repeated tokens must keep one separating blank, otherwise collapsing the
  // expanded labels would merge the two occurrences. Only reachable when
  // r_left + r_right == 1 and both floors are exact.
  for (int i = 0; i + 1 < n; ++i) {
    if (segments[i].token != segments[i + 1].token) continue;
    const int gap = segments[i + 1].begin - segments[i].end - 1;
    while (out[i].right + out[i + 1].left >= gap) {
      if (out[i + 1].left >= out[i].right)
        --out[i + 1].left;
      else
        --out[i].right;
    }
  }
  return out;
}

std::vector<int> expand_hard(const std::vector<SpikeSegment>& segments,
                             int num_frames, const ExpansionConfig& config) {
  const auto expansions = allocate_gaps(segments, num_frames, config);
  std::vector<int> labels(num_frames, 0);
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const int begin = segments[i].begin - expansions[i].left;
    const int end = segments[i].end + expansions[i].right;
    for (int t = begin; t <= end; ++t) labels[t] = segments[i].token;
  }
  return labels;
}

std::vector<SoftFrame> expand_soft(const std::vector<SpikeSegment>& segments,
                                   int num_frames,
                                   const ExpansionConfig& config) {
  const auto expansions = allocate_gaps(segments, num_frames, config);
  std::vector<SoftFrame> frames(num_frames, SoftFrame{0, 1.0});
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& seg = segments[i];
    for (int t = seg.begin; t <= seg.end; ++t) frames[t] = {seg.token, 1.0};
    for (int d = 1; d <= expansions[i].left; ++d) {
      const double p = soft_weight(d, expansions[i].left);
      if (p > 0.0) frames[seg.begin - d] = {seg.token, p};
    }
    for (int d = 1; d <= expansions[i].right; ++d) {
      const double p = soft_weight(d, expansions[i].right);
      if (p > 0.0) frames[seg.end + d] = {seg.token, p};
    }
  }
  return frames;
}

LabelRecord make_hard_record(const std::string& id,
                             const std::vector<int>& labels) {
  LabelRecord r;
  r.id = id;
  r.soft = false;
  r.tokens = labels;
  return r;
}

LabelRecord make_soft_record(const std::string& id,
                             const std::vector<SoftFrame>& frames) {
  LabelRecord r;
  r.id = id;
  r.soft = true;
  r.tokens.reserve(frames.size());
  r.probs.reserve(frames.size());
  for (const auto& f : frames) {
    r.tokens.push_back(f.token);
    r.probs.push_back(f.prob);
  }
  return r;
}

std::vector<SoftFrame> soft_frames_from_record(const LabelRecord& record) {
  std::vector<SoftFrame> out;
  out.reserve(record.tokens.size());
  for (std::size_t i = 0; i < record.tokens.size(); ++i) {
    const double p = record.soft ? record.probs[i] : 1.0;
    out.push_back(SoftFrame{record.tokens[i], p});
  }
  return out;
}

}  // namespace spikealign
