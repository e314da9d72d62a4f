// src/metrics.cc

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

#include "spikealign/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "spikealign/error.hpp"

namespace spikealign {

WerResult wer(const std::vector<std::string>& hyp,
              const std::vector<std::string>& ref) {
  if (ref.empty()) throw DataError("wer undefined for empty reference");
  const int m = static_cast<int>(ref.size());
  const int n = static_cast<int>(hyp.size());

  Matrix d(m + 1, n + 1);
  for (int i = 0; i <= m; ++i) d(i, 0) = i;
  for (int j = 0; j <= n; ++j) d(0, j) = j;
  for (int i = 1; i <= m; ++i) {
    for (int j = 1; j <= n; ++j) {
      const double sub = d(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      const double del = d(i - 1, j) + 1;  // reference word missing from hyp
      const double ins = d(i, j - 1) + 1;  // extra hypothesis word
      d(i, j) = std::min(sub, std::min(del, ins));
    }
  }

  WerResult res;
  int i = m, j = n;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 &&
        d(i, j) == d(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1)) {
      if (ref[i - 1] != hyp[j - 1]) ++res.substitutions;
      --i;
      --j;
    } else if (i > 0 && d(i, j) == d(i - 1, j) + 1) {
      ++res.deletions;
      --i;
    } else {
      ++res.insertions;
      --j;
    }
  }
  res.rate = static_cast<double>(res.distance()) / m;
  return res;
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw DataError("percentile of empty sequence");
  if (p <= 0.0 || p > 100.0) throw DataError("percentile p must be in (0,100]");
  std::sort(values.begin(), values.end());
  int rank = static_cast<int>(std::ceil(p / 100.0 * values.size()));
  if (rank < 1) rank = 1;
  if (rank > static_cast<int>(values.size()))
    rank = static_cast<int>(values.size());
  return values[rank - 1];
}

LatencyReport emission_latency(const std::vector<UtteranceEval>& utts,
                               double frame_ms) {
  if (frame_ms <= 0.0) throw DataError("frame_ms must be > 0");

  LatencyReport report;
  for (const auto& utt : utts) {
    if (utt.words.empty())
      throw DataError("utterance '" + utt.id + "' has no reference end times");
    int expect = 0;
    for (const auto& w : utt.words) {
      if (w.token_begin != expect || w.token_end < w.token_begin ||
          w.token_end >= static_cast<int>(utt.ref_tokens.size()))
        throw DataError("word spans do not match tokens in '" + utt.id + "'");
      expect = w.token_end + 1;
    }
    if (expect != static_cast<int>(utt.ref_tokens.size()))
      throw DataError("word spans do not cover tokens in '" + utt.id + "'");
    if (utt.decode.emission_frames.size() != utt.decode.tokens.size())
      throw DataError("decode emission frames mismatch in '" + utt.id + "'");

    // Only utterances recognized exactly as their reference are retained.
    if (utt.decode.tokens != utt.ref_tokens) continue;
    ++report.num_utts_used;
    for (const auto& w : utt.words) {
      WordLatency wl;
      wl.word = w.word;
      wl.latency_frames = utt.decode.emission_frames[w.token_end] - w.end_frame;
      wl.latency_ms = wl.latency_frames * frame_ms;
      report.per_word.push_back(std::move(wl));
    }
  }

  if (report.per_word.empty()) {
    report.el50_ms = std::numeric_limits<double>::quiet_NaN();
    report.el90_ms = std::numeric_limits<double>::quiet_NaN();
    return report;
  }
  std::vector<double> ms;
  ms.reserve(report.per_word.size());
  for (const auto& w : report.per_word) ms.push_back(w.latency_ms);
  report.el50_ms = percentile(ms, 50.0);
  report.el90_ms = percentile(ms, 90.0);
  return report;
}

}  // namespace spikealign
