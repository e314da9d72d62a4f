// include/spikealign/metrics.hpp

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

#ifndef SPIKEALIGN_METRICS_HPP_
#define SPIKEALIGN_METRICS_HPP_

#include <string>
#include <vector>

#include "spikealign/tensor_io.hpp"
#include "spikealign/transducer.hpp"

namespace spikealign {

struct WerResult {
  double rate = 0.0;
  int substitutions = 0;
  int insertions = 0;
  int deletions = 0;
  int distance() const { return substitutions + insertions + deletions; }
};

// Levenshtein distance with unit costs; rate = (S + I + D) / |ref|. The
// distance is unique; the S/I/D split uses a fixed backtrace preference
// (match/substitute, then delete, then insert) so counts are reproducible.
// Throws DataError on an empty reference.
WerResult wer(const std::vector<std::string>& hyp,
              const std::vector<std::string>& ref);

// Nearest-rank percentile: sort ascending, take the ceil(p/100 * n)-th value
// (1-based). Requires non-empty values and 0 < p <= 100.
double percentile(std::vector<double> values, double p);

// Per-utterance inputs for latency evaluation. `words` must carry the
// reference end frame of every word; `decode` is the streaming recognition
// result whose emission_frames align with decode.tokens.
struct UtteranceEval {
  std::string id;
  std::vector<int> ref_tokens;
  std::vector<WordBoundary> words;
  DecodeResult decode;
};

struct WordLatency {
  std::string word;
  int latency_frames = 0;  // negative when emitted before the reference end
  double latency_ms = 0.0;
};

struct LatencyReport {
  std::vector<WordLatency> per_word;  // pooled across retained utterances
  double el50_ms = 0.0;               // NaN when no word was retained
  double el90_ms = 0.0;
  int num_utts_used = 0;
};

// Emission latency per word: (emission frame of the word's last token minus
// the reference end frame) * frame_ms. Utterances whose recognized token
// sequence differs from the reference contribute nothing. EL@50 / EL@90 are
// nearest-rank percentiles pooled over all retained words.
LatencyReport emission_latency(const std::vector<UtteranceEval>& utts,
                               double frame_ms);

}  // namespace spikealign

#endif  // SPIKEALIGN_METRICS_HPP_
