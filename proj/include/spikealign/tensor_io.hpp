// include/spikealign/tensor_io.hpp

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

#ifndef SPIKEALIGN_TENSOR_IO_HPP_
#define SPIKEALIGN_TENSOR_IO_HPP_

#include <string>
#include <vector>

#include "spikealign/numeric.hpp"

namespace spikealign {

// Binary tensor file:
//   magic "SPKALN01" (8 bytes), rank u32 LE in {1,2,3}, dims u32 LE each,
//   payload float32 LE in row-major order. Payload length must equal the
//   product of dims. Writing is deterministic: identical input produces
//   byte-identical files.
struct Tensor {
  std::vector<int> dims;
  std::vector<double> values;  // widened from the float32 payload
};

void write_tensor(const std::string& path, const std::vector<int>& dims,
                  const std::vector<double>& values);
Tensor read_tensor(const std::string& path);

// Shape adapters. Throw DataError when the rank does not match.
Matrix tensor_to_matrix(const Tensor& t);
Tensor3 tensor_to_tensor3(const Tensor& t);
void write_matrix(const std::string& path, const Matrix& m);
void write_tensor3(const std::string& path, const Tensor3& t);

// One utterance of per-frame labels, line-oriented UTF-8 text:
//   id<TAB>t0:tok t1:tok ...            (hard)
//   id<TAB>t0:tok:prob t1:tok:prob ...  (soft, prob fixed to 6 decimals)
// Frame indices are 0-based and must run 0..T-1 in order. Token index 0 is
// the blank symbol everywhere in this codebase.
struct LabelRecord {
  std::string id;
  bool soft = false;
  std::vector<int> tokens;    // one entry per frame
  std::vector<double> probs;  // parallel to tokens for soft records, else empty
};

void write_label_records(const std::string& path,
                         const std::vector<LabelRecord>& records);
std::vector<LabelRecord> read_label_records(const std::string& path);

// Throws DataError unless the record has exactly expected_frames entries.
void check_record_frames(const LabelRecord& record, int expected_frames);

// Reference word annotation: token positions are 0-based inclusive indices
// into the utterance token sequence, end_frame is the 0-based frame where
// the word ends in the reference.
struct WordBoundary {
  std::string word;
  int token_begin = 0;
  int token_end = 0;
  int end_frame = 0;
};

// Manifest line (tab-separated, key=value after the id):
//   id  frames=T  tokens=c1,c2,...  [feats=rel/path] [logits=rel/path]
//      [words=word:begin-end:endframe,...]
// Paths are stored relative to the manifest file's directory.
struct UtteranceRecord {
  std::string id;
  int num_frames = 0;
  std::vector<int> tokens;          // blank (0) excluded, each >= 1
  std::vector<WordBoundary> words;  // optional; empty when absent
  std::string feats_path;           // optional
  std::string logits_path;          // optional
};

void write_manifest(const std::string& path,
                    const std::vector<UtteranceRecord>& records);
std::vector<UtteranceRecord> read_manifest(const std::string& path);

// Dir component of a path ("" when none), for resolving manifest-relative
// tensor paths.
std::string parent_dir(const std::string& path);
std::string join_path(const std::string& dir, const std::string& rel);

}  // namespace spikealign

#endif  // SPIKEALIGN_TENSOR_IO_HPP_
