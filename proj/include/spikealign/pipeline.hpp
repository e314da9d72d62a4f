// include/spikealign/pipeline.hpp

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

#ifndef SPIKEALIGN_PIPELINE_HPP_
#define SPIKEALIGN_PIPELINE_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "spikealign/ctc.hpp"
#include "spikealign/label_sim.hpp"
#include "spikealign/metrics.hpp"
#include "spikealign/numeric.hpp"
#include "spikealign/tensor_io.hpp"
#include "spikealign/transducer.hpp"

namespace spikealign {

// Desk-scale three-stage experiment: a non-streaming linear teacher trained
// with the alignment loss seeds frame-wise labels, a causal linear student is
// pre-trained on them, and the streaming transducer is trained from either
// initialization and compared against training from scratch.

// All knobs live in a key=value config file; these defaults target a few
// seconds per stage. Frame counts land in [frames_min, frames_max].
struct TaskConfig {
  int vocab_size = 8;    // includes blank at index 0
  int feature_dim = 16;
  int tokens_per_word = 2;
  int words_min = 2;
  int words_max = 4;
  int token_dur_min = 3;
  int token_dur_max = 6;
  int gap_silence_min = 0;
  int gap_silence_max = 4;
  int lead_silence_min = 2;
  int lead_silence_max = 6;
  int frames_min = 30;
  int frames_max = 80;
  double noise_level = 0.3;

  int train_utts = 500;
  int eval_utts = 100;
  int teacher_epochs = 30;
  int pretrain_epochs = 30;
  int transducer_epochs = 600;
  double teacher_lr = 0.5;
  double pretrain_lr = 2.0;
  double transducer_lr = 2.0;
  int teacher_window = 5;  // symmetric context, must be odd
  int student_window = 3;  // causal context (current frame + past)
  double init_scale = 0.1;

  double r_left = 0.2;
  double r_right = 0.6;
  double frame_ms = 20.0;
  int max_symbols_per_frame = 4;

  std::uint64_t seed = 1;
  int jobs = 1;
};

TaskConfig parse_config_file(const std::string& path);
TaskConfig parse_config_text(const std::string& text, const std::string& origin);
void write_config(const std::string& path, const TaskConfig& cfg);

// Token emission templates shared by train and eval splits. Row 0 is the
// silence prototype.
struct SyntheticTask {
  TaskConfig cfg;
  Matrix prototypes;  // V x F
};

SyntheticTask make_task(const TaskConfig& cfg);

struct UtteranceData {
  UtteranceRecord rec;
  Matrix feats;                       // T x F
  std::vector<int> true_frame_labels; // generator ground truth, length T
};

struct Dataset {
  std::vector<UtteranceData> utts;
};

// Deterministic for a fixed (task, seed): same seed, byte-identical files
// after save_dataset.
Dataset generate_dataset(const SyntheticTask& task, int n_utts,
                         std::uint64_t seed);

void save_dataset(const Dataset& dataset, const std::string& dir);
Dataset load_dataset(const std::string& dir);

// Linear frame classifier over a stacked context window, with an optional
// bigram bias table for the transducer's prediction side.
struct LinearModel {
  int vocab = 0;
  int feature_dim = 0;
  int window = 1;
  bool causal = true;
  Matrix weights;            // V x (window * F)
  std::vector<double> bias;  // V
  Matrix bigram;             // V x V; empty for plain frame classifiers
};

LinearModel init_model(int vocab, int feature_dim, int window, bool causal,
                       bool with_bigram, double scale, std::uint64_t seed);

// Per-frame logits (T x V). The causal window reads frames t-window+1..t,
// the symmetric window reads t-(window-1)/2..t+(window-1)/2; out-of-range
// frames contribute zeros.
Matrix model_logits(const LinearModel& model, const Matrix& feats);

// Joint scorer for decoding: encoder logits plus the bigram row of the last
// emitted token. History beyond the last token does not change the score.
JointScorer make_scorer(const LinearModel& model, const Matrix& feats);

struct TrainCurve {
  std::vector<double> epoch_loss;  // mean per-utterance loss
};

// Plain gradient descent; per-utterance gradients are computed in parallel
// (jobs threads) and reduced in manifest order, so results do not depend on
// the thread count. Throws NumericError when the loss diverges to non-finite.
TrainCurve train_teacher(LinearModel* model, const Dataset& data, int epochs,
                         double lr, int jobs);
TrainCurve pretrain_student(LinearModel* model, const Dataset& data,
                            const std::vector<LabelRecord>& records,
                            int epochs, double lr, int jobs);
TrainCurve train_student_transducer(LinearModel* model, const Dataset& data,
                                    int epochs, double lr, int jobs);

enum class LabelMode { kHard, kSoft };
enum class AlignMode { kViterbi, kOccupationArgmax };

struct SimulateStats {
  int simulated = 0;
  int skipped = 0;  // infeasible or inconsistent alignments
};

// Teacher logits -> constrained alignment -> spike expansion, one record per
// utterance. Utterances whose alignment fails are skipped and counted.
SimulateStats simulate_labels(const LinearModel& teacher, const Dataset& data,
                              const ExpansionConfig& config, LabelMode mode,
                              AlignMode align_mode,
                              std::vector<LabelRecord>* records);

// Fraction of frames whose argmax logit equals the generator's true label.
double frame_accuracy(const LinearModel& model, const Dataset& data);

struct EvalReport {
  double wer = 0.0;  // pooled (S+I+D) / total reference tokens
  int substitutions = 0;
  int insertions = 0;
  int deletions = 0;
  int ref_tokens = 0;
  LatencyReport latency;
  std::vector<DecodeResult> decodes;  // per utterance, manifest order
};

// Greedy-decodes every utterance and scores token-level WER plus emission
// latency against the generator's reference end frames. Tokens act as the
// word units of the toy task.
EvalReport evaluate(const LinearModel& model, const Dataset& data,
                    double frame_ms, int max_symbols_per_frame);

// Same scoring for externally produced decode results (one per utterance, in
// dataset order).
EvalReport evaluate_decodes(const std::vector<DecodeResult>& decodes,
                            const Dataset& data, double frame_ms);

struct ModelOutcome {
  std::string name;
  double wer = 0.0;
  double el50_ms = 0.0;
  double el90_ms = 0.0;
  int latency_words = 0;
  int utts_used = 0;
  std::vector<double> curve;
};

struct ToyRunReport {
  std::uint64_t seed = 0;
  std::vector<double> teacher_curve;
  int hard_skipped = 0;
  int soft_skipped = 0;
  ModelOutcome scratch;
  ModelOutcome hard;
  ModelOutcome soft;
};

// Runs the full three-stage experiment. When out_dir is non-empty, datasets,
// simulated labels, decode lines, and report.json are written under it.
ToyRunReport toy_run(const TaskConfig& cfg, const std::string& out_dir);

std::string toy_report_json(const ToyRunReport& report);
std::string toy_report_summary(const ToyRunReport& report);

}  // namespace spikealign

#endif  // SPIKEALIGN_PIPELINE_HPP_
