// src/pipeline.cc

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

#include "spikealign/pipeline.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>
#include <unordered_map>
#include <utility>

#include "json.hpp"

#include "spikealign/error.hpp"
#include "spikealign/framewise_loss.hpp"
#include "spikealign/rng.hpp"

namespace spikealign {

namespace {

std::uint64_t stage_seed(std::uint64_t seed, std::uint64_t stage) {
  return splitmix64(seed ^ (stage * 0xd1b54a32d192ed03ULL));
}

void validate_config(const TaskConfig& c) {
  auto fail = [](const std::string& msg) { throw DataError("config: " + msg); };
  if (c.vocab_size < 2) fail("vocab_size must be >= 2");
  if (c.feature_dim < 1) fail("feature_dim must be >= 1");
  if (c.tokens_per_word < 1) fail("tokens_per_word must be >= 1");
  if (c.words_min < 1 || c.words_max < c.words_min) fail("bad words range");
  if (c.token_dur_min < 1 || c.token_dur_max < c.token_dur_min)
    fail("bad token duration range");
  if (c.gap_silence_min < 0 || c.gap_silence_max < c.gap_silence_min)
    fail("bad gap silence range");
  if (c.lead_silence_min < 0 || c.lead_silence_max < c.lead_silence_min)
    fail("bad lead silence range");
  if (c.frames_min < 1 || c.frames_max < c.frames_min) fail("bad frames range");
  if (c.noise_level < 0.0) fail("noise_level must be >= 0");
  if (c.train_utts < 0 || c.eval_utts < 0) fail("utterance counts must be >= 0");
  if (c.teacher_epochs < 0 || c.pretrain_epochs < 0 || c.transducer_epochs < 0)
    fail("epochs must be >= 0");
  if (c.teacher_window < 1 || c.teacher_window % 2 == 0)
    fail("teacher_window must be odd and >= 1");
  if (c.student_window < 1) fail("student_window must be >= 1");
  if (c.init_scale < 0.0) fail("init_scale must be >= 0");
  if (c.frame_ms <= 0.0) fail("frame_ms must be > 0");
  if (c.max_symbols_per_frame < 1) fail("max_symbols_per_frame must be >= 1");
  if (c.jobs < 0) fail("jobs must be >= 0");
  validate_expansion_config(ExpansionConfig{c.r_left, c.r_right});
}

int effective_jobs(int jobs) {
  if (jobs > 0) return jobs;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

// Runs fn(0..n-1) on `jobs` threads. Callers must make fn(i) writes disjoint
// per index; any reduction over results happens afterwards in index order.
template <typename Fn>
void parallel_for(int n, int jobs, Fn&& fn) {
  jobs = std::min(effective_jobs(jobs), n);
  if (jobs <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> workers;
  workers.reserve(jobs);
  for (int w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      try {
        for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& th : workers) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

struct ParamGrad {
  Matrix weights;
  std::vector<double> bias;
  Matrix bigram;
  double loss = 0.0;
};

int window_start(const LinearModel& m) {
  return m.causal ? -(m.window - 1) : -((m.window - 1) / 2);
}

// d loss / d encoder logits (T x V) -> parameter gradients.
void accumulate_encoder_grad(const LinearModel& m, const Matrix& feats,
                             const Matrix& frame_grad, ParamGrad* out) {
  const int T = feats.rows();
  const int F = m.feature_dim;
  const int start = window_start(m);
  for (int t = 0; t < T; ++t) {
    for (int v = 0; v < m.vocab; ++v) {
      const double g = frame_grad(t, v);
      if (g == 0.0) continue;
      out->bias[v] += g;
      for (int slot = 0; slot < m.window; ++slot) {
        const int src = t + start + slot;
        if (src < 0 || src >= T) continue;
        double* w = out->weights.row(v) + slot * F;
        const double* x = feats.row(src);
        for (int f = 0; f < F; ++f) w[f] += g * x[f];
      }
    }
  }
}

ParamGrad zero_grad(const LinearModel& m) {
  ParamGrad g;
  g.weights = Matrix(m.vocab, m.window * m.feature_dim);
  g.bias.assign(m.vocab, 0.0);
  if (m.bigram.rows() > 0) g.bigram = Matrix(m.vocab, m.vocab);
  return g;
}

void apply_update(LinearModel* m, const ParamGrad& g, double scale) {
  for (std::size_t i = 0; i < m->weights.data().size(); ++i)
    m->weights.data()[i] -= scale * g.weights.data()[i];
  for (int v = 0; v < m->vocab; ++v) m->bias[v] -= scale * g.bias[v];
  if (m->bigram.rows() > 0)
    for (std::size_t i = 0; i < m->bigram.data().size(); ++i)
      m->bigram.data()[i] -= scale * g.bigram.data()[i];
}

bool params_finite(const LinearModel& m) {
  return all_finite(m.weights.data()) && all_finite(m.bias) &&
         (m.bigram.rows() == 0 || all_finite(m.bigram.data()));
}

// Shared epoch loop: per-utterance gradients in parallel, reduced and applied
// in manifest order.
template <typename GradFn>
TrainCurve run_epochs(LinearModel* model, int n_utts, int epochs, double lr,
                      int jobs, const std::string& stage, GradFn&& grad_fn) {
  if (n_utts == 0) throw DataError(stage + ": empty dataset");
  TrainCurve curve;
  std::vector<ParamGrad> grads(n_utts);
  for (int epoch = 0; epoch < epochs; ++epoch) {
    parallel_for(n_utts, jobs, [&](int i) { grads[i] = grad_fn(*model, i); });
    ParamGrad total = zero_grad(*model);
    for (const auto& g : grads) {
      for (std::size_t k = 0; k < total.weights.data().size(); ++k)
        total.weights.data()[k] += g.weights.data()[k];
      for (std::size_t k = 0; k < total.bias.size(); ++k)
        total.bias[k] += g.bias[k];
      if (total.bigram.rows() > 0)
        for (std::size_t k = 0; k < total.bigram.data().size(); ++k)
          total.bigram.data()[k] += g.bigram.data()[k];
      total.loss += g.loss;
    }
    apply_update(model, total, lr / n_utts);
    if (!std::isfinite(total.loss) || !params_finite(*model))
      throw NumericError(stage + " diverged at epoch " + std::to_string(epoch));
    curve.epoch_loss.push_back(total.loss / n_utts);
  }
  return curve;
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

TaskConfig parse_config_text(const std::string& text, const std::string& origin) {
  TaskConfig cfg;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    const auto b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
  };
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const std::string where = origin + ":" + std::to_string(lineno);
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw DataError("config line without '=' at " + where);
    const std::string key = trim(t.substr(0, eq));
    const std::string val = trim(t.substr(eq + 1));
    if (key.empty() || val.empty())
      throw DataError("empty key or value at " + where);
    try {
      if (key == "vocab_size") cfg.vocab_size = std::stoi(val);
      else if (key == "feature_dim") cfg.feature_dim = std::stoi(val);
      else if (key == "tokens_per_word") cfg.tokens_per_word = std::stoi(val);
      else if (key == "words_min") cfg.words_min = std::stoi(val);
      else if (key == "words_max") cfg.words_max = std::stoi(val);
      else if (key == "token_dur_min") cfg.token_dur_min = std::stoi(val);
      else if (key == "token_dur_max") cfg.token_dur_max = std::stoi(val);
      else if (key == "gap_silence_min") cfg.gap_silence_min = std::stoi(val);
      else if (key == "gap_silence_max") cfg.gap_silence_max = std::stoi(val);
      else if (key == "lead_silence_min") cfg.lead_silence_min = std::stoi(val);
      else if (key == "lead_silence_max") cfg.lead_silence_max = std::stoi(val);
      else if (key == "frames_min") cfg.frames_min = std::stoi(val);
      else if (key == "frames_max") cfg.frames_max = std::stoi(val);
      else if (key == "noise_level") cfg.noise_level = std::stod(val);
      else if (key == "train_utts") cfg.train_utts = std::stoi(val);
      else if (key == "eval_utts") cfg.eval_utts = std::stoi(val);
      else if (key == "teacher_epochs") cfg.teacher_epochs = std::stoi(val);
      else if (key == "pretrain_epochs") cfg.pretrain_epochs = std::stoi(val);
      else if (key == "transducer_epochs") cfg.transducer_epochs = std::stoi(val);
      else if (key == "teacher_lr") cfg.teacher_lr = std::stod(val);
      else if (key == "pretrain_lr") cfg.pretrain_lr = std::stod(val);
      else if (key == "transducer_lr") cfg.transducer_lr = std::stod(val);
      else if (key == "teacher_window") cfg.teacher_window = std::stoi(val);
      else if (key == "student_window") cfg.student_window = std::stoi(val);
      else if (key == "init_scale") cfg.init_scale = std::stod(val);
      else if (key == "r_left") cfg.r_left = std::stod(val);
      else if (key == "r_right") cfg.r_right = std::stod(val);
      else if (key == "frame_ms") cfg.frame_ms = std::stod(val);
      else if (key == "max_symbols_per_frame")
        cfg.max_symbols_per_frame = std::stoi(val);
      else if (key == "seed") cfg.seed = std::stoull(val);
      else if (key == "jobs") cfg.jobs = std::stoi(val);
      else throw DataError("unknown config key '" + key + "' at " + where);
    } catch (const DataError&) {
      throw;
    } catch (const std::exception&) {
      throw DataError("bad value '" + val + "' for " + key + " at " + where);
    }
  }
  validate_config(cfg);
  return cfg;
}

TaskConfig parse_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open config: " + path);
  std::stringstream buf;
  buf << is.rdbuf();
  return parse_config_text(buf.str(), path);
}

void write_config(const std::string& path, const TaskConfig& c) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot open for write: " + path);
  os << "vocab_size = " << c.vocab_size << '\n'
     << "feature_dim = " << c.feature_dim << '\n'
     << "tokens_per_word = " << c.tokens_per_word << '\n'
     << "words_min = " << c.words_min << '\n'
     << "words_max = " << c.words_max << '\n'
     << "token_dur_min = " << c.token_dur_min << '\n'
     << "token_dur_max = " << c.token_dur_max << '\n'
     << "gap_silence_min = " << c.gap_silence_min << '\n'
     << "gap_silence_max = " << c.gap_silence_max << '\n'
     << "lead_silence_min = " << c.lead_silence_min << '\n'
     << "lead_silence_max = " << c.lead_silence_max << '\n'
     << "frames_min = " << c.frames_min << '\n'
     << "frames_max = " << c.frames_max << '\n'
     << "noise_level = " << c.noise_level << '\n'
     << "train_utts = " << c.train_utts << '\n'
     << "eval_utts = " << c.eval_utts << '\n'
     << "teacher_epochs = " << c.teacher_epochs << '\n'
     << "pretrain_epochs = " << c.pretrain_epochs << '\n'
     << "transducer_epochs = " << c.transducer_epochs << '\n'
     << "teacher_lr = " << c.teacher_lr << '\n'
     << "pretrain_lr = " << c.pretrain_lr << '\n'
     << "transducer_lr = " << c.transducer_lr << '\n'
     << "teacher_window = " << c.teacher_window << '\n'
     << "student_window = " << c.student_window << '\n'
     << "init_scale = " << c.init_scale << '\n'
     << "r_left = " << c.r_left << '\n'
     << "r_right = " << c.r_right << '\n'
     << "frame_ms = " << c.frame_ms << '\n'
     << "max_symbols_per_frame = " << c.max_symbols_per_frame << '\n'
     << "seed = " << c.seed << '\n'
     << "jobs = " << c.jobs << '\n';
  if (!os) throw DataError("write failed: " + path);
}

// ---------------------------------------------------------------------------
// Synthetic data

SyntheticTask make_task(const TaskConfig& cfg) {
  validate_config(cfg);
  SyntheticTask task;
  task.cfg = cfg;
  Rng rng(stage_seed(cfg.seed, 17));
  task.prototypes = Matrix(cfg.vocab_size, cfg.feature_dim);
  for (int v = 0; v < cfg.vocab_size; ++v)
    for (int f = 0; f < cfg.feature_dim; ++f)
      task.prototypes(v, f) = rng.next_normal();
  return task;
}

Dataset generate_dataset(const SyntheticTask& task, int n_utts,
                         std::uint64_t seed) {
  const TaskConfig& c = task.cfg;
  validate_config(c);
  if (n_utts < 0) throw DataError("n_utts must be >= 0");
  if (task.prototypes.rows() != c.vocab_size ||
      task.prototypes.cols() != c.feature_dim)
    throw DataError("prototype shape does not match config");
  const int worst = c.lead_silence_max +
                    c.words_max * (c.tokens_per_word * c.token_dur_max +
                                   c.gap_silence_max);
  if (worst > c.frames_max)
    throw DataError("config: frames_max too small for the duration ranges");

  Dataset data;
  Rng rng(seed);
  char idbuf[32];
  for (int i = 0; i < n_utts; ++i) {
    UtteranceData utt;
    std::snprintf(idbuf, sizeof(idbuf), "utt%05d", i);
    utt.rec.id = idbuf;

    const int n_words = rng.next_int(c.words_min, c.words_max);
    std::vector<int>& frame_labels = utt.true_frame_labels;
    for (int k = 0; k < rng.next_int(c.lead_silence_min, c.lead_silence_max);
         ++k)
      frame_labels.push_back(0);

    for (int w = 0; w < n_words; ++w) {
      WordBoundary wb;
      wb.token_begin = static_cast<int>(utt.rec.tokens.size());
      std::string word = "w";
      for (int k = 0; k < c.tokens_per_word; ++k) {
        const int tok = rng.next_int(1, c.vocab_size - 1);
        utt.rec.tokens.push_back(tok);
        if (k > 0) word += '_';
        word += std::to_string(tok);
        const int dur = rng.next_int(c.token_dur_min, c.token_dur_max);
        for (int d = 0; d < dur; ++d) frame_labels.push_back(tok);
      }
      wb.token_end = static_cast<int>(utt.rec.tokens.size()) - 1;
      wb.end_frame = static_cast<int>(frame_labels.size()) - 1;
      wb.word = std::move(word);
      utt.rec.words.push_back(std::move(wb));
      for (int k = 0; k < rng.next_int(c.gap_silence_min, c.gap_silence_max);
           ++k)
        frame_labels.push_back(0);
    }
    // Pad so every utterance is alignable and at least frames_min long.
    const int target =
        std::max(c.frames_min, ctc_min_frames(utt.rec.tokens));
    while (static_cast<int>(frame_labels.size()) < target)
      frame_labels.push_back(0);

    const int T = static_cast<int>(frame_labels.size());
    utt.rec.num_frames = T;
    utt.rec.feats_path = "feats/" + utt.rec.id + ".spk";
    utt.feats = Matrix(T, c.feature_dim);
    for (int t = 0; t < T; ++t) {
      const double* proto = task.prototypes.row(frame_labels[t]);
      for (int f = 0; f < c.feature_dim; ++f)
        utt.feats(t, f) = proto[f] + c.noise_level * rng.next_normal();
    }
    data.utts.push_back(std::move(utt));
  }
  return data;
}

void save_dataset(const Dataset& data, const std::string& dir) {
  std::filesystem::create_directories(dir + "/feats");
  std::vector<UtteranceRecord> records;
  std::vector<LabelRecord> truth;
  records.reserve(data.utts.size());
  for (const auto& utt : data.utts) {
    records.push_back(utt.rec);
    write_matrix(join_path(dir, utt.rec.feats_path), utt.feats);
    truth.push_back(make_hard_record(utt.rec.id, utt.true_frame_labels));
  }
  write_manifest(dir + "/manifest.tsv", records);
  write_label_records(dir + "/truth_labels.txt", truth);
}

Dataset load_dataset(const std::string& dir) {
  Dataset data;
  const auto records = read_manifest(dir + "/manifest.tsv");
  const auto truth = read_label_records(dir + "/truth_labels.txt");
  std::unordered_map<std::string, const LabelRecord*> by_id;
  for (const auto& r : truth) by_id[r.id] = &r;
  for (const auto& rec : records) {
    UtteranceData utt;
    utt.rec = rec;
    if (rec.feats_path.empty())
      throw DataError("utterance '" + rec.id + "' has no feats path");
    utt.feats = tensor_to_matrix(read_tensor(join_path(dir, rec.feats_path)));
    if (utt.feats.rows() != rec.num_frames)
      throw DataError("feature frames mismatch for '" + rec.id + "'");
    const auto it = by_id.find(rec.id);
    if (it == by_id.end())
      throw DataError("missing truth labels for '" + rec.id + "'");
    check_record_frames(*it->second, rec.num_frames);
    utt.true_frame_labels = it->second->tokens;
    data.utts.push_back(std::move(utt));
  }
  return data;
}

// ---------------------------------------------------------------------------
// Models

LinearModel init_model(int vocab, int feature_dim, int window, bool causal,
                       bool with_bigram, double scale, std::uint64_t seed) {
  if (vocab < 2 || feature_dim < 1 || window < 1)
    throw DataError("bad model shape");
  if (!causal && window % 2 == 0)
    throw DataError("symmetric window must be odd");
  LinearModel m;
  m.vocab = vocab;
  m.feature_dim = feature_dim;
  m.window = window;
  m.causal = causal;
  m.weights = Matrix(vocab, window * feature_dim);
  m.bias.assign(vocab, 0.0);
  Rng rng(seed);
  for (auto& w : m.weights.data()) w = scale * rng.next_normal();
  for (auto& b : m.bias) b = scale * rng.next_normal();
  if (with_bigram) {
    m.bigram = Matrix(vocab, vocab);
    for (auto& w : m.bigram.data()) w = scale * rng.next_normal();
  }
  return m;
}

Matrix model_logits(const LinearModel& m, const Matrix& feats) {
  if (feats.cols() != m.feature_dim)
    throw DataError("feature dim mismatch");
  const int T = feats.rows();
  const int F = m.feature_dim;
  const int start = window_start(m);
  Matrix logits(T, m.vocab);
  for (int t = 0; t < T; ++t) {
    for (int v = 0; v < m.vocab; ++v) {
      double acc = m.bias[v];
      for (int slot = 0; slot < m.window; ++slot) {
        const int src = t + start + slot;
        if (src < 0 || src >= T) continue;
        const double* w = m.weights.row(v) + slot * F;
        const double* x = feats.row(src);
        for (int f = 0; f < F; ++f) acc += w[f] * x[f];
      }
      logits(t, v) = acc;
    }
  }
  return logits;
}

JointScorer make_scorer(const LinearModel& model, const Matrix& feats) {
  if (model.bigram.rows() == 0)
    throw DataError("model has no bigram table; cannot build a joint scorer");
  auto enc = std::make_shared<Matrix>(model_logits(model, feats));
  auto bigram = std::make_shared<Matrix>(model.bigram);
  const int vocab = model.vocab;
  return [enc, bigram, vocab](int t, const std::vector<int>& history) {
    if (t < 0 || t >= enc->rows()) throw DataError("scorer frame out of range");
    const int ctx = history.empty() ? 0 : history.back();
    std::vector<double> out(vocab);
    for (int v = 0; v < vocab; ++v) out[v] = (*enc)(t, v) + (*bigram)(ctx, v);
    return out;
  };
}

// ---------------------------------------------------------------------------
// Training stages

TrainCurve train_teacher(LinearModel* model, const Dataset& data, int epochs,
                         double lr, int jobs) {
  return run_epochs(
      model, static_cast<int>(data.utts.size()), epochs, lr, jobs,
      "teacher training", [&data](const LinearModel& m, int i) {
        const auto& utt = data.utts[i];
        const Matrix logits = model_logits(m, utt.feats);
        const CtcResult res = ctc_loss_grad(logits, utt.rec.tokens);
        ParamGrad g = zero_grad(m);
        g.loss = res.loss;
        accumulate_encoder_grad(m, utt.feats, res.grad, &g);
        return g;
      });
}

TrainCurve pretrain_student(LinearModel* model, const Dataset& data,
                            const std::vector<LabelRecord>& records,
                            int epochs, double lr, int jobs) {
  std::unordered_map<std::string, const LabelRecord*> by_id;
  for (const auto& r : records) by_id[r.id] = &r;
  // Utterances without a simulated record (skipped alignments) drop out of
  // pre-training.
  std::vector<std::pair<const UtteranceData*, const LabelRecord*>> usable;
  for (const auto& utt : data.utts) {
    const auto it = by_id.find(utt.rec.id);
    if (it == by_id.end()) continue;
    check_record_frames(*it->second, utt.rec.num_frames);
    usable.emplace_back(&utt, it->second);
  }
  if (usable.empty())
    throw DataError("pre-training: no utterance has a label record");

  return run_epochs(
      model, static_cast<int>(usable.size()), epochs, lr, jobs,
      "pre-training", [&usable](const LinearModel& m, int i) {
        const auto& [utt, record] = usable[i];
        const Matrix logits = model_logits(m, utt->feats);
        FramewiseLoss res;
        if (record->soft)
          res = soft_ce_loss_grad(logits, soft_frames_from_record(*record));
        else
          res = hard_ce_loss_grad(logits, record->tokens);
        ParamGrad g = zero_grad(m);
        g.loss = res.loss;
        accumulate_encoder_grad(m, utt->feats, res.grad, &g);
        return g;
      });
}

TrainCurve train_student_transducer(LinearModel* model, const Dataset& data,
                                    int epochs, double lr, int jobs) {
  if (model->bigram.rows() == 0)
    throw DataError("transducer training needs a model with a bigram table");
  return run_epochs(
      model, static_cast<int>(data.utts.size()), epochs, lr, jobs,
      "transducer training", [&data](const LinearModel& m, int i) {
        const auto& utt = data.utts[i];
        const auto& labels = utt.rec.tokens;
        const int T = utt.rec.num_frames;
        const int U = static_cast<int>(labels.size());
        const int V = m.vocab;
        const Matrix enc = model_logits(m, utt.feats);

        Tensor3 lattice(T, U + 1, V);
        for (int u = 0; u <= U; ++u) {
          const int ctx = u == 0 ? 0 : labels[u - 1];
          for (int t = 0; t < T; ++t) {
            double* row = lattice.row(t, u);
            const double* e = enc.row(t);
            const double* b = m.bigram.row(ctx);
            for (int v = 0; v < V; ++v) row[v] = e[v] + b[v];
          }
        }
        const RnntResult res = rnnt_loss_grad(lattice, labels);

        // Normalize per utterance by the alignment path length so gradient
        // magnitudes do not scale with T+U and one learning rate serves all
        // utterance lengths.
        const double inv_len = 1.0 / (T + U);
        ParamGrad g = zero_grad(m);
        g.loss = res.loss * inv_len;
        Matrix enc_grad(T, V);
        for (int t = 0; t < T; ++t) {
          for (int u = 0; u <= U; ++u) {
            const int ctx = u == 0 ? 0 : labels[u - 1];
            const double* gr = res.grad.row(t, u);
            double* eg = enc_grad.row(t);
            double* bg = g.bigram.row(ctx);
            for (int v = 0; v < V; ++v) {
              eg[v] += gr[v] * inv_len;
              bg[v] += gr[v] * inv_len;
            }
          }
        }
        accumulate_encoder_grad(m, utt.feats, enc_grad, &g);
        return g;
      });
}

SimulateStats simulate_labels(const LinearModel& teacher, const Dataset& data,
                              const ExpansionConfig& config, LabelMode mode,
                              AlignMode align_mode,
                              std::vector<LabelRecord>* records) {
  validate_expansion_config(config);
  SimulateStats stats;
  for (const auto& utt : data.utts) {
    try {
      const Matrix logits = model_logits(teacher, utt.feats);
      const AlignmentPath path =
          align_mode == AlignMode::kViterbi
              ? ctc_best_path(logits, utt.rec.tokens)
              : ctc_occupation_argmax(logits, utt.rec.tokens);
      const int T = utt.rec.num_frames;
      if (mode == LabelMode::kHard)
        records->push_back(
            make_hard_record(utt.rec.id, expand_hard(path.segments, T, config)));
      else
        records->push_back(
            make_soft_record(utt.rec.id, expand_soft(path.segments, T, config)));
      ++stats.simulated;
    } catch (const DataError&) {
      ++stats.skipped;
    } catch (const NumericError&) {
      ++stats.skipped;
    }
  }
  return stats;
}

double frame_accuracy(const LinearModel& model, const Dataset& data) {
  long correct = 0, total = 0;
  for (const auto& utt : data.utts) {
    const Matrix logits = model_logits(model, utt.feats);
    for (int t = 0; t < logits.rows(); ++t) {
      int best = 0;
      for (int v = 1; v < logits.cols(); ++v)
        if (logits(t, v) > logits(t, best)) best = v;
      correct += best == utt.true_frame_labels[t] ? 1 : 0;
      ++total;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / total;
}

// ---------------------------------------------------------------------------
// Evaluation

EvalReport evaluate_decodes(const std::vector<DecodeResult>& decodes,
                            const Dataset& data, double frame_ms) {
  if (data.utts.empty()) throw DataError("empty eval set");
  if (decodes.size() != data.utts.size())
    throw DataError("decode count does not match eval set");

  EvalReport report;
  std::vector<UtteranceEval> evals;
  for (std::size_t i = 0; i < data.utts.size(); ++i) {
    const auto& utt = data.utts[i];
    std::vector<std::string> hyp, ref;
    for (int v : decodes[i].tokens) hyp.push_back(std::to_string(v));
    for (int v : utt.rec.tokens) ref.push_back(std::to_string(v));
    const WerResult w = wer(hyp, ref);
    report.substitutions += w.substitutions;
    report.insertions += w.insertions;
    report.deletions += w.deletions;
    report.ref_tokens += static_cast<int>(ref.size());

    UtteranceEval e;
    e.id = utt.rec.id;
    e.ref_tokens = utt.rec.tokens;
    e.words = utt.rec.words;
    e.decode = decodes[i];
    evals.push_back(std::move(e));
  }
  report.wer = static_cast<double>(report.substitutions + report.insertions +
                                   report.deletions) /
               report.ref_tokens;
  report.latency = emission_latency(evals, frame_ms);
  report.decodes = decodes;
  return report;
}

EvalReport evaluate(const LinearModel& model, const Dataset& data,
                    double frame_ms, int max_symbols_per_frame) {
  if (data.utts.empty()) throw DataError("empty eval set");
  std::vector<DecodeResult> decodes(data.utts.size());
  for (std::size_t i = 0; i < data.utts.size(); ++i) {
    const auto& utt = data.utts[i];
    decodes[i] = greedy_decode(make_scorer(model, utt.feats),
                               utt.rec.num_frames, max_symbols_per_frame);
  }
  return evaluate_decodes(decodes, data, frame_ms);
}

// ---------------------------------------------------------------------------
// End-to-end experiment

namespace {

ModelOutcome outcome_from(const std::string& name, const EvalReport& eval,
                          const TrainCurve& curve) {
  ModelOutcome o;
  o.name = name;
  o.wer = eval.wer;
  o.el50_ms = eval.latency.el50_ms;
  o.el90_ms = eval.latency.el90_ms;
  o.latency_words = static_cast<int>(eval.latency.per_word.size());
  o.utts_used = eval.latency.num_utts_used;
  o.curve = curve.epoch_loss;
  return o;
}

void write_decode_lines(const std::string& path, const Dataset& data,
                        const std::vector<DecodeResult>& decodes) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot open for write: " + path);
  for (std::size_t i = 0; i < decodes.size(); ++i) {
    os << data.utts[i].rec.id << '\t';
    for (std::size_t k = 0; k < decodes[i].tokens.size(); ++k) {
      if (k > 0) os << ' ';
      os << decodes[i].tokens[k] << '@' << decodes[i].emission_frames[k];
    }
    os << '\n';
  }
}

}  // namespace

ToyRunReport toy_run(const TaskConfig& cfg, const std::string& out_dir) {
  validate_config(cfg);
  const bool save = !out_dir.empty();
  if (save) std::filesystem::create_directories(out_dir);

  const SyntheticTask task = make_task(cfg);
  const Dataset train = generate_dataset(task, cfg.train_utts,
                                         stage_seed(cfg.seed, 1));
  const Dataset eval = generate_dataset(task, cfg.eval_utts,
                                        stage_seed(cfg.seed, 2));
  if (save) {
    write_config(out_dir + "/config.used", cfg);
    save_dataset(train, out_dir + "/train");
    save_dataset(eval, out_dir + "/eval");
  }

  ToyRunReport report;
  report.seed = cfg.seed;

  // Stage 1: non-streaming teacher trained on the alignment criterion.
  LinearModel teacher =
      init_model(cfg.vocab_size, cfg.feature_dim, cfg.teacher_window,
                 /*causal=*/false, /*with_bigram=*/false, cfg.init_scale,
                 stage_seed(cfg.seed, 3));
  report.teacher_curve =
      train_teacher(&teacher, train, cfg.teacher_epochs, cfg.teacher_lr,
                    cfg.jobs)
          .epoch_loss;

  // Stage 2: simulate frame-wise labels from the teacher's alignment and
  // pre-train a causal student on them.
  const ExpansionConfig expansion{cfg.r_left, cfg.r_right};
  std::vector<LabelRecord> hard_records, soft_records;
  const SimulateStats hard_stats =
      simulate_labels(teacher, train, expansion, LabelMode::kHard,
                      AlignMode::kViterbi, &hard_records);
  const SimulateStats soft_stats =
      simulate_labels(teacher, train, expansion, LabelMode::kSoft,
                      AlignMode::kViterbi, &soft_records);
  report.hard_skipped = hard_stats.skipped;
  report.soft_skipped = soft_stats.skipped;
  if (save) {
    write_label_records(out_dir + "/labels_hard.txt", hard_records);
    write_label_records(out_dir + "/labels_soft.txt", soft_records);
  }

  const LinearModel student_init =
      init_model(cfg.vocab_size, cfg.feature_dim, cfg.student_window,
                 /*causal=*/true, /*with_bigram=*/false, cfg.init_scale,
                 stage_seed(cfg.seed, 4));
  LinearModel hard_student = student_init;
  pretrain_student(&hard_student, train, hard_records, cfg.pretrain_epochs,
                   cfg.pretrain_lr, cfg.jobs);
  LinearModel soft_student = student_init;
  pretrain_student(&soft_student, train, soft_records, cfg.pretrain_epochs,
                   cfg.pretrain_lr, cfg.jobs);

  // Stage 3: streaming transducer from scratch vs from the pre-trained
  // encoder; prediction/joint side starts identically in all three runs.
  const LinearModel transducer_init =
      init_model(cfg.vocab_size, cfg.feature_dim, cfg.student_window,
                 /*causal=*/true, /*with_bigram=*/true, cfg.init_scale,
                 stage_seed(cfg.seed, 5));

  auto build = [&](const LinearModel* encoder) {
    LinearModel m = transducer_init;
    if (encoder != nullptr) {
      m.weights = encoder->weights;
      m.bias = encoder->bias;
    }
    return m;
  };

  LinearModel scratch = build(nullptr);
  LinearModel hard_rnnt = build(&hard_student);
  LinearModel soft_rnnt = build(&soft_student);

  const TrainCurve scratch_curve = train_student_transducer(
      &scratch, train, cfg.transducer_epochs, cfg.transducer_lr, cfg.jobs);
  const TrainCurve hard_curve = train_student_transducer(
      &hard_rnnt, train, cfg.transducer_epochs, cfg.transducer_lr, cfg.jobs);
  const TrainCurve soft_curve = train_student_transducer(
      &soft_rnnt, train, cfg.transducer_epochs, cfg.transducer_lr, cfg.jobs);

  const EvalReport scratch_eval =
      evaluate(scratch, eval, cfg.frame_ms, cfg.max_symbols_per_frame);
  const EvalReport hard_eval =
      evaluate(hard_rnnt, eval, cfg.frame_ms, cfg.max_symbols_per_frame);
  const EvalReport soft_eval =
      evaluate(soft_rnnt, eval, cfg.frame_ms, cfg.max_symbols_per_frame);

  report.scratch = outcome_from("scratch", scratch_eval, scratch_curve);
  report.hard = outcome_from("pretrain-hard", hard_eval, hard_curve);
  report.soft = outcome_from("pretrain-soft", soft_eval, soft_curve);

  if (save) {
    write_decode_lines(out_dir + "/decodes_scratch.txt", eval,
                       scratch_eval.decodes);
    write_decode_lines(out_dir + "/decodes_hard.txt", eval, hard_eval.decodes);
    write_decode_lines(out_dir + "/decodes_soft.txt", eval, soft_eval.decodes);
    std::ofstream os(out_dir + "/report.json", std::ios::trunc);
    os << toy_report_json(report) << '\n';
    if (!os) throw DataError("write failed: " + out_dir + "/report.json");
  }
  return report;
}

namespace {

nlohmann::json outcome_json(const ModelOutcome& o) {
  nlohmann::json j;
  j["name"] = o.name;
  j["wer"] = o.wer;
  j["el50_ms"] = o.el50_ms;
  j["el90_ms"] = o.el90_ms;
  j["latency_words"] = o.latency_words;
  j["utts_matched"] = o.utts_used;
  j["curve"] = o.curve;
  return j;
}

}  // namespace

std::string toy_report_json(const ToyRunReport& report) {
  nlohmann::json j;
  j["seed"] = report.seed;
  j["teacher_curve"] = report.teacher_curve;
  j["hard_skipped"] = report.hard_skipped;
  j["soft_skipped"] = report.soft_skipped;
  j["models"]["scratch"] = outcome_json(report.scratch);
  j["models"]["pretrain_hard"] = outcome_json(report.hard);
  j["models"]["pretrain_soft"] = outcome_json(report.soft);
  return j.dump(2);
}

std::string toy_report_summary(const ToyRunReport& report) {
  char line[160];
  std::string out;
  std::snprintf(line, sizeof(line), "%-14s %8s %9s %9s %8s\n", "model", "wer%",
                "el50_ms", "el90_ms", "matched");
  out += line;
  for (const ModelOutcome* o : {&report.scratch, &report.hard, &report.soft}) {
    std::snprintf(line, sizeof(line), "%-14s %8.3f %9.1f %9.1f %8d\n",
                  o->name.c_str(), 100.0 * o->wer, o->el50_ms, o->el90_ms,
                  o->utts_used);
    out += line;
  }
  return out;
}

}  // namespace spikealign
