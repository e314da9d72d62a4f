// tools/spikealign.cc

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

// Command-line front end: one subcommand per pipeline stage. All numeric
// outputs go to files; stdout carries a one-line summary per invocation.
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "spikealign/ctc.hpp"
#include "spikealign/error.hpp"
#include "spikealign/framewise_loss.hpp"
#include "spikealign/label_sim.hpp"
#include "spikealign/metrics.hpp"
#include "spikealign/pipeline.hpp"
#include "spikealign/tensor_io.hpp"
#include "spikealign/transducer.hpp"

using namespace spikealign;

namespace {

std::vector<int> parse_token_list(const std::string& text) {
  std::vector<int> out;
  std::string cur;
  auto flush = [&] {
    if (cur.empty()) return;
    out.push_back(std::stoi(cur));
    cur.clear();
  };
  for (char c : text) {
    if (c == ',' || c == ' ') {
      flush();
    } else if (c >= '0' && c <= '9') {
      cur.push_back(c);
    } else {
      throw DataError("bad token list '" + text + "'");
    }
  }
  flush();
  return out;
}

// Reads `id<TAB>word word ...` lines (reference / hypothesis text).
std::map<std::string, std::vector<std::string>> read_text_lines(
    const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open: " + path);
  std::map<std::string, std::vector<std::string>> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0)
      throw DataError("malformed line in " + path);
    std::istringstream rest(line.substr(tab + 1));
    std::vector<std::string> words;
    std::string w;
    while (rest >> w) words.push_back(w);
    out[line.substr(0, tab)] = std::move(words);
  }
  return out;
}

// Reads decode lines `id<TAB>tok@frame tok@frame ...`.
std::map<std::string, DecodeResult> read_decode_lines(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open: " + path);
  std::map<std::string, DecodeResult> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0)
      throw DataError("malformed decode line in " + path);
    DecodeResult dec;
    std::istringstream rest(line.substr(tab + 1));
    std::string field;
    while (rest >> field) {
      const auto at = field.find('@');
      if (at == std::string::npos)
        throw DataError("malformed decode entry '" + field + "' in " + path);
      dec.tokens.push_back(std::stoi(field.substr(0, at)));
      dec.emission_frames.push_back(std::stoi(field.substr(at + 1)));
    }
    out[line.substr(0, tab)] = std::move(dec);
  }
  return out;
}

void write_decode_line(const std::string& path, const std::string& id,
                       const DecodeResult& dec) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot open for write: " + path);
  os << id << '\t';
  for (std::size_t i = 0; i < dec.tokens.size(); ++i) {
    if (i > 0) os << ' ';
    os << dec.tokens[i] << '@' << dec.emission_frames[i];
  }
  os << '\n';
}

const LabelRecord& find_record(const std::vector<LabelRecord>& records,
                               const std::string& id) {
  if (id.empty()) {
    if (records.size() == 1) return records.front();
    throw DataError("label file holds several records; pass --id");
  }
  for (const auto& r : records)
    if (r.id == id) return r;
  throw DataError("no record with id '" + id + "'");
}

TaskConfig load_toy_config(const std::string& explicit_path) {
  if (!explicit_path.empty()) return parse_config_file(explicit_path);
  if (const char* env = std::getenv("SPIKEALIGN_CONFIG"))
    if (env[0] != '\0') return parse_config_file(env);
  return TaskConfig{};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CTC spike alignment, frame-wise label simulation, and "
               "transducer training tools"};
  app.require_subcommand(1);
  std::function<void()> action;

  // --- ctc-loss --------------------------------------------------------
  {
    auto* cmd = app.add_subcommand("ctc-loss",
                                   "Alignment loss and gradient for one "
                                   "utterance's logit tensor");
    auto logits_path = std::make_shared<std::string>();
    auto tokens_text = std::make_shared<std::string>();
    auto grad_out = std::make_shared<std::string>();
    cmd->add_option("--logits", *logits_path, "T x V logit tensor")->required();
    cmd->add_option("--tokens", *tokens_text, "label tokens, e.g. '1,2,3'")
        ->required();
    cmd->add_option("--grad-out", *grad_out, "write the gradient tensor here");
    cmd->callback([=, &action] {
      action = [=] {
        const Matrix logits = tensor_to_matrix(read_tensor(*logits_path));
        const CtcResult res =
            ctc_loss_grad(logits, parse_token_list(*tokens_text));
        if (!grad_out->empty()) write_matrix(*grad_out, res.grad);
        std::printf("loss=%.9g\n", res.loss);
      };
    });
  }

  // --- ctc-align -------------------------------------------------------
  {
    auto* cmd = app.add_subcommand("ctc-align",
                                   "Constrained best-path alignment of one "
                                   "utterance");
    auto logits_path = std::make_shared<std::string>();
    auto tokens_text = std::make_shared<std::string>();
    auto out_path = std::make_shared<std::string>();
    auto id = std::make_shared<std::string>("utt0");
    auto mode = std::make_shared<std::string>("viterbi");
    cmd->add_option("--logits", *logits_path, "T x V logit tensor")->required();
    cmd->add_option("--tokens", *tokens_text, "label tokens")->required();
    cmd->add_option("--out", *out_path, "write the per-frame alignment record")
        ->required();
    cmd->add_option("--id", *id, "utterance id for the record");
    cmd->add_option("--mode", *mode, "viterbi | occupation-argmax")
        ->check(CLI::IsMember({"viterbi", "occupation-argmax"}));
    cmd->callback([=, &action] {
      action = [=] {
        const Matrix logits = tensor_to_matrix(read_tensor(*logits_path));
        const auto labels = parse_token_list(*tokens_text);
        const AlignmentPath path = *mode == "viterbi"
                                       ? ctc_best_path(logits, labels)
                                       : ctc_occupation_argmax(logits, labels);
        std::vector<int> frame_tokens(logits.rows(), 0);
        for (const auto& seg : path.segments)
          for (int t = seg.begin; t <= seg.end; ++t)
            frame_tokens[t] = seg.token;
        write_label_records(*out_path, {make_hard_record(*id, frame_tokens)});
        std::printf("id=%s segments=%zu log_prob=%.6g\n", id->c_str(),
                    path.segments.size(), path.log_prob);
        for (const auto& seg : path.segments)
          std::printf("  token=%d frames=%d..%d\n", seg.token, seg.begin,
                      seg.end);
      };
    });
  }

  // --- simulate-labels -------------------------------------------------
  {
    auto* cmd = app.add_subcommand("simulate-labels",
                                   "Expand teacher alignments into frame-wise "
                                   "labels for a whole manifest");
    auto manifest = std::make_shared<std::string>();
    auto out_path = std::make_shared<std::string>();
    auto mode = std::make_shared<std::string>("hard");
    auto align = std::make_shared<std::string>("viterbi");
    auto r_left = std::make_shared<double>(0.2);
    auto r_right = std::make_shared<double>(0.6);
    cmd->add_option("--manifest", *manifest,
                    "manifest with logits= entries per utterance")
        ->required();
    cmd->add_option("--out", *out_path, "label record output")->required();
    cmd->add_option("--mode", *mode, "hard | soft")
        ->check(CLI::IsMember({"hard", "soft"}));
    cmd->add_option("--alignment", *align, "viterbi | occupation-argmax")
        ->check(CLI::IsMember({"viterbi", "occupation-argmax"}));
    cmd->add_option("--r-left", *r_left, "left expansion ratio (default 0.2)");
    cmd->add_option("--r-right", *r_right,
                    "right expansion ratio (default 0.6)");
    cmd->callback([=, &action] {
      action = [=] {
        const ExpansionConfig config{*r_left, *r_right};
        validate_expansion_config(config);
        const auto records = read_manifest(*manifest);
        const std::string base = parent_dir(*manifest);
        std::vector<LabelRecord> out;
        int skipped = 0;
        for (const auto& rec : records) {
          if (rec.logits_path.empty())
            throw DataError("utterance '" + rec.id + "' has no logits path");
          const Matrix logits =
              tensor_to_matrix(read_tensor(join_path(base, rec.logits_path)));
          if (logits.rows() != rec.num_frames)
            throw DataError("logit frames mismatch for '" + rec.id + "'");
          try {
            const AlignmentPath path =
                *align == "viterbi"
                    ? ctc_best_path(logits, rec.tokens)
                    : ctc_occupation_argmax(logits, rec.tokens);
            if (*mode == "hard")
              out.push_back(make_hard_record(
                  rec.id, expand_hard(path.segments, rec.num_frames, config)));
            else
              out.push_back(make_soft_record(
                  rec.id, expand_soft(path.segments, rec.num_frames, config)));
          } catch (const DataError& e) {
            std::fprintf(stderr, "warning: skipping %s: %s\n", rec.id.c_str(),
                         e.what());
            ++skipped;
          }
        }
        write_label_records(*out_path, out);
        std::printf("simulated=%zu skipped=%d out=%s\n", out.size(), skipped,
                    out_path->c_str());
      };
    });
  }

  // --- pretrain-loss ---------------------------------------------------
  {
    auto* cmd = app.add_subcommand("pretrain-loss",
                                   "Frame-wise CE loss of a prediction tensor "
                                   "against simulated labels");
    auto pred_path = std::make_shared<std::string>();
    auto labels_path = std::make_shared<std::string>();
    auto id = std::make_shared<std::string>();
    auto grad_out = std::make_shared<std::string>();
    cmd->add_option("--pred", *pred_path, "T x V prediction logits tensor")
        ->required();
    cmd->add_option("--labels", *labels_path, "label record file")->required();
    cmd->add_option("--id", *id, "record id (optional for single-record files)");
    cmd->add_option("--grad-out", *grad_out, "write the gradient tensor here");
    cmd->callback([=, &action] {
      action = [=] {
        const Matrix pred = tensor_to_matrix(read_tensor(*pred_path));
        const auto records = read_label_records(*labels_path);
        const LabelRecord& rec = find_record(records, *id);
        check_record_frames(rec, pred.rows());
        FramewiseLoss res;
        if (rec.soft)
          res = soft_ce_loss_grad(pred, soft_frames_from_record(rec));
        else
          res = hard_ce_loss_grad(pred, rec.tokens);
        if (!grad_out->empty()) write_matrix(*grad_out, res.grad);
        std::printf("loss=%.9g mode=%s\n", res.loss, rec.soft ? "soft" : "hard");
      };
    });
  }

  // --- rnnt-loss -------------------------------------------------------
  {
    auto* cmd = app.add_subcommand("rnnt-loss",
                                   "Transducer lattice loss and gradient");
    auto lattice_path = std::make_shared<std::string>();
    auto tokens_text = std::make_shared<std::string>();
    auto grad_out = std::make_shared<std::string>();
    cmd->add_option("--lattice", *lattice_path, "T x (U+1) x V score tensor")
        ->required();
    cmd->add_option("--tokens", *tokens_text,
                    "label tokens; empty string for U=0");
    cmd->add_option("--grad-out", *grad_out, "write the gradient tensor here");
    cmd->callback([=, &action] {
      action = [=] {
        const Tensor3 lattice = tensor_to_tensor3(read_tensor(*lattice_path));
        const RnntResult res =
            rnnt_loss_grad(lattice, parse_token_list(*tokens_text));
        if (!grad_out->empty()) write_tensor3(*grad_out, res.grad);
        std::printf("loss=%.9g\n", res.loss);
      };
    });
  }

  // --- decode ----------------------------------------------------------
  {
    auto* cmd = app.add_subcommand("decode",
                                   "Greedy or beam decode from encoder logits "
                                   "plus an optional bigram bias");
    auto logits_path = std::make_shared<std::string>();
    auto bigram_path = std::make_shared<std::string>();
    auto out_path = std::make_shared<std::string>();
    auto id = std::make_shared<std::string>("utt0");
    auto beam = std::make_shared<int>(10);
    auto max_symbols = std::make_shared<int>(4);
    auto greedy = std::make_shared<bool>(false);
    cmd->add_option("--logits", *logits_path, "T x V encoder logits tensor")
        ->required();
    cmd->add_option("--bigram", *bigram_path, "V x V bias tensor (optional)");
    cmd->add_option("--out", *out_path, "decode line output")->required();
    cmd->add_option("--id", *id, "utterance id");
    cmd->add_option("--beam", *beam, "beam size (default 10)");
    cmd->add_option("--max-symbols", *max_symbols,
                    "max non-blank emissions per frame (default 4)");
    cmd->add_flag("--greedy", *greedy, "use the greedy decoder");
    cmd->callback([=, &action] {
      action = [=] {
        const Matrix enc = tensor_to_matrix(read_tensor(*logits_path));
        Matrix bigram;
        if (!bigram_path->empty()) {
          bigram = tensor_to_matrix(read_tensor(*bigram_path));
          if (bigram.rows() != enc.cols() || bigram.cols() != enc.cols())
            throw DataError("bigram tensor must be V x V");
        }
        const int vocab = enc.cols();
        const JointScorer scorer = [&enc, &bigram, vocab](
                                       int t, const std::vector<int>& h) {
          std::vector<double> out(vocab);
          const int ctx = h.empty() ? 0 : h.back();
          for (int v = 0; v < vocab; ++v)
            out[v] = enc(t, v) + (bigram.rows() > 0 ? bigram(ctx, v) : 0.0);
          return out;
        };
        const DecodeResult dec =
            *greedy ? greedy_decode(scorer, enc.rows(), *max_symbols)
                    : beam_decode(scorer, enc.rows(), *beam, *max_symbols);
        write_decode_line(*out_path, *id, dec);
        std::printf("id=%s tokens=%zu score=%.6g\n", id->c_str(),
                    dec.tokens.size(), dec.score);
      };
    });
  }

  // --- wer --------------------------------------------------------------
  {
    auto* cmd = app.add_subcommand("wer", "Word error rate of hypothesis vs "
                                          "reference text files");
    auto hyp_path = std::make_shared<std::string>();
    auto ref_path = std::make_shared<std::string>();
    auto out_path = std::make_shared<std::string>();
    cmd->add_option("--hyp", *hyp_path, "id<TAB>words per line")->required();
    cmd->add_option("--ref", *ref_path, "id<TAB>words per line")->required();
    cmd->add_option("--out", *out_path, "per-utterance results (optional)");
    cmd->callback([=, &action] {
      action = [=] {
        const auto hyps = read_text_lines(*hyp_path);
        const auto refs = read_text_lines(*ref_path);
        int sub = 0, ins = 0, del = 0, ref_words = 0;
        std::ostringstream per_utt;
        for (const auto& [id, ref] : refs) {
          const auto it = hyps.find(id);
          if (it == hyps.end())
            throw DataError("hypothesis missing for utterance '" + id + "'");
          const WerResult r = wer(it->second, ref);
          sub += r.substitutions;
          ins += r.insertions;
          del += r.deletions;
          ref_words += static_cast<int>(ref.size());
          per_utt << id << "\twer=" << r.rate << "\tsub=" << r.substitutions
                  << "\tins=" << r.insertions << "\tdel=" << r.deletions
                  << '\n';
        }
        for (const auto& [id, words] : hyps)
          if (!refs.count(id))
            throw DataError("hypothesis for unknown utterance '" + id + "'");
        if (ref_words == 0) throw DataError("no reference words");
        if (!out_path->empty()) {
          std::ofstream os(*out_path, std::ios::trunc);
          os << per_utt.str();
          if (!os) throw DataError("write failed: " + *out_path);
        }
        std::printf("wer=%.6f sub=%d ins=%d del=%d ref_words=%d utts=%zu\n",
                    static_cast<double>(sub + ins + del) / ref_words, sub, ins,
                    del, ref_words, refs.size());
      };
    });
  }

  // --- latency ----------------------------------------------------------
  {
    auto* cmd = app.add_subcommand("latency",
                                   "Emission latency report from decode lines "
                                   "and a reference manifest");
    auto decodes_path = std::make_shared<std::string>();
    auto manifest = std::make_shared<std::string>();
    auto out_path = std::make_shared<std::string>();
    auto frame_ms = std::make_shared<double>();
    cmd->add_option("--decodes", *decodes_path, "decode lines")->required();
    cmd->add_option("--manifest", *manifest,
                    "manifest with words= boundaries")
        ->required();
    cmd->add_option("--frame-ms", *frame_ms, "milliseconds per frame")
        ->required();
    cmd->add_option("--out", *out_path, "JSON report (optional)");
    cmd->callback([=, &action] {
      action = [=] {
        const auto decodes = read_decode_lines(*decodes_path);
        std::vector<UtteranceEval> evals;
        for (const auto& rec : read_manifest(*manifest)) {
          const auto it = decodes.find(rec.id);
          if (it == decodes.end())
            throw DataError("no decode line for utterance '" + rec.id + "'");
          UtteranceEval e;
          e.id = rec.id;
          e.ref_tokens = rec.tokens;
          e.words = rec.words;
          e.decode = it->second;
          evals.push_back(std::move(e));
        }
        const LatencyReport rep = emission_latency(evals, *frame_ms);
        if (!out_path->empty()) {
          nlohmann::json j;
          j["frame_ms"] = *frame_ms;
          j["el50_ms"] = rep.el50_ms;
          j["el90_ms"] = rep.el90_ms;
          j["utts_used"] = rep.num_utts_used;
          j["words"] = nlohmann::json::array();
          for (const auto& w : rep.per_word)
            j["words"].push_back({{"word", w.word},
                                  {"latency_frames", w.latency_frames},
                                  {"latency_ms", w.latency_ms}});
          std::ofstream os(*out_path, std::ios::trunc);
          os << j.dump(2) << '\n';
          if (!os) throw DataError("write failed: " + *out_path);
        }
        std::printf("el50_ms=%.3f el90_ms=%.3f words=%zu utts_used=%d\n",
                    rep.el50_ms, rep.el90_ms, rep.per_word.size(),
                    rep.num_utts_used);
      };
    });
  }

  // --- toy-run -----------------------------------------------------------
  {
    auto* cmd = app.add_subcommand("toy-run",
                                   "Run the full three-stage experiment on "
                                   "synthetic data");
    auto config_path = std::make_shared<std::string>();
    auto out_dir = std::make_shared<std::string>("toy_out");
    auto seed = std::make_shared<std::int64_t>(-1);
    auto jobs = std::make_shared<int>(-1);
    cmd->add_option("--config", *config_path,
                    "config file (default: $SPIKEALIGN_CONFIG or built-ins)");
    cmd->add_option("--out", *out_dir, "artifact directory (default toy_out)");
    cmd->add_option("--seed", *seed, "override the config seed");
    cmd->add_option("--jobs", *jobs, "worker threads (0 = all cores)");
    cmd->callback([=, &action] {
      action = [=] {
        TaskConfig cfg = load_toy_config(*config_path);
        if (*seed >= 0) cfg.seed = static_cast<std::uint64_t>(*seed);
        if (*jobs >= 0) cfg.jobs = *jobs;
        const ToyRunReport report = toy_run(cfg, *out_dir);
        std::printf("%s", toy_report_summary(report).c_str());
        std::printf("report=%s/report.json\n", out_dir->c_str());
      };
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    action();
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return 3;
  } catch (const DataError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
