// tests/test_cli.cc

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

// Spawns the real CLI binary (argv[1]) and checks exit codes, diagnostics,
// and output files for every subcommand.

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "spikealign/ctc.hpp"
#include "spikealign/pipeline.hpp"
#include "spikealign/tensor_io.hpp"

using namespace spikealign;

namespace {

int g_failures = 0;

void expect(bool ok, const std::string& what) {
  if (ok) {
    std::printf("[ok] %s\n", what.c_str());
  } else {
    std::printf("[FAILED] %s\n", what.c_str());
    ++g_failures;
  }
}

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string g_bin;
std::string g_dir;

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(is)),
                     std::istreambuf_iterator<char>());
}

RunResult run(const std::string& args, const std::string& env = "") {
  const std::string out_file = g_dir + "/stdout.txt";
  const std::string err_file = g_dir + "/stderr.txt";
  const std::string cmd =
      env + " '" + g_bin + "' " + args + " >" + out_file + " 2>" + err_file;
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = status < 0 ? status : WEXITSTATUS(status);
  r.out = slurp(out_file);
  r.err = slurp(err_file);
  return r;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: test_cli <path-to-spikealign-binary>\n");
    return 2;
  }
  g_bin = argv[1];
  g_dir = (std::filesystem::temp_directory_path() / "spikealign_cli_test")
              .string();
  std::filesystem::remove_all(g_dir);
  std::filesystem::create_directories(g_dir);

  // help and usage errors
  expect(run("--help").exit_code == 0, "--help exits 0");
  expect(run("ctc-loss --help").exit_code == 0, "subcommand --help exits 0");
  expect(run("no-such-command").exit_code == 1, "unknown subcommand exits 1");
  expect(run("ctc-loss --bogus x").exit_code == 1, "unknown flag exits 1");
  expect(run("ctc-loss").exit_code == 1, "missing required options exit 1");

  // ctc-loss on a small tensor
  {
    const std::string logits = g_dir + "/logits.spk";
    write_tensor(logits, {2, 2}, {0, 0, 0, 0});
    const std::string grad = g_dir + "/grad.spk";
    const RunResult r = run("ctc-loss --logits " + logits +
                            " --tokens 1 --grad-out " + grad);
    expect(r.exit_code == 0, "ctc-loss exits 0");
    expect(r.out.find("loss=0.28768") != std::string::npos,
           "ctc-loss prints -log(3/4)");
    expect(read_tensor(grad).dims == std::vector<int>{2, 2},
           "ctc-loss writes a T x V gradient");
    expect(run("ctc-loss --logits " + logits + " --tokens 1,1").exit_code == 2,
           "infeasible labels exit 2 (data error)");
    expect(run("ctc-loss --logits " + g_dir + "/absent.spk --tokens 1")
               .exit_code == 2,
           "missing tensor file exits 2");
  }

  // ctc-align emits a readable record
  {
    const std::string logits = g_dir + "/align_logits.spk";
    write_tensor(logits, {3, 2}, {5, 0, 0, 5, 5, 0});
    const std::string out = g_dir + "/align.txt";
    const RunResult r = run("ctc-align --logits " + logits +
                            " --tokens 1 --id u1 --out " + out);
    expect(r.exit_code == 0, "ctc-align exits 0");
    const auto recs = read_label_records(out);
    expect(recs.size() == 1 && recs[0].tokens == std::vector<int>{0, 1, 0},
           "ctc-align record holds the aligned frames");
  }

  // simulate-labels over a prepared manifest
  {
    const std::string dir = g_dir + "/sim";
    std::filesystem::create_directories(dir + "/logits");
    std::vector<UtteranceRecord> recs;
    for (int i = 0; i < 3; ++i) {
      UtteranceRecord rec;
      rec.id = "u" + std::to_string(i);
      rec.num_frames = 12;
      rec.tokens = {1, 2};
      rec.logits_path = "logits/" + rec.id + ".spk";
      Matrix logits(12, 3, 0.0);
      for (int t = 0; t < 12; ++t) logits(t, 0) = 4.0;
      logits(3, 0) = 0.0;
      logits(3, 1) = 6.0;  // spike for token 1
      logits(8, 0) = 0.0;
      logits(8, 2) = 6.0;  // spike for token 2
      write_matrix(dir + "/" + rec.logits_path, logits);
      recs.push_back(rec);
    }
    write_manifest(dir + "/manifest.tsv", recs);

    const std::string out = g_dir + "/labels_soft.txt";
    const RunResult r = run("simulate-labels --manifest " + dir +
                            "/manifest.tsv --r-left 0.2 --r-right 0.6 "
                            "--mode soft --out " + out);
    expect(r.exit_code == 0, "simulate-labels exits 0");
    const auto labels = read_label_records(out);
    expect(labels.size() == 3, "simulate-labels writes one record per utt");
    expect(labels[0].soft, "soft mode emits probabilities");

    const RunResult bad = run("simulate-labels --manifest " + dir +
                              "/manifest.tsv --r-left 0.7 --r-right 0.6 "
                              "--mode soft --out " + out);
    expect(bad.exit_code != 0, "ratio sum above 1 exits non-zero");
    expect(bad.err.find("r_left + r_right") != std::string::npos,
           "ratio diagnostic names the violated bound");
  }

  // pretrain-loss against the simulated labels
  {
    const std::string pred = g_dir + "/pred.spk";
    write_tensor(pred, {12, 3}, std::vector<double>(36, 0.0));
    const RunResult r = run("pretrain-loss --pred " + pred + " --labels " +
                            g_dir + "/labels_soft.txt --id u0");
    expect(r.exit_code == 0, "pretrain-loss exits 0");
    expect(r.out.find("mode=soft") != std::string::npos,
           "pretrain-loss detects the record mode");
    expect(run("pretrain-loss --pred " + pred + " --labels " + g_dir +
               "/labels_soft.txt --id nosuch")
               .exit_code == 2,
           "unknown record id exits 2");
  }

  // rnnt-loss
  {
    const std::string lattice = g_dir + "/lattice.spk";
    write_tensor(lattice, {1, 2, 2}, {0, 0, 0, 0});
    const RunResult r = run("rnnt-loss --lattice " + lattice + " --tokens 1");
    expect(r.exit_code == 0, "rnnt-loss exits 0");
    expect(r.out.find("loss=1.38629") != std::string::npos,
           "rnnt-loss prints -log(1/4)");
  }

  // decode + wer + latency round trip
  {
    const std::string enc = g_dir + "/enc.spk";
    Matrix logits(6, 3, 0.0);
    for (int t = 0; t < 6; ++t) logits(t, 0) = 4.0;
    logits(2, 1) = 9.0;  // emit token 1 at frame 2
    logits(5, 2) = 9.0;  // emit token 2 at frame 5
    write_matrix(enc, logits);
    // Bigram bias that suppresses immediate repeats, so one spike yields one
    // emission.
    const std::string bigram = g_dir + "/bigram.spk";
    Matrix bg(3, 3, 0.0);
    for (int v = 1; v < 3; ++v) bg(v, v) = -12.0;
    write_matrix(bigram, bg);
    const std::string dec = g_dir + "/dec.txt";
    RunResult r = run("decode --logits " + enc + " --bigram " + bigram +
                      " --id u0 --greedy --out " + dec);
    expect(r.exit_code == 0, "decode exits 0");
    expect(slurp(dec).find("1@2 2@5") != std::string::npos,
           "decode line carries tok@frame pairs");
    r = run("decode --logits " + enc + " --bigram " + bigram +
            " --id u0 --beam 4 --out " + dec);
    expect(r.exit_code == 0, "beam decode exits 0");
    expect(slurp(dec).find("1@2 2@5") != std::string::npos,
           "beam decode finds the same spikes");

    std::ofstream(g_dir + "/ref.txt") << "u0\ta b\n";
    std::ofstream(g_dir + "/hyp.txt") << "u0\ta c\n";
    r = run("wer --hyp " + g_dir + "/hyp.txt --ref " + g_dir + "/ref.txt");
    expect(r.exit_code == 0, "wer exits 0");
    expect(r.out.find("wer=0.5") != std::string::npos, "wer prints 0.5");

    std::vector<UtteranceRecord> recs(1);
    recs[0].id = "u0";
    recs[0].num_frames = 6;
    recs[0].tokens = {1, 2};
    recs[0].words = {WordBoundary{"wa", 0, 0, 2}, WordBoundary{"wb", 1, 1, 4}};
    write_manifest(g_dir + "/lat_manifest.tsv", recs);
    const std::string rep = g_dir + "/latency.json";
    r = run("latency --decodes " + dec + " --manifest " + g_dir +
            "/lat_manifest.tsv --frame-ms 20 --out " + rep);
    expect(r.exit_code == 0, "latency exits 0");
    expect(r.out.find("el50_ms=0.000 el90_ms=20.000") != std::string::npos,
           "latency summary matches hand-computed percentiles");
    expect(slurp(rep).find("\"utts_used\": 1") != std::string::npos,
           "latency JSON reports retained utterances");
  }

  // toy-run determinism on a small config
  {
    TaskConfig cfg;
    cfg.vocab_size = 5;
    cfg.feature_dim = 6;
    cfg.words_min = 1;
    cfg.words_max = 2;
    cfg.frames_min = 8;
    cfg.frames_max = 60;
    cfg.noise_level = 0.2;
    cfg.train_utts = 16;
    cfg.eval_utts = 6;
    cfg.teacher_epochs = 4;
    cfg.pretrain_epochs = 4;
    cfg.transducer_epochs = 4;
    cfg.teacher_window = 3;
    cfg.jobs = 2;
    const std::string cfg_path = g_dir + "/toy.cfg";
    write_config(cfg_path, cfg);

    const RunResult a = run("toy-run --config " + cfg_path + " --seed 7 --out " +
                            g_dir + "/toy_a");
    const RunResult b = run("toy-run --config " + cfg_path + " --seed 7 --out " +
                            g_dir + "/toy_b");
    expect(a.exit_code == 0, "toy-run exits 0");
    expect(b.exit_code == 0, "second toy-run exits 0");
    // Identical summaries apart from the output path line.
    const auto strip_path = [](std::string s) {
      const auto pos = s.find("report=");
      return pos == std::string::npos ? s : s.substr(0, pos);
    };
    expect(strip_path(a.out) == strip_path(b.out),
           "same seed gives identical summaries");
    expect(slurp(g_dir + "/toy_a/report.json") ==
               slurp(g_dir + "/toy_b/report.json"),
           "same seed gives identical reports");
    expect(!slurp(g_dir + "/toy_a/labels_hard.txt").empty(),
           "toy-run leaves inspectable label records");

    const RunResult env_run = run("toy-run --config " + g_dir +
                                  "/missing.cfg --out " + g_dir + "/toy_c");
    expect(env_run.exit_code == 2, "missing config file exits 2");

    // Config discovery through the environment variable.
    const RunResult via_env = run("toy-run --seed 7 --out " + g_dir + "/toy_d",
                                  "SPIKEALIGN_CONFIG=" + cfg_path);
    expect(via_env.exit_code == 0, "config picked up from SPIKEALIGN_CONFIG");
    expect(strip_path(via_env.out) == strip_path(a.out),
           "env-supplied config matches --config output");

    // Divergent training is a numerical failure, not a crash.
    TaskConfig hot = cfg;
    hot.transducer_lr = 1e9;
    const std::string hot_path = g_dir + "/hot.cfg";
    write_config(hot_path, hot);
    const RunResult div = run("toy-run --config " + hot_path + " --seed 7 --out " +
                              g_dir + "/toy_e");
    expect(div.exit_code == 3, "diverged training exits 3");
    expect(div.err.find("diverged") != std::string::npos,
           "divergence diagnostic names the stage");
  }

  if (g_failures == 0) {
    std::printf("all cli checks passed\n");
    return 0;
  }
  std::printf("%d cli check(s) failed\n", g_failures);
  return 1;
}
