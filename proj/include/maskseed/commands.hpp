#pragma once

#include <string>
#include <vector>

#include "maskseed/eval.hpp"
#include "maskseed/runconfig.hpp"

namespace maskseed {

// Operator-facing commands. They throw UsageError/DataError/ConfigError/
// NumericError; the CLI maps those to exit codes 1/2/2/3.

// Writes <out_dir>/dataset.json (+ config_used.cfg). Deterministic per seed.
void cmd_gen(const RunConfig& cfg, int scenes, const std::string& out_dir,
             bool inline_pixels = true);

struct TrainResult {
  std::string weights_path;
  double final_loss_seg = 0;
  double final_loss_score = 0;
};

// Alternating-branch training; writes weights.dmsk, loss_log.csv and periodic
// checkpoint.dmsk under out_dir. resume_path continues from a checkpoint.
TrainResult cmd_train(const RunConfig& cfg, const std::string& dataset_path,
                      const std::string& out_dir, const std::string& resume_path = "");

// Ranked proposals for every scene in the dataset file; writes proposals.json.
// MASKSEED_THREADS caps image-level parallelism.
void cmd_infer(const RunConfig& cfg, const std::string& weights_path,
               const std::string& dataset_path, const std::string& out_dir);

// Writes report.json, report.csv and the two SVG plots under out_dir.
EvalReport cmd_eval(const std::string& proposals_path, const std::string& dataset_path,
                    const std::string& out_dir, bool use_boxes = false);

void cmd_plot(const std::string& report_path, const std::string& out_dir);

// Runs the built-in verification battery; prints one line per check. Returns
// true when everything passed. fault_inject deliberately corrupts the named
// check's analytic path (test hook).
bool cmd_selftest(const std::string& fault_inject = "");

// Scoring-branch accuracy on freshly sampled balanced batches, dropout off.
double scoring_accuracy(const ModelParams<float>& params, const ModelConfig& cfg,
                        const std::vector<Scene>& scenes, const SamplerConfig& scfg, int batches,
                        int batch_size, Rng& rng);

int thread_budget();  // MASKSEED_THREADS, default hardware concurrency

}  // namespace maskseed
