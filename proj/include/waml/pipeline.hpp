#pragma once

#include <functional>
#include <string>
#include <vector>

#include "waml/config.hpp"
#include "waml/synth.hpp"

namespace waml {

struct ExperimentResult {
  double truth_recall = 0.0;   // Recall@eval.k against the generator ground truth
  double test_recall = 0.0;    // Recall@eval.k against the held-out test split
  double best_val_recall = 0.0;
  double oracle = 0.0;         // cheating-ranker upper bound on the instance
  int64_t epochs_run = 0;
};

// End-to-end run on a generated dataset: reduce, feature init, train, encode,
// evaluate. The default-precision (f32) path used by `ablate` and by the
// ablation-directionality acceptance checks.
ExperimentResult run_synthetic_experiment(const SynthDataset& data, const RunConfig& cfg);

// One ablation ladder row: a name plus the config delta applied on top of
// the previous rows.
struct AblationRow {
  std::string name;
  std::function<void(RunConfig&)> apply;
};

// The cumulative ladder, from plain id-hash features with un-normalized
// averaging and a triplet objective up to the full architecture.
std::vector<AblationRow> ablation_ladder();

// Baseline the ladder starts from (content off, hashes minimal, no FFN,
// triplet loss, no output norm).
void apply_ladder_base(RunConfig& cfg);

}  // namespace waml
