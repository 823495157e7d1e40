#pragma once

#include <string>

#include "waml/encoder.hpp"
#include "waml/eval.hpp"
#include "waml/features.hpp"
#include "waml/ffn.hpp"
#include "waml/reduction.hpp"
#include "waml/synth.hpp"
#include "waml/trainer.hpp"

namespace waml {

// Union of all module configs, addressable through flat `key = value` pairs
// (config file lines, --set flags). Unknown keys and malformed values are
// config errors.
struct RunConfig {
  ReductionConfig reduce;
  FeatureConfig features;
  WamlConfig waml;
  HeadConfig head;
  TrainConfig train;
  EvalConfig eval;
  SynthConfig synth;

  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;

  // Applies `key = value` lines; '#' comments and blank lines are ignored.
  void load_file(const std::string& path);
  void apply_line(const std::string& line, const std::string& context);

  // All keys in sorted order, one `key = value` per line.
  std::string echo() const;

  // Restores a RunConfig from an echo string (used to rebuild the model
  // configuration embedded in checkpoints and snapshots).
  static RunConfig from_echo(const std::string& echo);

  void validate() const {
    features.validate();
    waml.validate();
    head.validate();
    train.validate();
    eval.validate();
    // reduce/synth validate at use; candidate sets arrive from files.
  }
};

}  // namespace waml
