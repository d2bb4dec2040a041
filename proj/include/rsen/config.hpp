#pragma once

#include <string>
#include <vector>

#include "rsen/train.hpp"

namespace rsen {

// Full run configuration: file paths plus every training knob, each with its
// documented default. Parsed from key = value files; unknown keys rejected.
struct RunConfig {
  std::string cube;
  std::string labels;
  std::string out_dir = "rsen_out";
  std::string checkpoint;  // defaults to <out_dir>/checkpoint.rsen

  TrainConfig train;

  int repetitions = 1;
  bool eval_each_epoch = false;
  bool mask_background = true;

  std::string checkpoint_path() const {
    return checkpoint.empty() ? out_dir + "/checkpoint.rsen" : checkpoint;
  }
};

RunConfig parse_config_file(const std::string& path);

// "key=value" override, same key set as the file
void apply_override(RunConfig& config, const std::string& assignment);

// echo every key (defaults included) so a run is re-creatable from its output
void write_resolved_config(const RunConfig& config, const std::string& path);

}  // namespace rsen
