#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "varmt/pipeline/config.hpp"

namespace varmt {

struct StageResult {
  char stage = 'a';
  std::filesystem::path dir;
  /// Outputs were up to date and the stage was skipped.
  bool cached = false;
  nlohmann::json metrics;
};

/// Runs stages a-e under config.run_dir/<letter>[-<arm>]/. Each stage writes
/// manifest.json with the settings hash and SHA-256 of every input and
/// output; a stage whose manifest still matches is skipped unless forced.
class Pipeline {
 public:
  explicit Pipeline(PipelineConfig config, std::ostream* log = nullptr);

  StageResult run_stage(char stage, bool force = false);
  /// "a".."e" or "all".
  std::vector<StageResult> run(const std::string& stages, bool force = false);

  /// Directory of a stage for the configured ablation arm. Stages an arm
  /// does not change are shared with the full method.
  std::filesystem::path stage_dir(char stage) const;
  const PipelineConfig& config() const { return config_; }

 private:
  PipelineConfig config_;
  std::ostream* log_;
};

/// Reads the metrics recorded in a stage manifest.
nlohmann::json read_stage_metrics(const std::filesystem::path& stage_dir);

}  // namespace varmt
