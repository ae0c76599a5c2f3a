#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "varmt/embed/skipgram.hpp"
#include "varmt/mt/model.hpp"
#include "varmt/mt/train.hpp"

namespace varmt {

enum class Ablation { none, softmax, random_init, scratch_embeddings };

std::string to_string(Ablation a);
Ablation parse_ablation(const std::string& name);

struct DataPaths {
  std::filesystem::path src_train, std_train;
  std::filesystem::path src_dev, std_dev;  // optional, both or neither
  std::filesystem::path std_mono;
  std::filesystem::path tgt_mono;
  std::filesystem::path src_test, tgt_test;
  std::filesystem::path std_test;      // optional
  std::filesystem::path tgt_mono_src;  // optional gold src of tgt_mono
};

struct PipelineConfig {
  std::filesystem::path run_dir;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  DataPaths data;

  std::size_t src_merges = 2000;
  std::size_t joint_merges = 4000;

  SkipgramConfig std_embeddings;
  /// dim, bucket_count and n-gram bounds always follow std_embeddings.
  SkipgramConfig tgt_embeddings;

  mt::ModelConfig model;
  mt::ModelConfig reverse_model;
  mt::TrainConfig train_b, train_c, train_e;
  std::size_t beam = 5;

  // Ablation flags.
  mt::HeadKind head_kind = mt::HeadKind::continuous;
  bool random_init = false;
  bool embeddings_from_scratch = false;

  Ablation ablation() const;
  void apply(Ablation a);
  void validate() const;
};

/// INI file, see README for the grammar. Relative paths resolve against the
/// directory of the config file. Unknown sections or keys are errors.
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

/// Canonical "section.key=value" dump of the settings a stage depends on,
/// sorted; its hash goes into the stage manifest.
std::string stage_settings(const PipelineConfig& config, char stage);

/// INI text of the small single-core setup used with the synthetic fixture.
/// Data paths are the fixture file names under `data_dir`.
std::string desk_config(const std::filesystem::path& data_dir,
                        const std::filesystem::path& run_dir, std::uint64_t seed);

}  // namespace varmt
