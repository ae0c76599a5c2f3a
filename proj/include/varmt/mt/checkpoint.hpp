#pragma once

#include <filesystem>

#include "varmt/mt/model.hpp"

namespace varmt::mt {

/// Binary layout (little-endian):
///   "VMMT1",
///   config block: u32 length + "key=value" lines,
///   source vocabulary, target vocabulary: u32 count, then u32 length + bytes each,
///   u32 tensor count, then per tensor: u32 name length + name, u32 rows,
///   u32 cols, rows*cols f32 row-major.
/// Tensors are every trainable parameter plus "decoder_input_table" and
/// "output_table" for the continuous head.
void save_model(const std::filesystem::path& path, const Seq2SeqModel& model);
Seq2SeqModel load_model(const std::filesystem::path& path);

std::string config_block(const ModelConfig& config);
ModelConfig parse_config_block(const std::string& block);

}  // namespace varmt::mt
