#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mtvqa/autodiff/tensor.hpp"

namespace mtvqa::ad {

enum class CheckpointFormat { Text, Binary };

struct Checkpoint {
  std::string meta;  // free-form single-line metadata (the models module stores JSON here)
  std::vector<Parameter> params;
};

/// Text layout:
///   mtvqa-ckpt v1 text
///   meta <single line>
///   params <count>
///   param <name> <rank> <d0> ... <d(rank-1)>
///   <values, space separated, %.17g>
///   ... (one param/values pair per parameter)
///
/// Binary layout (little-endian host order): "MTVQACKB", u32 version = 1,
/// u64 meta length, meta bytes, u64 count, then per parameter u32 name
/// length, name bytes, u32 rank, rank x u64 dims, raw IEEE-754 doubles.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt, CheckpointFormat format);

/// Detects the format from the leading bytes.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace mtvqa::ad
