#pragma once

#include <filesystem>
#include <optional>

#include "ael/gating.hpp"
#include "ael/model.hpp"

namespace ael {

/// Binary checkpoint layout, all integers and floats little-endian:
///
///   "AEL1"                      4-byte magic
///   u32  version (1)
///   u64  num_users, num_items, hidden_large, hidden_medium, hidden_small
///   u64  flags (bit 0: gate matrices present)
///   u64  num_experts, k         (0, 0 without gate)
///   f64  parameter blocks:      for Large, Medium, Small in turn:
///                                 encoder weight (prev × hidden, row-major), encoder bias,
///                                 user embedding (users × hidden), decoder weight
///                                 (hidden × prev), decoder bias
///                               then w_gate (items × experts), w_noise (items × experts)
struct Checkpoint {
  AelModel model;
  std::optional<GatingParams> gating;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const AelModel& model, const GatingParams* gating);
/// Throws DataError on unreadable files, a bad magic/version, implausible shapes or truncation.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ael
