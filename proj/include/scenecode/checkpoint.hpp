// Binary model checkpoints.
//
// Layout (little-endian):
//   magic "SCNCKPT\0" | u32 version | u64 config length | config JSON
//   u64 tensor count | per tensor: u64 name length, name, u64 rows, u64 cols,
//   rows*cols f64 values
//   u8 has_optimizer | if set: u64 step, then per tensor the first and second
//   moment buffers in the same order
//   u64 FNV-1a hash of every preceding byte
#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "scenecode/decoder.hpp"

namespace scenecode {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AdamState {
  std::int64_t step{0};
  std::vector<Matrix> m;
  std::vector<Matrix> v;
};

struct Checkpoint {
  DecoderModel model;
  std::optional<AdamState> optimizer;
};

std::string encode_checkpoint(const DecoderModel& model, const AdamState* optimizer = nullptr);
/// When `expected` is given, a differing config is rejected naming the first
/// field that differs.
Checkpoint decode_checkpoint(const std::string& bytes, const DecoderConfig* expected = nullptr);

void save_checkpoint(const DecoderModel& model, const std::string& path, const AdamState* optimizer = nullptr);
Checkpoint load_checkpoint(const std::string& path, const DecoderConfig* expected = nullptr);

}  // namespace scenecode
