#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "plume/dataset.hpp"
#include "plume/network.hpp"
#include "plume/params.hpp"

namespace plume::data {

// On-disk container, shared by sequence, checkpoint and prediction files:
//
//   bytes 0..7   magic "PLUMEBOX"
//   bytes 8..11  u32 LE format version
//   bytes 12..19 u64 LE header length
//   header       JSON: kind, metadata, section table
//   payload      concatenated raw little-endian section bytes
//
// Every section records offset (relative to the payload start), byte count
// and CRC32; loads verify all three and fail with distinct error types for
// version mismatch, truncation and corruption.

inline constexpr std::uint32_t kContainerVersion = 1;

std::uint32_t crc32(const void* data, std::size_t len, std::uint32_t crc = 0);

std::uint64_t fnv1a64(const std::string& text);

void save_sequence(const PlumeSequence& seq, const std::string& path);
PlumeSequence load_sequence(const std::string& path);

struct Checkpoint {
  net::ModelConfig model;
  ParameterSet<float> params;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Rolled-out probability frames for one sequence window.
struct PredictionsFile {
  std::string sequence_id;
  int rows = 0, cols = 0;
  int t0 = 0;
  int input_steps = 0;
  std::vector<std::vector<float>> frames;  // k probability maps
};

void save_predictions(const PredictionsFile& preds, const std::string& path);
PredictionsFile load_predictions(const std::string& path);

}  // namespace plume::data
