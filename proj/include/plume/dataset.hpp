#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "plume/errors.hpp"

namespace plume::data {

// One simulated release: binary frames plus the wind and layout that made it.
struct PlumeSequence {
  std::string id;
  int rows = 0, cols = 0;
  std::vector<std::vector<std::uint8_t>> frames;
  double phi_rad = 0.0;
  double speed = 0.0;
  std::vector<std::uint8_t> building_mask;
  std::uint64_t seed = 0;
  std::string config_hash;

  int frame_count() const { return static_cast<int>(frames.size()); }
};

// (input, target) window cut from a sequence: input frames t0..t0+T-1,
// target frames t0+T..t0+T+k-1.
struct Clip {
  int sequence = 0;  // index into the owning sequence list
  int t0 = 0;
  int input_steps = 0;  // T
  int horizon = 0;      // k
};

// Valid clip start offsets: t0 = 0, s, 2s, ... while t0 + T + k <= F.
// Count is floor((F - (T + k)) / s) + 1.
std::vector<int> clip_starts(int total_frames, int input_steps, int horizon, int stride);

std::vector<Clip> make_clips(int sequence_index, int total_frames, int input_steps,
                             int horizon, int stride);

std::vector<Clip> make_clips(const std::vector<PlumeSequence>& sequences,
                             int input_steps, int horizon, int stride);

// Seeded shuffle then partition into (train, test) index lists.
std::pair<std::vector<int>, std::vector<int>> split_indices(int count, int n_train,
                                                            std::uint64_t seed);

}  // namespace plume::data
