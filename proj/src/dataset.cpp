#include "plume/dataset.hpp"

#include "plume/rng.hpp"

namespace plume::data {

std::vector<int> clip_starts(int total_frames, int input_steps, int horizon, int stride) {
  if (input_steps < 1) throw ContractError("clip_starts: input_steps must be >= 1");
  if (horizon < 0) throw ContractError("clip_starts: horizon must be >= 0");
  if (stride < 1) throw ContractError("clip_starts: stride must be >= 1");
  const int window = input_steps + horizon;
  if (window > total_frames)
    throw ContractError("clip_starts: window " + std::to_string(window) +
                        " exceeds sequence length " + std::to_string(total_frames));
  std::vector<int> starts;
  for (int t0 = 0; t0 + window <= total_frames; t0 += stride) starts.push_back(t0);
  return starts;
}

std::vector<Clip> make_clips(int sequence_index, int total_frames, int input_steps,
                             int horizon, int stride) {
  std::vector<Clip> clips;
  for (int t0 : clip_starts(total_frames, input_steps, horizon, stride))
    clips.push_back({sequence_index, t0, input_steps, horizon});
  return clips;
}

std::vector<Clip> make_clips(const std::vector<PlumeSequence>& sequences,
                             int input_steps, int horizon, int stride) {
  std::vector<Clip> clips;
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    auto part = make_clips(static_cast<int>(i), sequences[i].frame_count(),
                           input_steps, horizon, stride);
    clips.insert(clips.end(), part.begin(), part.end());
  }
  return clips;
}

std::pair<std::vector<int>, std::vector<int>> split_indices(int count, int n_train,
                                                            std::uint64_t seed) {
  if (n_train < 0 || n_train >= count)
    throw ContractError("split: n_train must lie in [0, count)");
  std::vector<int> order(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) order[static_cast<std::size_t>(i)] = i;
  Rng rng(seed);
  rng.shuffle(order);
  std::vector<int> train(order.begin(), order.begin() + n_train);
  std::vector<int> test(order.begin() + n_train, order.end());
  return {std::move(train), std::move(test)};
}

}  // namespace plume::data
