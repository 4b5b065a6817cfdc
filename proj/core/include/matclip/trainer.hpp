#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "matclip/dataset.hpp"
#include "matclip/encoder.hpp"
#include "matclip/rng.hpp"

namespace matclip {

struct TrainConfig {
    int batch_size = 32;
    float learning_rate = 1.0e-4f;
    int steps = 2000;
    std::uint64_t seed = 0;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
    float weight_decay = 0.0f;

    void validate() const;
};

// Adam moment buffers, shaped exactly like the parameters.
template <typename T>
struct AdamStateT {
    EncoderParamsT<T> m, v;
    std::uint32_t step = 0;
};

using AdamState = AdamStateT<float>;

template <typename T>
AdamStateT<T> make_adam_state(const ModelConfig& cfg) {
    return AdamStateT<T>{make_params<T>(cfg), make_params<T>(cfg), 0};
}

// One AdamW update (decoupled decay; zero decay == Adam). Increments step.
template <typename T>
void adam_step(EncoderParamsT<T>& params, const EncoderParamsT<T>& grads,
               AdamStateT<T>& state, T lr, T beta1, T beta2, T eps, T weight_decay);

// Everything needed to continue a run bit-exactly.
struct TrainerState {
    EncoderParams params;
    AdamState opt;
    std::uint64_t rng_state = 0;
};

struct TrainResult {
    TrainerState state;
    std::vector<std::pair<std::uint32_t, float>> history;  // (step, loss)
};

// Deterministic object-level split: round(test_fraction * n_objects) objects
// (half up) go to test. Objects keep their first-occurrence manifest order
// before the seeded shuffle.
SplitAssignment split_by_object(const Dataset& dataset, double test_fraction,
                                std::uint64_t seed);

struct BatchIndices {
    std::vector<int> materials;  // into dataset.materials
    std::vector<int> parts;      // into dataset.parts
};

// B parts with pairwise-distinct truth materials plus those materials' view
// sets. Advances rng deterministically.
BatchIndices sample_batch(const Dataset& dataset, Split split, int batch_size, Rng& rng);

// Runs config.steps Adam updates from a fresh state.
TrainResult train(const TrainConfig& config, const Dataset& dataset,
                  const EncoderParams& init);

// Continues from a saved state until config.steps total updates have run.
TrainResult train_continue(const TrainConfig& config, const Dataset& dataset,
                           TrainerState state);

// Checkpoint container: magic "MCPT", u32 version, u32 tensor count, then per
// tensor: u32 name length, UTF-8 name, u32 rank, rank x u32 dims, LE f32
// payload. Bit-exact round-trip.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const EncoderParams& params, const std::string& path);
EncoderParams load_checkpoint(const std::string& path);

void save_trainer_state(const TrainerState& state, const std::string& path);
TrainerState load_trainer_state(const std::string& path);

bool params_bitwise_equal(const EncoderParams& a, const EncoderParams& b);

}  // namespace matclip
