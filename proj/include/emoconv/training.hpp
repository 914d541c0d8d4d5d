#pragma once

// Non-parallel adversarial training: every utterance is reconstructed from
// its own units, speaker vector and annotated arousal. Each step runs one
// discriminator update followed by one generator update.
//
// Randomness contract: epoch order and segment offsets are pure functions of
// (seed, epoch) and (seed, step), so a run resumed from any checkpoint
// continues exactly as the uninterrupted run would.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "emoconv/checkpoint.hpp"
#include "emoconv/config.hpp"
#include "emoconv/manifest.hpp"
#include "emoconv/predictors.hpp"

namespace emoconv {

struct TrainingExample {
  AudioClip clip;
  UnitSequence units;  // whole clip, one per content frame
  SpeakerEmbedding speaker;
  double arousal = 4.0;
};

struct TrainingData {
  std::vector<TrainingExample> examples;
  std::vector<ContentFeatures> features;  // aligned with examples
};

// Loads the rows and runs the frozen content and speaker encoders. Units are
// filled in by assign_units once a codebook exists.
TrainingData prepare_training_data(const std::vector<ManifestRow>& rows, const ContentEncoder& content,
                                   const SpeakerEncoder& speaker);
void assign_units(TrainingData& data, const UnitCodebook& codebook);

struct Batch {
  ad::Var real;  // [B, 1, L]
  std::vector<UnitSequence> units;
  std::vector<SpeakerEmbedding> speakers;
  std::vector<double> arousal;
  std::vector<std::size_t> indices;  // example index per batch entry
};

// Permutation of [0, n) used for one epoch.
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch);
// Examples [step*B, step*B + B) of the concatenated epoch orders, each cut to
// a segment whose offset is a whole number of content frames.
Batch make_batch(const TrainingData& data, const TrainConfig& cfg, std::size_t step);
// Epoch in which the first example of `step` is drawn.
std::size_t epoch_of_step(std::size_t step, std::size_t batch_size, std::size_t n_examples);

struct StepSettings {
  LossWeights weights;
  Reduction reduction = Reduction::Mean;
  MelConfig mel;
  const SerModel* ser = nullptr;
};

// One discriminator update on total_d, then one update of the generator,
// emotion embedder and unit table on total_g. Throws NonFiniteLossError
// before applying an update whose loss is not finite.
LossReport train_step(const Batch& batch, Models& models, const StepSettings& settings, Adam& opt_g, Adam& opt_d);

struct TrainOptions {
  std::filesystem::path out_dir;                      // checkpoints and train_log.jsonl
  std::optional<std::filesystem::path> resume_from;  // checkpoint directory
  std::function<void(std::size_t step, const LossReport&)> on_step;
};

struct TrainResult {
  CheckpointBundle bundle;  // state after the last step
  std::filesystem::path final_checkpoint;
  std::vector<LossReport> history;  // steps run by this call
};

// Trains on the manifest's train split. With steps == 0 the initial state is
// checkpointed. Periodic checkpoints go to out_dir/checkpoints/step_NNNNNN
// and the final state to out_dir/final.
TrainResult train(const TrainConfig& cfg, const Manifest& manifest, const TrainOptions& options);

std::unique_ptr<SerModel> make_training_ser(const TrainConfig& cfg);

}  // namespace emoconv
