#pragma once

// Training configuration and its JSON form. Every field round-trips.

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "emoconv/encoders.hpp"
#include "emoconv/losses.hpp"
#include "emoconv/mel.hpp"
#include "emoconv/predictors.hpp"
#include "emoconv/vocoder.hpp"

namespace emoconv {

struct TrainConfig {
  double segment_seconds = 1.5;
  std::size_t batch_size = 4;
  std::size_t steps = 1000;
  double lr_g = 2e-4;
  double lr_d = 2e-4;
  double beta1 = 0.8;
  double beta2 = 0.99;
  double lr_decay = 0.999;  // per epoch
  std::uint64_t seed = 0;
  LossWeights weights;
  Reduction reduction = Reduction::Mean;
  std::size_t k = 100;  // codebook size
  std::size_t emotion_hidden = 128;
  GeneratorConfig generator;
  DiscriminatorConfig discriminator;
  MelConfig mel;
  ContentBackendSpec content;
  SpeakerBackendSpec speaker;
  SerBackendSpec ser;
  std::size_t checkpoint_every = 0;  // 0: final checkpoint only

  // Small models and short segments for fast hermetic runs.
  static TrainConfig tiny();
  // tiny() with a 64-wide generator and a faster generator learning rate;
  // used for the 500-step overfitting smoke run.
  static TrainConfig smoke();
  // Segment length in samples, trimmed to whole generator frames.
  std::size_t segment_samples() const;
  // Throws ConfigError describing the first invalid field.
  void validate() const;

  bool operator==(const TrainConfig&) const = default;
};

void to_json(nlohmann::json& j, const MelConfig& c);
void from_json(const nlohmann::json& j, MelConfig& c);
void to_json(nlohmann::json& j, const GeneratorConfig& c);
void from_json(const nlohmann::json& j, GeneratorConfig& c);
void to_json(nlohmann::json& j, const DiscriminatorConfig& c);
void from_json(const nlohmann::json& j, DiscriminatorConfig& c);
void to_json(nlohmann::json& j, const LossWeights& c);
void from_json(const nlohmann::json& j, LossWeights& c);
void to_json(nlohmann::json& j, const ContentBackendSpec& c);
void from_json(const nlohmann::json& j, ContentBackendSpec& c);
void to_json(nlohmann::json& j, const SpeakerBackendSpec& c);
void from_json(const nlohmann::json& j, SpeakerBackendSpec& c);
void to_json(nlohmann::json& j, const SerBackendSpec& c);
void from_json(const nlohmann::json& j, SerBackendSpec& c);
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);
nlohmann::json to_json(const LossReport& r);

// Reads a JSON config. Missing fields keep their defaults; `"preset"` may be
// "default", "tiny" or "smoke". Throws ConfigError on malformed input.
TrainConfig load_train_config(const std::filesystem::path& path);
TrainConfig train_config_from_json(const nlohmann::json& j);

}  // namespace emoconv
