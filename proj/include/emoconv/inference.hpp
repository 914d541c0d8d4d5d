#pragma once

// Conversion with a trained checkpoint: the input's units and speaker vector
// are kept, the emotion vector is replaced by the target arousal's embedding.

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "emoconv/checkpoint.hpp"
#include "emoconv/manifest.hpp"

namespace emoconv {

inline constexpr double kDefaultMaxSeconds = 60.0;

struct ConversionRequest {
  AudioClip input;
  double target_arousal = 4.0;
  const CheckpointBundle* checkpoint = nullptr;
};

// Intermediate representations of one conversion.
struct ConversionTrace {
  UnitSequence units;
  SpeakerEmbedding speaker;
  EmotionEmbedding emotion;
  ConditioningTensor conditioning;
  AudioClip output;
};

// Holds the frozen encoders matching a checkpoint's backend configuration.
class Converter {
 public:
  // Throws ConfigError when the backends disagree with the checkpoint
  // (feature dimension, codebook size) and BackendError when unavailable.
  explicit Converter(const CheckpointBundle& checkpoint, double max_seconds = kDefaultMaxSeconds);

  AudioClip convert(const AudioClip& input, double target_arousal) const;
  ConversionTrace trace(const AudioClip& input, double target_arousal) const;
  const CheckpointBundle& checkpoint() const { return *checkpoint_; }

 private:
  const CheckpointBundle* checkpoint_;
  double max_seconds_;
  std::unique_ptr<ContentEncoder> content_;
  std::unique_ptr<SpeakerEncoder> speaker_;
};

AudioClip convert(const ConversionRequest& req);

// Either one arousal for every row or each row's own annotation.
struct TargetChoice {
  std::optional<double> global;  // nullopt: use the manifest's arousal column

  static TargetChoice parse(const std::string& text);  // "<value>" or "column"
};

struct BatchFailure {
  std::filesystem::path input;
  std::string message;
};

struct BatchResult {
  std::filesystem::path index;  // index.jsonl
  std::size_t converted = 0;
  std::vector<BatchFailure> failures;
  std::vector<std::string> warnings;
};

// One WAV per row in out_dir plus index.jsonl mapping input -> (output, target).
// Row failures are itemized and the run continues; an unwritable output
// directory is fatal (IoError).
BatchResult batch_convert(const std::filesystem::path& manifest, const TargetChoice& targets,
                          const CheckpointBundle& checkpoint, const std::filesystem::path& out_dir);

}  // namespace emoconv
