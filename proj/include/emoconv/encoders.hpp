#pragma once

// Disentangling encoders: frame-level content features quantized into
// discrete units, a global speaker vector, and a trainable arousal embedding.
//
// Content and speaker backends are frozen and pluggable. The "mock" backends
// are deterministic seeded projections of band energies so everything runs
// without model downloads; "precomputed" backends read features produced
// offline by a real model from the model cache directory.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "emoconv/audio.hpp"
#include "emoconv/nn.hpp"
#include "emoconv/tensor.hpp"

namespace emoconv {

inline constexpr std::size_t kSpeakerDim = 512;
inline constexpr std::size_t kEmotionDim = 128;
inline constexpr double kArousalMin = 1.0;
inline constexpr double kArousalMax = 7.0;

// Environment variable naming the directory real-model adapters read from.
inline constexpr const char* kModelCacheEnv = "EMOCONV_MODEL_CACHE";
std::filesystem::path model_cache_dir();

struct ContentFeatures {
  Tensor frames;  // [T', feature_dim]
  double frame_rate = 50.0;

  std::size_t num_frames() const { return frames.rank() == 2 ? frames.dim(0) : 0; }
  std::size_t dim() const { return frames.rank() == 2 ? frames.dim(1) : 0; }
};

struct UnitCodebook {
  Tensor centroids;  // [K, feature_dim]

  std::size_t k() const { return centroids.rank() == 2 ? centroids.dim(0) : 0; }
  std::size_t dim() const { return centroids.rank() == 2 ? centroids.dim(1) : 0; }
};

struct UnitSequence {
  std::vector<int> units;
  std::size_t k = 0;
};

struct SpeakerEmbedding {
  std::vector<double> vector;  // kSpeakerDim entries
};

struct EmotionEmbedding {
  std::vector<double> vector;  // kEmotionDim entries
  double source_arousal = 4.0;
};

// Backend selection, recorded in checkpoints.
struct ContentBackendSpec {
  std::string name = "mock";
  std::uint64_t seed = 1234;
  std::size_t feature_dim = 64;
  int layer = 2;  // hidden layer features are taken from

  bool operator==(const ContentBackendSpec&) const = default;
};

struct SpeakerBackendSpec {
  std::string name = "mock";
  std::uint64_t seed = 4321;

  bool operator==(const SpeakerBackendSpec&) const = default;
};

class ContentEncoder {
 public:
  virtual ~ContentEncoder() = default;
  virtual ContentBackendSpec spec() const = 0;
  virtual double frame_rate() const = 0;
  virtual std::size_t feature_dim() const = 0;
  // Samples of context each frame depends on.
  virtual std::size_t receptive_field() const = 0;
  virtual ContentFeatures encode(const AudioClip& clip) const = 0;
  // Flattened frozen weights, for freeze-contract checks.
  virtual std::vector<double> parameters() const = 0;
};

class SpeakerEncoder {
 public:
  virtual ~SpeakerEncoder() = default;
  virtual SpeakerBackendSpec spec() const = 0;
  virtual SpeakerEmbedding encode(const AudioClip& clip) const = 0;
  virtual std::vector<double> parameters() const = 0;
};

// Throws BackendError for unknown names or missing cached weights.
std::unique_ptr<ContentEncoder> make_content_encoder(const ContentBackendSpec& spec);
std::unique_ptr<SpeakerEncoder> make_speaker_encoder(const SpeakerBackendSpec& spec);

// Mock content backend: 20 ms frames (50 Hz at 16 kHz), log band energies
// pushed through `layer` seeded tanh projections. Each frame depends only on
// its own 320 samples.
class MockContentEncoder final : public ContentEncoder {
 public:
  static constexpr std::size_t kHop = 320;
  static constexpr std::size_t kBands = 32;
  static constexpr int kMaxLayer = 3;

  explicit MockContentEncoder(ContentBackendSpec spec);
  ContentBackendSpec spec() const override { return spec_; }
  double frame_rate() const override { return static_cast<double>(kWorkingRate) / kHop; }
  std::size_t feature_dim() const override;
  std::size_t receptive_field() const override { return kHop; }
  ContentFeatures encode(const AudioClip& clip) const override;
  std::vector<double> parameters() const override;

 private:
  ContentBackendSpec spec_;
  std::vector<Tensor> layers_;  // layer l: [feature_dim, in_dim]
};

class MockSpeakerEncoder final : public SpeakerEncoder {
 public:
  explicit MockSpeakerEncoder(SpeakerBackendSpec spec);
  SpeakerBackendSpec spec() const override { return spec_; }
  SpeakerEmbedding encode(const AudioClip& clip) const override;
  std::vector<double> parameters() const override { return projection_.vec(); }

 private:
  SpeakerBackendSpec spec_;
  Tensor projection_;  // [kSpeakerDim, 2 * kBands]
};

// Features computed offline by a real model, stored under
// <cache>/<name>/<stem>.feat as: uint64 rows, uint64 cols, rows*cols float64 (little endian).
class PrecomputedContentEncoder final : public ContentEncoder {
 public:
  PrecomputedContentEncoder(ContentBackendSpec spec, std::filesystem::path dir);
  ContentBackendSpec spec() const override { return spec_; }
  double frame_rate() const override { return 50.0; }
  std::size_t feature_dim() const override { return spec_.feature_dim; }
  std::size_t receptive_field() const override { return 400; }
  ContentFeatures encode(const AudioClip& clip) const override;
  std::vector<double> parameters() const override { return {}; }

 private:
  ContentBackendSpec spec_;
  std::filesystem::path dir_;
};

class PrecomputedSpeakerEncoder final : public SpeakerEncoder {
 public:
  PrecomputedSpeakerEncoder(SpeakerBackendSpec spec, std::filesystem::path dir);
  SpeakerBackendSpec spec() const override { return spec_; }
  SpeakerEmbedding encode(const AudioClip& clip) const override;
  std::vector<double> parameters() const override { return {}; }

 private:
  SpeakerBackendSpec spec_;
  std::filesystem::path dir_;
};

// Log band energies [frames, kBands] at 50 Hz; shared by the mock backends.
Tensor band_log_energies(const AudioClip& clip);

ContentFeatures encode_content(const AudioClip& clip, const ContentEncoder& backend);
SpeakerEmbedding encode_speaker(const AudioClip& clip, const SpeakerEncoder& backend);

// Seeded k-means++ initialisation followed by Lloyd iterations.
// Throws InsufficientDataError with fewer than K distinct frames.
UnitCodebook fit_codebook(std::span<const ContentFeatures> features, std::size_t k, std::uint64_t seed,
                          int max_iterations = 100);

// Nearest centroid by Euclidean distance; ties go to the lowest index.
UnitSequence quantize(const ContentFeatures& features, const UnitCodebook& codebook);

// Maps arousal in [1, 7] to [0, 1]; throws ContractError outside the range.
double normalize_arousal(double arousal);

// Two trainable linear layers: 1 -> hidden -> 128 with a leaky ReLU between.
class EmotionEmbedder {
 public:
  static constexpr double kSlope = 0.1;

  EmotionEmbedder() = default;
  static EmotionEmbedder make(nn::Rng& rng, std::size_t hidden = 128);

  // arousal values -> [B, 128]
  ad::Var forward(std::span<const double> arousal) const;
  EmotionEmbedding embed(double arousal) const;

  nn::ParamList parameters() const;
  void zero_output_layer();
  std::size_t hidden() const { return hidden_.weight.shape()[0]; }

 private:
  nn::Linear hidden_;
  nn::Linear output_;
};

EmotionEmbedding embed_emotion(double arousal, const EmotionEmbedder& params);

}  // namespace emoconv
