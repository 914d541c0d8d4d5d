#pragma once

// Resynthesis vocoder: an upsampling generator driven by per-frame
// conditioning (unit embedding | speaker vector | emotion vector), and a bank
// of multi-period and multi-scale sub-discriminators for adversarial training.

#include <cstddef>
#include <vector>

#include "emoconv/audio.hpp"
#include "emoconv/encoders.hpp"
#include "emoconv/nn.hpp"

namespace emoconv {

inline constexpr double kLeakySlope = 0.1;

struct GeneratorConfig {
  std::size_t unit_embed_dim = 128;
  std::vector<std::size_t> upsample_factors{5, 4, 4, 4};
  // One residual unit per entry, applied after every upsampling stage.
  std::vector<std::size_t> residual_dilations{1, 3, 5};
  std::size_t residual_kernel = 3;
  // Width after the input convolution; halves at every upsampling stage.
  std::size_t initial_channels = 512;
  std::size_t pre_kernel = 7;
  std::size_t post_kernel = 7;
  double frame_rate = 50.0;
  int sample_rate = kWorkingRate;
  double init_gain = 1.0;

  static GeneratorConfig full() { return {}; }
  static GeneratorConfig tiny();

  std::size_t hop() const;  // product of upsample factors
  std::size_t input_width() const { return unit_embed_dim + kSpeakerDim + kEmotionDim; }
  std::vector<std::size_t> channel_widths() const;
  // Throws ContractError unless hop() * frame_rate == sample_rate.
  void validate() const;

  bool operator==(const GeneratorConfig&) const = default;
};

// [B, unit_embed_dim + 640, T'] channel-major; frame t of utterance b is
// concat(unit_table[unit_t], speaker, emotion).
struct ConditioningTensor {
  ad::Var data;
  std::size_t unit_dim = 0;
  double frame_rate = 50.0;

  std::size_t batch() const { return data.shape()[0]; }
  std::size_t width() const { return data.shape()[1]; }
  std::size_t frames() const { return data.shape()[2]; }
  double at(std::size_t b, std::size_t t, std::size_t c) const { return data.value().at(b, c, t); }
  // Frame t of utterance b as a row vector.
  std::vector<double> row(std::size_t b, std::size_t t) const;
};

struct UnitEmbedding {
  ad::Var table;  // [K, unit_embed_dim]

  static UnitEmbedding make(std::size_t k, std::size_t dim, nn::Rng& rng);
  std::size_t k() const { return table.shape()[0]; }
  std::size_t dim() const { return table.shape()[1]; }
  nn::ParamList parameters() const { return {{"units.table", table}}; }
};

ConditioningTensor build_conditioning(const UnitSequence& units, const SpeakerEmbedding& speaker,
                                      const EmotionEmbedding& emotion, const UnitEmbedding& unit_table);

// Differentiable with respect to the unit table and `emotion` ([B, 128]).
// Every unit sequence must have the same length.
ConditioningTensor build_conditioning_batch(const std::vector<UnitSequence>& units,
                                            const std::vector<SpeakerEmbedding>& speakers, const ad::Var& emotion,
                                            const UnitEmbedding& unit_table, double frame_rate = 50.0);

class Generator {
 public:
  Generator() = default;
  static Generator make(const GeneratorConfig& cfg, nn::Rng& rng);

  const GeneratorConfig& config() const { return cfg_; }
  // [B, input_width, T'] -> [B, 1, T' * hop], bounded by tanh.
  ad::Var forward(const ad::Var& conditioning) const;
  nn::ParamList parameters() const;

 private:
  struct Residual {
    nn::Conv1d dilated;
    nn::Conv1d pointwise;
  };
  struct Stage {
    nn::ConvTranspose1d upsample;
    std::vector<Residual> residuals;
  };

  GeneratorConfig cfg_;
  nn::Conv1d pre_;
  std::vector<Stage> stages_;
  nn::Conv1d post_;
};

// Runs the generator on a single-utterance conditioning tensor without recording gradients.
AudioClip generate(const ConditioningTensor& cond, const Generator& gen);

// Discriminators ---------------------------------------------------------------

struct ScaleLayerSpec {
  std::size_t channels = 0;
  std::size_t kernel = 0;
  std::size_t stride = 1;
  std::size_t groups = 1;

  bool operator==(const ScaleLayerSpec&) const = default;
};

struct DiscriminatorConfig {
  std::vector<std::size_t> periods{2, 3, 4, 5, 7, 11};
  std::vector<std::size_t> scales{1, 2, 4};
  // Channel widths of the period sub-discriminator convolutions (kernel 5,
  // stride 3 except the last, which has stride 1).
  std::vector<std::size_t> period_channels{32, 128, 512, 1024, 1024};
  std::size_t period_kernel = 5;
  std::size_t period_stride = 3;
  std::vector<ScaleLayerSpec> scale_layers{{128, 15, 1, 1},   {128, 41, 2, 4},    {256, 41, 2, 16},
                                           {512, 41, 4, 16},  {1024, 41, 4, 16},  {1024, 41, 1, 16},
                                           {1024, 5, 1, 1}};
  double init_gain = 1.4142135623730951;

  static DiscriminatorConfig full() { return {}; }
  static DiscriminatorConfig tiny();
  void validate() const;

  bool operator==(const DiscriminatorConfig&) const = default;
};

struct DiscriminatorOutput {
  ad::Var score;                  // raw score map
  std::vector<ad::Var> features;  // per-layer activations, score map last
  std::size_t batch = 1;
};

// Folds the waveform at a fixed period and applies (kernel x 1) convolutions.
class PeriodDiscriminator {
 public:
  static PeriodDiscriminator make(std::size_t period, const DiscriminatorConfig& cfg, nn::Rng& rng);
  DiscriminatorOutput operator()(const ad::Var& wave) const;
  std::size_t period() const { return period_; }
  std::size_t layer_count() const { return convs_.size() + 1; }
  void collect(const std::string& prefix, nn::ParamList& out) const;

 private:
  std::size_t period_ = 2;
  std::vector<nn::Conv1d> convs_;
  nn::Conv1d post_;
};

// Judges the waveform after log2(factor) rounds of average pooling.
class ScaleDiscriminator {
 public:
  static ScaleDiscriminator make(std::size_t factor, const DiscriminatorConfig& cfg, nn::Rng& rng);
  DiscriminatorOutput operator()(const ad::Var& wave) const;
  std::size_t factor() const { return factor_; }
  std::size_t layer_count() const { return convs_.size() + 1; }
  void collect(const std::string& prefix, nn::ParamList& out) const;

 private:
  std::size_t factor_ = 1;
  std::vector<nn::Conv1d> convs_;
  nn::Conv1d post_;
};

class DiscriminatorBank {
 public:
  DiscriminatorBank() = default;
  static DiscriminatorBank make(const DiscriminatorConfig& cfg, nn::Rng& rng);

  const DiscriminatorConfig& config() const { return cfg_; }
  std::size_t size() const { return periods_.size() + scales_.size(); }
  std::size_t period_count() const { return periods_.size(); }
  std::size_t scale_count() const { return scales_.size(); }
  const std::vector<PeriodDiscriminator>& period_discriminators() const { return periods_; }
  const std::vector<ScaleDiscriminator>& scale_discriminators() const { return scales_; }
  std::size_t layer_count(std::size_t j) const;

  // Period sub-discriminators first, then scales. wave: [B, 1, T].
  std::vector<DiscriminatorOutput> operator()(const ad::Var& wave) const;
  nn::ParamList parameters() const;

 private:
  DiscriminatorConfig cfg_;
  std::vector<PeriodDiscriminator> periods_;
  std::vector<ScaleDiscriminator> scales_;
};

struct Discrimination {
  std::vector<DiscriminatorOutput> real;
  std::vector<DiscriminatorOutput> fake;
};

// Throws ContractError when the two waveforms differ in shape.
Discrimination discriminate(const ad::Var& real, const ad::Var& fake, const DiscriminatorBank& bank);
Discrimination discriminate(const AudioClip& real, const AudioClip& fake, const DiscriminatorBank& bank);

}  // namespace emoconv
