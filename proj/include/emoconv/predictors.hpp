#pragma once

// Frozen evaluation/critic models: an arousal regressor (SER) used both as a
// training critic and for scoring, and a non-intrusive naturalness (MOS)
// predictor. Mock backends are deterministic and need no downloads.

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "emoconv/audio.hpp"
#include "emoconv/autograd.hpp"
#include "emoconv/mel.hpp"

namespace emoconv {

struct SerBackendSpec {
  std::string name = "mock";
  std::uint64_t seed = 777;

  bool operator==(const SerBackendSpec&) const = default;
};

struct MosBackendSpec {
  std::string name = "mock";

  bool operator==(const MosBackendSpec&) const = default;
};

class SerModel {
 public:
  virtual ~SerModel() = default;
  virtual std::string name() const = 0;
  // waveform [B, 1, T] -> arousal predictions [B]; differentiable in the waveform.
  virtual ad::Var forward(const ad::Var& waveform) const = 0;
  virtual double predict(const AudioClip& clip) const;
  virtual std::vector<double> parameters() const = 0;
};

// Arousal = 1 + 6 * sigmoid(gain * <w, mean_t log-mel> / n_mels + bias).
// The mock draws w as a spectral tilt plus seeded noise; the cached adapter
// reads w, gain and bias from <cache>/<name>/ser_head.json.
class LinearMelSer final : public SerModel {
 public:
  LinearMelSer(std::string name, std::vector<double> weights, double gain, double bias, MelConfig mel = {});
  static LinearMelSer mock(std::uint64_t seed);

  std::string name() const override { return name_; }
  ad::Var forward(const ad::Var& waveform) const override;
  std::vector<double> parameters() const override;

 private:
  std::string name_;
  std::vector<double> weights_;
  double gain_;
  double bias_;
  MelConfig mel_;
};

class MosModel {
 public:
  virtual ~MosModel() = default;
  virtual std::string name() const = 0;
  virtual std::string version() const = 0;
  // Naturalness in [1, 5].
  virtual double score(const AudioClip& clip) const = 0;
};

// 1 + 4 * (1 - mean spectral flatness). Tonal, clean signals score high;
// noisy or distorted ones score lower.
class MockMos final : public MosModel {
 public:
  std::string name() const override { return "mock"; }
  std::string version() const override { return "mock-flatness-1"; }
  double score(const AudioClip& clip) const override;
};

// Throw BackendError for unknown names or missing cached weights.
std::unique_ptr<SerModel> make_ser_model(const SerBackendSpec& spec);
std::unique_ptr<MosModel> make_mos_model(const MosBackendSpec& spec);

// Mean spectral flatness over 1024-sample frames (hop 256) in [0, 1].
double spectral_flatness(const AudioClip& clip);

}  // namespace emoconv
