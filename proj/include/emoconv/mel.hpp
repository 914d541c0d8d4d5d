#pragma once

#include <span>
#include <vector>

#include "emoconv/audio.hpp"
#include "emoconv/autograd.hpp"
#include "emoconv/tensor.hpp"

namespace emoconv {

// Log-mel analysis parameters. Serialised into checkpoints so training and
// evaluation use bit-identical analysis.
struct MelConfig {
  int sample_rate = kWorkingRate;
  int n_fft = 1024;  // also the Hann window length
  int hop = 256;
  int n_mels = 80;
  double f_min = 0.0;
  double f_max = 8000.0;
  double log_floor = 1e-5;

  bool operator==(const MelConfig&) const = default;
};

void validate(const MelConfig& cfg);

struct MelSpectrogram {
  Tensor frames;  // [n_mels, n_frames], natural-log magnitude
  int frame_hop = 256;
  int n_mels = 80;

  std::size_t n_frames() const { return frames.rank() == 2 ? frames.dim(1) : 0; }
};

// HTK mel scale.
double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Peak frequency of each triangular filter, in Hz.
std::vector<double> mel_center_frequencies(const MelConfig& cfg);

// [n_mels, n_fft/2 + 1] triangular filters with unit peak.
const Tensor& mel_filterbank(const MelConfig& cfg);

// ceil(T / hop)
std::size_t mel_frame_count(std::size_t num_samples, const MelConfig& cfg);

// Frames are centred by reflection-padding (n_fft - hop)/2 samples on the left
// and enough on the right for ceil(T/hop) frames. Requires T >= n_fft.
MelSpectrogram mel(const AudioClip& clip, const MelConfig& cfg);

// Differentiable batch version: waveform [B, 1, T] -> [B, n_mels, n_frames].
ad::Var log_mel(const ad::Var& waveform, const MelConfig& cfg);

// |DFT|^2 of `frame` zero-padded to n_fft (power of two not required), bins 0..n_fft/2.
std::vector<double> power_spectrum(std::span<const double> frame, int n_fft);

// Log power spectrogram [n_fft/2 + 1, n_frames] for plotting.
Tensor log_power_spectrogram(const AudioClip& clip, const MelConfig& cfg);

}  // namespace emoconv
