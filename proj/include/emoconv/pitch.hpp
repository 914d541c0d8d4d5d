#pragma once

#include <optional>
#include <vector>

#include "emoconv/audio.hpp"

namespace emoconv {

struct PitchConfig {
  int frame_length = 1024;
  int hop = 256;
  double f_min = 50.0;
  double f_max = 600.0;
  // Minimum normalized autocorrelation peak for a voiced frame.
  double voicing_threshold = 0.5;
  // Frames with RMS below this are unvoiced regardless of periodicity.
  double silence_rms = 1e-4;
};

struct PitchContour {
  std::vector<double> f0;  // Hz per frame, 0 = unvoiced
  int frame_hop = 256;
  std::optional<double> mean_voiced;
  std::optional<double> std_voiced;  // population std

  std::size_t voiced_count() const;
};

// Normalized autocorrelation F0 tracker with parabolic peak interpolation.
// Frame count is 1 + (T - frame_length) / hop; throws DegenerateInputError
// when the clip is shorter than one frame.
PitchContour extract_pitch(const AudioClip& clip, const PitchConfig& cfg = {});

}  // namespace emoconv
