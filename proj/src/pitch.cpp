#include "emoconv/pitch.hpp"

#include <algorithm>
#include <cmath>

#include "emoconv/errors.hpp"

namespace emoconv {

namespace {

// Among near-maximal local peaks the shortest lag wins; guards against
// picking a subharmonic when several periods correlate almost equally.
constexpr double kPeakTolerance = 0.9;

double frame_pitch(std::span<const double> frame, int sample_rate, const PitchConfig& cfg) {
  const auto w = static_cast<long>(frame.size());
  std::vector<double> x(frame.begin(), frame.end());
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(w);
  double energy = 0.0;
  for (double& v : x) {
    v -= mean;
    energy += v * v;
  }
  if (std::sqrt(energy / static_cast<double>(w)) < cfg.silence_rms) return 0.0;

  const long lag_min = std::max(2L, static_cast<long>(std::floor(sample_rate / cfg.f_max)));
  const long lag_max = std::min(w - 2, static_cast<long>(std::ceil(sample_rate / cfg.f_min)));
  if (lag_max <= lag_min) return 0.0;

  // r[lag - lag_min + 1] for lag in [lag_min - 1, lag_max + 1]
  std::vector<double> r(static_cast<std::size_t>(lag_max - lag_min + 3), 0.0);
  for (long lag = lag_min - 1; lag <= lag_max + 1; ++lag) {
    double num = 0.0, e0 = 0.0, e1 = 0.0;
    for (long t = 0; t + lag < w; ++t) {
      num += x[t] * x[t + lag];
      e0 += x[t] * x[t];
      e1 += x[t + lag] * x[t + lag];
    }
    const double den = std::sqrt(e0 * e1);
    r[static_cast<std::size_t>(lag - lag_min + 1)] = den > 0.0 ? num / den : 0.0;
  }
  auto at = [&](long lag) { return r[static_cast<std::size_t>(lag - lag_min + 1)]; };

  double best = -1.0;
  for (long lag = lag_min; lag <= lag_max; ++lag) best = std::max(best, at(lag));
  if (best < cfg.voicing_threshold) return 0.0;

  long chosen = -1;
  for (long lag = lag_min; lag <= lag_max; ++lag) {
    const double v = at(lag);
    if (v >= kPeakTolerance * best && v >= at(lag - 1) && v >= at(lag + 1)) {
      chosen = lag;
      break;
    }
  }
  if (chosen < 0) return 0.0;

  const double a = at(chosen - 1), b = at(chosen), c = at(chosen + 1);
  const double denom = a - 2.0 * b + c;
  double delta = denom != 0.0 ? 0.5 * (a - c) / denom : 0.0;
  delta = std::clamp(delta, -0.5, 0.5);
  const double period = static_cast<double>(chosen) + delta;
  const double f0 = sample_rate / period;
  if (f0 < cfg.f_min || f0 > cfg.f_max) return 0.0;
  return f0;
}

}  // namespace

std::size_t PitchContour::voiced_count() const {
  return static_cast<std::size_t>(std::count_if(f0.begin(), f0.end(), [](double v) { return v > 0.0; }));
}

PitchContour extract_pitch(const AudioClip& clip, const PitchConfig& cfg) {
  if (cfg.frame_length <= 0 || cfg.hop <= 0 || !(cfg.f_min > 0.0) || !(cfg.f_max > cfg.f_min)) {
    throw ContractError("extract_pitch: invalid configuration");
  }
  const auto win = static_cast<std::size_t>(cfg.frame_length);
  if (clip.size() < win) {
    throw DegenerateInputError("extract_pitch: clip of " + std::to_string(clip.size()) +
                               " samples is shorter than the pitch window");
  }
  const auto hop = static_cast<std::size_t>(cfg.hop);
  const std::size_t frames = 1 + (clip.size() - win) / hop;

  PitchContour out;
  out.frame_hop = cfg.hop;
  out.f0.resize(frames, 0.0);
  for (std::size_t f = 0; f < frames; ++f) {
    out.f0[f] = frame_pitch(std::span<const double>(clip.samples.data() + f * hop, win), clip.sample_rate, cfg);
  }

  const std::size_t voiced = out.voiced_count();
  if (voiced > 0) {
    double mean = 0.0;
    for (double v : out.f0)
      if (v > 0.0) mean += v;
    mean /= static_cast<double>(voiced);
    double var = 0.0;
    for (double v : out.f0)
      if (v > 0.0) var += (v - mean) * (v - mean);
    out.mean_voiced = mean;
    out.std_voiced = std::sqrt(var / static_cast<double>(voiced));
  }
  return out;
}

}  // namespace emoconv
