#include "emoconv/toy_corpus.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "emoconv/errors.hpp"

namespace emoconv {

namespace fs = std::filesystem;

AudioClip synth_toy_clip(double arousal, std::size_t speaker, double seconds, std::uint64_t seed) {
  if (!(arousal >= 1.0 && arousal <= 7.0)) throw ContractError("toy clip: arousal outside [1, 7]");
  if (!(seconds > 0.0)) throw ContractError("toy clip: duration must be positive");
  const int rate = kWorkingRate;
  const std::size_t n = segment_length(seconds, rate);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);

  const double a = (arousal - 1.0) / 6.0;                // 0..1
  const double f0 = (100.0 + 120.0 * a) * (1.0 + 0.15 * static_cast<double>(speaker % 4));
  const double vibrato_depth = 0.03 + 0.12 * a;          // relative pitch excursion
  const double vibrato_rate = 3.0 + 2.0 * a;             // Hz
  const double tilt = 2.2 - 1.4 * a;                     // harmonic amplitude ~ h^-tilt
  const double syllable_rate = 3.0 + 2.0 * a;
  const double p0 = phase(rng), pv = phase(rng), ps = phase(rng);

  AudioClip clip;
  clip.sample_rate = rate;
  clip.samples.resize(n);
  double ph = p0;
  double peak = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / rate;
    const double f = f0 * (1.0 + vibrato_depth * std::sin(2.0 * std::numbers::pi * vibrato_rate * t + pv));
    ph += 2.0 * std::numbers::pi * f / rate;
    double s = 0.0;
    for (int h = 1; h <= 12; ++h) {
      if (f * h >= 0.45 * rate) break;
      s += std::pow(static_cast<double>(h), -tilt) * std::sin(h * ph);
    }
    const double env = 0.55 + 0.45 * std::sin(2.0 * std::numbers::pi * syllable_rate * t + ps);
    clip.samples[i] = env * s + 0.01 * noise(rng);
    peak = std::max(peak, std::abs(clip.samples[i]));
  }
  for (auto& v : clip.samples) v *= 0.5 / peak;
  return clip;
}

fs::path write_toy_corpus(const fs::path& dir, const ToyCorpusSpec& spec) {
  if (spec.train_clips + spec.test_clips == 0) throw ContractError("toy corpus: no clips requested");
  if (spec.speakers == 0) throw ContractError("toy corpus: need at least one speaker");
  fs::create_directories(dir);
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> arousal(1.0, 7.0);
  std::vector<ManifestRow> rows;
  const std::size_t total = spec.train_clips + spec.test_clips;
  for (std::size_t i = 0; i < total; ++i) {
    ManifestRow r;
    // Spread the first clips across the scale so small corpora still span it.
    const std::size_t spread = std::min<std::size_t>(total, 7);
    r.arousal = spread > 1 && i < spread ? 1.0 + 6.0 * static_cast<double>(i) / static_cast<double>(spread - 1)
                                         : arousal(rng);
    r.arousal = std::round(r.arousal * 100.0) / 100.0;
    const std::size_t spk = i % spec.speakers;
    r.speaker_id = "spk" + std::to_string(spk);
    r.split = i < spec.train_clips ? Split::Train : Split::Test;
    char name[32];
    std::snprintf(name, sizeof name, "clip_%03zu.wav", i);
    r.audio_path = dir / name;
    AudioClip clip = synth_toy_clip(r.arousal, spk, spec.seconds, spec.seed * 1000003ULL + i);
    save_wav(r.audio_path, clip);
    rows.push_back(std::move(r));
  }
  const fs::path manifest = dir / "manifest.jsonl";
  write_manifest(manifest, rows);
  return manifest;
}

}  // namespace emoconv
