#pragma once

// Synthetic corpus for hermetic end-to-end runs: seeded harmonic tones with
// noise, where higher pseudo-arousal means higher pitch, wider pitch movement
// and a brighter spectrum.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "emoconv/audio.hpp"
#include "emoconv/manifest.hpp"

namespace emoconv {

struct ToyCorpusSpec {
  std::size_t train_clips = 5;
  std::size_t test_clips = 0;
  double seconds = 2.0;
  std::size_t speakers = 2;
  std::uint64_t seed = 7;
};

// One clip; deterministic in (arousal, speaker, seed).
AudioClip synth_toy_clip(double arousal, std::size_t speaker, double seconds, std::uint64_t seed);

// Writes clip_NNN.wav files and manifest.jsonl into `dir`; returns the manifest path.
std::filesystem::path write_toy_corpus(const std::filesystem::path& dir, const ToyCorpusSpec& spec = {});

}  // namespace emoconv
