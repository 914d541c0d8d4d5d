#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace emoconv {

// The rate every clip is resampled to on load.
inline constexpr int kWorkingRate = 16000;

// Mono waveform. Samples are dimensionless amplitudes in [-1, 1].
struct AudioClip {
  std::vector<double> samples;
  int sample_rate = kWorkingRate;
  std::string source_id;

  std::size_t size() const noexcept { return samples.size(); }
  double duration() const noexcept {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

// Raw decoder output before downmix/resampling.
struct DecodedAudio {
  std::vector<float> interleaved;
  int channels = 0;
  int sample_rate = 0;

  std::size_t frames() const noexcept {
    return channels > 0 ? interleaved.size() / static_cast<std::size_t>(channels) : 0;
  }
};

// Decodes WAV or FLAC PCM. Throws DecodeError when the file cannot be read.
DecodedAudio decode_audio_file(const std::filesystem::path& path);

// Decodes, downmixes by channel averaging, resamples to `target_rate`, and
// scales down by the peak when any sample exceeds unit magnitude.
// Throws DegenerateInputError on empty audio.
AudioClip load_audio(const std::filesystem::path& path, int target_rate = kWorkingRate);

std::vector<double> downmix(const DecodedAudio& audio);

// Windowed-sinc resampler. Output length is round(len * to / from).
std::vector<double> resample(std::span<const double> samples, int from_rate, int to_rate);

// Divides by the peak magnitude if it exceeds 1; returns the applied gain.
double limit_peak(std::vector<double>& samples);

// 16-bit PCM WAV writers.
void save_wav(const std::filesystem::path& path, const AudioClip& clip);
void write_wav_pcm16(const std::filesystem::path& path, std::span<const double> interleaved, int channels,
                     int sample_rate);

struct Segment {
  AudioClip clip;
  std::size_t offset = 0;  // start sample in the source
  bool padded = false;     // true when the source was shorter than the segment
};

// Draws a segment of exactly round(seg_seconds * rate) samples with a start
// offset uniform over the valid range. Short clips are zero-padded at the tail.
Segment sample_segment(const AudioClip& clip, double seg_seconds, std::uint64_t seed);

std::size_t segment_length(double seg_seconds, int sample_rate);

}  // namespace emoconv
