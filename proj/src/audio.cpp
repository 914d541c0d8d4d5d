#include "emoconv/audio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "emoconv/errors.hpp"

namespace emoconv {

namespace {

// Zero crossings of the sinc kernel on each side, at the lower of the two rates.
constexpr double kSincHalfWidth = 32.0;

double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

void put_u32(std::ofstream& os, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  os.write(b, 4);
}

void put_u16(std::ofstream& os, std::uint16_t v) {
  const char b[2] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
  os.write(b, 2);
}

}  // namespace

std::vector<double> downmix(const DecodedAudio& audio) {
  const std::size_t frames = audio.frames();
  const auto ch = static_cast<std::size_t>(audio.channels);
  std::vector<double> mono(frames, 0.0);
  for (std::size_t i = 0; i < frames; ++i) {
    double s = 0.0;
    for (std::size_t c = 0; c < ch; ++c) s += audio.interleaved[i * ch + c];
    mono[i] = s / static_cast<double>(ch);
  }
  return mono;
}

std::vector<double> resample(std::span<const double> samples, int from_rate, int to_rate) {
  if (from_rate <= 0 || to_rate <= 0) throw ContractError("resample: rates must be positive");
  if (from_rate == to_rate) return {samples.begin(), samples.end()};

  const auto len = static_cast<long long>(samples.size());
  const long long out_len = (len * to_rate + from_rate / 2) / from_rate;
  const double ratio = static_cast<double>(from_rate) / to_rate;  // input samples per output sample
  const double cutoff = std::min(1.0, static_cast<double>(to_rate) / from_rate);
  const double half = kSincHalfWidth / cutoff;

  std::vector<double> out(static_cast<std::size_t>(out_len), 0.0);
  for (long long n = 0; n < out_len; ++n) {
    const double t = static_cast<double>(n) * ratio;
    const auto lo = std::max<long long>(0, static_cast<long long>(std::ceil(t - half)));
    const auto hi = std::min<long long>(len - 1, static_cast<long long>(std::floor(t + half)));
    double acc = 0.0;
    for (long long k = lo; k <= hi; ++k) {
      const double d = t - static_cast<double>(k);
      // Hann window over [-half, half]
      const double win = 0.5 * (1.0 + std::cos(std::numbers::pi * d / half));
      acc += samples[static_cast<std::size_t>(k)] * cutoff * sinc(cutoff * d) * win;
    }
    out[static_cast<std::size_t>(n)] = acc;
  }
  return out;
}

double limit_peak(std::vector<double>& samples) {
  double peak = 0.0;
  for (double v : samples) peak = std::max(peak, std::abs(v));
  if (peak <= 1.0) return 1.0;
  const double gain = 1.0 / peak;
  for (double& v : samples) v *= gain;
  return gain;
}

AudioClip load_audio(const std::filesystem::path& path, int target_rate) {
  if (target_rate <= 0) throw ContractError("load_audio: target rate must be positive");
  DecodedAudio decoded = decode_audio_file(path);
  if (decoded.frames() == 0) throw DegenerateInputError("audio file has no samples: " + path.string());

  AudioClip clip;
  clip.sample_rate = target_rate;
  clip.source_id = path.string();
  std::vector<double> mono = downmix(decoded);
  clip.samples = resample(mono, decoded.sample_rate, target_rate);
  if (clip.samples.empty()) throw DegenerateInputError("audio too short to resample: " + path.string());
  for (double v : clip.samples) {
    if (!std::isfinite(v)) throw DecodeError("non-finite sample in " + path.string());
  }
  limit_peak(clip.samples);
  return clip;
}

void write_wav_pcm16(const std::filesystem::path& path, std::span<const double> interleaved, int channels,
                     int sample_rate) {
  if (channels <= 0 || sample_rate <= 0) throw ContractError("write_wav_pcm16: bad format");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  const auto data_bytes = static_cast<std::uint32_t>(interleaved.size() * 2);
  os.write("RIFF", 4);
  put_u32(os, 36 + data_bytes);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  put_u32(os, 16);
  put_u16(os, 1);  // PCM
  put_u16(os, static_cast<std::uint16_t>(channels));
  put_u32(os, static_cast<std::uint32_t>(sample_rate));
  put_u32(os, static_cast<std::uint32_t>(sample_rate * channels * 2));
  put_u16(os, static_cast<std::uint16_t>(channels * 2));
  put_u16(os, 16);
  os.write("data", 4);
  put_u32(os, data_bytes);
  for (double v : interleaved) {
    const double c = std::clamp(v, -1.0, 1.0);
    const auto q = static_cast<std::int16_t>(std::lround(c * 32767.0));
    put_u16(os, static_cast<std::uint16_t>(q));
  }
  if (!os) throw IoError("write failed: " + path.string());
}

void save_wav(const std::filesystem::path& path, const AudioClip& clip) {
  write_wav_pcm16(path, clip.samples, 1, clip.sample_rate);
}

std::size_t segment_length(double seg_seconds, int sample_rate) {
  if (!(seg_seconds > 0.0)) throw ContractError("segment length must be positive");
  return static_cast<std::size_t>(std::llround(seg_seconds * sample_rate));
}

Segment sample_segment(const AudioClip& clip, double seg_seconds, std::uint64_t seed) {
  const std::size_t len = segment_length(seg_seconds, clip.sample_rate);
  Segment seg;
  seg.clip.sample_rate = clip.sample_rate;
  seg.clip.source_id = clip.source_id;
  if (clip.size() < len) {
    seg.clip.samples = clip.samples;
    seg.clip.samples.resize(len, 0.0);
    seg.padded = true;
    return seg;
  }
  const std::size_t max_start = clip.size() - len;
  if (max_start > 0) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> dist(0, max_start);
    seg.offset = dist(rng);
  }
  const auto begin = clip.samples.begin() + static_cast<std::ptrdiff_t>(seg.offset);
  seg.clip.samples.assign(begin, begin + static_cast<std::ptrdiff_t>(len));
  return seg;
}

}  // namespace emoconv
