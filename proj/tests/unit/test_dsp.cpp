#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "emoconv/audio.hpp"
#include "emoconv/errors.hpp"
#include "emoconv/mel.hpp"
#include "emoconv/pitch.hpp"
#include "oracles.hpp"

using namespace emoconv;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

AudioClip tone(double hz, std::size_t n, double amp = 0.5) {
  AudioClip c;
  c.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) c.samples[i] = amp * std::sin(2.0 * std::numbers::pi * hz * i / kWorkingRate);
  return c;
}

void compare_mel(const AudioClip& clip, const MelConfig& cfg) {
  const auto got = mel(clip, cfg);
  const auto want = oracle::log_mel(clip.samples, cfg);
  REQUIRE(got.frames.dim(0) == want.size());
  REQUIRE(got.frames.dim(1) == want[0].size());
  double worst = 0.0;
  for (std::size_t m = 0; m < want.size(); ++m)
    for (std::size_t f = 0; f < want[m].size(); ++f) worst = std::max(worst, std::abs(got.frames.at(m, f) - want[m][f]));
  CHECK(worst < 1e-6);
}

}  // namespace

TEST_CASE("log-mel matches a naive DFT oracle on a small config", "[dsp]") {
  MelConfig cfg;
  cfg.n_fft = 64;
  cfg.hop = 16;
  cfg.n_mels = 8;
  oracle::Rng rng(1);
  AudioClip clip;
  clip.samples = oracle::randn(301, rng, 0.3);
  compare_mel(clip, cfg);
}

TEST_CASE("log-mel matches the oracle with the default analysis", "[dsp]") {
  oracle::Rng rng(2);
  AudioClip clip = tone(440.0, 2100);
  const auto noise = oracle::randn(clip.size(), rng, 0.01);
  for (std::size_t i = 0; i < clip.size(); ++i) clip.samples[i] += noise[i];
  compare_mel(clip, MelConfig{});
}

TEST_CASE("mel frame count is ceil(T / hop)", "[dsp]") {
  MelConfig cfg;
  for (std::size_t n : {1024u, 1025u, 1280u, 1281u, 4000u}) {
    CHECK(mel(tone(300, n), cfg).n_frames() == (n + 255) / 256);
  }
  CHECK_THROWS_AS(mel(tone(300, 1000), cfg), DegenerateInputError);
}

TEST_CASE("mel scale round-trips and filters peak at their centres", "[dsp]") {
  for (double hz : {0.0, 100.0, 700.0, 4000.0, 8000.0}) CHECK_THAT(mel_to_hz(hz_to_mel(hz)), WithinAbs(hz, 1e-9));
  CHECK_THAT(hz_to_mel(700.0), WithinRel(2595.0 * std::log10(2.0), 1e-12));
  MelConfig cfg;
  const Tensor& fb = mel_filterbank(cfg);
  REQUIRE(fb.dim(0) == 80);
  REQUIRE(fb.dim(1) == 513);
  for (std::size_t m = 0; m < 80; ++m) {
    double peak = 0.0;
    for (std::size_t k = 0; k < 513; ++k) peak = std::max(peak, fb.at(m, k));
    CHECK(peak <= 1.0 + 1e-12);
    CHECK(peak > 0.0);
  }
}

TEST_CASE("mel config validation rejects bad parameters", "[dsp]") {
  MelConfig cfg;
  cfg.hop = 2048;
  CHECK_THROWS_AS(validate(cfg), ContractError);
  cfg = {};
  cfg.f_max = 9000;
  CHECK_THROWS_AS(validate(cfg), ContractError);
}

TEST_CASE("pitch tracker recovers a pure tone", "[dsp]") {
  for (double hz : {110.0, 200.0, 330.0}) {
    const auto c = extract_pitch(tone(hz, 16000));
    CHECK(c.f0.size() == 1 + (16000 - 1024) / 256);
    REQUIRE(c.mean_voiced.has_value());
    CHECK_THAT(*c.mean_voiced, WithinAbs(hz, 1.0));
    CHECK(c.voiced_count() == c.f0.size());
  }
}

TEST_CASE("pitch tracker marks silence and noise unvoiced", "[dsp]") {
  AudioClip silent;
  silent.samples.assign(8000, 0.0);
  const auto c = extract_pitch(silent);
  CHECK(c.voiced_count() == 0);
  CHECK_FALSE(c.mean_voiced.has_value());
  AudioClip tiny;
  tiny.samples.assign(100, 0.1);
  CHECK_THROWS_AS(extract_pitch(tiny), DegenerateInputError);
}

TEST_CASE("resampler length law and tone preservation", "[dsp]") {
  const auto x = tone(200.0, 44100).samples;
  for (int from : {8000, 22050, 44100, 48000}) {
    const std::size_t n = 12345;
    std::vector<double> in(x.begin(), x.begin() + n);
    const auto out = resample(in, from, 16000);
    CHECK(out.size() == static_cast<std::size_t>(std::llround(n * 16000.0 / from)));
  }
  AudioClip up;
  up.samples = resample(tone(200.0, 16000).samples, 16000, 16000);
  CHECK(up.size() == 16000);
}

TEST_CASE("peak limiting only scales clips that exceed unit magnitude", "[dsp]") {
  std::vector<double> quiet{0.1, -0.5, 0.9};
  CHECK(limit_peak(quiet) == 1.0);
  CHECK(quiet[2] == 0.9);
  std::vector<double> loud{0.5, -2.0, 1.0};
  CHECK_THAT(limit_peak(loud), WithinRel(0.5, 1e-12));
  CHECK(loud[1] == -1.0);
}

TEST_CASE("segments have exact length and short clips are padded", "[dsp]") {
  const auto clip = tone(200.0, 16000);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = sample_segment(clip, 0.5, seed);
    REQUIRE(s.clip.size() == 8000);
    CHECK(s.offset + 8000 <= 16000);
    CHECK_FALSE(s.padded);
    CHECK(s.clip.samples[0] == clip.samples[s.offset]);
  }
  const auto s = sample_segment(tone(200.0, 3000), 0.5, 3);
  CHECK(s.padded);
  CHECK(s.clip.size() == 8000);
  CHECK(s.clip.samples[7999] == 0.0);
}

TEST_CASE("WAV round trip within 16-bit quantisation", "[dsp][io]") {
  const auto dir = std::filesystem::temp_directory_path() / "emoconv_test_wav";
  std::filesystem::create_directories(dir);
  const auto clip = tone(250.0, 4000, 0.7);
  save_wav(dir / "a.wav", clip);
  const auto back = load_audio(dir / "a.wav");
  REQUIRE(back.size() == clip.size());
  double worst = 0;
  for (std::size_t i = 0; i < clip.size(); ++i) worst = std::max(worst, std::abs(back.samples[i] - clip.samples[i]));
  // Half a step of rounding plus the 32767 vs 32768 full-scale convention.
  CHECK(worst <= 2.0 / 32768.0);
  CHECK_THROWS_AS(load_audio(dir / "missing.wav"), DecodeError);
  std::filesystem::remove_all(dir);
}
