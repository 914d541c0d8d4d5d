#include "emoconv/mel.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <tuple>

#include "emoconv/errors.hpp"

namespace emoconv {

namespace {

// Power floor inside the magnitude square root: keeps the gradient finite at
// exact zeros while staying well below the log floor for silent frames.
constexpr double kPowerEps = 1e-14;

struct FftPlans {
  fftw_plan r2c = nullptr;
  fftw_plan c2r = nullptr;
};

const FftPlans& plans_for(int n) {
  static std::mutex mu;
  static std::map<int, FftPlans> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  double* in = fftw_alloc_real(static_cast<std::size_t>(n));
  fftw_complex* out = fftw_alloc_complex(static_cast<std::size_t>(n / 2 + 1));
  FftPlans p;
  p.r2c = fftw_plan_dft_r2c_1d(n, in, out, FFTW_ESTIMATE | FFTW_UNALIGNED);
  p.c2r = fftw_plan_dft_c2r_1d(n, out, in, FFTW_ESTIMATE | FFTW_UNALIGNED);
  fftw_free(in);
  fftw_free(out);
  return cache.emplace(n, p).first->second;
}

const std::vector<double>& hann_window(int n) {
  static std::mutex mu;
  static std::map<int, std::vector<double>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  std::vector<double> w(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) w[static_cast<std::size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
  return cache.emplace(n, std::move(w)).first->second;
}

std::size_t left_pad(const MelConfig& cfg) { return static_cast<std::size_t>((cfg.n_fft - cfg.hop) / 2); }

// Index into the original signal for each position of the padded signal.
std::vector<std::size_t> padded_index(std::size_t len, const MelConfig& cfg) {
  const std::size_t frames = mel_frame_count(len, cfg);
  const std::size_t lp = left_pad(cfg);
  const std::size_t total = (frames - 1) * static_cast<std::size_t>(cfg.hop) + static_cast<std::size_t>(cfg.n_fft);
  std::vector<std::size_t> idx(total);
  for (std::size_t p = 0; p < total; ++p) {
    auto i = static_cast<std::ptrdiff_t>(p) - static_cast<std::ptrdiff_t>(lp);
    const auto n = static_cast<std::ptrdiff_t>(len);
    // reflect without repeating the edge sample
    while (i < 0 || i >= n) {
      if (i < 0) i = -i;
      if (i >= n) i = 2 * (n - 1) - i;
    }
    idx[p] = static_cast<std::size_t>(i);
  }
  return idx;
}

struct StftResult {
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::vector<std::complex<double>> spectrum;  // [frames, bins]
};

StftResult stft(std::span<const double> x, const MelConfig& cfg) {
  const auto n_fft = static_cast<std::size_t>(cfg.n_fft);
  const auto hop = static_cast<std::size_t>(cfg.hop);
  StftResult r;
  r.frames = mel_frame_count(x.size(), cfg);
  r.bins = n_fft / 2 + 1;
  r.spectrum.resize(r.frames * r.bins);
  const auto idx = padded_index(x.size(), cfg);
  const auto& win = hann_window(cfg.n_fft);
  const auto& plans = plans_for(cfg.n_fft);
  std::vector<double> frame(n_fft);
  for (std::size_t f = 0; f < r.frames; ++f) {
    for (std::size_t n = 0; n < n_fft; ++n) frame[n] = win[n] * x[idx[f * hop + n]];
    fftw_execute_dft_r2c(plans.r2c, frame.data(),
                         reinterpret_cast<fftw_complex*>(r.spectrum.data() + f * r.bins));
  }
  return r;
}

}  // namespace

void validate(const MelConfig& cfg) {
  if (cfg.sample_rate <= 0 || cfg.n_fft <= 0 || cfg.hop <= 0 || cfg.n_mels <= 0) {
    throw ContractError("mel config: sizes must be positive");
  }
  if (cfg.n_fft % 2 != 0) throw ContractError("mel config: n_fft must be even");
  if (cfg.hop > cfg.n_fft) throw ContractError("mel config: hop must not exceed n_fft");
  if (!(cfg.f_min >= 0.0 && cfg.f_max > cfg.f_min && cfg.f_max <= cfg.sample_rate / 2.0)) {
    throw ContractError("mel config: need 0 <= f_min < f_max <= sample_rate/2");
  }
  if (!(cfg.log_floor > 0.0)) throw ContractError("mel config: log floor must be positive");
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<double> mel_center_frequencies(const MelConfig& cfg) {
  const double lo = hz_to_mel(cfg.f_min), hi = hz_to_mel(cfg.f_max);
  std::vector<double> centers(static_cast<std::size_t>(cfg.n_mels));
  for (int m = 0; m < cfg.n_mels; ++m) {
    centers[static_cast<std::size_t>(m)] = mel_to_hz(lo + (hi - lo) * (m + 1) / (cfg.n_mels + 1));
  }
  return centers;
}

const Tensor& mel_filterbank(const MelConfig& cfg) {
  using Key = std::tuple<int, int, int, double, double>;
  static std::mutex mu;
  static std::map<Key, Tensor> cache;
  validate(cfg);
  const Key key{cfg.sample_rate, cfg.n_fft, cfg.n_mels, cfg.f_min, cfg.f_max};
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;

  const auto bins = static_cast<std::size_t>(cfg.n_fft / 2 + 1);
  const auto n_mels = static_cast<std::size_t>(cfg.n_mels);
  const double lo = hz_to_mel(cfg.f_min), hi = hz_to_mel(cfg.f_max);
  std::vector<double> edges(n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n_mels + 1));
  }
  Tensor fb(Shape{n_mels, bins}, 0.0);
  for (std::size_t m = 0; m < n_mels; ++m) {
    const double left = edges[m], centre = edges[m + 1], right = edges[m + 2];
    for (std::size_t b = 0; b < bins; ++b) {
      const double f = static_cast<double>(b) * cfg.sample_rate / cfg.n_fft;
      const double up = (f - left) / (centre - left);
      const double down = (right - f) / (right - centre);
      fb.at(m, b) = std::max(0.0, std::min(up, down));
    }
  }
  return cache.emplace(key, std::move(fb)).first->second;
}

std::size_t mel_frame_count(std::size_t num_samples, const MelConfig& cfg) {
  const auto hop = static_cast<std::size_t>(cfg.hop);
  return (num_samples + hop - 1) / hop;
}

MelSpectrogram mel(const AudioClip& clip, const MelConfig& cfg) {
  validate(cfg);
  if (clip.size() < static_cast<std::size_t>(cfg.n_fft)) {
    throw DegenerateInputError("mel: clip of " + std::to_string(clip.size()) + " samples is shorter than the " +
                               std::to_string(cfg.n_fft) + "-sample analysis window");
  }
  ad::NoGradGuard guard;
  ad::Var wave = ad::constant(Tensor(Shape{1, 1, clip.size()}, clip.samples));
  ad::Var out = log_mel(wave, cfg);
  MelSpectrogram m;
  m.frames = out.value().reshaped({static_cast<std::size_t>(cfg.n_mels), out.shape()[2]});
  m.frame_hop = cfg.hop;
  m.n_mels = cfg.n_mels;
  return m;
}

ad::Var log_mel(const ad::Var& waveform, const MelConfig& cfg) {
  validate(cfg);
  const auto& shp = waveform.shape();
  if (shp.size() != 3 || shp[1] != 1) {
    throw ContractError("log_mel: expects waveform [B, 1, T], got " + shape_str(shp));
  }
  const std::size_t batch = shp[0], len = shp[2];
  if (len < static_cast<std::size_t>(cfg.n_fft)) {
    throw DegenerateInputError("log_mel: signal shorter than the analysis window");
  }
  const Tensor& fb = mel_filterbank(cfg);
  const auto n_mels = static_cast<std::size_t>(cfg.n_mels);
  const std::size_t bins = fb.dim(1);
  const std::size_t frames = mel_frame_count(len, cfg);

  Tensor out(Shape{batch, n_mels, frames}, 0.0);
  auto spectra = std::make_shared<std::vector<StftResult>>();
  auto mel_lin = std::make_shared<Tensor>(Shape{batch, n_mels, frames}, 0.0);
  std::vector<double> mag(bins);
  for (std::size_t b = 0; b < batch; ++b) {
    std::span<const double> x(waveform.value().data() + b * len, len);
    spectra->push_back(stft(x, cfg));
    const auto& s = spectra->back();
    for (std::size_t f = 0; f < frames; ++f) {
      for (std::size_t k = 0; k < bins; ++k) mag[k] = std::sqrt(std::norm(s.spectrum[f * bins + k]) + kPowerEps);
      for (std::size_t m = 0; m < n_mels; ++m) {
        double acc = 0.0;
        const double* row = fb.data() + m * bins;
        for (std::size_t k = 0; k < bins; ++k) acc += row[k] * mag[k];
        mel_lin->at(b, m, f) = acc;
        out.at(b, m, f) = std::log(std::max(acc, cfg.log_floor));
      }
    }
  }

  const Tensor* fbp = &fb;  // cache entries are never evicted
  return ad::make_op(std::move(out), {waveform}, [=](ad::Node& self) {
    const Tensor& fb = *fbp;
    const auto n_fft = static_cast<std::size_t>(cfg.n_fft);
    const auto hop = static_cast<std::size_t>(cfg.hop);
    const auto idx = padded_index(len, cfg);
    const auto& win = hann_window(cfg.n_fft);
    const auto& plans = plans_for(cfg.n_fft);
    auto& gx = self.parents[0]->grad_buffer();
    std::vector<double> gmag(bins);
    std::vector<std::complex<double>> coef(bins);
    std::vector<double> gframe(n_fft);
    for (std::size_t b = 0; b < batch; ++b) {
      const auto& s = (*spectra)[b];
      for (std::size_t f = 0; f < frames; ++f) {
        std::fill(gmag.begin(), gmag.end(), 0.0);
        bool any = false;
        for (std::size_t m = 0; m < n_mels; ++m) {
          const double lin = mel_lin->at(b, m, f);
          if (lin <= cfg.log_floor) continue;  // clamped: no gradient
          const double gm = self.grad.at(b, m, f) / lin;
          if (gm == 0.0) continue;
          any = true;
          const double* row = fb.data() + m * bins;
          for (std::size_t k = 0; k < bins; ++k) gmag[k] += row[k] * gm;
        }
        if (!any) continue;
        // dL/du_n = Re sum_k c_k e^{+i 2 pi k n / N},  c_k = gmag_k * X_k / |X_k|
        for (std::size_t k = 0; k < bins; ++k) {
          const auto X = s.spectrum[f * bins + k];
          const double m = std::sqrt(std::norm(X) + kPowerEps);
          auto c = X * (gmag[k] / m);
          if (k != 0 && k != bins - 1) c *= 0.5;  // Hermitian completion doubles interior bins
          coef[k] = c;
        }
        fftw_execute_dft_c2r(plans.c2r, reinterpret_cast<fftw_complex*>(coef.data()), gframe.data());
        double* g = gx.data() + b * len;
        for (std::size_t n = 0; n < n_fft; ++n) g[idx[f * hop + n]] += win[n] * gframe[n];
      }
    }
  });
}

std::vector<double> power_spectrum(std::span<const double> frame, int n_fft) {
  if (n_fft <= 0 || frame.size() > static_cast<std::size_t>(n_fft)) {
    throw ContractError("power_spectrum: frame longer than the transform");
  }
  const auto n = static_cast<std::size_t>(n_fft);
  std::vector<double> buf(n, 0.0);
  std::copy(frame.begin(), frame.end(), buf.begin());
  std::vector<std::complex<double>> spec(n / 2 + 1);
  fftw_execute_dft_r2c(plans_for(n_fft).r2c, buf.data(), reinterpret_cast<fftw_complex*>(spec.data()));
  std::vector<double> power(spec.size());
  for (std::size_t k = 0; k < spec.size(); ++k) power[k] = std::norm(spec[k]);
  return power;
}

Tensor log_power_spectrogram(const AudioClip& clip, const MelConfig& cfg) {
  validate(cfg);
  if (clip.size() < static_cast<std::size_t>(cfg.n_fft)) {
    throw DegenerateInputError("spectrogram: clip shorter than the analysis window");
  }
  const auto s = stft(clip.samples, cfg);
  Tensor out(Shape{s.bins, s.frames}, 0.0);
  const double floor_power = cfg.log_floor * cfg.log_floor;
  for (std::size_t f = 0; f < s.frames; ++f)
    for (std::size_t k = 0; k < s.bins; ++k)
      out.at(k, f) = std::log(std::max(std::norm(s.spectrum[f * s.bins + k]), floor_power));
  return out;
}

}  // namespace emoconv
