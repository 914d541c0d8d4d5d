#include "emoconv/predictors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "emoconv/encoders.hpp"
#include "emoconv/errors.hpp"

namespace emoconv {

double SerModel::predict(const AudioClip& clip) const {
  ad::NoGradGuard guard;
  std::vector<double> s = clip.samples;
  if (s.size() < 1024) s.resize(1024, 0.0);
  const std::size_t n = s.size();
  return forward(ad::constant(Tensor(Shape{1, 1, n}, std::move(s)))).value()[0];
}

LinearMelSer::LinearMelSer(std::string name, std::vector<double> weights, double gain, double bias, MelConfig mel)
    : name_(std::move(name)), weights_(std::move(weights)), gain_(gain), bias_(bias), mel_(mel) {
  validate(mel_);
  if (weights_.size() != static_cast<std::size_t>(mel_.n_mels)) {
    throw ConfigError("SER head has " + std::to_string(weights_.size()) + " weights, expected " +
                      std::to_string(mel_.n_mels));
  }
}

LinearMelSer LinearMelSer::mock(std::uint64_t seed) {
  MelConfig mel;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.25);
  std::vector<double> w(static_cast<std::size_t>(mel.n_mels));
  const double mid = 0.5 * (mel.n_mels - 1);
  for (std::size_t k = 0; k < w.size(); ++k) w[k] = (static_cast<double>(k) - mid) / mid + noise(rng);
  return LinearMelSer("mock", std::move(w), 4.0, 0.0, mel);
}

ad::Var LinearMelSer::forward(const ad::Var& waveform) const {
  const std::size_t batch = waveform.shape()[0];
  ad::Var stats = ad::mean_last(log_mel(waveform, mel_));  // [B, n_mels]
  std::vector<double> w(weights_.size());
  for (std::size_t k = 0; k < w.size(); ++k) w[k] = gain_ * weights_[k] / static_cast<double>(w.size());
  const std::size_t dim = w.size();
  ad::Var wv = ad::constant(Tensor(Shape{1, dim}, std::move(w)));
  ad::Var bv = ad::constant(Tensor::scalar(bias_));
  ad::Var z = ad::linear(stats, wv, bv);  // [B, 1]
  return ad::reshape(ad::affine(ad::sigmoid(z), 6.0, 1.0), Shape{batch});
}

std::vector<double> LinearMelSer::parameters() const {
  std::vector<double> p = weights_;
  p.push_back(gain_);
  p.push_back(bias_);
  return p;
}

double spectral_flatness(const AudioClip& clip) {
  constexpr int n_fft = 1024;
  constexpr std::size_t hop = 256;
  constexpr double eps = 1e-12;
  std::vector<double> s = clip.samples;
  if (s.size() < static_cast<std::size_t>(n_fft)) s.resize(n_fft, 0.0);
  std::vector<double> frame(n_fft);
  const double pi = std::acos(-1.0);
  double total = 0.0;
  std::size_t frames = 0;
  for (std::size_t start = 0; start + n_fft <= s.size(); start += hop) {
    for (int i = 0; i < n_fft; ++i) frame[i] = s[start + i] * (0.5 - 0.5 * std::cos(2.0 * pi * i / n_fft));
    const auto p = power_spectrum(frame, n_fft);
    double log_sum = 0.0, sum = 0.0;
    for (double v : p) {
      log_sum += std::log(v + eps);
      sum += v + eps;
    }
    const double n = static_cast<double>(p.size());
    total += std::exp(log_sum / n) / (sum / n);
    ++frames;
  }
  return std::clamp(total / static_cast<double>(frames), 0.0, 1.0);
}

double MockMos::score(const AudioClip& clip) const { return 1.0 + 4.0 * (1.0 - spectral_flatness(clip)); }

std::unique_ptr<SerModel> make_ser_model(const SerBackendSpec& spec) {
  if (spec.name == "mock") return std::make_unique<LinearMelSer>(LinearMelSer::mock(spec.seed));
  if (spec.name.rfind("cached:", 0) == 0) {
    const std::string name = spec.name.substr(7);
    const auto root = model_cache_dir();
    if (root.empty()) throw BackendError("SER backend '" + name + "' needs " + std::string(kModelCacheEnv));
    const auto path = root / name / "ser_head.json";
    std::ifstream is(path);
    if (!is) throw BackendError("SER weights not found: " + path.string());
    try {
      const auto j = nlohmann::json::parse(is);
      return std::make_unique<LinearMelSer>(spec.name, j.at("weights").get<std::vector<double>>(),
                                            j.value("gain", 1.0), j.value("bias", 0.0));
    } catch (const nlohmann::json::exception& e) {
      throw BackendError("malformed SER head " + path.string() + ": " + e.what());
    }
  }
  throw BackendError("unknown SER backend '" + spec.name + "'");
}

std::unique_ptr<MosModel> make_mos_model(const MosBackendSpec& spec) {
  if (spec.name == "mock") return std::make_unique<MockMos>();
  throw BackendError("MOS backend '" + spec.name + "' is not available (no cached weights)");
}

}  // namespace emoconv
