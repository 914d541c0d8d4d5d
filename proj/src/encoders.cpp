#include "emoconv/encoders.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <set>

#include "emoconv/errors.hpp"
#include "emoconv/mel.hpp"

namespace emoconv {

namespace {

constexpr double kEnergyFloor = 1e-8;
// Centre/scale for log band energies before the projections.
constexpr double kLogCentre = -8.0;
constexpr double kLogScale = 4.0;

void require_working_rate(const AudioClip& clip) {
  if (clip.sample_rate != kWorkingRate) {
    throw ContractError("encoder input must be at " + std::to_string(kWorkingRate) + " Hz, got " +
                        std::to_string(clip.sample_rate));
  }
}

double squared_distance(const double* a, const double* b, std::size_t dim) {
  double s = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

std::size_t nearest(const double* x, const Tensor& centroids) {
  const std::size_t k = centroids.dim(0), dim = centroids.dim(1);
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < k; ++c) {
    const double d = squared_distance(x, centroids.data() + c * dim, dim);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

Tensor read_feature_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw BackendError("precomputed features not found: " + path.string());
  std::uint64_t rows = 0, cols = 0;
  is.read(reinterpret_cast<char*>(&rows), sizeof rows);
  is.read(reinterpret_cast<char*>(&cols), sizeof cols);
  if (!is || rows == 0 || cols == 0 || rows * cols > (1ULL << 32)) {
    throw BackendError("malformed feature file: " + path.string());
  }
  Tensor t(Shape{rows, cols}, 0.0);
  is.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
  if (!is) throw BackendError("truncated feature file: " + path.string());
  return t;
}

std::filesystem::path backend_dir(const std::string& name) {
  const auto root = model_cache_dir();
  if (root.empty()) {
    throw BackendError("backend '" + name + "' needs the model cache; set " + std::string(kModelCacheEnv));
  }
  const auto dir = root / name;
  if (!std::filesystem::is_directory(dir)) {
    throw BackendError("backend '" + name + "' not found in model cache " + root.string());
  }
  return dir;
}

}  // namespace

std::filesystem::path model_cache_dir() {
  const char* v = std::getenv(kModelCacheEnv);
  return v ? std::filesystem::path(v) : std::filesystem::path();
}

Tensor band_log_energies(const AudioClip& clip) {
  constexpr std::size_t hop = MockContentEncoder::kHop;
  constexpr int n_fft = 512;
  MelConfig bands;
  bands.sample_rate = clip.sample_rate;
  bands.n_fft = n_fft;
  bands.hop = static_cast<int>(hop);
  bands.n_mels = static_cast<int>(MockContentEncoder::kBands);
  bands.f_max = clip.sample_rate / 2.0;
  const Tensor& fb = mel_filterbank(bands);

  static const std::vector<double> window = [] {
    std::vector<double> w(hop);
    for (std::size_t i = 0; i < hop; ++i) w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / hop);
    return w;
  }();

  const std::size_t frames = clip.size() / hop;
  Tensor out(Shape{frames, MockContentEncoder::kBands}, 0.0);
  std::vector<double> frame(hop);
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t i = 0; i < hop; ++i) frame[i] = window[i] * clip.samples[f * hop + i];
    const auto power = power_spectrum(frame, n_fft);
    for (std::size_t b = 0; b < MockContentEncoder::kBands; ++b) {
      double e = 0.0;
      for (std::size_t k = 0; k < power.size(); ++k) e += fb.at(b, k) * power[k];
      out.at(f, b) = std::log(e + kEnergyFloor);
    }
  }
  return out;
}

// Mock content ---------------------------------------------------------------

MockContentEncoder::MockContentEncoder(ContentBackendSpec spec) : spec_(std::move(spec)) {
  if (spec_.layer < 0 || spec_.layer > kMaxLayer) {
    throw ConfigError("mock content backend: layer must be in [0, " + std::to_string(kMaxLayer) + "]");
  }
  if (spec_.layer > 0 && spec_.feature_dim == 0) throw ConfigError("mock content backend: feature_dim must be > 0");
  nn::Rng rng(spec_.seed);
  std::size_t in = kBands;
  for (int l = 0; l < spec_.layer; ++l) {
    layers_.push_back(nn::normal_init({spec_.feature_dim, in}, in, 1.5, rng));
    in = spec_.feature_dim;
  }
}

std::size_t MockContentEncoder::feature_dim() const { return spec_.layer == 0 ? kBands : spec_.feature_dim; }

ContentFeatures MockContentEncoder::encode(const AudioClip& clip) const {
  require_working_rate(clip);
  const Tensor bands = band_log_energies(clip);
  const std::size_t frames = bands.dim(0);
  if (frames == 0) {
    throw DegenerateInputError("content encoder: clip shorter than one " + std::to_string(kHop) + "-sample frame");
  }
  ContentFeatures out;
  out.frame_rate = frame_rate();
  out.frames = Tensor(Shape{frames, feature_dim()}, 0.0);
  std::vector<double> h(kBands), next;
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t b = 0; b < kBands; ++b) h[b] = (bands.at(f, b) - kLogCentre) / kLogScale;
    for (const auto& w : layers_) {
      const std::size_t dout = w.dim(0), din = w.dim(1);
      next.assign(dout, 0.0);
      for (std::size_t o = 0; o < dout; ++o) {
        double s = 0.0;
        for (std::size_t i = 0; i < din; ++i) s += w.at(o, i) * h[i];
        next[o] = std::tanh(s);
      }
      h.swap(next);
    }
    std::copy(h.begin(), h.end(), out.frames.data() + f * feature_dim());
  }
  return out;
}

std::vector<double> MockContentEncoder::parameters() const {
  std::vector<double> out;
  for (const auto& w : layers_) out.insert(out.end(), w.vec().begin(), w.vec().end());
  return out;
}

// Mock speaker ---------------------------------------------------------------

MockSpeakerEncoder::MockSpeakerEncoder(SpeakerBackendSpec spec) : spec_(std::move(spec)) {
  nn::Rng rng(spec_.seed);
  const std::size_t in = 2 * MockContentEncoder::kBands;
  projection_ = nn::normal_init({kSpeakerDim, in}, in, 1.0, rng);
}

SpeakerEmbedding MockSpeakerEncoder::encode(const AudioClip& clip) const {
  require_working_rate(clip);
  if (clip.size() == 0) throw DegenerateInputError("speaker encoder: empty clip");
  AudioClip padded = clip;
  if (padded.size() < MockContentEncoder::kHop) padded.samples.resize(MockContentEncoder::kHop, 0.0);
  const Tensor bands = band_log_energies(padded);
  const std::size_t frames = bands.dim(0), nb = bands.dim(1);

  // utterance statistics: per-band mean and std
  std::vector<double> stats(2 * nb, 0.0);
  for (std::size_t b = 0; b < nb; ++b) {
    double m = 0.0;
    for (std::size_t f = 0; f < frames; ++f) m += bands.at(f, b);
    m /= static_cast<double>(frames);
    double v = 0.0;
    for (std::size_t f = 0; f < frames; ++f) v += (bands.at(f, b) - m) * (bands.at(f, b) - m);
    stats[b] = (m - kLogCentre) / kLogScale;
    stats[nb + b] = std::sqrt(v / static_cast<double>(frames)) / kLogScale;
  }

  SpeakerEmbedding out;
  out.vector.assign(kSpeakerDim, 0.0);
  double norm = 0.0;
  for (std::size_t o = 0; o < kSpeakerDim; ++o) {
    double s = 0.0;
    for (std::size_t i = 0; i < stats.size(); ++i) s += projection_.at(o, i) * stats[i];
    out.vector[o] = std::tanh(s);
    norm += out.vector[o] * out.vector[o];
  }
  norm = std::sqrt(norm);
  if (norm > 0.0)
    for (double& v : out.vector) v /= norm;
  return out;
}

// Precomputed ----------------------------------------------------------------

PrecomputedContentEncoder::PrecomputedContentEncoder(ContentBackendSpec spec, std::filesystem::path dir)
    : spec_(std::move(spec)), dir_(std::move(dir)) {}

ContentFeatures PrecomputedContentEncoder::encode(const AudioClip& clip) const {
  const auto path = dir_ / (std::filesystem::path(clip.source_id).stem().string() + ".feat");
  ContentFeatures out;
  out.frames = read_feature_file(path);
  out.frame_rate = frame_rate();
  if (out.dim() != spec_.feature_dim) {
    throw ConfigError("precomputed features have dimension " + std::to_string(out.dim()) + ", expected " +
                      std::to_string(spec_.feature_dim));
  }
  return out;
}

PrecomputedSpeakerEncoder::PrecomputedSpeakerEncoder(SpeakerBackendSpec spec, std::filesystem::path dir)
    : spec_(std::move(spec)), dir_(std::move(dir)) {}

SpeakerEmbedding PrecomputedSpeakerEncoder::encode(const AudioClip& clip) const {
  const auto path = dir_ / (std::filesystem::path(clip.source_id).stem().string() + ".feat");
  const Tensor t = read_feature_file(path);
  if (t.size() != kSpeakerDim) {
    throw ConfigError("precomputed speaker vector must have " + std::to_string(kSpeakerDim) + " entries");
  }
  return SpeakerEmbedding{t.vec()};
}

std::unique_ptr<ContentEncoder> make_content_encoder(const ContentBackendSpec& spec) {
  if (spec.name == "mock") return std::make_unique<MockContentEncoder>(spec);
  if (spec.name.rfind("precomputed:", 0) == 0) {
    return std::make_unique<PrecomputedContentEncoder>(spec, backend_dir(spec.name.substr(12)));
  }
  throw BackendError("unknown content backend '" + spec.name + "'");
}

std::unique_ptr<SpeakerEncoder> make_speaker_encoder(const SpeakerBackendSpec& spec) {
  if (spec.name == "mock") return std::make_unique<MockSpeakerEncoder>(spec);
  if (spec.name.rfind("precomputed:", 0) == 0) {
    return std::make_unique<PrecomputedSpeakerEncoder>(spec, backend_dir(spec.name.substr(12)));
  }
  throw BackendError("unknown speaker backend '" + spec.name + "'");
}

ContentFeatures encode_content(const AudioClip& clip, const ContentEncoder& backend) {
  return backend.encode(clip);
}

SpeakerEmbedding encode_speaker(const AudioClip& clip, const SpeakerEncoder& backend) {
  SpeakerEmbedding e = backend.encode(clip);
  if (e.vector.size() != kSpeakerDim) throw BackendError("speaker backend returned a vector of the wrong size");
  return e;
}

// Codebook -------------------------------------------------------------------

UnitCodebook fit_codebook(std::span<const ContentFeatures> features, std::size_t k, std::uint64_t seed,
                          int max_iterations) {
  if (k < 2) throw ContractError("fit_codebook: K must be at least 2");
  if (features.empty()) throw InsufficientDataError("fit_codebook: no features");
  const std::size_t dim = features.front().dim();
  std::size_t total = 0;
  for (const auto& f : features) {
    if (f.dim() != dim) throw ContractError("fit_codebook: feature dimensions differ");
    total += f.num_frames();
  }
  if (total < k) {
    throw InsufficientDataError("fit_codebook: " + std::to_string(total) + " frames for K = " + std::to_string(k));
  }

  Tensor data(Shape{total, dim}, 0.0);
  {
    std::size_t row = 0;
    for (const auto& f : features) {
      std::copy(f.frames.vec().begin(), f.frames.vec().end(), data.data() + row * dim);
      row += f.num_frames();
    }
  }
  {
    std::set<std::vector<double>> distinct;
    for (std::size_t i = 0; i < total && distinct.size() < k; ++i) {
      distinct.emplace(data.data() + i * dim, data.data() + (i + 1) * dim);
    }
    if (distinct.size() < k) {
      throw InsufficientDataError("fit_codebook: fewer than K = " + std::to_string(k) + " distinct frames");
    }
  }

  // k-means++ seeding
  std::mt19937_64 rng(seed);
  Tensor centroids(Shape{k, dim}, 0.0);
  std::vector<double> d2(total, std::numeric_limits<double>::infinity());
  std::size_t first = std::uniform_int_distribution<std::size_t>(0, total - 1)(rng);
  std::copy_n(data.data() + first * dim, dim, centroids.data());
  for (std::size_t c = 1; c < k; ++c) {
    const double* prev = centroids.data() + (c - 1) * dim;
    double sum = 0.0;
    for (std::size_t i = 0; i < total; ++i) {
      d2[i] = std::min(d2[i], squared_distance(data.data() + i * dim, prev, dim));
      sum += d2[i];
    }
    double u = std::uniform_real_distribution<double>(0.0, sum)(rng);
    std::size_t pick = total;
    for (std::size_t i = 0; i < total; ++i) {
      if (d2[i] <= 0.0) continue;
      pick = i;
      u -= d2[i];
      if (u <= 0.0) break;
    }
    std::copy_n(data.data() + pick * dim, dim, centroids.data() + c * dim);
  }

  // Lloyd iterations
  std::vector<std::size_t> assign(total, k);
  std::vector<std::size_t> counts(k);
  for (int it = 0; it < max_iterations; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < total; ++i) {
      const std::size_t a = nearest(data.data() + i * dim, centroids);
      changed = changed || a != assign[i];
      assign[i] = a;
    }
    if (!changed) break;
    Tensor sums(Shape{k, dim}, 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < total; ++i) {
      ++counts[assign[i]];
      for (std::size_t j = 0; j < dim; ++j) sums.at(assign[i], j) += data.at(i, j);
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) {
        // Re-seed an empty cluster at the point farthest from its centroid.
        std::size_t far = 0;
        double far_d = -1.0;
        for (std::size_t i = 0; i < total; ++i) {
          const double d = squared_distance(data.data() + i * dim, centroids.data() + assign[i] * dim, dim);
          if (d > far_d) {
            far_d = d;
            far = i;
          }
        }
        std::copy_n(data.data() + far * dim, dim, centroids.data() + c * dim);
        assign[far] = c;
        continue;
      }
      for (std::size_t j = 0; j < dim; ++j) centroids.at(c, j) = sums.at(c, j) / static_cast<double>(counts[c]);
    }
  }

  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = a + 1; b < k; ++b)
      if (squared_distance(centroids.data() + a * dim, centroids.data() + b * dim, dim) == 0.0) {
        throw InsufficientDataError("fit_codebook: clustering collapsed two centroids");
      }
  return UnitCodebook{std::move(centroids)};
}

UnitSequence quantize(const ContentFeatures& features, const UnitCodebook& codebook) {
  if (features.dim() != codebook.dim()) {
    throw ContractError("quantize: feature dimension " + std::to_string(features.dim()) +
                        " does not match codebook dimension " + std::to_string(codebook.dim()));
  }
  UnitSequence out;
  out.k = codebook.k();
  out.units.resize(features.num_frames());
  for (std::size_t t = 0; t < features.num_frames(); ++t) {
    out.units[t] = static_cast<int>(nearest(features.frames.data() + t * features.dim(), codebook.centroids));
  }
  return out;
}

// Emotion --------------------------------------------------------------------

double normalize_arousal(double arousal) {
  if (!(arousal >= kArousalMin && arousal <= kArousalMax)) {
    throw ContractError("arousal " + std::to_string(arousal) + " outside [1, 7]");
  }
  return (arousal - kArousalMin) / (kArousalMax - kArousalMin);
}

EmotionEmbedder EmotionEmbedder::make(nn::Rng& rng, std::size_t hidden) {
  EmotionEmbedder e;
  e.hidden_ = nn::Linear::make(1, hidden, rng, 2.0);
  // Non-zero input bias so both arousal extremes produce active units.
  std::normal_distribution<double> bias(0.0, 0.5);
  for (auto& v : e.hidden_.bias.mutable_value().vec()) v = bias(rng);
  e.output_ = nn::Linear::make(hidden, kEmotionDim, rng, 1.0);
  return e;
}

ad::Var EmotionEmbedder::forward(std::span<const double> arousal) const {
  Tensor in(Shape{arousal.size(), 1}, 0.0);
  for (std::size_t i = 0; i < arousal.size(); ++i) in[i] = normalize_arousal(arousal[i]);
  ad::Var h = ad::leaky_relu(hidden_(ad::constant(std::move(in))), kSlope);
  return output_(h);
}

EmotionEmbedding EmotionEmbedder::embed(double arousal) const {
  ad::NoGradGuard guard;
  const double e[1] = {arousal};
  ad::Var v = forward(e);
  return EmotionEmbedding{v.value().vec(), arousal};
}

nn::ParamList EmotionEmbedder::parameters() const {
  nn::ParamList out;
  hidden_.collect("emotion.hidden", out);
  output_.collect("emotion.output", out);
  return out;
}

void EmotionEmbedder::zero_output_layer() {
  output_.weight.mutable_value().fill(0.0);
  output_.bias.mutable_value().fill(0.0);
}

EmotionEmbedding embed_emotion(double arousal, const EmotionEmbedder& params) { return params.embed(arousal); }

}  // namespace emoconv
