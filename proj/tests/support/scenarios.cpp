#include "scenarios.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include <unistd.h>

#include "emoconv/encoders.hpp"
#include "emoconv/toy_corpus.hpp"
#include "emoconv/training.hpp"
#include "emoconv/vocoder.hpp"
#include "oracles.hpp"

namespace oracle {

using namespace emoconv;

QuantizerReport quantizer_vs_exhaustive(std::size_t k, std::size_t frames, std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t dim = 16;
  UnitCodebook cb{randn_tensor({k, dim}, rng)};
  std::vector<std::vector<double>> centroids(k);
  for (std::size_t c = 0; c < k; ++c)
    centroids[c].assign(cb.centroids.data() + c * dim, cb.centroids.data() + (c + 1) * dim);
  ContentFeatures feats{randn_tensor({frames, dim}, rng, 1.2), 50.0};
  const auto units = quantize(feats, cb);
  QuantizerReport r;
  r.frames = frames;
  for (std::size_t t = 0; t < frames; ++t) {
    std::span<const double> f(feats.frames.data() + t * dim, dim);
    if (units.units.at(t) != nearest(f, centroids)) ++r.mismatches;
  }
  return r;
}

std::string quantizer_tie_failures() {
  // Frame at the origin, centroids at +-e_i: all equidistant.
  {
    const std::size_t dim = 4;
    Tensor c({8, dim}, 0.0);
    for (std::size_t i = 0; i < 4; ++i) {
      c.at(2 * i, i) = 1.0;
      c.at(2 * i + 1, i) = -1.0;
    }
    ContentFeatures f{Tensor({3, dim}, 0.0), 50.0};
    const auto u = quantize(f, UnitCodebook{c});
    for (int v : u.units)
      if (v != 0) return "origin equidistant to 8 centroids -> " + std::to_string(v);
  }
  // Duplicate centroids: the first copy wins.
  {
    Tensor c({4, 2}, std::vector<double>{5, 5, 1, 1, 1, 1, 1, 1});
    ContentFeatures f{Tensor({1, 2}, std::vector<double>{1, 1}), 50.0};
    const auto u = quantize(f, UnitCodebook{c});
    if (u.units[0] != 1) return "duplicate centroids -> " + std::to_string(u.units[0]);
  }
  // Midpoint between centroid 3 and 1 (higher index listed first in distance order).
  {
    Tensor c({4, 1}, std::vector<double>{10, 2, -7, 0});
    ContentFeatures f{Tensor({1, 1}, std::vector<double>{1.0}), 50.0};
    const auto u = quantize(f, UnitCodebook{c});
    if (u.units[0] != 1) return "midpoint of centroids 1 and 3 -> " + std::to_string(u.units[0]);
  }
  return "";
}

ShapeReport generator_length_law(std::size_t max_frames) {
  nn::Rng rng(9);
  const auto cfg = GeneratorConfig::tiny();
  const auto gen = Generator::make(cfg, rng);
  std::size_t hop = 1;
  for (auto f : cfg.upsample_factors) hop *= f;
  Rng data_rng(10);
  ShapeReport r;
  ad::NoGradGuard guard;
  for (std::size_t t = 1; t <= max_frames; ++t) {
    const auto y = gen.forward(ad::constant(randn_tensor({1, cfg.input_width(), t}, data_rng, 0.1)));
    ++r.checked;
    const Shape want{1, 1, t * hop};
    if (y.shape() != want) r.failures.push_back("T'=" + std::to_string(t) + " -> " + shape_str(y.shape()));
  }
  return r;
}

ShapeReport bank_layout(const DiscriminatorConfig& cfg) {
  nn::Rng rng(4);
  const auto bank = DiscriminatorBank::make(cfg, rng);
  ShapeReport r;
  auto expect = [&](bool ok, const std::string& what) {
    ++r.checked;
    if (!ok) r.failures.push_back(what);
  };
  expect(bank.period_count() == 6, "period count " + std::to_string(bank.period_count()));
  expect(bank.scale_count() == 3, "scale count " + std::to_string(bank.scale_count()));
  expect(bank.size() == 9, "bank size " + std::to_string(bank.size()));
  const std::vector<std::size_t> periods{2, 3, 4, 5, 7, 11};
  for (std::size_t i = 0; i < bank.period_count() && i < periods.size(); ++i)
    expect(bank.period_discriminators()[i].period() == periods[i], "period " + std::to_string(i));
  Rng data_rng(4);
  ad::NoGradGuard guard;
  const auto outs = bank(ad::constant(randn_tensor({2, 1, 3200}, data_rng, 0.3)));
  expect(outs.size() == 9, "output count");
  for (std::size_t j = 0; j < outs.size(); ++j) {
    expect(outs[j].features.size() == bank.layer_count(j), "layer count of sub-discriminator " + std::to_string(j));
    expect(outs[j].batch == 2, "batch of sub-discriminator " + std::to_string(j));
    expect(!outs[j].features.empty() && outs[j].features.back().node() == outs[j].score.node(),
           "score map is the last feature of sub-discriminator " + std::to_string(j));
  }
  return r;
}

double identical_distribution_mean_p(std::size_t trials, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  double total = 0.0;
  for (std::size_t i = 0; i < trials; ++i) {
    const auto a = randn(n, rng);
    const auto b = randn(n, rng);
    total += significance(a, b).p;
  }
  return total / static_cast<double>(trials);
}

FreezeReport freeze_contract(const TrainConfig& cfg, const std::filesystem::path& manifest_path, std::size_t steps) {
  const Manifest manifest = load_manifest(manifest_path);
  const auto content = make_content_encoder(cfg.content);
  const auto speaker = make_speaker_encoder(cfg.speaker);
  const auto ser = make_training_ser(cfg);
  const auto content_before = content->parameters();
  const auto speaker_before = speaker->parameters();
  const auto ser_before = ser->parameters();

  TrainingData data = prepare_training_data(manifest.rows_in(Split::Train), *content, *speaker);
  Models models = Models::init(cfg, fit_codebook(data.features, cfg.k, cfg.seed));
  assign_units(data, models.codebook);
  const auto trainable_before = nn::clone_params(models.generator_side());

  Adam opt_g(models.generator_side(), AdamConfig{cfg.lr_g, cfg.beta1, cfg.beta2, 1e-8, cfg.lr_decay});
  Adam opt_d(models.discriminator_side(), AdamConfig{cfg.lr_d, cfg.beta1, cfg.beta2, 1e-8, cfg.lr_decay});
  const StepSettings settings{cfg.weights, cfg.reduction, cfg.mel, ser.get()};
  for (std::size_t s = 0; s < steps; ++s) train_step(make_batch(data, cfg, s), models, settings, opt_g, opt_d);

  FreezeReport r;
  r.steps = steps;
  r.content_identical = content->parameters() == content_before;
  r.speaker_identical = speaker->parameters() == speaker_before;
  r.ser_identical = ser->parameters() == ser_before;
  r.features_identical = true;
  for (std::size_t i = 0; i < data.examples.size(); ++i) {
    const auto again = encode_content(data.examples[i].clip, *content);
    if (again.frames.vec() != data.features[i].frames.vec()) r.features_identical = false;
    if (encode_speaker(data.examples[i].clip, *speaker).vector != data.examples[i].speaker.vector)
      r.features_identical = false;
  }
  const auto after = models.generator_side();
  for (std::size_t i = 0; i < after.size(); ++i)
    if (after[i].var.value().vec() != trainable_before[i].var.value().vec()) r.trainable_changed = true;
  return r;
}

bool same_bytes(const std::filesystem::path& a, const std::filesystem::path& b) {
  std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
  if (!fa || !fb) return false;
  const std::string sa{std::istreambuf_iterator<char>(fa), {}};
  const std::string sb{std::istreambuf_iterator<char>(fb), {}};
  return sa == sb;
}

}  // namespace oracle

namespace oracle {

namespace {

struct Scratch {
  std::filesystem::path dir;
  Scratch() {
    dir = std::filesystem::temp_directory_path() / ("emoconv_tests_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir);
  }
  ~Scratch() {
    std::error_code ec;
    std::filesystem::remove_all(dir, ec);
  }
};

}  // namespace

const std::filesystem::path& scratch_dir() {
  static Scratch s;
  return s.dir;
}

const std::filesystem::path& shared_toy_manifest() {
  static const std::filesystem::path path = [] {
    ToyCorpusSpec spec;
    spec.train_clips = 5;
    spec.test_clips = 2;
    spec.seconds = 1.0;
    return write_toy_corpus(scratch_dir() / "toy", spec);
  }();
  return path;
}

TrainConfig quick_config(std::size_t steps) {
  TrainConfig cfg = TrainConfig::tiny();
  cfg.steps = steps;
  cfg.checkpoint_every = 0;
  cfg.k = 8;
  return cfg;
}

}  // namespace oracle
