#include "emoconv/training.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "emoconv/errors.hpp"

namespace emoconv {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum class Stream : std::uint32_t { EpochOrder = 1, Segments = 2 };

std::mt19937_64 derived_rng(std::uint64_t seed, Stream stream, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

std::string checkpoint_name(std::size_t step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "step_%06zu", step);
  return buf;
}

}  // namespace

TrainingData prepare_training_data(const std::vector<ManifestRow>& rows, const ContentEncoder& content,
                                   const SpeakerEncoder& speaker) {
  TrainingData data;
  for (const auto& row : rows) {
    TrainingExample ex;
    ex.clip = load_audio(row.audio_path);
    ex.arousal = row.arousal;
    ContentFeatures f = encode_content(ex.clip, content);
    if (f.num_frames() == 0) throw DegenerateInputError("no content frames in " + row.audio_path.string());
    ex.speaker = encode_speaker(ex.clip, speaker);
    data.examples.push_back(std::move(ex));
    data.features.push_back(std::move(f));
  }
  return data;
}

void assign_units(TrainingData& data, const UnitCodebook& codebook) {
  for (std::size_t i = 0; i < data.examples.size(); ++i) data.examples[i].units = quantize(data.features[i], codebook);
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  auto rng = derived_rng(seed, Stream::EpochOrder, epoch);
  // Fisher-Yates with an explicit draw so the order does not depend on the
  // standard library's shuffle implementation.
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
  return order;
}

std::size_t epoch_of_step(std::size_t step, std::size_t batch_size, std::size_t n_examples) {
  if (n_examples == 0) throw ContractError("epoch_of_step: no examples");
  return step * batch_size / n_examples;
}

Batch make_batch(const TrainingData& data, const TrainConfig& cfg, std::size_t step) {
  const std::size_t n = data.examples.size();
  if (n == 0) throw ContractError("make_batch: no training examples");
  const std::size_t batch = cfg.batch_size;
  const std::size_t len = cfg.segment_samples();
  const std::size_t hop = cfg.generator.hop();
  const std::size_t frames = len / hop;

  Batch b;
  Tensor real(Shape{batch, 1, len}, 0.0);
  auto rng = derived_rng(cfg.seed, Stream::Segments, step);
  std::size_t cached_epoch = static_cast<std::size_t>(-1);
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < batch; ++i) {
    const std::size_t pos = step * batch + i;
    if (pos / n != cached_epoch) {
      cached_epoch = pos / n;
      order = epoch_order(n, cfg.seed, cached_epoch);
    }
    const std::size_t idx = order[pos % n];
    const auto& ex = data.examples[idx];
    const std::size_t have = ex.units.units.size();

    UnitSequence units;
    units.k = ex.units.k;
    std::size_t frame0 = 0;
    if (have >= frames) {
      frame0 = static_cast<std::size_t>(rng() % (have - frames + 1));
      units.units.assign(ex.units.units.begin() + frame0, ex.units.units.begin() + frame0 + frames);
    } else {
      // Short clip: zero-padded audio, last unit repeated.
      (void)rng();
      units.units = ex.units.units;
      units.units.resize(frames, ex.units.units.empty() ? 0 : ex.units.units.back());
    }
    const std::size_t start = frame0 * hop;
    const std::size_t avail = ex.clip.size() > start ? std::min(len, ex.clip.size() - start) : 0;
    for (std::size_t t = 0; t < avail; ++t) real.at(i, 0, t) = ex.clip.samples[start + t];

    b.units.push_back(std::move(units));
    b.speakers.push_back(ex.speaker);
    b.arousal.push_back(ex.arousal);
    b.indices.push_back(idx);
  }
  b.real = ad::constant(std::move(real));
  return b;
}

LossReport train_step(const Batch& batch, Models& models, const StepSettings& s, Adam& opt_g, Adam& opt_d) {
  if (!s.ser) throw ContractError("train_step: no SER model");
  const std::size_t bsz = batch.arousal.size();
  if (bsz < 2) throw ContractError("train_step: batch must hold at least two utterances");

  ad::Var emotion = models.emotion.forward(batch.arousal);
  const auto cond = build_conditioning_batch(batch.units, batch.speakers, emotion, models.units,
                                             models.generator.config().frame_rate);
  ad::Var fake = models.generator.forward(cond.data);
  if (fake.shape() != batch.real.shape()) {
    throw ContractError("train_step: generated " + shape_str(fake.shape()) + " vs real " +
                        shape_str(batch.real.shape()));
  }
  const auto& bank = models.discriminator;
  const std::size_t J = bank.size();
  LossComponents c;

  // Discriminator update.
  {
    const auto real_out = bank(batch.real);
    const auto fake_out = bank(fake.detach());
    std::vector<ad::Var> terms;
    for (std::size_t j = 0; j < J; ++j) {
      terms.push_back(discriminator_loss(real_out[j], fake_out[j], s.reduction));
      c.disc.push_back(terms.back().item());
    }
    const std::vector<double> ones(J, 1.0);
    ad::Var total_d = ad::weighted_sum(terms, ones);
    if (!std::isfinite(total_d.item())) {
      for (std::size_t j = 0; j < J; ++j)
        if (!std::isfinite(c.disc[j])) throw NonFiniteLossError("disc", "sub-discriminator " + std::to_string(j));
      throw NonFiniteLossError("disc", "total");
    }
    total_d.backward();
    opt_d.step();
  }

  // Generator update against the refreshed discriminators.
  std::vector<DiscriminatorOutput> real_out;
  {
    ad::NoGradGuard guard;
    real_out = bank(batch.real);
  }
  const auto fake_out = bank(fake);
  std::vector<ad::Var> terms;
  std::vector<double> weights;
  for (std::size_t j = 0; j < J; ++j) {
    terms.push_back(adv_generator_loss(fake_out[j], s.reduction));
    weights.push_back(1.0);
    c.adv.push_back(terms.back().item());
    terms.push_back(feature_matching_loss(real_out[j], fake_out[j], s.reduction));
    weights.push_back(s.weights.lambda_fm);
    c.fm.push_back(terms.back().item());
  }
  terms.push_back(recon_loss(batch.real, fake, s.mel, s.reduction));
  weights.push_back(s.weights.lambda_r);
  c.recon = terms.back().item();
  terms.push_back(ser_loss(batch.arousal, fake, *s.ser));
  weights.push_back(s.weights.lambda_ser);
  c.ser = terms.back().item();

  LossReport report = total_losses(c, s.weights);
  require_finite(report);
  ad::Var total_g = ad::weighted_sum(terms, weights);
  total_g.backward();
  opt_d.zero_grad();  // the generator pass also reached the discriminator weights
  opt_g.step();
  return report;
}

std::unique_ptr<SerModel> make_training_ser(const TrainConfig& cfg) { return make_ser_model(cfg.ser); }

namespace {

AdamConfig adam_config(const TrainConfig& cfg, double lr) {
  AdamConfig a;
  a.lr = lr;
  a.beta1 = cfg.beta1;
  a.beta2 = cfg.beta2;
  a.lr_decay = cfg.lr_decay;
  return a;
}

// Fields that may differ between a checkpoint and the config resuming it.
TrainConfig resumable_view(TrainConfig c) {
  c.steps = 0;
  c.checkpoint_every = 0;
  return c;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const Manifest& manifest, const TrainOptions& options) {
  cfg.validate();
  const auto rows = manifest.rows_in(Split::Train);
  if (rows.empty()) throw EmptyManifestError("manifest has no train rows");
  if (options.out_dir.empty()) throw ContractError("train: no output directory");
  fs::create_directories(options.out_dir);

  const auto content = make_content_encoder(cfg.content);
  const auto speaker = make_speaker_encoder(cfg.speaker);
  const auto ser = make_training_ser(cfg);
  TrainingData data = prepare_training_data(rows, *content, *speaker);

  CheckpointBundle bundle;
  if (options.resume_from) {
    bundle = load_checkpoint(*options.resume_from);
    if (!(resumable_view(bundle.config) == resumable_view(cfg))) {
      throw ConfigError("checkpoint " + options.resume_from->string() + " was trained with a different config");
    }
    if (bundle.step > cfg.steps) throw ConfigError("checkpoint is past the requested step count");
  } else {
    bundle.models = Models::init(cfg, fit_codebook(data.features, cfg.k, cfg.seed));
  }
  bundle.config = cfg;
  assign_units(data, bundle.models.codebook);

  Adam opt_g(bundle.models.generator_side(), adam_config(cfg, cfg.lr_g));
  Adam opt_d(bundle.models.discriminator_side(), adam_config(cfg, cfg.lr_d));
  if (options.resume_from) {
    bundle.opt_g.apply(opt_g);
    bundle.opt_d.apply(opt_d);
  }

  const fs::path log_path = options.out_dir / "train_log.jsonl";
  std::ofstream log(log_path, options.resume_from ? std::ios::app : std::ios::trunc);
  if (!log) throw IoError("cannot write " + log_path.string());

  const StepSettings settings{cfg.weights, cfg.reduction, cfg.mel, ser.get()};
  const std::size_t n = data.examples.size();
  auto snapshot = [&](std::size_t step) {
    bundle.step = step;
    bundle.opt_g = OptimizerState::capture(opt_g);
    bundle.opt_d = OptimizerState::capture(opt_d);
  };

  TrainResult result;
  for (std::size_t step = bundle.step; step < cfg.steps; ++step) {
    const auto epoch = epoch_of_step(step, cfg.batch_size, n);
    const double decay = std::pow(cfg.lr_decay, static_cast<double>(epoch));
    opt_g.set_lr(cfg.lr_g * decay);
    opt_d.set_lr(cfg.lr_d * decay);

    const Batch batch = make_batch(data, cfg, step);
    LossReport report;
    try {
      report = train_step(batch, bundle.models, settings, opt_g, opt_d);
    } catch (const NonFiniteLossError& e) {
      json dump{{"step", step + 1}, {"term", e.term()}, {"message", e.what()}, {"batch", batch.indices}};
      std::ofstream(options.out_dir / "nonfinite_dump.json") << dump.dump(2) << '\n';
      throw;
    }
    json line = to_json(report);
    line["step"] = step + 1;
    line["epoch"] = epoch;
    line["lr_g"] = opt_g.lr();
    line["lr_d"] = opt_d.lr();
    log << line.dump() << '\n' << std::flush;
    result.history.push_back(report);
    if (options.on_step) options.on_step(step + 1, report);

    if (cfg.checkpoint_every > 0 && (step + 1) % cfg.checkpoint_every == 0 && step + 1 < cfg.steps) {
      snapshot(step + 1);
      save_checkpoint(bundle, options.out_dir / "checkpoints" / checkpoint_name(step + 1));
    }
  }
  snapshot(cfg.steps);
  result.final_checkpoint = options.out_dir / "final";
  save_checkpoint(bundle, result.final_checkpoint);
  result.bundle = bundle;
  return result;
}

}  // namespace emoconv
