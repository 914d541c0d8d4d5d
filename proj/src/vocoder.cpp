#include "emoconv/vocoder.hpp"

#include <algorithm>

#include "emoconv/errors.hpp"

namespace emoconv {

// Configs ----------------------------------------------------------------------

GeneratorConfig GeneratorConfig::tiny() {
  GeneratorConfig c;
  c.unit_embed_dim = 32;
  c.initial_channels = 32;
  return c;
}

std::size_t GeneratorConfig::hop() const {
  std::size_t p = 1;
  for (auto f : upsample_factors) p *= f;
  return p;
}

std::vector<std::size_t> GeneratorConfig::channel_widths() const {
  std::vector<std::size_t> w{initial_channels};
  for (std::size_t i = 0; i < upsample_factors.size(); ++i) w.push_back(std::max<std::size_t>(1, w.back() / 2));
  return w;
}

void GeneratorConfig::validate() const {
  if (upsample_factors.empty()) throw ContractError("generator: need at least one upsampling stage");
  for (auto f : upsample_factors)
    if (f == 0) throw ContractError("generator: upsample factors must be positive");
  if (unit_embed_dim == 0 || initial_channels == 0) throw ContractError("generator: widths must be positive");
  if (pre_kernel % 2 == 0 || post_kernel % 2 == 0 || residual_kernel % 2 == 0) {
    throw ContractError("generator: kernels must be odd");
  }
  const double produced = static_cast<double>(hop()) * frame_rate;
  if (produced != static_cast<double>(sample_rate)) {
    throw ContractError("generator: upsampling product " + std::to_string(hop()) + " x frame rate " +
                        std::to_string(frame_rate) + " != sample rate " + std::to_string(sample_rate));
  }
}

DiscriminatorConfig DiscriminatorConfig::tiny() {
  DiscriminatorConfig c;
  c.period_channels = {4, 8, 16, 16};
  c.scale_layers = {{4, 15, 1, 1}, {8, 41, 4, 2}, {16, 41, 4, 4}, {16, 5, 1, 1}};
  return c;
}

void DiscriminatorConfig::validate() const {
  if (period_channels.empty() || scale_layers.empty()) throw ContractError("discriminator: no layers");
  for (auto p : periods)
    if (p < 1) throw ContractError("discriminator: periods must be positive");
  for (auto s : scales)
    if (s == 0 || (s & (s - 1)) != 0) throw ContractError("discriminator: scales must be powers of two");
  std::size_t in = 1;
  for (const auto& l : scale_layers) {
    if (l.channels == 0 || l.kernel == 0 || l.stride == 0 || l.groups == 0 || in % l.groups != 0 ||
        l.channels % l.groups != 0) {
      throw ContractError("discriminator: invalid scale layer");
    }
    in = l.channels;
  }
}

// Conditioning -----------------------------------------------------------------

std::vector<double> ConditioningTensor::row(std::size_t b, std::size_t t) const {
  std::vector<double> r(width());
  for (std::size_t c = 0; c < r.size(); ++c) r[c] = at(b, t, c);
  return r;
}

UnitEmbedding UnitEmbedding::make(std::size_t k, std::size_t dim, nn::Rng& rng) {
  UnitEmbedding u;
  u.table = ad::parameter(nn::normal_init({k, dim}, 1, 1.0, rng));
  return u;
}

ConditioningTensor build_conditioning_batch(const std::vector<UnitSequence>& units,
                                            const std::vector<SpeakerEmbedding>& speakers, const ad::Var& emotion,
                                            const UnitEmbedding& unit_table, double frame_rate) {
  const std::size_t batch = units.size();
  if (batch == 0) throw ContractError("build_conditioning: empty batch");
  if (speakers.size() != batch) throw ContractError("build_conditioning: speaker count != batch");
  if (emotion.shape() != Shape{batch, kEmotionDim}) {
    throw ContractError("build_conditioning: emotion must be [B, 128], got " + shape_str(emotion.shape()));
  }
  const std::size_t frames = units.front().units.size();
  if (frames == 0) throw ContractError("build_conditioning: empty unit sequence");
  const std::size_t du = unit_table.dim(), k = unit_table.k();
  const std::size_t width = du + kSpeakerDim + kEmotionDim;
  for (std::size_t b = 0; b < batch; ++b) {
    if (units[b].units.size() != frames) throw ContractError("build_conditioning: unit sequences differ in length");
    if (speakers[b].vector.size() != kSpeakerDim) throw ContractError("build_conditioning: speaker vector must be 512-d");
    for (int u : units[b].units) {
      if (u < 0 || static_cast<std::size_t>(u) >= k) {
        throw ContractError("build_conditioning: unit " + std::to_string(u) + " outside [0, " + std::to_string(k) +
                            ")");
      }
    }
  }

  Tensor value(Shape{batch, width, frames}, 0.0);
  const Tensor& table = unit_table.table.value();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < frames; ++t) {
      const auto u = static_cast<std::size_t>(units[b].units[t]);
      for (std::size_t c = 0; c < du; ++c) value.at(b, c, t) = table.at(u, c);
      for (std::size_t c = 0; c < kSpeakerDim; ++c) value.at(b, du + c, t) = speakers[b].vector[c];
      for (std::size_t c = 0; c < kEmotionDim; ++c) value.at(b, du + kSpeakerDim + c, t) = emotion.value().at(b, c);
    }
  }

  std::vector<std::vector<int>> ids;
  for (const auto& u : units) ids.push_back(u.units);
  ad::Var data = ad::make_op(std::move(value), {unit_table.table, emotion},
                             [ids = std::move(ids), du, batch, frames](ad::Node& self) {
                               ad::Node& tn = *self.parents[0];
                               ad::Node& en = *self.parents[1];
                               for (std::size_t b = 0; b < batch; ++b) {
                                 if (tn.requires_grad) {
                                   auto& g = tn.grad_buffer();
                                   for (std::size_t t = 0; t < frames; ++t) {
                                     const auto u = static_cast<std::size_t>(ids[b][t]);
                                     for (std::size_t c = 0; c < du; ++c) g.at(u, c) += self.grad.at(b, c, t);
                                   }
                                 }
                                 if (en.requires_grad) {
                                   auto& g = en.grad_buffer();
                                   for (std::size_t c = 0; c < kEmotionDim; ++c) {
                                     double s = 0.0;
                                     for (std::size_t t = 0; t < frames; ++t)
                                       s += self.grad.at(b, du + kSpeakerDim + c, t);
                                     g.at(b, c) += s;
                                   }
                                 }
                               }
                             });
  return ConditioningTensor{std::move(data), du, frame_rate};
}

ConditioningTensor build_conditioning(const UnitSequence& units, const SpeakerEmbedding& speaker,
                                      const EmotionEmbedding& emotion, const UnitEmbedding& unit_table) {
  if (emotion.vector.size() != kEmotionDim) throw ContractError("build_conditioning: emotion vector must be 128-d");
  if (units.k != 0 && units.k != unit_table.k()) {
    throw ContractError("build_conditioning: unit sequence K=" + std::to_string(units.k) +
                        " does not match the embedding table K=" + std::to_string(unit_table.k()));
  }
  ad::Var emo = ad::constant(Tensor(Shape{1, kEmotionDim}, emotion.vector));
  return build_conditioning_batch({units}, {speaker}, emo, unit_table);
}

// Generator ------------------------------------------------------------------

Generator Generator::make(const GeneratorConfig& cfg, nn::Rng& rng) {
  cfg.validate();
  Generator g;
  g.cfg_ = cfg;
  const auto widths = cfg.channel_widths();
  g.pre_ = nn::Conv1d::make(cfg.input_width(), widths[0], cfg.pre_kernel, nn::Conv1d::same(cfg.pre_kernel), rng,
                            cfg.init_gain);
  for (std::size_t i = 0; i < cfg.upsample_factors.size(); ++i) {
    Stage s;
    const std::size_t f = cfg.upsample_factors[i];
    s.upsample = nn::ConvTranspose1d::make(widths[i], widths[i + 1], 2 * f, f, rng, cfg.init_gain);
    for (auto d : cfg.residual_dilations) {
      Residual r;
      r.dilated = nn::Conv1d::make(widths[i + 1], widths[i + 1], cfg.residual_kernel,
                                   nn::Conv1d::same(cfg.residual_kernel, d), rng, 0.5 * cfg.init_gain);
      r.pointwise = nn::Conv1d::make(widths[i + 1], widths[i + 1], cfg.residual_kernel,
                                     nn::Conv1d::same(cfg.residual_kernel), rng, 0.5 * cfg.init_gain);
      s.residuals.push_back(std::move(r));
    }
    g.stages_.push_back(std::move(s));
  }
  g.post_ = nn::Conv1d::make(widths.back(), 1, cfg.post_kernel, nn::Conv1d::same(cfg.post_kernel), rng,
                             cfg.init_gain);
  return g;
}

ad::Var Generator::forward(const ad::Var& conditioning) const {
  if (conditioning.value().rank() != 3 || conditioning.shape()[1] != cfg_.input_width()) {
    throw ContractError("generator: conditioning width " +
                        (conditioning.value().rank() == 3 ? std::to_string(conditioning.shape()[1]) : "?") +
                        " does not match the configured input width " + std::to_string(cfg_.input_width()));
  }
  ad::Var x = pre_(conditioning);
  for (const auto& stage : stages_) {
    x = stage.upsample(ad::leaky_relu(x, kLeakySlope));
    for (const auto& r : stage.residuals) {
      ad::Var y = r.dilated(ad::leaky_relu(x, kLeakySlope));
      y = r.pointwise(ad::leaky_relu(y, kLeakySlope));
      x = ad::add(x, y);
    }
  }
  x = post_(ad::leaky_relu(x, kLeakySlope));
  return ad::tanh(x);
}

nn::ParamList Generator::parameters() const {
  nn::ParamList out;
  pre_.collect("generator.pre", out);
  for (std::size_t i = 0; i < stages_.size(); ++i) {
    const std::string p = "generator.stage" + std::to_string(i);
    stages_[i].upsample.collect(p + ".upsample", out);
    for (std::size_t r = 0; r < stages_[i].residuals.size(); ++r) {
      stages_[i].residuals[r].dilated.collect(p + ".res" + std::to_string(r) + ".dilated", out);
      stages_[i].residuals[r].pointwise.collect(p + ".res" + std::to_string(r) + ".conv", out);
    }
  }
  post_.collect("generator.post", out);
  return out;
}

AudioClip generate(const ConditioningTensor& cond, const Generator& gen) {
  if (cond.batch() != 1) throw ContractError("generate: expects a single utterance");
  ad::NoGradGuard guard;
  ad::Var y = gen.forward(cond.data);
  AudioClip clip;
  clip.sample_rate = gen.config().sample_rate;
  clip.samples = y.value().vec();
  return clip;
}

// Discriminators -------------------------------------------------------------

PeriodDiscriminator PeriodDiscriminator::make(std::size_t period, const DiscriminatorConfig& cfg, nn::Rng& rng) {
  PeriodDiscriminator d;
  d.period_ = period;
  std::size_t in = 1;
  const std::size_t pad = (cfg.period_kernel - 1) / 2;
  for (std::size_t i = 0; i < cfg.period_channels.size(); ++i) {
    ad::Conv1dSpec spec;
    spec.stride = (i + 1 == cfg.period_channels.size()) ? 1 : cfg.period_stride;
    spec.pad_left = spec.pad_right = pad;
    d.convs_.push_back(nn::Conv1d::make(in, cfg.period_channels[i], cfg.period_kernel, spec, rng, cfg.init_gain));
    in = cfg.period_channels[i];
  }
  d.post_ = nn::Conv1d::make(in, 1, 3, nn::Conv1d::same(3), rng, 1.0);
  return d;
}

DiscriminatorOutput PeriodDiscriminator::operator()(const ad::Var& wave) const {
  DiscriminatorOutput out;
  out.batch = wave.shape()[0];
  ad::Var x = ad::fold_period(wave, period_);
  for (const auto& c : convs_) {
    x = ad::leaky_relu(c(x), kLeakySlope);
    out.features.push_back(x);
  }
  x = post_(x);
  out.features.push_back(x);
  out.score = x;
  return out;
}

void PeriodDiscriminator::collect(const std::string& prefix, nn::ParamList& out) const {
  for (std::size_t i = 0; i < convs_.size(); ++i) convs_[i].collect(prefix + ".conv" + std::to_string(i), out);
  post_.collect(prefix + ".post", out);
}

ScaleDiscriminator ScaleDiscriminator::make(std::size_t factor, const DiscriminatorConfig& cfg, nn::Rng& rng) {
  ScaleDiscriminator d;
  d.factor_ = factor;
  std::size_t in = 1;
  for (const auto& l : cfg.scale_layers) {
    ad::Conv1dSpec spec;
    spec.stride = l.stride;
    spec.groups = l.groups;
    spec.pad_left = spec.pad_right = (l.kernel - 1) / 2;
    d.convs_.push_back(nn::Conv1d::make(in, l.channels, l.kernel, spec, rng, cfg.init_gain));
    in = l.channels;
  }
  d.post_ = nn::Conv1d::make(in, 1, 3, nn::Conv1d::same(3), rng, 1.0);
  return d;
}

DiscriminatorOutput ScaleDiscriminator::operator()(const ad::Var& wave) const {
  DiscriminatorOutput out;
  out.batch = wave.shape()[0];
  ad::Var x = wave;
  for (std::size_t f = factor_; f > 1; f /= 2) x = ad::avg_pool1d(x, 4, 2, 2);
  for (const auto& c : convs_) {
    x = ad::leaky_relu(c(x), kLeakySlope);
    out.features.push_back(x);
  }
  x = post_(x);
  out.features.push_back(x);
  out.score = x;
  return out;
}

void ScaleDiscriminator::collect(const std::string& prefix, nn::ParamList& out) const {
  for (std::size_t i = 0; i < convs_.size(); ++i) convs_[i].collect(prefix + ".conv" + std::to_string(i), out);
  post_.collect(prefix + ".post", out);
}

DiscriminatorBank DiscriminatorBank::make(const DiscriminatorConfig& cfg, nn::Rng& rng) {
  cfg.validate();
  DiscriminatorBank bank;
  bank.cfg_ = cfg;
  for (auto p : cfg.periods) bank.periods_.push_back(PeriodDiscriminator::make(p, cfg, rng));
  for (auto s : cfg.scales) bank.scales_.push_back(ScaleDiscriminator::make(s, cfg, rng));
  return bank;
}

std::size_t DiscriminatorBank::layer_count(std::size_t j) const {
  if (j < periods_.size()) return periods_[j].layer_count();
  return scales_.at(j - periods_.size()).layer_count();
}

std::vector<DiscriminatorOutput> DiscriminatorBank::operator()(const ad::Var& wave) const {
  if (wave.value().rank() != 3 || wave.shape()[1] != 1) {
    throw ContractError("discriminator: expects waveform [B, 1, T], got " + shape_str(wave.shape()));
  }
  std::vector<DiscriminatorOutput> out;
  out.reserve(size());
  for (const auto& d : periods_) out.push_back(d(wave));
  for (const auto& d : scales_) out.push_back(d(wave));
  return out;
}

nn::ParamList DiscriminatorBank::parameters() const {
  nn::ParamList out;
  for (const auto& d : periods_) d.collect("mpd.p" + std::to_string(d.period()), out);
  for (const auto& d : scales_) d.collect("msd.s" + std::to_string(d.factor()), out);
  return out;
}

Discrimination discriminate(const ad::Var& real, const ad::Var& fake, const DiscriminatorBank& bank) {
  if (real.shape() != fake.shape()) {
    throw ContractError("discriminate: real " + shape_str(real.shape()) + " and fake " + shape_str(fake.shape()) +
                        " differ in shape");
  }
  return Discrimination{bank(real), bank(fake)};
}

Discrimination discriminate(const AudioClip& real, const AudioClip& fake, const DiscriminatorBank& bank) {
  if (real.size() != fake.size()) {
    throw ContractError("discriminate: real and fake clips differ in length (" + std::to_string(real.size()) +
                        " vs " + std::to_string(fake.size()) + ")");
  }
  auto as_var = [](const AudioClip& c) { return ad::constant(Tensor(Shape{1, 1, c.size()}, c.samples)); };
  return discriminate(as_var(real), as_var(fake), bank);
}

}  // namespace emoconv
