#include "gradient_suite.hpp"

#include "emoconv/losses.hpp"
#include "emoconv/predictors.hpp"
#include "emoconv/vocoder.hpp"

namespace oracle {

using namespace emoconv;

namespace {

MelConfig small_mel() {
  MelConfig cfg;
  cfg.n_fft = 128;
  cfg.hop = 32;
  cfg.n_mels = 10;
  return cfg;
}

void add(std::vector<NamedGradCheck>& out, std::string name, ad::Var param, const std::function<ad::Var()>& loss,
         std::size_t count, Rng& rng) {
  const auto coords = spread_coords(param.size(), count, rng);
  out.push_back({std::move(name), grad_check(param, loss, coords)});
}

}  // namespace

std::vector<NamedGradCheck> gradient_suite(std::uint64_t seed) {
  Rng rng(seed);
  nn::Rng model_rng(seed);
  std::vector<NamedGradCheck> out;
  const auto dcfg = DiscriminatorConfig::tiny();
  const auto pd = PeriodDiscriminator::make(3, dcfg, model_rng);
  const auto sd = ScaleDiscriminator::make(2, dcfg, model_rng);
  const std::size_t len = 256;
  ad::Var real = ad::constant(randn_tensor({2, 1, len}, rng, 0.3));
  ad::Var fake = ad::parameter(randn_tensor({2, 1, len}, rng, 0.3));

  nn::ParamList pd_params, sd_params;
  pd.collect("p", pd_params);
  sd.collect("s", sd_params);

  add(out, "adv_generator(period) wrt waveform", fake, [&] { return adv_generator_loss(pd(fake)); }, 24, rng);
  add(out, "adv_generator(scale) wrt waveform", fake, [&] { return adv_generator_loss(sd(fake)); }, 24, rng);
  add(out, "discriminator(period) wrt first conv", pd_params.front().var,
      [&] { return discriminator_loss(pd(real), pd(fake)); }, 16, rng);
  add(out, "discriminator(scale) wrt last conv", sd_params[sd_params.size() - 2].var,
      [&] { return discriminator_loss(sd(real), sd(fake)); }, 16, rng);
  add(out, "feature_matching(period) wrt waveform", fake,
      [&] { return feature_matching_loss(pd(real), pd(fake)); }, 24, rng);
  add(out, "feature_matching(scale) wrt waveform", fake,
      [&] { return feature_matching_loss(sd(real), sd(fake)); }, 24, rng);
  add(out, "recon wrt waveform", fake, [&] { return recon_loss(real, fake, small_mel()); }, 24, rng);

  const LinearMelSer ser("grad", randn(10, rng), 4.0, 0.1, small_mel());
  ad::Var fake4 = ad::parameter(randn_tensor({4, 1, len}, rng, 0.3));
  const std::vector<double> targets{1.0, 2.5, 5.0, 7.0};
  add(out, "ser wrt waveform", fake4, [&] { return ser_loss(targets, fake4, ser); }, 24, rng);

  // Emotion embedder: a fixed random projection of its output.
  const auto emo = EmotionEmbedder::make(model_rng, 16);
  const Tensor proj = randn_tensor({3, kEmotionDim}, rng);
  const std::vector<double> arousal{1.0, 4.2, 6.9};
  auto emo_loss = [&] {
    ad::Var e = emo.forward(arousal);
    return ad::l1_distance(e, ad::constant(proj));
  };
  for (const auto& p : emo.parameters()) add(out, "emotion embedder " + p.name, p.var, emo_loss, 16, rng);

  // Generator-side total through conditioning, the tiny generator and every loss.
  const auto gcfg = GeneratorConfig::tiny();
  const auto gen = Generator::make(gcfg, model_rng);
  const auto table = UnitEmbedding::make(6, gcfg.unit_embed_dim, model_rng);
  std::vector<UnitSequence> units{{{0, 3}, 6}, {{5, 1}, 6}};
  std::vector<SpeakerEmbedding> speakers(2);
  for (auto& s : speakers) s.vector = randn(kSpeakerDim, rng, 0.05);
  const std::vector<double> emo_targets{2.0, 6.0};
  ad::Var real_g = ad::constant(randn_tensor({2, 1, 2 * gcfg.hop()}, rng, 0.3));
  const auto total_g = [&] {
    const auto cond = build_conditioning_batch(units, speakers, emo.forward(emo_targets), table);
    ad::Var y = gen.forward(cond.data);
    std::vector<ad::Var> terms{adv_generator_loss(pd(y)), feature_matching_loss(pd(real_g), pd(y)),
                               recon_loss(real_g, y, small_mel()), ser_loss(emo_targets, y, ser)};
    const std::vector<double> w{1.0, 2.0, 45.0, 1.0};
    return ad::weighted_sum(terms, w);
  };
  add(out, "total_g wrt unit table", table.table, total_g, 12, rng);
  const auto gparams = gen.parameters();
  add(out, "total_g wrt " + gparams.front().name, gparams.front().var, total_g, 12, rng);
  add(out, "total_g wrt " + gparams.back().name, gparams.back().var, total_g, 12, rng);
  add(out, "total_g wrt emotion output", emo.parameters().back().var, total_g, 12, rng);
  return out;
}

}  // namespace oracle
