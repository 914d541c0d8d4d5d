#include "emoconv/losses.hpp"

#include <array>
#include <cmath>

#include "emoconv/errors.hpp"

namespace emoconv {

namespace {

double batch_divisor(std::size_t batch, Reduction red) {
  if (batch == 0) throw ContractError("loss: empty batch");
  return red == Reduction::Mean ? 1.0 / static_cast<double>(batch) : 1.0;
}

void check_pair(std::span<const double> x, std::span<const double> y, const char* what) {
  if (x.size() != y.size()) throw ContractError(std::string(what) + ": length mismatch");
  if (x.size() < 2) throw ContractError(std::string(what) + ": needs at least two points");
}

struct Moments {
  double mx = 0, my = 0, vx = 0, vy = 0, cxy = 0;
};

Moments moments(std::span<const double> x, std::span<const double> y) {
  Moments m;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    m.mx += x[i];
    m.my += y[i];
  }
  m.mx /= n;
  m.my /= n;
  for (std::size_t i = 0; i < x.size(); ++i) {
    m.vx += (x[i] - m.mx) * (x[i] - m.mx);
    m.vy += (y[i] - m.my) * (y[i] - m.my);
    m.cxy += (x[i] - m.mx) * (y[i] - m.my);
  }
  m.vx /= n;
  m.vy /= n;
  m.cxy /= n;
  return m;
}

}  // namespace

void LossWeights::validate() const {
  for (double v : {lambda_fm, lambda_r, lambda_ser})
    if (!(v >= 0.0) || !std::isfinite(v)) throw ContractError("loss weights must be finite and non-negative");
}

double ccc(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y, "ccc");
  const Moments m = moments(x, y);
  const double den = m.vx + m.vy + (m.mx - m.my) * (m.mx - m.my);
  return den > 0.0 ? 2.0 * m.cxy / den : 0.0;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y, "pearson");
  const Moments m = moments(x, y);
  const double den = std::sqrt(m.vx * m.vy);
  return den > 0.0 ? m.cxy / den : 0.0;
}

ad::Var adv_generator_loss(const DiscriminatorOutput& fake, Reduction red) {
  if (!fake.score.defined() || fake.score.size() == 0) throw ContractError("adv_generator_loss: empty score map");
  return ad::scale(ad::sum_sq_dev(fake.score, 1.0), batch_divisor(fake.batch, red));
}

ad::Var discriminator_loss(const DiscriminatorOutput& real, const DiscriminatorOutput& fake, Reduction red) {
  if (!real.score.defined() || !fake.score.defined() || real.score.shape() != fake.score.shape()) {
    throw ContractError("discriminator_loss: real and fake score maps differ in shape");
  }
  if (real.batch != fake.batch) throw ContractError("discriminator_loss: batch mismatch");
  const std::array<ad::Var, 2> terms{ad::sum_sq_dev(real.score, 1.0), ad::sum_sq_dev(fake.score, 0.0)};
  const double d = batch_divisor(real.batch, red);
  const std::array<double, 2> w{d, d};
  return ad::weighted_sum(terms, w);
}

ad::Var feature_matching_loss(const DiscriminatorOutput& real, const DiscriminatorOutput& fake, Reduction red) {
  if (real.features.size() != fake.features.size() || real.features.empty()) {
    throw ContractError("feature_matching_loss: activation lists are misaligned (" +
                        std::to_string(real.features.size()) + " vs " + std::to_string(fake.features.size()) + ")");
  }
  if (real.batch != fake.batch) throw ContractError("feature_matching_loss: batch mismatch");
  const double d = batch_divisor(real.batch, red);
  std::vector<ad::Var> terms;
  std::vector<double> weights;
  for (std::size_t i = 0; i < real.features.size(); ++i) {
    const auto& a = real.features[i];
    const auto& b = fake.features[i];
    if (a.shape() != b.shape() || a.size() == 0 || a.size() % real.batch != 0) {
      throw ContractError("feature_matching_loss: layer " + std::to_string(i) + " shapes differ");
    }
    const double per_utt = static_cast<double>(a.size() / real.batch);
    terms.push_back(ad::l1_distance(a, b));
    weights.push_back(d / per_utt);
  }
  return ad::weighted_sum(terms, weights);
}

ad::Var recon_loss_from_mel(const ad::Var& real_mel, const ad::Var& fake, const MelConfig& cfg, Reduction red) {
  ad::Var fake_mel = log_mel(fake, cfg);
  if (real_mel.shape() != fake_mel.shape()) {
    throw ContractError("recon_loss: spectrogram shapes differ (" + shape_str(real_mel.shape()) + " vs " +
                        shape_str(fake_mel.shape()) + ")");
  }
  return ad::scale(ad::l1_distance(real_mel, fake_mel), batch_divisor(fake.shape()[0], red));
}

ad::Var recon_loss(const ad::Var& real, const ad::Var& fake, const MelConfig& cfg, Reduction red) {
  if (real.shape() != fake.shape()) {
    throw ContractError("recon_loss: waveform shapes differ (" + shape_str(real.shape()) + " vs " +
                        shape_str(fake.shape()) + ")");
  }
  ad::Var real_mel;
  {
    ad::NoGradGuard guard;
    real_mel = log_mel(real, cfg);
  }
  return recon_loss_from_mel(real_mel, fake, cfg, red);
}

double recon_loss(const AudioClip& x, const AudioClip& y_hat, const MelConfig& cfg) {
  if (x.size() != y_hat.size()) {
    throw ContractError("recon_loss: clip lengths differ (" + std::to_string(x.size()) + " vs " +
                        std::to_string(y_hat.size()) + ")");
  }
  const MelSpectrogram a = mel(x, cfg);
  const MelSpectrogram b = mel(y_hat, cfg);
  double s = 0.0;
  for (std::size_t i = 0; i < a.frames.size(); ++i) s += std::abs(a.frames[i] - b.frames[i]);
  return s;
}

ad::Var ser_loss(std::span<const double> target_arousal, const ad::Var& fake, const SerModel& ser) {
  const std::size_t batch = fake.shape()[0];
  if (batch < 2) throw ContractError("ser_loss: CCC needs a batch of at least two utterances");
  if (target_arousal.size() != batch) throw ContractError("ser_loss: one target per utterance required");
  ad::Var preds = ser.forward(fake);
  ad::Var targets = ad::constant(Tensor(Shape{batch}, std::vector<double>(target_arousal.begin(), target_arousal.end())));
  return ad::affine(ad::ccc(targets, preds), -1.0, 1.0);
}

LossReport total_losses(const LossComponents& c, const LossWeights& w) {
  w.validate();
  const std::size_t j = c.adv.size();
  if (j == 0) throw ContractError("total_losses: missing adversarial terms");
  if (c.fm.size() != j) throw ContractError("total_losses: feature-matching terms missing or misaligned");
  if (c.disc.size() != j) throw ContractError("total_losses: discriminator terms missing or misaligned");
  if (!c.recon) throw ContractError("total_losses: missing reconstruction term");
  if (!c.ser) throw ContractError("total_losses: missing SER term");

  LossReport r;
  r.adv_per_disc = c.adv;
  r.fm_per_disc = c.fm;
  r.disc_per_disc = c.disc;
  double g = 0.0;
  for (std::size_t k = 0; k < j; ++k) {
    r.adv_g += c.adv[k];
    r.fm += c.fm[k];
    r.disc += c.disc[k];
    g += c.adv[k] + w.lambda_fm * c.fm[k];
  }
  r.recon = *c.recon;
  r.ser = *c.ser;
  r.total_g = g + w.lambda_r * r.recon + w.lambda_ser * r.ser;
  r.total_d = r.disc;
  return r;
}

void require_finite(const LossReport& r) {
  const std::pair<const char*, double> terms[] = {{"adv", r.adv_g}, {"disc", r.disc}, {"recon", r.recon},
                                                  {"fm", r.fm},      {"ser", r.ser}};
  for (const auto& [name, v] : terms) {
    if (!std::isfinite(v)) throw NonFiniteLossError(name, "value " + std::to_string(v));
  }
  for (std::size_t k = 0; k < r.adv_per_disc.size(); ++k) {
    if (!std::isfinite(r.adv_per_disc[k]) || !std::isfinite(r.fm_per_disc[k]) || !std::isfinite(r.disc_per_disc[k])) {
      throw NonFiniteLossError("sub-discriminator " + std::to_string(k), "adv/fm/disc not finite");
    }
  }
}

}  // namespace emoconv
