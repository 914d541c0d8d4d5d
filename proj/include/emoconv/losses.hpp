#pragma once

// Training objectives: least-squares adversarial terms, mel reconstruction,
// discriminator feature matching, and the CCC-based SER critic term.
//
// Batch handling: each term is summed over utterances; Reduction::Mean then
// divides by the batch size.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "emoconv/autograd.hpp"
#include "emoconv/mel.hpp"
#include "emoconv/predictors.hpp"
#include "emoconv/vocoder.hpp"

namespace emoconv {

enum class Reduction { Sum, Mean };

struct LossWeights {
  double lambda_fm = 2.0;
  double lambda_r = 45.0;
  double lambda_ser = 1.0;

  void validate() const;  // all >= 0
  bool operator==(const LossWeights&) const = default;
};

// Concordance correlation with population moments; 0 when degenerate.
double ccc(std::span<const double> x, std::span<const double> y);
double pearson(std::span<const double> x, std::span<const double> y);

// sum_b ||1 - D_j(y_hat)||^2 for one sub-discriminator.
ad::Var adv_generator_loss(const DiscriminatorOutput& fake, Reduction red = Reduction::Mean);
// sum_b ||1 - D_j(x)||^2 + ||D_j(y_hat)||^2.
ad::Var discriminator_loss(const DiscriminatorOutput& real, const DiscriminatorOutput& fake,
                           Reduction red = Reduction::Mean);
// sum_i (1/M_i) ||psi_i(x) - psi_i(y_hat)||_1 with M_i the per-utterance size of layer i.
ad::Var feature_matching_loss(const DiscriminatorOutput& real, const DiscriminatorOutput& fake,
                              Reduction red = Reduction::Mean);
// L1 between log-mel spectrograms of [B, 1, T] waveforms.
ad::Var recon_loss(const ad::Var& real, const ad::Var& fake, const MelConfig& cfg, Reduction red = Reduction::Mean);
// Same with the real spectrogram precomputed ([B, n_mels, F]).
ad::Var recon_loss_from_mel(const ad::Var& real_mel, const ad::Var& fake, const MelConfig& cfg,
                            Reduction red = Reduction::Mean);
double recon_loss(const AudioClip& x, const AudioClip& y_hat, const MelConfig& cfg);
// 1 - ccc(targets, SER(fake)); needs at least two utterances.
ad::Var ser_loss(std::span<const double> target_arousal, const ad::Var& fake, const SerModel& ser);

// Per-step scalar values. Generator-side terms come from the generator
// update, `disc` from the discriminator update of the same step.
struct LossComponents {
  std::vector<double> adv;   // per sub-discriminator
  std::vector<double> fm;    // per sub-discriminator
  std::vector<double> disc;  // per sub-discriminator
  std::optional<double> recon;
  std::optional<double> ser;
};

struct LossReport {
  double adv_g = 0.0;
  double disc = 0.0;
  double recon = 0.0;
  double fm = 0.0;
  double ser = 0.0;
  double total_g = 0.0;
  double total_d = 0.0;
  std::vector<double> adv_per_disc;
  std::vector<double> fm_per_disc;
  std::vector<double> disc_per_disc;
};

// total_g = sum_j (adv_j + lambda_fm fm_j) + lambda_r recon + lambda_ser ser; total_d = sum_j disc_j.
// Throws ContractError when a component is missing or the per-j lists disagree.
LossReport total_losses(const LossComponents& c, const LossWeights& w);

// Throws NonFiniteLossError naming the first non-finite term.
void require_finite(const LossReport& r);

}  // namespace emoconv
