#pragma once

// Independent reference implementations used as test oracles. They share no
// code with the library: direct loops, naive DFTs, exhaustive searches.

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "emoconv/autograd.hpp"
#include "emoconv/mel.hpp"

namespace oracle {

using Rng = std::mt19937_64;

std::vector<double> randn(std::size_t n, Rng& rng, double scale = 1.0);
emoconv::Tensor randn_tensor(const emoconv::Shape& shape, Rng& rng, double scale = 1.0);

double rel_diff(double a, double b);

// Loss oracles over plain arrays; every batch slice is laid out contiguously.
double adv_g(std::span<const double> fake_score, std::size_t batch, bool mean);
double disc(std::span<const double> real_score, std::span<const double> fake_score, std::size_t batch, bool mean);
// layers: (real, fake) pairs of flattened activations.
double feature_matching(const std::vector<std::pair<std::vector<double>, std::vector<double>>>& layers,
                        std::size_t batch, bool mean);

// Log-mel via a naive DFT and an independently built HTK filterbank.
// Returns [n_mels][frames].
std::vector<std::vector<double>> log_mel(std::span<const double> x, const emoconv::MelConfig& cfg);
double recon(std::span<const double> real, std::span<const double> fake, std::size_t batch,
             const emoconv::MelConfig& cfg, bool mean);

double ccc(std::span<const double> x, std::span<const double> y);
double pearson(std::span<const double> x, std::span<const double> y);

// Index of the nearest row of `centroids` ([k][d]) with the smallest index on ties.
int nearest(std::span<const double> frame, const std::vector<std::vector<double>>& centroids);

// Central finite differences of f at `coords` of `param`, compared against
// the analytic gradient. Returns the worst violation of
// |fd - an| <= rtol * max(|fd|, |an|) + atol as a ratio (<= 1 passes).
struct GradCheck {
  double worst_ratio = 0.0;
  std::size_t checked = 0;
  std::string detail;
};
GradCheck grad_check(emoconv::ad::Var param, const std::function<emoconv::ad::Var()>& loss,
                     std::span<const std::size_t> coords, double eps = 1e-6, double rtol = 1e-3,
                     double atol = 1e-8);
// Coordinates spread over a tensor of n elements.
std::vector<std::size_t> spread_coords(std::size_t n, std::size_t count, Rng& rng);

// Welch one-tailed p-value computed by numerically integrating the t density.
double welch_p_less(std::span<const double> a, std::span<const double> b);

}  // namespace oracle
