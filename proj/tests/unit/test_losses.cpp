#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "emoconv/errors.hpp"
#include "emoconv/losses.hpp"
#include "oracles.hpp"

using namespace emoconv;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

DiscriminatorOutput random_output(std::size_t batch, const std::vector<std::size_t>& widths, oracle::Rng& rng) {
  DiscriminatorOutput o;
  o.batch = batch;
  for (std::size_t w : widths) o.features.push_back(ad::parameter(oracle::randn_tensor({batch, 2, w}, rng)));
  o.score = o.features.back();
  return o;
}

MelConfig small_mel() {
  MelConfig cfg;
  cfg.n_fft = 64;
  cfg.hop = 16;
  cfg.n_mels = 8;
  return cfg;
}

}  // namespace

TEST_CASE("adversarial and discriminator losses match elementwise oracles", "[losses]") {
  oracle::Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t batch = 1 + trial % 4;
    const bool mean = trial % 2 == 0;
    const Reduction red = mean ? Reduction::Mean : Reduction::Sum;
    const auto real = random_output(batch, {5, 3}, rng);
    const auto fake = random_output(batch, {5, 3}, rng);
    CHECK_THAT(adv_generator_loss(fake, red).item(),
               WithinRel(oracle::adv_g(fake.score.value().vec(), batch, mean), 1e-12));
    CHECK_THAT(discriminator_loss(real, fake, red).item(),
               WithinRel(oracle::disc(real.score.value().vec(), fake.score.value().vec(), batch, mean), 1e-12));
  }
}

TEST_CASE("feature matching normalises each layer by its per-utterance size", "[losses]") {
  oracle::Rng rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t batch = 1 + trial % 3;
    const bool mean = trial % 2 == 1;
    const auto real = random_output(batch, {7, 4, 2, 1}, rng);
    const auto fake = random_output(batch, {7, 4, 2, 1}, rng);
    std::vector<std::pair<std::vector<double>, std::vector<double>>> layers;
    for (std::size_t i = 0; i < real.features.size(); ++i)
      layers.emplace_back(real.features[i].value().vec(), fake.features[i].value().vec());
    CHECK_THAT(feature_matching_loss(real, fake, mean ? Reduction::Mean : Reduction::Sum).item(),
               WithinRel(oracle::feature_matching(layers, batch, mean), 1e-12));
  }
}

TEST_CASE("feature matching rejects misaligned activation lists", "[losses]") {
  oracle::Rng rng(13);
  const auto a = random_output(2, {4, 3}, rng);
  const auto b = random_output(2, {4}, rng);
  CHECK_THROWS_AS(feature_matching_loss(a, b), ContractError);
  const auto c = random_output(2, {5, 3}, rng);
  CHECK_THROWS_AS(feature_matching_loss(a, c), ContractError);
}

TEST_CASE("mel reconstruction matches the naive-DFT oracle", "[losses]") {
  oracle::Rng rng(14);
  const MelConfig cfg = small_mel();
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t batch = 1 + trial % 3;
    const std::size_t len = 100 + 7 * trial;
    const auto real = oracle::randn(batch * len, rng, 0.3);
    const auto fake = oracle::randn(batch * len, rng, 0.3);
    const bool mean = trial % 2 == 0;
    const double got = recon_loss(ad::constant(Tensor({batch, 1, len}, real)), ad::parameter(Tensor({batch, 1, len}, fake)),
                                  cfg, mean ? Reduction::Mean : Reduction::Sum)
                           .item();
    CHECK_THAT(got, WithinRel(oracle::recon(real, fake, batch, cfg, mean), 1e-6));
  }
}

TEST_CASE("clip reconstruction loss is zero for identical clips and checks lengths", "[losses]") {
  oracle::Rng rng(15);
  AudioClip a;
  a.samples = oracle::randn(2048, rng, 0.2);
  CHECK(recon_loss(a, a, MelConfig{}) == 0.0);
  AudioClip b = a;
  b.samples.pop_back();
  CHECK_THROWS_AS(recon_loss(a, b, MelConfig{}), ContractError);
}

TEST_CASE("linear-mel SER matches its closed form", "[losses][ser]") {
  oracle::Rng rng(16);
  const MelConfig cfg = small_mel();
  const auto w = oracle::randn(8, rng);
  const LinearMelSer ser("test", w, 3.0, 0.2, cfg);
  const std::size_t len = 200;
  const auto x = oracle::randn(2 * len, rng, 0.3);
  const auto pred = ser.forward(ad::constant(Tensor({2, 1, len}, x))).value();
  for (std::size_t b = 0; b < 2; ++b) {
    const auto lm = oracle::log_mel(std::span<const double>(x).subspan(b * len, len), cfg);
    double z = 0.0;
    for (std::size_t m = 0; m < 8; ++m) {
      double avg = 0.0;
      for (double v : lm[m]) avg += v / static_cast<double>(lm[m].size());
      z += w[m] * avg;
    }
    z = 3.0 * z / 8.0 + 0.2;
    CHECK_THAT(pred[b], WithinRel(1.0 + 6.0 / (1.0 + std::exp(-z)), 1e-9));
  }
}

TEST_CASE("SER loss is one minus batch CCC", "[losses][ser]") {
  oracle::Rng rng(17);
  const LinearMelSer ser("test", oracle::randn(8, rng), 3.0, 0.0, small_mel());
  const std::size_t len = 160;
  const Tensor x = oracle::randn_tensor({4, 1, len}, rng, 0.3);
  const std::vector<double> targets{1.0, 3.0, 5.5, 7.0};
  const auto preds = ser.forward(ad::constant(x)).value().vec();
  CHECK_THAT(ser_loss(targets, ad::parameter(x), ser).item(), WithinAbs(1.0 - oracle::ccc(targets, preds), 1e-12));
  const std::vector<double> one{4.0};
  CHECK_THROWS_AS(ser_loss(one, ad::parameter(oracle::randn_tensor({1, 1, len}, rng)), ser), ContractError);
}

TEST_CASE("totals reconstruct exactly from components", "[losses]") {
  oracle::Rng rng(18);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  const LossWeights w;
  REQUIRE(w.lambda_fm == 2.0);
  REQUIRE(w.lambda_r == 45.0);
  REQUIRE(w.lambda_ser == 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    LossComponents c;
    for (int j = 0; j < 9; ++j) {
      c.adv.push_back(u(rng));
      c.fm.push_back(u(rng));
      c.disc.push_back(u(rng));
    }
    c.recon = u(rng);
    c.ser = u(rng);
    const auto r = total_losses(c, w);
    double g = 0.0, d = 0.0;
    for (int j = 0; j < 9; ++j) {
      g += c.adv[j] + 2.0 * c.fm[j];
      d += c.disc[j];
    }
    g += 45.0 * *c.recon + 1.0 * *c.ser;
    CHECK_THAT(r.total_g, WithinRel(g, 1e-14));
    CHECK_THAT(r.total_d, WithinRel(d, 1e-14));
    CHECK_THAT(r.total_g, WithinRel(r.adv_g + 2.0 * r.fm + 45.0 * r.recon + r.ser, 1e-14));
  }
}

TEST_CASE("missing or mismatched components are rejected", "[losses]") {
  LossComponents c;
  c.adv = {1.0, 2.0};
  c.fm = {1.0, 2.0};
  c.disc = {1.0, 2.0};
  c.recon = 1.0;
  CHECK_THROWS_AS(total_losses(c, {}), ContractError);
  c.ser = 0.5;
  CHECK_NOTHROW(total_losses(c, {}));
  c.fm.pop_back();
  CHECK_THROWS_AS(total_losses(c, {}), ContractError);
}

TEST_CASE("non-finite terms are named", "[losses]") {
  LossReport r;
  r.recon = std::nan("");
  try {
    require_finite(r);
    FAIL("expected NonFiniteLossError");
  } catch (const NonFiniteLossError& e) {
    CHECK(e.term() == "recon");
  }
}

TEST_CASE("CCC identities", "[losses][ccc]") {
  std::vector<double> v{0.3, 1.2, -2.0, 4.5, 0.0};
  CHECK_THAT(ccc(v, v), WithinAbs(1.0, 1e-9));
  const std::vector<double> a{1, 2, 3}, b{3, 2, 1};
  CHECK_THAT(ccc(a, b), WithinAbs(-1.0, 1e-9));
  const std::vector<double> c{5, 5, 5};
  CHECK(ccc(c, c) == 0.0);  // degenerate denominator
  const std::vector<double> shifted{2, 3, 4};
  CHECK(ccc(a, shifted) < pearson(a, shifted));
}

TEST_CASE("CCC is symmetric, bounded by Pearson and permutation invariant", "[losses][ccc]") {
  oracle::Rng rng(19);
  std::uniform_int_distribution<int> len(2, 30);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = static_cast<std::size_t>(len(rng));
    auto x = oracle::randn(n, rng);
    auto y = oracle::randn(n, rng, 2.0);
    for (auto& v : y) v += 0.5;
    const double c = ccc(x, y);
    CHECK_THAT(c, WithinAbs(oracle::ccc(x, y), 1e-9));
    CHECK(c == Catch::Approx(ccc(y, x)).margin(1e-12));
    CHECK(std::abs(c) <= std::abs(pearson(x, y)) + 1e-12);
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> px(n), py(n);
    for (std::size_t i = 0; i < n; ++i) px[i] = x[perm[i]], py[i] = y[perm[i]];
    CHECK_THAT(ccc(px, py), WithinAbs(c, 1e-12));
  }
}
