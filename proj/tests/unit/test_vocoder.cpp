#include <catch_amalgamated.hpp>

#include "emoconv/errors.hpp"
#include "emoconv/vocoder.hpp"
#include "oracles.hpp"
#include "scenarios.hpp"

using namespace emoconv;

TEST_CASE("generator length law holds for T' in 1..200 on the tiny preset", "[vocoder]") {
  const auto r = oracle::generator_length_law(200);
  CHECK(r.checked == 200);
  for (const auto& f : r.failures) FAIL_CHECK(f);
}

TEST_CASE("discriminator bank has six period and three scale sub-discriminators", "[vocoder]") {
  for (const auto& cfg : {DiscriminatorConfig::tiny(), DiscriminatorConfig::full()}) {
    const auto r = oracle::bank_layout(cfg);
    for (const auto& f : r.failures) FAIL_CHECK(f);
  }
}

TEST_CASE("generator configs must tie hop to the frame rate", "[vocoder]") {
  auto cfg = GeneratorConfig::tiny();
  CHECK(cfg.hop() == 320);
  CHECK_NOTHROW(cfg.validate());
  cfg.upsample_factors = {5, 4, 4};
  CHECK_THROWS_AS(cfg.validate(), ContractError);
  CHECK(GeneratorConfig::full().channel_widths() == std::vector<std::size_t>{512, 256, 128, 64, 32});
}

TEST_CASE("conditioning rows are unit embedding | speaker | emotion", "[vocoder]") {
  nn::Rng rng(3);
  oracle::Rng data(3);
  const auto table = UnitEmbedding::make(5, 8, rng);
  UnitSequence units{{4, 0, 4, 2}, 5};
  SpeakerEmbedding spk{oracle::randn(kSpeakerDim, data)};
  EmotionEmbedding emo{oracle::randn(kEmotionDim, data), 3.0};
  const auto cond = build_conditioning(units, spk, emo, table);
  REQUIRE(cond.batch() == 1);
  REQUIRE(cond.frames() == 4);
  REQUIRE(cond.width() == 8 + kSpeakerDim + kEmotionDim);
  for (std::size_t t = 0; t < 4; ++t) {
    const auto row = cond.row(0, t);
    for (std::size_t c = 0; c < 8; ++c)
      CHECK(row[c] == table.table.value().at(static_cast<std::size_t>(units.units[t]), c));
    for (std::size_t c = 0; c < kSpeakerDim; ++c) CHECK(row[8 + c] == spk.vector[c]);
    for (std::size_t c = 0; c < kEmotionDim; ++c) CHECK(row[8 + kSpeakerDim + c] == emo.vector[c]);
  }
  UnitSequence bad{{5}, 5};
  CHECK_THROWS_AS(build_conditioning(bad, spk, emo, table), ContractError);
  UnitSequence wrong_k{{1}, 7};
  CHECK_THROWS_AS(build_conditioning(wrong_k, spk, emo, table), ContractError);
}

TEST_CASE("generator output is bounded and rejects wrong widths", "[vocoder]") {
  nn::Rng rng(2);
  oracle::Rng data(2);
  const auto gen = Generator::make(GeneratorConfig::tiny(), rng);
  const auto y = gen.forward(ad::constant(oracle::randn_tensor({2, gen.config().input_width(), 3}, data, 3.0)));
  REQUIRE(y.shape() == Shape{2, 1, 960});
  for (double v : y.value().vec()) CHECK(std::abs(v) <= 1.0);
  CHECK_THROWS_AS(gen.forward(ad::constant(Tensor({1, 10, 3}, 0.0))), ContractError);
}

TEST_CASE("discriminate checks waveform shapes", "[vocoder]") {
  nn::Rng rng(2);
  const auto bank = DiscriminatorBank::make(DiscriminatorConfig::tiny(), rng);
  AudioClip a, b;
  a.samples.assign(1000, 0.1);
  b.samples.assign(999, 0.1);
  CHECK_THROWS_AS(discriminate(a, b, bank), ContractError);
  b.samples.push_back(0.0);
  const auto d = discriminate(a, b, bank);
  CHECK(d.real.size() == 9);
  CHECK(d.fake.size() == 9);
}
