#include <catch_amalgamated.hpp>

#include <algorithm>
#include <fstream>
#include <set>

#include "emoconv/errors.hpp"
#include "emoconv/training.hpp"
#include "oracles.hpp"
#include "scenarios.hpp"

using namespace emoconv;
namespace fs = std::filesystem;

namespace {

CheckpointBundle random_bundle(std::uint64_t seed) {
  oracle::Rng rng(seed);
  CheckpointBundle b;
  b.config = TrainConfig::tiny();
  b.config.k = 6;
  b.step = 17;
  b.models = Models::init(b.config, UnitCodebook{oracle::randn_tensor({6, 64}, rng)});
  auto fill = [&](OptimizerState& s, const nn::ParamList& params) {
    s.steps = 17;
    s.lr = 0.000123456789;
    for (const auto& p : params) {
      s.m.push_back(oracle::randn_tensor(p.var.shape(), rng));
      Tensor v = oracle::randn_tensor(p.var.shape(), rng);
      for (auto& x : v.vec()) x = x * x;
      s.v.push_back(v);
    }
  };
  fill(b.opt_g, b.models.generator_side());
  fill(b.opt_d, b.models.discriminator_side());
  return b;
}

}  // namespace

TEST_CASE("checkpoint save -> load -> save is byte-identical", "[checkpoint]") {
  const auto dir = oracle::scratch_dir() / "ckpt_roundtrip";
  const auto b = random_bundle(1);
  save_checkpoint(b, dir / "a");
  const auto loaded = load_checkpoint(dir / "a");
  save_checkpoint(loaded, dir / "b");
  CHECK(oracle::same_bytes(dir / "a" / "bundle.json", dir / "b" / "bundle.json"));
  CHECK(oracle::same_bytes(dir / "a" / "tensors.bin", dir / "b" / "tensors.bin"));
  CHECK(loaded.config == b.config);
  CHECK(loaded.step == b.step);
  CHECK(loaded.opt_g == b.opt_g);
  CHECK(loaded.opt_d == b.opt_d);
  CHECK(loaded.models.codebook.centroids.vec() == b.models.codebook.centroids.vec());
  const auto pa = b.models.generator_side(), pb = loaded.models.generator_side();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].name == pb[i].name);
    CHECK(pa[i].var.value().vec() == pb[i].var.value().vec());
  }
}

TEST_CASE("checkpoint saves replace atomically and leave no temp directories", "[checkpoint]") {
  const auto dir = oracle::scratch_dir() / "ckpt_atomic";
  save_checkpoint(random_bundle(2), dir / "c");
  save_checkpoint(random_bundle(3), dir / "c");
  CHECK(load_checkpoint(dir / "c").models.codebook.centroids.vec() ==
        random_bundle(3).models.codebook.centroids.vec());
  std::set<std::string> names;
  for (const auto& e : fs::directory_iterator(dir)) names.insert(e.path().filename().string());
  CHECK(names == std::set<std::string>{"c"});
}

TEST_CASE("corrupt or incompatible checkpoints are rejected", "[checkpoint]") {
  const auto dir = oracle::scratch_dir() / "ckpt_bad";
  save_checkpoint(random_bundle(4), dir / "v");
  CHECK_THROWS_AS(load_checkpoint(dir / "missing"), IoError);
  {
    std::ifstream is(dir / "v" / "bundle.json");
    auto j = nlohmann::json::parse(is);
    j["format_version"] = 99;
    std::ofstream(dir / "v" / "bundle.json") << j.dump(2);
  }
  CHECK_THROWS_AS(load_checkpoint(dir / "v"), ConfigError);
  save_checkpoint(random_bundle(4), dir / "t");
  fs::resize_file(dir / "t" / "tensors.bin", 800);
  CHECK_THROWS_AS(load_checkpoint(dir / "t"), ConfigError);
}

TEST_CASE("epoch order is a seeded permutation", "[training]") {
  const auto a = epoch_order(10, 3, 0);
  auto sorted = a;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < 10; ++i) CHECK(sorted[i] == i);
  CHECK(epoch_order(10, 3, 0) == a);
  CHECK(epoch_order(10, 3, 1) != a);
  CHECK(epoch_order(10, 4, 0) != a);
  CHECK(epoch_of_step(0, 2, 5) == 0);
  CHECK(epoch_of_step(2, 2, 5) == 0);
  CHECK(epoch_of_step(3, 2, 5) == 1);
}

TEST_CASE("batches cut frame-aligned segments with matching units", "[training]") {
  const auto cfg = oracle::quick_config(1);
  const auto manifest = load_manifest(oracle::shared_toy_manifest());
  const auto content = make_content_encoder(cfg.content);
  const auto speaker = make_speaker_encoder(cfg.speaker);
  auto data = prepare_training_data(manifest.rows_in(Split::Train), *content, *speaker);
  REQUIRE(data.examples.size() == 5);
  assign_units(data, fit_codebook(data.features, cfg.k, cfg.seed));
  const std::size_t seg = cfg.segment_samples();
  const std::size_t frames = seg / 320;
  for (std::size_t step = 0; step < 6; ++step) {
    const auto b = make_batch(data, cfg, step);
    REQUIRE(b.real.shape() == Shape{cfg.batch_size, 1, seg});
    REQUIRE(b.units.size() == cfg.batch_size);
    for (std::size_t i = 0; i < cfg.batch_size; ++i) {
      const auto& ex = data.examples[b.indices[i]];
      CHECK(b.units[i].units.size() == frames);
      CHECK(b.arousal[i] == ex.arousal);
      CHECK(b.speakers[i].vector == ex.speaker.vector);
      // Locate the segment in the source: offset must be a whole frame and units must line up.
      const double first = b.real.value().at(i, 0, 0);
      bool found = false;
      for (std::size_t f = 0; f + frames <= ex.units.units.size() && !found; ++f) {
        if (ex.clip.samples[f * 320] != first) continue;
        bool same = true;
        for (std::size_t s = 0; s < seg && same; ++s) same = ex.clip.samples[f * 320 + s] == b.real.value().at(i, 0, s);
        if (!same) continue;
        found = true;
        for (std::size_t t = 0; t < frames; ++t) CHECK(b.units[i].units[t] == ex.units.units[f + t]);
      }
      CHECK(found);
    }
    CHECK(make_batch(data, cfg, step).real.value().vec() == b.real.value().vec());
  }
}

TEST_CASE("training writes logs and checkpoints and validates resumes", "[training]") {
  auto cfg = oracle::quick_config(4);
  cfg.checkpoint_every = 2;
  const auto manifest = load_manifest(oracle::shared_toy_manifest());
  const auto out = oracle::scratch_dir() / "train_quick";
  TrainOptions opts;
  opts.out_dir = out;
  std::size_t calls = 0;
  opts.on_step = [&](std::size_t, const LossReport&) { ++calls; };
  const auto r = train(cfg, manifest, opts);
  CHECK(calls == 4);
  CHECK(r.history.size() == 4);
  CHECK(r.bundle.step == 4);
  CHECK(fs::exists(out / "final" / "bundle.json"));
  CHECK(fs::exists(out / "checkpoints" / "step_000002" / "tensors.bin"));
  CHECK_FALSE(fs::exists(out / "checkpoints" / "step_000004"));
  std::ifstream log(out / "train_log.jsonl");
  std::size_t lines = 0;
  for (std::string line; std::getline(log, line); ++lines) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.at("step").get<std::size_t>() == lines + 1);
    CHECK(j.contains("recon"));
    CHECK(j.contains("total_g"));
  }
  CHECK(lines == 4);
  for (const auto& h : r.history) {
    CHECK(std::isfinite(h.total_g));
    CHECK(h.adv_per_disc.size() == 9);
  }

  auto other = cfg;
  other.lr_g *= 2;
  TrainOptions resume;
  resume.out_dir = oracle::scratch_dir() / "train_quick_bad";
  resume.resume_from = out / "checkpoints" / "step_000002";
  CHECK_THROWS_AS(train(other, manifest, resume), ConfigError);
}

TEST_CASE("training refuses manifests without train rows", "[training]") {
  Manifest m;
  CHECK_THROWS_AS(train(oracle::quick_config(1), m, TrainOptions{oracle::scratch_dir() / "x", {}, {}}),
                  EmptyManifestError);
}

TEST_CASE("frozen backends are untouched by training", "[training]") {
  const auto r = oracle::freeze_contract(oracle::quick_config(5), oracle::shared_toy_manifest(), 5);
  CHECK(r.content_identical);
  CHECK(r.speaker_identical);
  CHECK(r.ser_identical);
  CHECK(r.features_identical);
  CHECK(r.trainable_changed);
}
