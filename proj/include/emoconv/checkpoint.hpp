#pragma once

// Trainable model set and its on-disk bundle.
//
// A bundle is a directory holding bundle.json (format version, config, step,
// tensor index, optimizer scalars; sorted keys) and tensors.bin (every tensor
// as little-endian float64 in index order). Loading then saving reproduces
// identical bytes. Saves are atomic: written to a sibling temp directory and
// renamed into place.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "emoconv/config.hpp"
#include "emoconv/encoders.hpp"
#include "emoconv/optim.hpp"
#include "emoconv/vocoder.hpp"

namespace emoconv {

inline constexpr int kCheckpointFormatVersion = 1;

struct Models {
  Generator generator;
  DiscriminatorBank discriminator;
  EmotionEmbedder emotion;
  UnitEmbedding units;
  UnitCodebook codebook;

  // Fresh weights drawn from cfg.seed; the unit table has codebook.k() rows.
  static Models init(const TrainConfig& cfg, UnitCodebook codebook);

  // Updated by the generator optimizer: generator, emotion embedder, unit table.
  nn::ParamList generator_side() const;
  nn::ParamList discriminator_side() const { return discriminator.parameters(); }
};

struct OptimizerState {
  std::uint64_t steps = 0;
  double lr = 0.0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;

  static OptimizerState capture(const Adam& opt);
  void apply(Adam& opt) const;
  bool operator==(const OptimizerState&) const;
};

struct CheckpointBundle {
  int format_version = kCheckpointFormatVersion;
  TrainConfig config;
  std::size_t step = 0;
  Models models;
  OptimizerState opt_g;
  OptimizerState opt_d;
};

void save_checkpoint(const CheckpointBundle& bundle, const std::filesystem::path& dir);
// Throws ConfigError for unsupported versions or inconsistent contents,
// IoError when files are missing.
CheckpointBundle load_checkpoint(const std::filesystem::path& dir);

}  // namespace emoconv
