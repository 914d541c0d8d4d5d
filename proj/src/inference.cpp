#include "emoconv/inference.hpp"

#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "emoconv/errors.hpp"

namespace emoconv {

namespace fs = std::filesystem;
using nlohmann::json;

Converter::Converter(const CheckpointBundle& checkpoint, double max_seconds)
    : checkpoint_(&checkpoint), max_seconds_(max_seconds) {
  if (checkpoint.format_version != kCheckpointFormatVersion) {
    throw ConfigError("unsupported checkpoint version " + std::to_string(checkpoint.format_version));
  }
  const auto& cfg = checkpoint.config;
  content_ = make_content_encoder(cfg.content);
  speaker_ = make_speaker_encoder(cfg.speaker);
  const auto& cb = checkpoint.models.codebook;
  if (content_->feature_dim() != cb.dim()) {
    throw ConfigError("content backend '" + cfg.content.name + "' yields " + std::to_string(content_->feature_dim()) +
                      "-d features but the checkpoint codebook is " + std::to_string(cb.dim()) + "-d");
  }
  if (cb.k() != checkpoint.models.units.k()) {
    throw ConfigError("checkpoint codebook and unit table disagree on K");
  }
  if (std::abs(content_->frame_rate() - cfg.generator.frame_rate) > 1e-9) {
    throw ConfigError("content backend frame rate does not match the generator");
  }
}

ConversionTrace Converter::trace(const AudioClip& input, double target_arousal) const {
  normalize_arousal(target_arousal);  // range check
  if (input.sample_rate != kWorkingRate) {
    throw ContractError("convert: input must be at " + std::to_string(kWorkingRate) + " Hz");
  }
  if (input.duration() > max_seconds_) {
    throw ContractError("convert: input of " + std::to_string(input.duration()) + " s exceeds the " +
                        std::to_string(max_seconds_) + " s limit");
  }
  const auto& models = checkpoint_->models;
  ConversionTrace t;
  t.units = quantize(encode_content(input, *content_), models.codebook);
  t.speaker = encode_speaker(input, *speaker_);
  t.emotion = embed_emotion(target_arousal, models.emotion);
  t.emotion.source_arousal = target_arousal;
  {
    ad::NoGradGuard guard;
    t.conditioning = build_conditioning(t.units, t.speaker, t.emotion, models.units);
  }
  t.output = generate(t.conditioning, models.generator);
  t.output.source_id = input.source_id;
  return t;
}

AudioClip Converter::convert(const AudioClip& input, double target_arousal) const {
  return trace(input, target_arousal).output;
}

AudioClip convert(const ConversionRequest& req) {
  if (!req.checkpoint) throw ContractError("convert: no checkpoint");
  return Converter(*req.checkpoint).convert(req.input, req.target_arousal);
}

TargetChoice TargetChoice::parse(const std::string& text) {
  if (text == "column" || text == "own") return TargetChoice{};
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || text.empty()) throw ContractError("target arousal must be a number or 'column'");
  normalize_arousal(v);
  return TargetChoice{v};
}

BatchResult batch_convert(const fs::path& manifest_path, const TargetChoice& targets,
                          const CheckpointBundle& checkpoint, const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  BatchResult result;
  result.index = out_dir / "index.jsonl";
  std::ofstream index(result.index, std::ios::trunc);
  if (!index) throw IoError("cannot write to output directory " + out_dir.string());

  const Manifest manifest = load_manifest(manifest_path, /*allow_empty=*/true);
  for (const auto& e : manifest.errors) {
    result.warnings.push_back("manifest line " + std::to_string(e.line) + ": " + e.message);
  }
  if (manifest.rows.empty()) result.warnings.push_back("manifest has no rows; index is empty");

  const Converter converter(checkpoint);
  for (std::size_t i = 0; i < manifest.rows.size(); ++i) {
    const auto& row = manifest.rows[i];
    const double target = targets.global.value_or(row.arousal);
    try {
      const AudioClip in = load_audio(row.audio_path);
      const AudioClip out = converter.convert(in, target);
      char name[64];
      std::snprintf(name, sizeof name, "%04zu_", i);
      const fs::path out_path = out_dir / (name + row.audio_path.stem().string() + "_e" +
                                           std::to_string(target).substr(0, 4) + ".wav");
      save_wav(out_path, out);
      json line{{"input", row.audio_path.string()}, {"output", out_path.string()}, {"target_arousal", target}};
      index << line.dump() << '\n';
      ++result.converted;
    } catch (const IoError&) {
      throw;
    } catch (const Error& e) {
      result.failures.push_back({row.audio_path, e.what()});
    }
  }
  if (!index) throw IoError("failed writing " + result.index.string());
  if (!result.failures.empty()) {
    std::ofstream fails(out_dir / "failures.jsonl", std::ios::trunc);
    for (const auto& f : result.failures) fails << json{{"input", f.input.string()}, {"error", f.message}}.dump() << '\n';
  }
  return result;
}

}  // namespace emoconv
