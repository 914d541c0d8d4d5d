#include "emoconv/config.hpp"

#include <cmath>
#include <fstream>

#include "emoconv/errors.hpp"

namespace emoconv {

using nlohmann::json;

namespace {

template <typename T>
void read_opt(const json& j, const char* key, T& field) {
  if (auto it = j.find(key); it != j.end()) it->get_to(field);
}

}  // namespace

TrainConfig TrainConfig::tiny() {
  TrainConfig c;
  c.segment_seconds = 0.5;
  c.batch_size = 2;
  c.steps = 500;
  c.lr_g = 1e-3;
  c.lr_d = 1e-3;
  c.k = 16;
  c.generator = GeneratorConfig::tiny();
  c.discriminator = DiscriminatorConfig::tiny();
  c.checkpoint_every = 100;
  return c;
}

TrainConfig TrainConfig::smoke() {
  TrainConfig c = tiny();
  c.generator.initial_channels = 64;
  c.lr_g = 2e-3;
  return c;
}

std::size_t TrainConfig::segment_samples() const {
  const std::size_t hop = generator.hop();
  return segment_length(segment_seconds, generator.sample_rate) / hop * hop;
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("train config: " + m); };
  if (!(segment_seconds > 0.0)) fail("segment_seconds must be positive");
  if (batch_size < 2) fail("batch_size must be at least 2 (the SER term needs a CCC over the batch)");
  if (!(lr_g > 0.0) || !(lr_d > 0.0)) fail("learning rates must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) fail("betas must lie in [0, 1)");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) fail("lr_decay must lie in (0, 1]");
  if (k < 1) fail("k must be positive");
  if (emotion_hidden < 1) fail("emotion_hidden must be positive");
  try {
    weights.validate();
    generator.validate();
    discriminator.validate();
    emoconv::validate(mel);
  } catch (const ContractError& e) {
    fail(e.what());
  }
  if (mel.sample_rate != generator.sample_rate) fail("mel and generator sample rates differ");
  if (segment_samples() < static_cast<std::size_t>(mel.n_fft)) {
    fail("segment of " + std::to_string(segment_seconds) + " s is shorter than one analysis window");
  }
}

void to_json(json& j, const MelConfig& c) {
  j = json{{"sample_rate", c.sample_rate}, {"n_fft", c.n_fft}, {"hop", c.hop},          {"n_mels", c.n_mels},
           {"f_min", c.f_min},             {"f_max", c.f_max}, {"log_floor", c.log_floor}};
}

void from_json(const json& j, MelConfig& c) {
  read_opt(j, "sample_rate", c.sample_rate);
  read_opt(j, "n_fft", c.n_fft);
  read_opt(j, "hop", c.hop);
  read_opt(j, "n_mels", c.n_mels);
  read_opt(j, "f_min", c.f_min);
  read_opt(j, "f_max", c.f_max);
  read_opt(j, "log_floor", c.log_floor);
}

void to_json(json& j, const GeneratorConfig& c) {
  j = json{{"unit_embed_dim", c.unit_embed_dim},
           {"upsample_factors", c.upsample_factors},
           {"residual_dilations", c.residual_dilations},
           {"residual_kernel", c.residual_kernel},
           {"initial_channels", c.initial_channels},
           {"pre_kernel", c.pre_kernel},
           {"post_kernel", c.post_kernel},
           {"frame_rate", c.frame_rate},
           {"sample_rate", c.sample_rate},
           {"init_gain", c.init_gain}};
}

void from_json(const json& j, GeneratorConfig& c) {
  if (j.is_string()) {
    const auto name = j.get<std::string>();
    if (name == "tiny") c = GeneratorConfig::tiny();
    else if (name == "full") c = GeneratorConfig::full();
    else throw ConfigError("unknown generator preset '" + name + "'");
    return;
  }
  read_opt(j, "unit_embed_dim", c.unit_embed_dim);
  read_opt(j, "upsample_factors", c.upsample_factors);
  read_opt(j, "residual_dilations", c.residual_dilations);
  read_opt(j, "residual_kernel", c.residual_kernel);
  read_opt(j, "initial_channels", c.initial_channels);
  read_opt(j, "pre_kernel", c.pre_kernel);
  read_opt(j, "post_kernel", c.post_kernel);
  read_opt(j, "frame_rate", c.frame_rate);
  read_opt(j, "sample_rate", c.sample_rate);
  read_opt(j, "init_gain", c.init_gain);
}

void to_json(json& j, const DiscriminatorConfig& c) {
  json layers = json::array();
  for (const auto& l : c.scale_layers)
    layers.push_back({{"channels", l.channels}, {"kernel", l.kernel}, {"stride", l.stride}, {"groups", l.groups}});
  j = json{{"periods", c.periods},
           {"scales", c.scales},
           {"period_channels", c.period_channels},
           {"period_kernel", c.period_kernel},
           {"period_stride", c.period_stride},
           {"scale_layers", layers},
           {"init_gain", c.init_gain}};
}

void from_json(const json& j, DiscriminatorConfig& c) {
  if (j.is_string()) {
    const auto name = j.get<std::string>();
    if (name == "tiny") c = DiscriminatorConfig::tiny();
    else if (name == "full") c = DiscriminatorConfig::full();
    else throw ConfigError("unknown discriminator preset '" + name + "'");
    return;
  }
  read_opt(j, "periods", c.periods);
  read_opt(j, "scales", c.scales);
  read_opt(j, "period_channels", c.period_channels);
  read_opt(j, "period_kernel", c.period_kernel);
  read_opt(j, "period_stride", c.period_stride);
  read_opt(j, "init_gain", c.init_gain);
  if (auto it = j.find("scale_layers"); it != j.end()) {
    c.scale_layers.clear();
    for (const auto& l : *it) {
      c.scale_layers.push_back({l.at("channels").get<std::size_t>(), l.at("kernel").get<std::size_t>(),
                                l.value("stride", std::size_t{1}), l.value("groups", std::size_t{1})});
    }
  }
}

void to_json(json& j, const LossWeights& c) {
  j = json{{"lambda_fm", c.lambda_fm}, {"lambda_r", c.lambda_r}, {"lambda_ser", c.lambda_ser}};
}

void from_json(const json& j, LossWeights& c) {
  read_opt(j, "lambda_fm", c.lambda_fm);
  read_opt(j, "lambda_r", c.lambda_r);
  read_opt(j, "lambda_ser", c.lambda_ser);
}

void to_json(json& j, const ContentBackendSpec& c) {
  j = json{{"name", c.name}, {"seed", c.seed}, {"feature_dim", c.feature_dim}, {"layer", c.layer}};
}

void from_json(const json& j, ContentBackendSpec& c) {
  read_opt(j, "name", c.name);
  read_opt(j, "seed", c.seed);
  read_opt(j, "feature_dim", c.feature_dim);
  read_opt(j, "layer", c.layer);
}

void to_json(json& j, const SpeakerBackendSpec& c) { j = json{{"name", c.name}, {"seed", c.seed}}; }

void from_json(const json& j, SpeakerBackendSpec& c) {
  read_opt(j, "name", c.name);
  read_opt(j, "seed", c.seed);
}

void to_json(json& j, const SerBackendSpec& c) { j = json{{"name", c.name}, {"seed", c.seed}}; }

void from_json(const json& j, SerBackendSpec& c) {
  read_opt(j, "name", c.name);
  read_opt(j, "seed", c.seed);
}

void to_json(json& j, const TrainConfig& c) {
  j = json{{"segment_seconds", c.segment_seconds},
           {"batch_size", c.batch_size},
           {"steps", c.steps},
           {"lr_g", c.lr_g},
           {"lr_d", c.lr_d},
           {"beta1", c.beta1},
           {"beta2", c.beta2},
           {"lr_decay", c.lr_decay},
           {"seed", c.seed},
           {"weights", c.weights},
           {"reduction", c.reduction == Reduction::Mean ? "mean" : "sum"},
           {"k", c.k},
           {"emotion_hidden", c.emotion_hidden},
           {"generator", c.generator},
           {"discriminator", c.discriminator},
           {"mel", c.mel},
           {"content", c.content},
           {"speaker", c.speaker},
           {"ser", c.ser},
           {"checkpoint_every", c.checkpoint_every}};
}

void from_json(const json& j, TrainConfig& c) {
  read_opt(j, "segment_seconds", c.segment_seconds);
  read_opt(j, "batch_size", c.batch_size);
  read_opt(j, "steps", c.steps);
  read_opt(j, "lr_g", c.lr_g);
  read_opt(j, "lr_d", c.lr_d);
  read_opt(j, "beta1", c.beta1);
  read_opt(j, "beta2", c.beta2);
  read_opt(j, "lr_decay", c.lr_decay);
  read_opt(j, "seed", c.seed);
  read_opt(j, "weights", c.weights);
  if (auto it = j.find("reduction"); it != j.end()) {
    const auto r = it->get<std::string>();
    if (r == "mean") c.reduction = Reduction::Mean;
    else if (r == "sum") c.reduction = Reduction::Sum;
    else throw ConfigError("reduction must be 'mean' or 'sum', got '" + r + "'");
  }
  read_opt(j, "k", c.k);
  read_opt(j, "emotion_hidden", c.emotion_hidden);
  read_opt(j, "generator", c.generator);
  read_opt(j, "discriminator", c.discriminator);
  read_opt(j, "mel", c.mel);
  read_opt(j, "content", c.content);
  read_opt(j, "speaker", c.speaker);
  read_opt(j, "ser", c.ser);
  read_opt(j, "checkpoint_every", c.checkpoint_every);
}

json to_json(const LossReport& r) {
  return json{{"adv_g", r.adv_g},     {"disc", r.disc},       {"recon", r.recon},
              {"fm", r.fm},           {"ser", r.ser},         {"total_g", r.total_g},
              {"total_d", r.total_d}, {"adv_per_disc", r.adv_per_disc},
              {"fm_per_disc", r.fm_per_disc}, {"disc_per_disc", r.disc_per_disc}};
}

TrainConfig train_config_from_json(const json& j) {
  try {
    if (!j.is_object()) throw ConfigError("train config must be a JSON object");
    TrainConfig c;
    if (auto it = j.find("preset"); it != j.end()) {
      const auto p = it->get<std::string>();
      if (p == "tiny") c = TrainConfig::tiny();
      else if (p == "smoke") c = TrainConfig::smoke();
      else if (p != "default") throw ConfigError("unknown preset '" + p + "'");
    }
    from_json(j, c);
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed train config: ") + e.what());
  }
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return train_config_from_json(j);
}

}  // namespace emoconv
