#include "emoconv/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <random>

#include "emoconv/errors.hpp"

namespace emoconv {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "tensors.bin is written in native little-endian order");

Models Models::init(const TrainConfig& cfg, UnitCodebook codebook) {
  if (codebook.k() == 0) throw ContractError("models: empty codebook");
  nn::Rng rng(cfg.seed);
  Models m;
  m.generator = Generator::make(cfg.generator, rng);
  m.discriminator = DiscriminatorBank::make(cfg.discriminator, rng);
  m.emotion = EmotionEmbedder::make(rng, cfg.emotion_hidden);
  m.units = UnitEmbedding::make(codebook.k(), cfg.generator.unit_embed_dim, rng);
  m.codebook = std::move(codebook);
  return m;
}

nn::ParamList Models::generator_side() const {
  nn::ParamList out = generator.parameters();
  for (auto& p : emotion.parameters()) out.push_back(p);
  for (auto& p : units.parameters()) out.push_back(p);
  return out;
}

OptimizerState OptimizerState::capture(const Adam& opt) {
  return OptimizerState{opt.steps(), opt.lr(), opt.first_moments(), opt.second_moments()};
}

void OptimizerState::apply(Adam& opt) const { opt.restore(steps, lr, m, v); }

bool OptimizerState::operator==(const OptimizerState& o) const {
  if (steps != o.steps || lr != o.lr || m.size() != o.m.size() || v.size() != o.v.size()) return false;
  for (std::size_t i = 0; i < m.size(); ++i)
    if (m[i].shape() != o.m[i].shape() || m[i].vec() != o.m[i].vec() || v[i].vec() != o.v[i].vec()) return false;
  return true;
}

namespace {

struct TensorWriter {
  json index = json::array();
  std::vector<double> data;

  void add(const std::string& name, const Tensor& t) {
    index.push_back({{"name", name}, {"shape", t.shape()}, {"offset", data.size()}});
    data.insert(data.end(), t.vec().begin(), t.vec().end());
  }
};

struct TensorReader {
  std::map<std::string, std::pair<Shape, std::size_t>> index;
  std::vector<double> data;

  Tensor get(const std::string& name) const {
    auto it = index.find(name);
    if (it == index.end()) throw ConfigError("checkpoint is missing tensor '" + name + "'");
    const auto& [shape, offset] = it->second;
    const std::size_t n = shape_numel(shape);
    if (offset + n > data.size()) throw ConfigError("checkpoint tensor '" + name + "' is truncated");
    return Tensor(shape, std::vector<double>(data.begin() + offset, data.begin() + offset + n));
  }
};

void write_file(const fs::path& path, const void* bytes, std::size_t n) {
  std::ofstream os(path, std::ios::binary);
  os.write(static_cast<const char*>(bytes), static_cast<std::streamsize>(n));
  if (!os) throw IoError("failed writing " + path.string());
}

std::vector<char> read_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

void add_params(TensorWriter& w, const nn::ParamList& params) {
  for (const auto& p : params) w.add(p.name, p.var.value());
}

void add_optimizer(TensorWriter& w, const std::string& tag, const nn::ParamList& params, const OptimizerState& s) {
  if (s.m.size() != params.size() || s.v.size() != params.size()) {
    throw ContractError("checkpoint: optimizer state does not match the " + tag + " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    w.add("opt." + tag + ".m." + params[i].name, s.m[i]);
    w.add("opt." + tag + ".v." + params[i].name, s.v[i]);
  }
}

OptimizerState read_optimizer(const TensorReader& r, const json& j, const std::string& tag,
                              const nn::ParamList& params) {
  OptimizerState s;
  s.steps = j.at("steps").get<std::uint64_t>();
  s.lr = j.at("lr").get<double>();
  for (const auto& p : params) {
    s.m.push_back(r.get("opt." + tag + ".m." + p.name));
    s.v.push_back(r.get("opt." + tag + ".v." + p.name));
  }
  return s;
}

void load_params(const TensorReader& r, const nn::ParamList& params) {
  for (const auto& p : params) {
    Tensor t = r.get(p.name);
    if (t.shape() != p.var.shape()) {
      throw ConfigError("checkpoint tensor '" + p.name + "' has shape " + shape_str(t.shape()) + ", expected " +
                        shape_str(p.var.shape()));
    }
    ad::Var v = p.var;
    v.mutable_value() = std::move(t);
  }
}

}  // namespace

void save_checkpoint(const CheckpointBundle& b, const fs::path& dir) {
  TensorWriter w;
  const auto gparams = b.models.generator_side();
  const auto dparams = b.models.discriminator_side();
  add_params(w, gparams);
  add_params(w, dparams);
  w.add("codebook.centroids", b.models.codebook.centroids);
  add_optimizer(w, "g", gparams, b.opt_g);
  add_optimizer(w, "d", dparams, b.opt_d);

  json meta{{"format_version", b.format_version},
            {"step", b.step},
            {"config", b.config},
            {"tensors", w.index},
            {"optimizer", {{"g", {{"steps", b.opt_g.steps}, {"lr", b.opt_g.lr}}},
                           {"d", {{"steps", b.opt_d.steps}, {"lr", b.opt_d.lr}}}}}};
  const std::string text = meta.dump(2) + "\n";

  const fs::path target = dir.lexically_normal();
  const fs::path parent = target.has_parent_path() ? target.parent_path() : fs::path(".");
  std::error_code ec;
  fs::create_directories(parent, ec);
  const std::string name = target.filename().string();
  const fs::path tmp = parent / ("." + name + ".tmp");
  const fs::path old = parent / ("." + name + ".old");
  fs::remove_all(tmp, ec);
  if (!fs::create_directory(tmp, ec)) throw IoError("cannot create " + tmp.string() + ": " + ec.message());
  write_file(tmp / "bundle.json", text.data(), text.size());
  write_file(tmp / "tensors.bin", w.data.data(), w.data.size() * sizeof(double));

  fs::remove_all(old, ec);
  if (fs::exists(target)) {
    fs::rename(target, old, ec);
    if (ec) throw IoError("cannot replace " + target.string() + ": " + ec.message());
  }
  fs::rename(tmp, target, ec);
  if (ec) throw IoError("cannot move checkpoint into " + target.string() + ": " + ec.message());
  fs::remove_all(old, ec);
}

CheckpointBundle load_checkpoint(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("checkpoint directory not found: " + dir.string());
  const auto text = read_file(dir / "bundle.json");
  const auto raw = read_file(dir / "tensors.bin");
  if (raw.size() % sizeof(double) != 0) throw ConfigError("tensors.bin has a partial value");

  CheckpointBundle b;
  try {
    const json meta = json::parse(text.begin(), text.end());
    b.format_version = meta.at("format_version").get<int>();
    if (b.format_version != kCheckpointFormatVersion) {
      throw ConfigError("unsupported checkpoint format version " + std::to_string(b.format_version));
    }
    b.step = meta.at("step").get<std::size_t>();
    b.config = train_config_from_json(meta.at("config"));

    TensorReader r;
    r.data.resize(raw.size() / sizeof(double));
    std::memcpy(r.data.data(), raw.data(), raw.size());
    for (const auto& e : meta.at("tensors")) {
      r.index[e.at("name").get<std::string>()] = {e.at("shape").get<Shape>(), e.at("offset").get<std::size_t>()};
    }

    UnitCodebook cb{r.get("codebook.centroids")};
    b.models = Models::init(b.config, std::move(cb));
    const auto gparams = b.models.generator_side();
    const auto dparams = b.models.discriminator_side();
    load_params(r, gparams);
    load_params(r, dparams);
    b.opt_g = read_optimizer(r, meta.at("optimizer").at("g"), "g", gparams);
    b.opt_d = read_optimizer(r, meta.at("optimizer").at("d"), "d", dparams);
  } catch (const json::exception& e) {
    throw ConfigError("malformed checkpoint " + dir.string() + ": " + e.what());
  }
  return b;
}

}  // namespace emoconv
