#include "emoconv/manifest.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "emoconv/encoders.hpp"
#include "emoconv/errors.hpp"

namespace emoconv {

namespace fs = std::filesystem;
using nlohmann::json;

const char* split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Dev: return "dev";
    case Split::Test: return "test";
  }
  return "train";
}

std::optional<Split> parse_split(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "dev") return Split::Dev;
  if (s == "test") return Split::Test;
  return std::nullopt;
}

std::vector<ManifestRow> Manifest::rows_in(Split s) const {
  std::vector<ManifestRow> out;
  for (const auto& r : rows)
    if (r.split == s) out.push_back(r);
  return out;
}

namespace {

ManifestRow parse_row(const json& j, const fs::path& base) {
  if (!j.is_object()) throw ContractError("row is not a JSON object");
  ManifestRow r;
  const auto path = j.at("audio_path").get<std::string>();
  if (path.empty()) throw ContractError("audio_path is empty");
  r.audio_path = fs::path(path).is_absolute() ? fs::path(path) : base / path;
  r.speaker_id = j.at("speaker_id").get<std::string>();
  r.arousal = j.at("arousal").get<double>();
  if (!std::isfinite(r.arousal) || r.arousal < kArousalMin || r.arousal > kArousalMax) {
    throw ContractError("arousal " + std::to_string(r.arousal) + " outside [1, 7]");
  }
  const auto split = parse_split(j.value("split", std::string("train")));
  if (!split) throw ContractError("split must be train, dev or test");
  r.split = *split;
  return r;
}

}  // namespace

Manifest load_manifest(const fs::path& path, bool allow_empty) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read manifest " + path.string());
  Manifest m;
  m.source = path;
  const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");
  std::set<fs::path> seen;
  std::string line;
  std::size_t n = 0;
  while (std::getline(is, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      ManifestRow r = parse_row(json::parse(line), base);
      r.line = n;
      if (!seen.insert(r.audio_path.lexically_normal()).second) ++m.duplicate_paths;
      m.rows.push_back(std::move(r));
    } catch (const json::exception& e) {
      m.errors.push_back({n, e.what()});
    } catch (const ContractError& e) {
      m.errors.push_back({n, e.what()});
    }
  }
  if (m.rows.empty() && !allow_empty) {
    throw EmptyManifestError("manifest " + path.string() + " has no valid rows (" + std::to_string(m.errors.size()) +
                             " rejected)");
  }
  return m;
}

void write_manifest(const fs::path& path, const std::vector<ManifestRow>& rows) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write manifest " + path.string());
  const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");
  for (const auto& r : rows) {
    fs::path p = r.audio_path;
    if (!base.empty()) {
      const auto rel = r.audio_path.lexically_relative(base);
      if (!rel.empty() && *rel.begin() != "..") p = rel;
    }
    json j{{"audio_path", p.generic_string()},
           {"speaker_id", r.speaker_id},
           {"arousal", r.arousal},
           {"split", split_name(r.split)}};
    os << j.dump() << '\n';
  }
  if (!os) throw IoError("failed writing manifest " + path.string());
}

}  // namespace emoconv
