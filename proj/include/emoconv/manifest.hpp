#pragma once

// Newline-delimited JSON manifests: one utterance per line with
// audio_path, speaker_id, arousal (1..7) and split (train/dev/test).

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace emoconv {

enum class Split { Train, Dev, Test };

const char* split_name(Split s);
std::optional<Split> parse_split(const std::string& s);

struct ManifestRow {
  std::filesystem::path audio_path;  // resolved against the manifest's directory
  std::string speaker_id;
  double arousal = 4.0;
  Split split = Split::Train;
  std::size_t line = 0;  // 1-based source line
};

struct ManifestIssue {
  std::size_t line = 0;
  std::string message;
};

struct Manifest {
  std::filesystem::path source;
  std::vector<ManifestRow> rows;
  std::vector<ManifestIssue> errors;  // rejected rows, one entry each
  std::size_t duplicate_paths = 0;    // accepted rows whose path was already seen

  std::vector<ManifestRow> rows_in(Split s) const;
};

// Validates every line; malformed rows are reported in `errors`, never
// silently dropped. Throws IoError when the file cannot be read and
// EmptyManifestError when no row is valid (unless allow_empty).
Manifest load_manifest(const std::filesystem::path& path, bool allow_empty = false);

// Writes rows with paths relative to the manifest's directory when possible.
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRow>& rows);

}  // namespace emoconv
