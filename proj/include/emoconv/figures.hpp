#pragma once

// Figure emitters for converted speech: log-energy spectrograms, overlaid
// pitch contours and a pitch statistics table.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "emoconv/audio.hpp"
#include "emoconv/mel.hpp"
#include "emoconv/pitch.hpp"

namespace emoconv {

struct FigureSet {
  std::vector<std::filesystem::path> spectrograms;  // original first
  std::filesystem::path contour_overlay;
  std::filesystem::path stats_csv;
  std::filesystem::path stats_json;
};

struct PitchStatsRow {
  std::string label;
  std::optional<double> arousal;
  std::string color;  // contour colour in the overlay, #rrggbb
  std::size_t voiced_frames = 0;
  std::optional<double> mean_f0;
  std::optional<double> std_f0;
};

// 8-bit RGB image, row-major, top row first.
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> rgb;

  Image(std::size_t w, std::size_t h, std::uint8_t fill = 255);
  void set(std::size_t x, std::size_t y, std::uint8_t r, std::uint8_t g, std::uint8_t b);
};

void write_png(const std::filesystem::path& path, const Image& image);

// Rows are frequency bins (low at the bottom), columns frames. Clips shorter
// than one window are zero-padded.
Image spectrogram_image(const AudioClip& clip, const MelConfig& cfg = {});

// Requires at least one conversion. Throws IoError when out_dir is unwritable.
FigureSet emit_figures(const AudioClip& original, const std::vector<std::pair<double, AudioClip>>& conversions,
                       const std::filesystem::path& out_dir, std::optional<double> original_arousal = std::nullopt);

// Empty contour for clips shorter than one pitch frame.
PitchContour pitch_or_empty(const AudioClip& clip, const PitchConfig& cfg = {});

}  // namespace emoconv
