#include "emoconv/figures.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>
#include <png.h>

#include "emoconv/errors.hpp"

namespace emoconv {

namespace fs = std::filesystem;
using nlohmann::json;

Image::Image(std::size_t w, std::size_t h, std::uint8_t fill) : width(w), height(h), rgb(w * h * 3, fill) {}

void Image::set(std::size_t x, std::size_t y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  if (x >= width || y >= height) return;
  auto* p = &rgb[(y * width + x) * 3];
  p[0] = r;
  p[1] = g;
  p[2] = b;
}

void write_png(const fs::path& path, const Image& image) {
  if (image.width == 0 || image.height == 0) throw ContractError("write_png: empty image");
  FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw IoError("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw IoError("libpng failed writing " + path.string());
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t y = 0; y < image.height; ++y) {
    png_write_row(png, const_cast<png_bytep>(&image.rgb[y * image.width * 3]));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fclose(fp) != 0) throw IoError("failed closing " + path.string());
}

namespace {

// Dark-to-bright colour ramp.
std::array<std::uint8_t, 3> ramp(double v) {
  static constexpr std::array<std::array<double, 3>, 5> stops{{{0, 0, 4}, {81, 18, 124}, {183, 55, 121}, {252, 137, 97}, {252, 253, 191}}};
  v = std::clamp(v, 0.0, 1.0) * (stops.size() - 1);
  const std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(v), stops.size() - 2);
  const double f = v - static_cast<double>(i);
  std::array<std::uint8_t, 3> c{};
  for (int k = 0; k < 3; ++k) c[k] = static_cast<std::uint8_t>(std::lround(stops[i][k] + f * (stops[i + 1][k] - stops[i][k])));
  return c;
}

constexpr std::array<std::array<std::uint8_t, 3>, 6> kPalette{
    {{0, 0, 0}, {31, 119, 180}, {214, 39, 40}, {44, 160, 44}, {148, 103, 189}, {255, 127, 14}}};

std::string hex(const std::array<std::uint8_t, 3>& c) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c[0], c[1], c[2]);
  return buf;
}

void draw_line(Image& img, double x0, double y0, double x1, double y1, const std::array<std::uint8_t, 3>& c) {
  const int steps = static_cast<int>(std::ceil(std::max(std::abs(x1 - x0), std::abs(y1 - y0)))) + 1;
  for (int s = 0; s <= steps; ++s) {
    const double t = static_cast<double>(s) / steps;
    const auto x = static_cast<long>(std::lround(x0 + t * (x1 - x0)));
    const auto y = static_cast<long>(std::lround(y0 + t * (y1 - y0)));
    for (long dy = 0; dy <= 1; ++dy)
      if (x >= 0 && y + dy >= 0) img.set(static_cast<std::size_t>(x), static_cast<std::size_t>(y + dy), c[0], c[1], c[2]);
  }
}

std::string label_for(double arousal) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "target_%.2f", arousal);
  return buf;
}

}  // namespace

Image spectrogram_image(const AudioClip& clip, const MelConfig& cfg) {
  AudioClip padded = clip;
  if (padded.size() < static_cast<std::size_t>(cfg.n_fft)) padded.samples.resize(cfg.n_fft, 0.0);
  const Tensor s = log_power_spectrogram(padded, cfg);
  const std::size_t bins = s.dim(0), frames = s.dim(1);
  // Fixed range: the log floor up to full-scale energy.
  const double lo = std::log(cfg.log_floor * cfg.log_floor);
  const double hi = std::max(lo + 1.0, *std::max_element(s.vec().begin(), s.vec().end()));
  Image img(frames, bins);
  for (std::size_t k = 0; k < bins; ++k)
    for (std::size_t f = 0; f < frames; ++f) {
      const auto c = ramp((s.at(k, f) - lo) / (hi - lo));
      img.set(f, bins - 1 - k, c[0], c[1], c[2]);
    }
  return img;
}

PitchContour pitch_or_empty(const AudioClip& clip, const PitchConfig& cfg) {
  try {
    return extract_pitch(clip, cfg);
  } catch (const DegenerateInputError&) {
    PitchContour empty;
    empty.frame_hop = cfg.hop;
    return empty;
  }
}

FigureSet emit_figures(const AudioClip& original, const std::vector<std::pair<double, AudioClip>>& conversions,
                       const fs::path& out_dir, std::optional<double> original_arousal) {
  if (conversions.empty()) throw ContractError("emit_figures: need at least one conversion");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (!fs::is_directory(out_dir)) throw IoError("cannot create figure directory " + out_dir.string());

  struct Series {
    std::string label;
    std::optional<double> arousal;
    const AudioClip* clip;
  };
  std::vector<Series> series{{"original", original_arousal, &original}};
  for (const auto& [e, clip] : conversions) series.push_back({label_for(e), e, &clip});

  FigureSet out;
  for (const auto& s : series) {
    const fs::path p = out_dir / ("spectrogram_" + s.label + ".png");
    write_png(p, spectrogram_image(*s.clip));
    out.spectrograms.push_back(p);
  }

  // Contour overlay: time on x, 0..f_top Hz on y, 100 Hz grid lines.
  const PitchConfig pcfg;
  std::vector<PitchContour> contours;
  std::size_t max_frames = 1;
  double f_top = 400.0;
  for (const auto& s : series) {
    contours.push_back(pitch_or_empty(*s.clip, pcfg));
    max_frames = std::max(max_frames, contours.back().f0.size());
    for (double f : contours.back().f0) f_top = std::max(f_top, f * 1.1);
  }
  f_top = std::min(std::ceil(f_top / 100.0) * 100.0, pcfg.f_max * 1.1);
  constexpr std::size_t W = 800, H = 400, margin = 20;
  Image img(W, H);
  for (double f = 100.0; f < f_top; f += 100.0) {
    const double y = H - margin - f / f_top * (H - 2 * margin);
    draw_line(img, margin, y, W - margin, y, {225, 225, 225});
  }
  draw_line(img, margin, H - margin, W - margin, H - margin, {0, 0, 0});
  draw_line(img, margin, margin, margin, H - margin, {0, 0, 0});

  std::vector<PitchStatsRow> stats;
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& c = contours[i];
    const auto colour = kPalette[i % kPalette.size()];
    auto to_x = [&](std::size_t f) {
      return margin + static_cast<double>(f) / static_cast<double>(std::max<std::size_t>(max_frames - 1, 1)) * (W - 2 * margin);
    };
    auto to_y = [&](double hz) { return H - margin - hz / f_top * (H - 2 * margin); };
    for (std::size_t f = 0; f < c.f0.size(); ++f) {
      if (c.f0[f] <= 0.0) continue;
      if (f + 1 < c.f0.size() && c.f0[f + 1] > 0.0) {
        draw_line(img, to_x(f), to_y(c.f0[f]), to_x(f + 1), to_y(c.f0[f + 1]), colour);
      } else {
        draw_line(img, to_x(f), to_y(c.f0[f]), to_x(f), to_y(c.f0[f]), colour);
      }
    }
    stats.push_back({series[i].label, series[i].arousal, hex(colour), c.voiced_count(), c.mean_voiced, c.std_voiced});
  }
  out.contour_overlay = out_dir / "pitch_contours.png";
  write_png(out.contour_overlay, img);

  out.stats_csv = out_dir / "pitch_stats.csv";
  out.stats_json = out_dir / "pitch_stats.json";
  std::ofstream csv(out.stats_csv, std::ios::trunc);
  if (!csv) throw IoError("cannot write " + out.stats_csv.string());
  csv << "label,arousal,color,voiced_frames,mean_f0_hz,std_f0_hz\n";
  json rows = json::array();
  for (const auto& r : stats) {
    csv << r.label << ',';
    if (r.arousal) csv << *r.arousal;
    csv << ',' << r.color << ',' << r.voiced_frames << ',';
    if (r.mean_f0) csv << *r.mean_f0;
    csv << ',';
    if (r.std_f0) csv << *r.std_f0;
    csv << '\n';
    rows.push_back({{"label", r.label},
                    {"arousal", r.arousal ? json(*r.arousal) : json(nullptr)},
                    {"color", r.color},
                    {"voiced_frames", r.voiced_frames},
                    {"mean_f0_hz", r.mean_f0 ? json(*r.mean_f0) : json(nullptr)},
                    {"std_f0_hz", r.std_f0 ? json(*r.std_f0) : json(nullptr)}});
  }
  std::ofstream(out.stats_json, std::ios::trunc) << rows.dump(2) << '\n';
  return out;
}

}  // namespace emoconv
