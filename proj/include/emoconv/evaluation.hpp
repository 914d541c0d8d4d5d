#pragma once

// Conversion quality measurement: arousal error against an SER model,
// MOS-predictor naturalness, per-class breakdowns and one-tailed Welch tests.

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "emoconv/checkpoint.hpp"
#include "emoconv/manifest.hpp"
#include "emoconv/predictors.hpp"

namespace emoconv {

struct SecError {
  double l_mse = 0.0;
  double l_abs = 0.0;
};

// Mean squared and mean absolute differences; lengths must match and be >= 1.
SecError sec_error(std::span<const double> targets, std::span<const double> predictions);

std::vector<double> score_mos(const std::vector<AudioClip>& clips, const MosModel& backend);

struct EvalRow {
  std::string id;
  double target = 4.0;
  double ser_prediction = 0.0;
  double squared_error = 0.0;
  double abs_error = 0.0;
  std::optional<double> mos;
  // SER prediction for the unconverted input, used as the comparison baseline.
  std::optional<double> source_prediction;
  std::string output_path;
};

// Nearest integer class in 1..7.
int arousal_class(double arousal);

struct ClassStats {
  int arousal_class = 0;
  std::size_t count = 0;
  double l_mse = 0.0;
  double l_abs = 0.0;
  std::optional<double> mean_mos;
};

// Populated classes only, ascending.
std::vector<ClassStats> classwise_report(const std::vector<EvalRow>& rows);

struct SignificanceResult {
  std::string test = "welch_t_one_tailed";
  std::string a_label = "a";
  std::string b_label = "b";
  std::size_t n_a = 0;
  std::size_t n_b = 0;
  double mean_a = 0.0;
  double mean_b = 0.0;
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;  // H1: mean(a) < mean(b)
  bool degenerate = false;  // both samples constant: exact comparison used
  bool significant = false; // p <= 0.05
};

// One-tailed Welch t-test of mean(a) < mean(b). Needs >= 2 values per sample.
SignificanceResult significance(std::span<const double> errors_a, std::span<const double> errors_b);

// Reference values of the full system on the licensed corpus; reported for
// format comparison only.
struct ReferenceFigures {
  double l_mse = 0.0843;
  double l_abs = 0.2442;
  double mos = 3.26;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  double l_mse = 0.0;
  double l_abs = 0.0;
  std::optional<double> mean_mos;
  std::vector<ClassStats> classes;
  std::vector<SignificanceResult> significance;
  std::string ser_backend;
  std::string mos_backend;
  std::string mos_version;
  std::optional<std::string> mos_error;  // set when the MOS backend was unavailable
  std::vector<std::string> notes;
};

// Fills aggregates and class tables from the rows.
void finalize_report(EvalReport& report);

struct EvalOptions {
  std::vector<double> targets;  // empty: each row's own arousal (self-reconstruction)
  SerBackendSpec ser;
  MosBackendSpec mos;
  std::optional<Split> split;  // restrict to one split
  std::optional<std::filesystem::path> audio_out;  // keep converted audio here
};

// "own", a single value, a list "1,4,7", or a range "1..7".
std::vector<double> parse_targets(const std::string& text);

// Converts every selected row to every target and scores the outputs.
EvalReport evaluate(const Manifest& manifest, const CheckpointBundle& checkpoint, const EvalOptions& options);

// rows.jsonl, summary.json and classwise.csv.
void write_report(const EvalReport& report, const std::filesystem::path& dir);

struct AblationEntry {
  double segment_seconds = 0.0;
  std::optional<EvalReport> report;
  std::optional<std::string> error;
};

// One train + evaluate per segment size with everything else fixed. A failing
// size is recorded and the remaining sizes still run. Writes per-size
// directories plus ablation_summary.json and ablation_trend.csv (class-wise
// L_mse per size).
std::vector<AblationEntry> ablation_run(const TrainConfig& cfg, const Manifest& manifest,
                                        const std::vector<double>& segment_sizes,
                                        const std::filesystem::path& out_dir, const EvalOptions& eval);

}  // namespace emoconv
