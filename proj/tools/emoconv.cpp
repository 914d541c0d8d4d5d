// emoconv: train, convert and evaluate arousal conversion models.

#include <cstdio>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "emoconv/errors.hpp"
#include "emoconv/evaluation.hpp"
#include "emoconv/figures.hpp"
#include "emoconv/inference.hpp"
#include "emoconv/toy_corpus.hpp"
#include "emoconv/training.hpp"

namespace fs = std::filesystem;
using namespace emoconv;

namespace {

std::vector<double> parse_sizes(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size() || !(v > 0.0)) throw ContractError("invalid segment size '" + item + "'");
    out.push_back(v);
  }
  return out;
}

TrainConfig config_or_default(const std::string& path) {
  return path.empty() ? TrainConfig{} : load_train_config(path);
}

void print_manifest_issues(const Manifest& m) {
  for (const auto& e : m.errors) std::cerr << "manifest line " << e.line << ": " << e.message << "\n";
  if (m.duplicate_paths > 0) std::cerr << "warning: " << m.duplicate_paths << " duplicate audio_path rows\n";
}

std::optional<Split> split_option(const std::string& s) {
  if (s.empty() || s == "all") return std::nullopt;
  auto v = parse_split(s);
  if (!v) throw ContractError("split must be train, dev, test or all");
  return v;
}

void print_report(const EvalReport& r) {
  std::printf("rows %zu  L_mse %.4f  L_abs %.4f", r.rows.size(), r.l_mse, r.l_abs);
  if (r.mean_mos) std::printf("  MOS %.3f", *r.mean_mos);
  std::printf("\n");
  for (const auto& c : r.classes) std::printf("  class %d: n=%zu L_mse %.4f\n", c.arousal_class, c.count, c.l_mse);
  for (const auto& s : r.significance)
    std::printf("  %s: %s < %s  p=%.3g%s\n", s.test.c_str(), s.a_label.c_str(), s.b_label.c_str(), s.p,
                s.degenerate ? " (exact comparison)" : "");
  if (r.mos_error) std::printf("  MOS unavailable: %s\n", r.mos_error->c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Arousal conversion of speech: training, conversion and evaluation"};
  app.require_subcommand(1);

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a model on a manifest's train split");
  std::string config_path, manifest_path, out_dir, resume;
  long steps_override = -1;
  bool quiet = false;
  train_cmd->add_option("--config", config_path, "JSON training config (defaults if omitted)");
  train_cmd->add_option("--manifest", manifest_path, "JSONL manifest")->required();
  train_cmd->add_option("--out", out_dir, "Output directory")->required();
  train_cmd->add_option("--resume", resume, "Checkpoint directory to resume from");
  train_cmd->add_option("--steps", steps_override, "Override the number of steps");
  train_cmd->add_flag("--quiet", quiet, "Only print the final summary");

  // ablate
  auto* ablate_cmd = app.add_subcommand("ablate", "Train and evaluate once per segment size");
  std::string sizes = "0.75,1.5,3.0", targets = "1..7", ser_name = "mock", mos_name = "mock", split = "all";
  ablate_cmd->add_option("--sizes", sizes, "Comma-separated segment sizes in seconds")->capture_default_str();
  ablate_cmd->add_option("--config", config_path, "JSON training config");
  ablate_cmd->add_option("--manifest", manifest_path, "JSONL manifest")->required();
  ablate_cmd->add_option("--out", out_dir, "Output directory")->required();
  ablate_cmd->add_option("--targets", targets, "Evaluation targets: own | v | v1,v2 | lo..hi")->capture_default_str();
  ablate_cmd->add_option("--ser", ser_name, "SER backend for scoring")->capture_default_str();
  ablate_cmd->add_option("--mos", mos_name, "MOS backend")->capture_default_str();
  ablate_cmd->add_option("--split", split, "Rows to evaluate: train|dev|test|all")->capture_default_str();

  // convert
  auto* convert_cmd = app.add_subcommand("convert", "Convert one file to a target arousal");
  std::string in_path, checkpoint_dir, out_path;
  double target = 4.0;
  convert_cmd->add_option("--in", in_path, "Input WAV/FLAC")->required();
  convert_cmd->add_option("--target-arousal", target, "Target arousal in [1, 7]")->required();
  convert_cmd->add_option("--checkpoint", checkpoint_dir, "Checkpoint directory")->required();
  convert_cmd->add_option("--out", out_path, "Output WAV")->required();

  // batch-convert
  auto* batch_cmd = app.add_subcommand("batch-convert", "Convert every manifest row");
  std::string target_spec;
  batch_cmd->add_option("--manifest", manifest_path, "JSONL manifest")->required();
  batch_cmd->add_option("--target-arousal", target_spec, "Global target or 'column'")->required();
  batch_cmd->add_option("--checkpoint", checkpoint_dir, "Checkpoint directory")->required();
  batch_cmd->add_option("--out", out_dir, "Output directory")->required();

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "Convert and score a manifest");
  std::string report_dir, audio_out;
  eval_cmd->add_option("--manifest", manifest_path, "JSONL manifest")->required();
  eval_cmd->add_option("--checkpoint", checkpoint_dir, "Checkpoint directory")->required();
  eval_cmd->add_option("--targets", targets, "own | v | v1,v2 | lo..hi")->capture_default_str();
  eval_cmd->add_option("--report", report_dir, "Report directory")->required();
  eval_cmd->add_option("--ser", ser_name, "SER backend")->capture_default_str();
  eval_cmd->add_option("--mos", mos_name, "MOS backend")->capture_default_str();
  eval_cmd->add_option("--split", split, "train|dev|test|all")->capture_default_str();
  eval_cmd->add_option("--audio-out", audio_out, "Keep converted audio in this directory");

  // report-figures
  auto* fig_cmd = app.add_subcommand("report-figures", "Spectrograms and pitch contours for conversions");
  std::string fig_targets = "1,7";
  double source_arousal = 0.0;
  fig_cmd->add_option("--in", in_path, "Input WAV/FLAC")->required();
  fig_cmd->add_option("--targets", fig_targets, "Target list, e.g. 1,7")->capture_default_str();
  fig_cmd->add_option("--checkpoint", checkpoint_dir, "Checkpoint directory")->required();
  fig_cmd->add_option("--out", out_dir, "Figure directory")->required();
  auto* source_opt = fig_cmd->add_option("--source-arousal", source_arousal, "Annotated arousal of the input");

  // make-toy-corpus
  auto* toy_cmd = app.add_subcommand("make-toy-corpus", "Write the synthetic corpus used for smoke runs");
  ToyCorpusSpec toy;
  toy_cmd->add_option("--out", out_dir, "Output directory")->required();
  toy_cmd->add_option("--clips", toy.train_clips, "Train clips")->capture_default_str();
  toy_cmd->add_option("--test-clips", toy.test_clips, "Test clips")->capture_default_str();
  toy_cmd->add_option("--seconds", toy.seconds, "Clip duration")->capture_default_str();
  toy_cmd->add_option("--speakers", toy.speakers, "Speaker count")->capture_default_str();
  toy_cmd->add_option("--seed", toy.seed, "Seed")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (train_cmd->parsed()) {
      TrainConfig cfg = config_or_default(config_path);
      if (steps_override >= 0) cfg.steps = static_cast<std::size_t>(steps_override);
      const Manifest manifest = load_manifest(manifest_path);
      print_manifest_issues(manifest);
      TrainOptions opts;
      opts.out_dir = out_dir;
      if (!resume.empty()) opts.resume_from = fs::path(resume);
      if (!quiet) {
        opts.on_step = [](std::size_t step, const LossReport& r) {
          std::printf("step %zu  total_g %.4f  total_d %.4f  recon %.4f  ser %.4f\n", step, r.total_g, r.total_d,
                      r.recon, r.ser);
          std::fflush(stdout);
        };
      }
      const auto result = train(cfg, manifest, opts);
      std::printf("final checkpoint: %s (step %zu)\n", result.final_checkpoint.c_str(), result.bundle.step);
    } else if (ablate_cmd->parsed()) {
      const TrainConfig cfg = config_or_default(config_path);
      const Manifest manifest = load_manifest(manifest_path);
      print_manifest_issues(manifest);
      EvalOptions eval;
      eval.targets = parse_targets(targets);
      eval.ser.name = ser_name;
      eval.mos.name = mos_name;
      eval.split = split_option(split);
      const auto entries = ablation_run(cfg, manifest, parse_sizes(sizes), out_dir, eval);
      int failed = 0;
      for (const auto& e : entries) {
        std::printf("segment %.2f s: ", e.segment_seconds);
        if (e.error) {
          std::printf("FAILED: %s\n", e.error->c_str());
          ++failed;
        } else {
          print_report(*e.report);
        }
      }
      return failed == static_cast<int>(entries.size()) ? 1 : 0;
    } else if (convert_cmd->parsed()) {
      const auto ckpt = load_checkpoint(checkpoint_dir);
      const AudioClip in = load_audio(in_path);
      const AudioClip out = convert(ConversionRequest{in, target, &ckpt});
      save_wav(out_path, out);
      std::printf("wrote %s (%zu samples)\n", out_path.c_str(), out.size());
    } else if (batch_cmd->parsed()) {
      const auto ckpt = load_checkpoint(checkpoint_dir);
      const auto result = batch_convert(manifest_path, TargetChoice::parse(target_spec), ckpt, out_dir);
      for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
      for (const auto& f : result.failures) std::cerr << "failed: " << f.input.string() << ": " << f.message << "\n";
      std::printf("converted %zu, failed %zu; index %s\n", result.converted, result.failures.size(),
                  result.index.c_str());
    } else if (eval_cmd->parsed()) {
      const auto ckpt = load_checkpoint(checkpoint_dir);
      const Manifest manifest = load_manifest(manifest_path);
      print_manifest_issues(manifest);
      EvalOptions eval;
      eval.targets = parse_targets(targets);
      eval.ser.name = ser_name;
      eval.mos.name = mos_name;
      eval.split = split_option(split);
      if (!audio_out.empty()) eval.audio_out = fs::path(audio_out);
      const EvalReport report = evaluate(manifest, ckpt, eval);
      write_report(report, report_dir);
      print_report(report);
    } else if (fig_cmd->parsed()) {
      const auto ckpt = load_checkpoint(checkpoint_dir);
      const AudioClip in = load_audio(in_path);
      const Converter converter(ckpt);
      std::vector<std::pair<double, AudioClip>> conversions;
      for (double e : parse_targets(fig_targets)) conversions.emplace_back(e, converter.convert(in, e));
      if (conversions.empty()) throw ContractError("report-figures needs explicit targets");
      std::optional<double> src;
      if (source_opt->count() > 0) src = source_arousal;
      const auto figs = emit_figures(in, conversions, out_dir, src);
      for (const auto& p : figs.spectrograms) std::printf("%s\n", p.c_str());
      std::printf("%s\n%s\n%s\n", figs.contour_overlay.c_str(), figs.stats_csv.c_str(), figs.stats_json.c_str());
    } else if (toy_cmd->parsed()) {
      std::printf("%s\n", write_toy_corpus(out_dir, toy).c_str());
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
