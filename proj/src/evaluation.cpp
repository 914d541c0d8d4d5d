#include "emoconv/evaluation.hpp"

#include <cfloat>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>
#include <nlohmann/json.hpp>

#include "emoconv/errors.hpp"
#include "emoconv/inference.hpp"
#include "emoconv/training.hpp"

namespace emoconv {

namespace fs = std::filesystem;
using nlohmann::json;

SecError sec_error(std::span<const double> targets, std::span<const double> predictions) {
  if (targets.size() != predictions.size()) throw ContractError("sec_error: length mismatch");
  if (targets.empty()) throw ContractError("sec_error: empty input");
  SecError e;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double d = predictions[i] - targets[i];
    e.l_mse += d * d;
    e.l_abs += std::abs(d);
  }
  e.l_mse /= static_cast<double>(targets.size());
  e.l_abs /= static_cast<double>(targets.size());
  return e;
}

std::vector<double> score_mos(const std::vector<AudioClip>& clips, const MosModel& backend) {
  std::vector<double> out;
  out.reserve(clips.size());
  for (const auto& c : clips) out.push_back(backend.score(c));
  return out;
}

int arousal_class(double arousal) {
  return static_cast<int>(std::clamp(std::lround(arousal), 1L, 7L));
}

std::vector<ClassStats> classwise_report(const std::vector<EvalRow>& rows) {
  std::map<int, std::vector<const EvalRow*>> bins;
  for (const auto& r : rows) bins[arousal_class(r.target)].push_back(&r);
  std::vector<ClassStats> out;
  for (const auto& [cls, members] : bins) {
    ClassStats s;
    s.arousal_class = cls;
    s.count = members.size();
    double mos = 0.0;
    std::size_t n_mos = 0;
    for (const auto* r : members) {
      s.l_mse += r->squared_error;
      s.l_abs += r->abs_error;
      if (r->mos) {
        mos += *r->mos;
        ++n_mos;
      }
    }
    s.l_mse /= static_cast<double>(s.count);
    s.l_abs /= static_cast<double>(s.count);
    if (n_mos > 0) s.mean_mos = mos / static_cast<double>(n_mos);
    out.push_back(s);
  }
  return out;
}

SignificanceResult significance(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw ContractError("significance: each sample needs at least two values");
  auto stats = [](std::span<const double> x) {
    double m = 0.0;
    for (double v : x) m += v;
    m /= static_cast<double>(x.size());
    double var = 0.0;
    for (double v : x) var += (v - m) * (v - m);
    return std::pair{m, var / static_cast<double>(x.size() - 1)};
  };
  const auto [ma, va] = stats(a);
  const auto [mb, vb] = stats(b);
  SignificanceResult r;
  r.n_a = a.size();
  r.n_b = b.size();
  r.mean_a = ma;
  r.mean_b = mb;
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double sa = va / na, sb = vb / nb;
  const double se2 = sa + sb;
  if (!(se2 > 0.0)) {
    r.degenerate = true;
    r.p = ma < mb ? DBL_MIN : (ma > mb ? 1.0 : 0.5);
    r.t = ma < mb ? -INFINITY : (ma > mb ? INFINITY : 0.0);
    r.df = na + nb - 2.0;
  } else {
    r.t = (ma - mb) / std::sqrt(se2);
    r.df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    const boost::math::students_t dist(r.df);
    r.p = boost::math::cdf(dist, r.t);
  }
  r.p = std::clamp(r.p, DBL_MIN, 1.0);
  r.significant = r.p <= 0.05;
  return r;
}

void finalize_report(EvalReport& report) {
  report.l_mse = report.l_abs = 0.0;
  report.mean_mos.reset();
  if (!report.rows.empty()) {
    std::vector<double> t, p;
    for (const auto& r : report.rows) {
      t.push_back(r.target);
      p.push_back(r.ser_prediction);
    }
    const auto e = sec_error(t, p);
    report.l_mse = e.l_mse;
    report.l_abs = e.l_abs;
    double mos = 0.0;
    std::size_t n = 0;
    for (const auto& r : report.rows)
      if (r.mos) {
        mos += *r.mos;
        ++n;
      }
    if (n > 0) report.mean_mos = mos / static_cast<double>(n);
  }
  report.classes = classwise_report(report.rows);
}

std::vector<double> parse_targets(const std::string& text) {
  if (text.empty() || text == "own" || text == "column") return {};
  auto number = [&](const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size()) throw ContractError("invalid target '" + s + "' in '" + text + "'");
    normalize_arousal(v);
    return v;
  };
  std::vector<double> out;
  if (auto pos = text.find(".."); pos != std::string::npos) {
    const double lo = number(text.substr(0, pos)), hi = number(text.substr(pos + 2));
    if (lo > hi) throw ContractError("target range is reversed: " + text);
    for (double v = lo; v <= hi + 1e-9; v += 1.0) out.push_back(v);
    return out;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(number(item));
  return out;
}

EvalReport evaluate(const Manifest& manifest, const CheckpointBundle& checkpoint, const EvalOptions& options) {
  const auto ser = make_ser_model(options.ser);
  std::unique_ptr<MosModel> mos;
  EvalReport report;
  report.ser_backend = ser->name();
  try {
    mos = make_mos_model(options.mos);
    report.mos_backend = mos->name();
    report.mos_version = mos->version();
  } catch (const BackendError& e) {
    report.mos_backend = options.mos.name;
    report.mos_error = e.what();
  }
  if (options.audio_out) fs::create_directories(*options.audio_out);

  const Converter converter(checkpoint);
  std::vector<double> converted_err, source_err;
  std::size_t n = 0;
  for (const auto& row : manifest.rows) {
    if (options.split && row.split != *options.split) continue;
    const AudioClip input = load_audio(row.audio_path);
    const double source_pred = ser->predict(input);
    const std::vector<double> targets = options.targets.empty() ? std::vector<double>{row.arousal} : options.targets;
    for (double target : targets) {
      const AudioClip out = converter.convert(input, target);
      EvalRow r;
      r.id = row.audio_path.stem().string();
      r.target = target;
      r.ser_prediction = ser->predict(out);
      r.squared_error = (r.ser_prediction - target) * (r.ser_prediction - target);
      r.abs_error = std::abs(r.ser_prediction - target);
      r.source_prediction = source_pred;
      if (mos) r.mos = mos->score(out);
      if (options.audio_out) {
        char name[48];
        std::snprintf(name, sizeof name, "%04zu_e%.2f.wav", n, target);
        const fs::path p = *options.audio_out / (r.id + "_" + name);
        save_wav(p, out);
        r.output_path = p.string();
      }
      converted_err.push_back(r.abs_error);
      source_err.push_back(std::abs(source_pred - target));
      report.rows.push_back(std::move(r));
      ++n;
    }
  }
  finalize_report(report);
  if (converted_err.size() >= 2) {
    auto s = significance(converted_err, source_err);
    s.a_label = "converted_abs_error";
    s.b_label = "unconverted_input_abs_error";
    report.significance.push_back(s);
  } else {
    report.notes.push_back("fewer than two evaluated rows: significance test skipped");
  }
  return report;
}

namespace {

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json row_json(const EvalRow& r) {
  return json{{"id", r.id},
              {"target_arousal", r.target},
              {"ser_prediction", r.ser_prediction},
              {"squared_error", r.squared_error},
              {"abs_error", r.abs_error},
              {"mos", opt_json(r.mos)},
              {"source_prediction", opt_json(r.source_prediction)},
              {"output_path", r.output_path}};
}

json summary_json(const EvalReport& r) {
  json classes = json::array();
  for (const auto& c : r.classes) {
    classes.push_back({{"class", c.arousal_class},
                       {"count", c.count},
                       {"l_mse", c.l_mse},
                       {"l_abs", c.l_abs},
                       {"mean_mos", opt_json(c.mean_mos)}});
  }
  json sig = json::array();
  for (const auto& s : r.significance) {
    sig.push_back({{"test", s.test},
                   {"a", s.a_label},
                   {"b", s.b_label},
                   {"n_a", s.n_a},
                   {"n_b", s.n_b},
                   {"mean_a", s.mean_a},
                   {"mean_b", s.mean_b},
                   {"t", std::isfinite(s.t) ? json(s.t) : json(s.t < 0 ? "-inf" : "inf")},
                   {"df", s.df},
                   {"p_value", s.p},
                   {"degenerate_exact_comparison", s.degenerate},
                   {"significant_at_0.05", s.significant}});
  }
  const ReferenceFigures ref;
  return json{{"rows", r.rows.size()},
              {"l_mse", r.l_mse},
              {"l_abs", r.l_abs},
              {"mean_mos", opt_json(r.mean_mos)},
              {"ser_backend", r.ser_backend},
              {"mos_backend", r.mos_backend},
              {"mos_version", r.mos_version},
              {"mos_error", r.mos_error ? json(*r.mos_error) : json(nullptr)},
              {"classwise", classes},
              {"significance", sig},
              {"notes", r.notes},
              {"reference_full_system",
               {{"l_mse", ref.l_mse},
                {"l_abs", ref.l_abs},
                {"mos", ref.mos},
                {"note", "large-corpus reference values; not comparable with toy-scale runs"}}}};
}

}  // namespace

void write_report(const EvalReport& report, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  std::ofstream rows(dir / "rows.jsonl", std::ios::trunc);
  if (!rows) throw IoError("cannot write report to " + dir.string());
  for (const auto& r : report.rows) rows << row_json(r).dump() << '\n';
  std::ofstream(dir / "summary.json", std::ios::trunc) << summary_json(report).dump(2) << '\n';
  std::ofstream csv(dir / "classwise.csv", std::ios::trunc);
  csv << "class,count,l_mse,l_abs,mean_mos\n";
  for (const auto& c : report.classes) {
    csv << c.arousal_class << ',' << c.count << ',' << c.l_mse << ',' << c.l_abs << ',';
    if (c.mean_mos) csv << *c.mean_mos;
    csv << '\n';
  }
  if (!csv) throw IoError("failed writing " + (dir / "classwise.csv").string());
}

std::vector<AblationEntry> ablation_run(const TrainConfig& cfg, const Manifest& manifest,
                                        const std::vector<double>& segment_sizes, const fs::path& out_dir,
                                        const EvalOptions& eval) {
  if (segment_sizes.empty()) throw ContractError("ablation_run: no segment sizes");
  fs::create_directories(out_dir);
  std::vector<AblationEntry> entries;
  for (double size : segment_sizes) {
    AblationEntry entry;
    entry.segment_seconds = size;
    char tag[32];
    std::snprintf(tag, sizeof tag, "seg_%.2fs", size);
    const fs::path dir = out_dir / tag;
    try {
      TrainConfig c = cfg;
      c.segment_seconds = size;
      TrainOptions opts;
      opts.out_dir = dir;
      const auto result = train(c, manifest, opts);
      entry.report = evaluate(manifest, result.bundle, eval);
      write_report(*entry.report, dir / "report");
    } catch (const Error& e) {
      entry.error = e.what();
    }
    entries.push_back(std::move(entry));
  }

  json summary = json::array();
  std::ofstream trend(out_dir / "ablation_trend.csv", std::ios::trunc);
  trend << "segment_seconds";
  for (int c = 1; c <= 7; ++c) trend << ",class_" << c << "_l_mse";
  trend << ",l_mse,l_abs\n";
  for (const auto& e : entries) {
    json item{{"segment_seconds", e.segment_seconds}};
    if (e.error) {
      item["error"] = *e.error;
    } else {
      item["report"] = summary_json(*e.report);
      trend << e.segment_seconds;
      std::map<int, double> by_class;
      for (const auto& c : e.report->classes) by_class[c.arousal_class] = c.l_mse;
      for (int c = 1; c <= 7; ++c) {
        trend << ',';
        if (by_class.count(c)) trend << by_class[c];
      }
      trend << ',' << e.report->l_mse << ',' << e.report->l_abs << '\n';
    }
    summary.push_back(item);
  }
  std::ofstream(out_dir / "ablation_summary.json", std::ios::trunc) << summary.dump(2) << '\n';
  return entries;
}

}  // namespace emoconv
