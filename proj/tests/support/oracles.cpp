#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>

namespace oracle {

using emoconv::MelConfig;
using emoconv::Shape;
using emoconv::Tensor;

std::vector<double> randn(std::size_t n, Rng& rng, double scale) {
  std::normal_distribution<double> d(0.0, scale);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

Tensor randn_tensor(const Shape& shape, Rng& rng, double scale) {
  std::size_t n = 1;
  for (auto s : shape) n *= s;
  return Tensor(shape, randn(n, rng, scale));
}

double rel_diff(double a, double b) {
  const double den = std::max({std::abs(a), std::abs(b), 1e-300});
  return std::abs(a - b) / den;
}

double adv_g(std::span<const double> fake_score, std::size_t batch, bool mean) {
  double s = 0.0;
  for (double v : fake_score) s += (1.0 - v) * (1.0 - v);
  return mean ? s / static_cast<double>(batch) : s;
}

double disc(std::span<const double> real_score, std::span<const double> fake_score, std::size_t batch, bool mean) {
  double s = 0.0;
  for (double v : real_score) s += (1.0 - v) * (1.0 - v);
  for (double v : fake_score) s += v * v;
  return mean ? s / static_cast<double>(batch) : s;
}

double feature_matching(const std::vector<std::pair<std::vector<double>, std::vector<double>>>& layers,
                        std::size_t batch, bool mean) {
  double total = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    for (const auto& [real, fake] : layers) {
      const std::size_t m = real.size() / batch;
      double s = 0.0;
      for (std::size_t i = 0; i < m; ++i) s += std::abs(real[b * m + i] - fake[b * m + i]);
      total += s / static_cast<double>(m);
    }
  }
  return mean ? total / static_cast<double>(batch) : total;
}

namespace {

double htk_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double htk_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

// Reflect-pad index without repeating the edge sample.
std::size_t reflect(long i, long n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * (n - 1) - i;
  }
  return static_cast<std::size_t>(i);
}

}  // namespace

std::vector<std::vector<double>> log_mel(std::span<const double> x, const MelConfig& cfg) {
  const long n = static_cast<long>(x.size());
  const int nfft = cfg.n_fft;
  const std::size_t frames = (x.size() + cfg.hop - 1) / cfg.hop;
  const long left = (cfg.n_fft - cfg.hop) / 2;
  const int bins = nfft / 2 + 1;

  // Triangles between n_mels + 2 mel-spaced edges.
  std::vector<double> edge(cfg.n_mels + 2);
  const double lo = htk_mel(cfg.f_min), hi = htk_mel(cfg.f_max);
  for (int i = 0; i < cfg.n_mels + 2; ++i) edge[i] = htk_hz(lo + (hi - lo) * i / (cfg.n_mels + 1));
  auto weight = [&](int m, int k) {
    const double f = static_cast<double>(k) * cfg.sample_rate / nfft;
    if (f <= edge[m] || f >= edge[m + 2]) return 0.0;
    return f <= edge[m + 1] ? (f - edge[m]) / (edge[m + 1] - edge[m]) : (edge[m + 2] - f) / (edge[m + 2] - edge[m + 1]);
  };

  std::vector<std::vector<double>> out(cfg.n_mels, std::vector<double>(frames));
  std::vector<double> mag(bins);
  for (std::size_t f = 0; f < frames; ++f) {
    for (int k = 0; k < bins; ++k) {
      std::complex<double> acc = 0.0;
      for (int t = 0; t < nfft; ++t) {
        const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * t / nfft);
        const double s = x[reflect(static_cast<long>(f) * cfg.hop + t - left, n)];
        acc += w * s * std::polar(1.0, -2.0 * std::numbers::pi * k * t / nfft);
      }
      mag[k] = std::abs(acc);
    }
    for (int m = 0; m < cfg.n_mels; ++m) {
      double e = 0.0;
      for (int k = 0; k < bins; ++k) e += weight(m, k) * mag[k];
      out[m][f] = std::log(std::max(e, cfg.log_floor));
    }
  }
  return out;
}

double recon(std::span<const double> real, std::span<const double> fake, std::size_t batch, const MelConfig& cfg,
             bool mean) {
  const std::size_t len = real.size() / batch;
  double total = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    const auto a = log_mel(real.subspan(b * len, len), cfg);
    const auto c = log_mel(fake.subspan(b * len, len), cfg);
    for (std::size_t m = 0; m < a.size(); ++m)
      for (std::size_t f = 0; f < a[m].size(); ++f) total += std::abs(a[m][f] - c[m][f]);
  }
  return mean ? total / static_cast<double>(batch) : total;
}

double ccc(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i] / n, my += y[i] / n;
  double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx) / n;
    syy += (y[i] - my) * (y[i] - my) / n;
    sxy += (x[i] - mx) * (y[i] - my) / n;
  }
  return 2.0 * sxy / (sxx + syy + (mx - my) * (mx - my));
}

double pearson(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i], sy += y[i];
    sxx += x[i] * x[i], syy += y[i] * y[i], sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
}

int nearest(std::span<const double> frame, const std::vector<std::vector<double>>& centroids) {
  int best = -1;
  double best_d = 0.0;
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    double d = 0.0;
    for (std::size_t i = 0; i < frame.size(); ++i) d += (frame[i] - centroids[c][i]) * (frame[i] - centroids[c][i]);
    if (best < 0 || d < best_d) best = static_cast<int>(c), best_d = d;
  }
  return best;
}

GradCheck grad_check(emoconv::ad::Var param, const std::function<emoconv::ad::Var()>& loss,
                     std::span<const std::size_t> coords, double eps, double rtol, double atol) {
  param.zero_grad();
  loss().backward();
  const Tensor analytic = param.grad();
  param.zero_grad();
  GradCheck r;
  Tensor& v = param.mutable_value();
  for (std::size_t i : coords) {
    const double orig = v[i];
    double fp, fm;
    {
      emoconv::ad::NoGradGuard g;
      v[i] = orig + eps;
      fp = loss().item();
      v[i] = orig - eps;
      fm = loss().item();
      v[i] = orig;
    }
    const double fd = (fp - fm) / (2.0 * eps);
    const double an = analytic[i];
    const double ratio = std::abs(fd - an) / (rtol * std::max(std::abs(fd), std::abs(an)) + atol);
    ++r.checked;
    if (ratio > r.worst_ratio) {
      r.worst_ratio = ratio;
      std::ostringstream os;
      os << "coord " << i << ": fd " << fd << " analytic " << an;
      r.detail = os.str();
    }
  }
  return r;
}

std::vector<std::size_t> spread_coords(std::size_t n, std::size_t count, Rng& rng) {
  std::vector<std::size_t> out;
  if (n <= count) {
    for (std::size_t i = 0; i < n; ++i) out.push_back(i);
    return out;
  }
  std::uniform_int_distribution<std::size_t> d(0, n - 1);
  out.push_back(0);
  out.push_back(n - 1);
  while (out.size() < count) out.push_back(d(rng));
  return out;
}

double welch_p_less(std::span<const double> a, std::span<const double> b) {
  auto stats = [](std::span<const double> v) {
    double m = 0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return std::pair{m, s / static_cast<double>(v.size() - 1)};
  };
  const auto [ma, va] = stats(a);
  const auto [mb, vb] = stats(b);
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double sa = va / na, sb = vb / nb;
  const double t = (ma - mb) / std::sqrt(sa + sb);
  const double df = (sa + sb) * (sa + sb) / (sa * sa / (na - 1) + sb * sb / (nb - 1));
  const double c = std::exp(std::lgamma((df + 1) / 2) - std::lgamma(df / 2)) / std::sqrt(df * std::numbers::pi);
  auto pdf = [&](double x) { return c * std::pow(1.0 + x * x / df, -(df + 1) / 2); };
  // Simpson's rule on [0, |t|].
  const int steps = 20000;
  const double h = std::abs(t) / steps;
  double s = pdf(0) + pdf(std::abs(t));
  for (int i = 1; i < steps; ++i) s += (i % 2 ? 4.0 : 2.0) * pdf(i * h);
  const double half = s * h / 3.0;
  return t < 0 ? 0.5 - half : 0.5 + half;
}

}  // namespace oracle
